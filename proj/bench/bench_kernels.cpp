// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP/im2col convolution kernels.
// Arguments: {channels, spatial size}.

#include <benchmark/benchmark.h>

#include "rucgan/kernels.hpp"
#include "rucgan/rng.hpp"

using namespace rucgan;

namespace {

struct Problem {
    Tensor x, w, b, out;
    explicit Problem(const benchmark::State& state) {
        const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
        Rng rng(1);
        x = uniform_tensor({1, c, s, s}, rng, -1, 1);
        w = uniform_tensor({c, c, 3, 3}, rng, -0.1, 0.1);
        b = uniform_tensor({c}, rng, -0.1, 0.1);
        out = Tensor(kernels::conv2d_output_shape(x.shape(), w.shape(), {1, 1}));
    }
};

void set_flops(benchmark::State& state) {
    const double c = static_cast<double>(state.range(0)), s = static_cast<double>(state.range(1));
    state.counters["GFLOP/s"] =
        benchmark::Counter(2.0 * c * c * 9 * s * s * static_cast<double>(state.iterations()) * 1e-9,
                           benchmark::Counter::kIsRate);
}

void BM_ConvForwardSerial(benchmark::State& state) {
    Problem p(state);
    for (auto _ : state) {
        kernels::serial::conv2d_forward(p.x, p.w, &p.b, {1, 1}, p.out);
        benchmark::DoNotOptimize(p.out.ptr());
    }
    set_flops(state);
}

void BM_ConvForwardParallel(benchmark::State& state) {
    Problem p(state);
    for (auto _ : state) {
        kernels::parallel::conv2d_forward(p.x, p.w, &p.b, {1, 1}, p.out);
        benchmark::DoNotOptimize(p.out.ptr());
    }
    set_flops(state);
}

void BM_ConvBackwardWeightSerial(benchmark::State& state) {
    Problem p(state);
    Tensor dw(p.w.shape()), db(p.b.shape());
    for (auto _ : state) {
        kernels::serial::conv2d_backward_weight(p.x, p.out, {1, 1}, dw, &db);
        benchmark::DoNotOptimize(dw.ptr());
    }
    set_flops(state);
}

void BM_ConvBackwardWeightParallel(benchmark::State& state) {
    Problem p(state);
    Tensor dw(p.w.shape()), db(p.b.shape());
    for (auto _ : state) {
        kernels::parallel::conv2d_backward_weight(p.x, p.out, {1, 1}, dw, &db);
        benchmark::DoNotOptimize(dw.ptr());
    }
    set_flops(state);
}

void BM_ConvBackwardInputSerial(benchmark::State& state) {
    Problem p(state);
    Tensor dx(p.x.shape());
    for (auto _ : state) {
        kernels::serial::conv2d_backward_input(p.out, p.w, {1, 1}, dx);
        benchmark::DoNotOptimize(dx.ptr());
    }
    set_flops(state);
}

void BM_ConvBackwardInputParallel(benchmark::State& state) {
    Problem p(state);
    Tensor dx(p.x.shape());
    for (auto _ : state) {
        kernels::parallel::conv2d_backward_input(p.out, p.w, {1, 1}, dx);
        benchmark::DoNotOptimize(dx.ptr());
    }
    set_flops(state);
}

void shapes(benchmark::internal::Benchmark* b) {
    b->Args({16, 32})->Args({32, 32})->Args({64, 16})->Args({128, 8})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ConvForwardSerial)->Apply(shapes);
BENCHMARK(BM_ConvForwardParallel)->Apply(shapes);
BENCHMARK(BM_ConvBackwardWeightSerial)->Apply(shapes);
BENCHMARK(BM_ConvBackwardWeightParallel)->Apply(shapes);
BENCHMARK(BM_ConvBackwardInputSerial)->Apply(shapes);
BENCHMARK(BM_ConvBackwardInputParallel)->Apply(shapes);

BENCHMARK_MAIN();
