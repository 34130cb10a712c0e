// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rucgan/error.hpp"

namespace rucgan::ag {

namespace {

thread_local bool g_grad_enabled = true;

inline std::size_t idx4(const Shape& s, int n, int c, int y, int x) {
    return ((static_cast<std::size_t>(n) * s[1] + c) * s[2] + y) * s[3] + x;
}

void require_rank4(const Tensor& t, const char* op) {
    if (t.rank() != 4) {
        throw DimensionError(std::string(op) + " expects a 4-D tensor, got " + shape_str(t.shape()));
    }
}

}  // namespace

Tensor& Node::grad_buffer() {
    if (grad.empty()) {
        grad = Tensor(value.shape(), 0.0);
    }
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
    Var out;
    out.node_ = std::make_shared<Node>();
    out.node_->value = std::move(value);
    const bool needs = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                                     [](const Var& v) { return v.requires_grad(); });
    if (needs) {
        out.node_->requires_grad = true;
        out.node_->inputs.reserve(inputs.size());
        for (auto& v : inputs) {
            out.node_->inputs.push_back(v.node());
        }
        out.node_->backward_fn = std::move(backward);
    }
    return out;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& root) {
    if (!root.defined() || root.value().numel() != 1) {
        throw DimensionError("backward() requires a scalar root");
    }
    if (!root.requires_grad()) {
        return;
    }
    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && !child->inputs.empty() && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) {
            node->backward_fn(*node);
        }
    }
    // Free intermediate gradients; leaves keep theirs.
    for (Node* node : order) {
        if (node != root.node().get()) {
            node->grad = Tensor();
        }
    }
}

Var detach(const Var& v) { return Var(v.value(), false); }

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const std::size_t n = out.numel();
    const double* bp = b.value().ptr();
    double* op = out.ptr();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        op[i] += bp[i];
    }
    return make_op(std::move(out), {a, b}, [](Node& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) {
                continue;
            }
            Tensor& g = in->grad_buffer();
            const std::size_t n = g.numel();
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < n; ++i) {
                g[i] += self.grad[i];
            }
        }
    });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const std::size_t n = out.numel();
    const double* bp = b.value().ptr();
    double* op = out.ptr();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        op[i] *= bp[i];
    }
    return make_op(std::move(out), {a, b}, [](Node& self) {
        Node& a = *self.inputs[0];
        Node& b = *self.inputs[1];
        const std::size_t n = self.grad.numel();
        if (a.requires_grad) {
            Tensor& g = a.grad_buffer();
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < n; ++i) {
                g[i] += self.grad[i] * b.value[i];
            }
        }
        if (b.requires_grad) {
            Tensor& g = b.grad_buffer();
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < n; ++i) {
                g[i] += self.grad[i] * a.value[i];
            }
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data()) {
        v *= s;
    }
    return make_op(std::move(out), {a}, [s](Node& self) {
        Tensor& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) {
            g[i] += s * self.grad[i];
        }
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data()) {
        v += s;
    }
    return make_op(std::move(out), {a}, [](Node& self) {
        Tensor& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.numel(); ++i) {
            g[i] += self.grad[i];
        }
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out = a.value();
    const std::size_t n = out.numel();
    double* op = out.ptr();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        if (op[i] < 0.0) {
            op[i] *= slope;
        }
    }
    return make_op(std::move(out), {a}, [slope](Node& self) {
        Node& in = *self.inputs[0];
        Tensor& g = in.grad_buffer();
        const std::size_t n = g.numel();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            g[i] += in.value[i] < 0.0 ? slope * self.grad[i] : self.grad[i];
        }
    });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var tanh(const Var& a) {
    Tensor out = a.value();
    const std::size_t n = out.numel();
    double* op = out.ptr();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        op[i] = std::tanh(op[i]);
    }
    return make_op(std::move(out), {a}, [](Node& self) {
        Tensor& g = self.inputs[0]->grad_buffer();
        const std::size_t n = g.numel();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            const double y = self.value[i];
            g[i] += (1.0 - y * y) * self.grad[i];
        }
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var mean(const Var& a) {
    const double n = static_cast<double>(a.value().numel());
    return make_op(Tensor::scalar(a.value().sum() / n), {a}, [n](Node& self) {
        Tensor& g = self.inputs[0]->grad_buffer();
        const double gv = self.grad[0] / n;
        for (double& v : g.data()) {
            v += gv;
        }
    });
}

Var mean_abs_diff(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mean_abs_diff");
    const std::size_t n = a.value().numel();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += std::abs(a.value()[i] - b.value()[i]);
    }
    return make_op(Tensor::scalar(s / static_cast<double>(n)), {a, b}, [n](Node& self) {
        Node& a = *self.inputs[0];
        Node& b = *self.inputs[1];
        const double gv = self.grad[0] / static_cast<double>(n);
        auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
        if (a.requires_grad) {
            Tensor& g = a.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                g[i] += gv * sign(a.value[i] - b.value[i]);
            }
        }
        if (b.requires_grad) {
            Tensor& g = b.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                g[i] -= gv * sign(a.value[i] - b.value[i]);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// spatial
// ---------------------------------------------------------------------------

Var conv2d(const Var& x, const Var& w, const std::optional<Var>& bias, kernels::ConvGeometry g) {
    Tensor out;
    kernels::parallel::conv2d_forward(x.value(), w.value(), bias ? &bias->value() : nullptr, g, out);
    std::vector<Var> inputs{x, w};
    if (bias) {
        inputs.push_back(*bias);
    }
    return make_op(std::move(out), std::move(inputs), [g](Node& self) {
        Node& x = *self.inputs[0];
        Node& w = *self.inputs[1];
        Node* b = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
        if (x.requires_grad) {
            kernels::parallel::conv2d_backward_input(self.grad, w.value, g, x.grad_buffer());
        }
        const bool need_b = b && b->requires_grad;
        if (w.requires_grad) {
            kernels::parallel::conv2d_backward_weight(x.value, self.grad, g, w.grad_buffer(),
                                                      need_b ? &b->grad_buffer() : nullptr);
        } else if (need_b) {
            Tensor& gb = b->grad_buffer();
            const Shape& s = self.grad.shape();
            for (int n = 0; n < s[0]; ++n) {
                for (int c = 0; c < s[1]; ++c) {
                    for (int y = 0; y < s[2]; ++y) {
                        for (int xx = 0; xx < s[3]; ++xx) {
                            gb[static_cast<std::size_t>(c)] += self.grad.at(n, c, y, xx);
                        }
                    }
                }
            }
        }
    });
}

Var upsample_nearest2x(const Var& x) {
    require_rank4(x.value(), "upsample_nearest2x");
    const Shape& s = x.shape();
    Tensor out({s[0], s[1], s[2] * 2, s[3] * 2});
    const int planes = s[0] * s[1];
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const int n = p / s[1], c = p % s[1];
        for (int y = 0; y < 2 * s[2]; ++y) {
            for (int xx = 0; xx < 2 * s[3]; ++xx) {
                out.at(n, c, y, xx) = x.value().at(n, c, y / 2, xx / 2);
            }
        }
    }
    return make_op(std::move(out), {x}, [](Node& self) {
        Node& in = *self.inputs[0];
        Tensor& g = in.grad_buffer();
        const Shape& s = in.value.shape();
        const int planes = s[0] * s[1];
#pragma omp parallel for schedule(static)
        for (int p = 0; p < planes; ++p) {
            const int n = p / s[1], c = p % s[1];
            for (int y = 0; y < s[2]; ++y) {
                for (int xx = 0; xx < s[3]; ++xx) {
                    g.at(n, c, y, xx) += self.grad.at(n, c, 2 * y, 2 * xx) + self.grad.at(n, c, 2 * y, 2 * xx + 1) +
                                         self.grad.at(n, c, 2 * y + 1, 2 * xx) +
                                         self.grad.at(n, c, 2 * y + 1, 2 * xx + 1);
                }
            }
        }
    });
}

Var avg_pool2x(const Var& x) {
    require_rank4(x.value(), "avg_pool2x");
    const Shape& s = x.shape();
    if (s[2] < 2 || s[3] < 2) {
        throw DimensionError("avg_pool2x needs spatial size >= 2, got " + shape_str(s));
    }
    Tensor out({s[0], s[1], s[2] / 2, s[3] / 2});
    const Tensor& in = x.value();
    const int planes = s[0] * s[1];
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const int n = p / s[1], c = p % s[1];
        for (int y = 0; y < s[2] / 2; ++y) {
            for (int xx = 0; xx < s[3] / 2; ++xx) {
                out.at(n, c, y, xx) = 0.25 * (in.at(n, c, 2 * y, 2 * xx) + in.at(n, c, 2 * y, 2 * xx + 1) +
                                              in.at(n, c, 2 * y + 1, 2 * xx) + in.at(n, c, 2 * y + 1, 2 * xx + 1));
            }
        }
    }
    return make_op(std::move(out), {x}, [](Node& self) {
        Node& in = *self.inputs[0];
        Tensor& g = in.grad_buffer();
        const Shape& os = self.value.shape();
        const int planes = os[0] * os[1];
#pragma omp parallel for schedule(static)
        for (int p = 0; p < planes; ++p) {
            const int n = p / os[1], c = p % os[1];
            for (int y = 0; y < os[2]; ++y) {
                for (int xx = 0; xx < os[3]; ++xx) {
                    const double gv = 0.25 * self.grad.at(n, c, y, xx);
                    g.at(n, c, 2 * y, 2 * xx) += gv;
                    g.at(n, c, 2 * y, 2 * xx + 1) += gv;
                    g.at(n, c, 2 * y + 1, 2 * xx) += gv;
                    g.at(n, c, 2 * y + 1, 2 * xx + 1) += gv;
                }
            }
        }
    });
}

Var concat_channels(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw DimensionError("concat_channels: no inputs");
    }
    const Shape& s0 = parts[0].shape();
    int total = 0;
    for (const auto& p : parts) {
        require_rank4(p.value(), "concat_channels");
        const Shape& s = p.shape();
        if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
            throw DimensionError("concat_channels: " + shape_str(s) + " vs " + shape_str(s0));
        }
        total += s[1];
    }
    Tensor out({s0[0], total, s0[2], s0[3]});
    const std::size_t plane = static_cast<std::size_t>(s0[2]) * s0[3];
    for (int n = 0; n < s0[0]; ++n) {
        int offset = 0;
        for (const auto& p : parts) {
            const int c = p.shape()[1];
            const double* src = p.value().ptr() + static_cast<std::size_t>(n) * c * plane;
            std::copy(src, src + c * plane, out.ptr() + (static_cast<std::size_t>(n) * total + offset) * plane);
            offset += c;
        }
    }
    return make_op(std::move(out), parts, [total, plane](Node& self) {
        const int batch = self.value.dim(0);
        int offset = 0;
        for (auto& in : self.inputs) {
            const int c = in->value.dim(1);
            if (in->requires_grad) {
                Tensor& g = in->grad_buffer();
                for (int n = 0; n < batch; ++n) {
                    const double* src = self.grad.ptr() + (static_cast<std::size_t>(n) * total + offset) * plane;
                    double* dst = g.ptr() + static_cast<std::size_t>(n) * c * plane;
                    for (std::size_t i = 0; i < c * plane; ++i) {
                        dst[i] += src[i];
                    }
                }
            }
            offset += c;
        }
    });
}

Var concat_batch(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw DimensionError("concat_batch: no inputs");
    }
    Shape s = parts[0].shape();
    int total = 0;
    std::vector<double> values;
    for (const auto& p : parts) {
        if (p.shape().size() != s.size() || !std::equal(s.begin() + 1, s.end(), p.shape().begin() + 1)) {
            throw DimensionError("concat_batch: " + shape_str(p.shape()) + " vs " + shape_str(s));
        }
        total += p.shape()[0];
        values.insert(values.end(), p.value().data().begin(), p.value().data().end());
    }
    s[0] = total;
    return make_op(Tensor(s, std::move(values)), parts, [](Node& self) {
        std::size_t offset = 0;
        for (auto& in : self.inputs) {
            const std::size_t n = in->value.numel();
            if (in->requires_grad) {
                Tensor& g = in->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) {
                    g[i] += self.grad[offset + i];
                }
            }
            offset += n;
        }
    });
}

Var slice_batch(const Var& x, int begin, int end) {
    Shape s = x.shape();
    if (begin < 0 || end > s[0] || begin >= end) {
        throw DimensionError("slice_batch: bad range for " + shape_str(s));
    }
    const std::size_t per = x.value().numel() / static_cast<std::size_t>(s[0]);
    s[0] = end - begin;
    std::vector<double> values(x.value().data().begin() + static_cast<std::ptrdiff_t>(begin * per),
                               x.value().data().begin() + static_cast<std::ptrdiff_t>(end * per));
    const std::size_t offset = begin * per;
    return make_op(Tensor(s, std::move(values)), {x}, [offset](Node& self) {
        Tensor& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            g[offset + i] += self.grad[i];
        }
    });
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

namespace {

// Shared backward for standardization over groups:
//   dx = (g - mean(g) - xhat * mean(g * xhat)) / sigma   (sigma free)
//   dx = (g - mean(g)) / sigma                           (sigma clamped)
void standardize_backward(const double* g, const double* xhat, double* dx, std::size_t count, double sigma,
                          bool clamped) {
    double mg = 0.0, mgx = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        mg += g[i];
        mgx += g[i] * xhat[i];
    }
    mg /= static_cast<double>(count);
    mgx /= static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        dx[i] += clamped ? (g[i] - mg) / sigma : (g[i] - mg - xhat[i] * mgx) / sigma;
    }
}

}  // namespace

Var batch_standardize(const Var& h, double eps) {
    require_rank4(h.value(), "batch_standardize");
    const Shape s = h.shape();
    const int N = s[0], C = s[1];
    const std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
    const double count = static_cast<double>(N) * static_cast<double>(plane);
    auto sigma = std::make_shared<std::vector<double>>(C);
    auto clamped = std::make_shared<std::vector<char>>(C);
    Tensor out(s);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < N; ++n) {
            const double* p = h.value().ptr() + idx4(s, n, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                sum += p[i];
                sq += p[i] * p[i];
            }
        }
        const double mu = sum / count;
        const double var = std::max(0.0, sq / count - mu * mu);
        double sd = std::sqrt(var);
        (*clamped)[c] = sd < eps;
        sd = std::max(sd, eps);
        (*sigma)[c] = sd;
        for (int n = 0; n < N; ++n) {
            const double* p = h.value().ptr() + idx4(s, n, c, 0, 0);
            double* o = out.ptr() + idx4(s, n, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                o[i] = (p[i] - mu) / sd;
            }
        }
    }
    return make_op(std::move(out), {h}, [sigma, clamped, N, C, plane](Node& self) {
        const Shape& s = self.value.shape();
        Tensor& g = self.inputs[0]->grad_buffer();
        const std::size_t count = static_cast<std::size_t>(N) * plane;
#pragma omp parallel for schedule(static)
        for (int c = 0; c < C; ++c) {
            // Gather the channel's entries (strided across the batch) into contiguous buffers.
            std::vector<double> gc(count), xc(count), dc(count, 0.0);
            for (int n = 0; n < N; ++n) {
                const std::size_t base = idx4(s, n, c, 0, 0);
                std::copy(self.grad.ptr() + base, self.grad.ptr() + base + plane, gc.begin() + n * plane);
                std::copy(self.value.ptr() + base, self.value.ptr() + base + plane, xc.begin() + n * plane);
            }
            standardize_backward(gc.data(), xc.data(), dc.data(), count, (*sigma)[c], (*clamped)[c]);
            for (int n = 0; n < N; ++n) {
                double* dst = g.ptr() + idx4(s, n, c, 0, 0);
                for (std::size_t i = 0; i < plane; ++i) {
                    dst[i] += dc[n * plane + i];
                }
            }
        }
    });
}

Var instance_norm(const Var& x, double eps) {
    require_rank4(x.value(), "instance_norm");
    const Shape s = x.shape();
    const std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
    const int groups = s[0] * s[1];
    auto sigma = std::make_shared<std::vector<double>>(groups);
    Tensor out(s);
#pragma omp parallel for schedule(static)
    for (int gi = 0; gi < groups; ++gi) {
        const double* p = x.value().ptr() + gi * plane;
        double mu = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            mu += p[i];
        }
        mu /= static_cast<double>(plane);
        double var = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            var += (p[i] - mu) * (p[i] - mu);
        }
        var /= static_cast<double>(plane);
        const double sd = std::sqrt(var + eps);
        (*sigma)[gi] = sd;
        double* o = out.ptr() + gi * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            o[i] = (p[i] - mu) / sd;
        }
    }
    return make_op(std::move(out), {x}, [sigma, plane, groups](Node& self) {
        Tensor& g = self.inputs[0]->grad_buffer();
#pragma omp parallel for schedule(static)
        for (int gi = 0; gi < groups; ++gi) {
            standardize_backward(self.grad.ptr() + gi * plane, self.value.ptr() + gi * plane, g.ptr() + gi * plane,
                                 plane, (*sigma)[gi], false);
        }
    });
}

Var add_channel_noise(const Var& h, const Var& scale, const Tensor& noise) {
    require_rank4(h.value(), "add_channel_noise");
    const Shape& s = h.shape();
    if (noise.rank() != 4 || noise.dim(0) != s[0] || noise.dim(1) != 1 || noise.dim(2) != s[2] ||
        noise.dim(3) != s[3]) {
        throw DimensionError("noise must be N×1×H×W matching " + shape_str(s) + ", got " + shape_str(noise.shape()));
    }
    if (scale.value().numel() != static_cast<std::size_t>(s[1])) {
        throw DimensionError("noise scale length must equal channel count");
    }
    Tensor out = h.value();
    const std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
    for (int n = 0; n < s[0]; ++n) {
        const double* np = noise.ptr() + static_cast<std::size_t>(n) * plane;
        for (int c = 0; c < s[1]; ++c) {
            const double k = scale.value()[static_cast<std::size_t>(c)];
            double* o = out.ptr() + idx4(s, n, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                o[i] += k * np[i];
            }
        }
    }
    return make_op(std::move(out), {h, scale}, [noise, plane](Node& self) {
        Node& h = *self.inputs[0];
        Node& k = *self.inputs[1];
        const Shape& s = self.value.shape();
        if (h.requires_grad) {
            Tensor& g = h.grad_buffer();
            for (std::size_t i = 0; i < g.numel(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (k.requires_grad) {
            Tensor& g = k.grad_buffer();
            for (int n = 0; n < s[0]; ++n) {
                const double* np = noise.ptr() + static_cast<std::size_t>(n) * plane;
                for (int c = 0; c < s[1]; ++c) {
                    const double* gp = self.grad.ptr() + idx4(s, n, c, 0, 0);
                    double acc = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) {
                        acc += gp[i] * np[i];
                    }
                    g[static_cast<std::size_t>(c)] += acc;
                }
            }
        }
    });
}

Var spectral_divide(const Var& w, const Tensor& u, const Tensor& v) {
    const int rows = w.value().dim(0);
    const std::size_t cols = w.value().numel() / static_cast<std::size_t>(rows);
    if (u.numel() != static_cast<std::size_t>(rows) || v.numel() != cols) {
        throw DimensionError("spectral_divide: singular vector sizes do not match weight " + shape_str(w.shape()));
    }
    double sigma = 0.0;
    for (int i = 0; i < rows; ++i) {
        const double* wr = w.value().ptr() + static_cast<std::size_t>(i) * cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            acc += wr[j] * v[j];
        }
        sigma += u[static_cast<std::size_t>(i)] * acc;
    }
    if (!(sigma > 0.0)) {
        throw Error("spectral_divide: non-positive singular value estimate");
    }
    Tensor out = w.value();
    for (double& x : out.data()) {
        x /= sigma;
    }
    return make_op(std::move(out), {w}, [u, v, sigma, rows, cols](Node& self) {
        Node& w = *self.inputs[0];
        Tensor& g = w.grad_buffer();
        double inner = 0.0;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            inner += self.grad[i] * w.value[i];
        }
        const double coef = inner / (sigma * sigma);
        for (int i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * cols + j;
                g[k] += self.grad[k] / sigma - coef * u[static_cast<std::size_t>(i)] * v[j];
            }
        }
    });
}

}  // namespace rucgan::ag
