// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// HTTP API for the studio and for scripted clients.
//
//   POST /api/synthesize       {mask, palette, seed?, size?} -> {image, latency_ms, seed}
//   POST /api/palette/extract  {image, mask}                 -> {palette, present}
//   POST /api/segment          {image}                       -> {mask}
//   GET  /api/colorbank | /api/labels | /api/health
//
// Images and masks travel as base64 PNG; palettes as [r,g,b] integers in
// [0,255]. Errors are JSON objects {"error": ..., "field"?: ...}.
//
// Request handling is independent of the socket layer (StudioService), so it
// can be exercised directly; HttpServer binds it to cpp-httplib.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "rucgan/dataio.hpp"
#include "rucgan/metrics.hpp"
#include "rucgan/models.hpp"

namespace rucgan {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws FormatError on characters outside the standard alphabet.
Bytes base64_decode(std::string_view text);

/// Runs submitted jobs one at a time on a dedicated thread.
class InferenceQueue {
public:
    InferenceQueue();
    ~InferenceQueue();
    InferenceQueue(const InferenceQueue&) = delete;
    InferenceQueue& operator=(const InferenceQueue&) = delete;

    /// The job counts as completed before its future becomes ready.
    template <class F>
    auto submit(F&& fn) -> std::future<decltype(fn())> {
        using R = decltype(fn());
        auto promise = std::make_shared<std::promise<R>>();
        auto fut = promise->get_future();
        push([this, promise, fn = std::forward<F>(fn)]() mutable {
            try {
                if constexpr (std::is_void_v<R>) {
                    fn();
                    mark_completed();
                    promise->set_value();
                } else {
                    R result = fn();
                    mark_completed();
                    promise->set_value(std::move(result));
                }
            } catch (...) {
                mark_completed();
                promise->set_exception(std::current_exception());
            }
        });
        return fut;
    }

    std::size_t jobs_completed() const;

private:
    void push(std::function<void()> job);
    void mark_completed();
    void loop();

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> jobs_;
    bool stop_ = false;
    std::size_t completed_ = 0;
    std::thread worker_;
};

struct ServiceOptions {
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> label_table;
    int num_labels = 0;  // used when neither a checkpoint nor a label table is given
    int image_size = 0;
    std::shared_ptr<const Segmenter> segmenter;
    std::uint64_t default_seed = kDefaultSeed;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

class StudioService {
public:
    explicit StudioService(ServiceOptions options);
    /// Uses an in-memory generator (tests, embedding).
    StudioService(ServiceOptions options, std::shared_ptr<const Generator> generator, std::string checkpoint_id);

    ApiResponse synthesize(const nlohmann::json& request);
    ApiResponse extract_palette(const nlohmann::json& request) const;
    ApiResponse segment(const nlohmann::json& request) const;
    ApiResponse colorbank() const;
    ApiResponse labels() const;
    ApiResponse health() const;

    /// Routes a raw request body; malformed JSON becomes 400.
    ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

    int num_labels() const { return num_labels_; }
    int image_size() const { return image_size_; }
    bool has_model() const { return generator_ != nullptr; }
    const InferenceQueue& queue() const { return queue_; }

private:
    void init_tables();

    ServiceOptions options_;
    std::shared_ptr<const Generator> generator_;
    std::string checkpoint_id_;
    int num_labels_ = 0;
    int image_size_ = 0;
    std::vector<LabelInfo> labels_;
    ColorBank bank_;
    InferenceQueue queue_;
};

/// Blocking HTTP front end with CORS enabled for all origins.
class HttpServer {
public:
    explicit HttpServer(StudioService& service);
    ~HttpServer();

    /// Binds and serves until stop(). Returns false when binding fails.
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port; returns it (or -1).
    int bind_any(const std::string& host);
    /// Serves on a port previously obtained from bind_any.
    bool serve_bound();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace rucgan
