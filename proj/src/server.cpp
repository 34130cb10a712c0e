// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/server.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <sstream>

#include <httplib.h>

#include "rucgan/error.hpp"
#include "rucgan/trainer.hpp"

namespace rucgan {

// ---------------------------------------------------------------------------
// base64
// ---------------------------------------------------------------------------

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (const std::size_t rest = bytes.size() - i; rest > 0) {
        std::uint32_t v = bytes[i] << 16;
        if (rest == 2) {
            v |= bytes[i + 1] << 8;
        }
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

Bytes base64_decode(std::string_view text) {
    // Accept data URLs as sent by browsers.
    if (text.rfind("data:", 0) == 0) {
        const auto comma = text.find(',');
        if (comma == std::string_view::npos) {
            throw FormatError("malformed data URL");
        }
        text.remove_prefix(comma + 1);
    }
    std::array<int, 256> lut;
    lut.fill(-1);
    for (int k = 0; k < 64; ++k) {
        lut[static_cast<unsigned char>(kAlphabet[k])] = k;
    }
    Bytes out;
    std::uint32_t acc = 0;
    int bits = 0;
    std::size_t pad = 0;
    for (char ch : text) {
        if (ch == '=') {
            ++pad;
            continue;
        }
        if (ch == '\n' || ch == '\r' || ch == ' ') {
            continue;
        }
        const int v = lut[static_cast<unsigned char>(ch)];
        if (v < 0 || pad > 0) {
            throw FormatError("invalid base64 input");
        }
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    if (pad > 2) {
        throw FormatError("invalid base64 padding");
    }
    return out;
}

// ---------------------------------------------------------------------------
// queue
// ---------------------------------------------------------------------------

InferenceQueue::InferenceQueue() : worker_([this] { loop(); }) {}

InferenceQueue::~InferenceQueue() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
}

void InferenceQueue::push(std::function<void()> job) {
    {
        std::lock_guard lock(mu_);
        jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
}

std::size_t InferenceQueue::jobs_completed() const {
    std::lock_guard lock(mu_);
    return completed_;
}

void InferenceQueue::mark_completed() {
    std::lock_guard lock(mu_);
    ++completed_;
}

void InferenceQueue::loop() {
    for (;;) {
        std::function<void()> job;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
            if (jobs_.empty()) {
                return;
            }
            job = std::move(jobs_.front());
            jobs_.pop_front();
        }
        job();
    }
}

// ---------------------------------------------------------------------------
// service
// ---------------------------------------------------------------------------

namespace {

ApiResponse error(int status, const std::string& message, const std::string& field = {}) {
    nlohmann::json body = {{"error", message}};
    if (!field.empty()) {
        body["field"] = field;
    }
    return {status, body};
}

// Thrown inside handlers to produce a specific status.
struct ApiError {
    int status;
    std::string message;
    std::string field;
};

const nlohmann::json& require_field(const nlohmann::json& req, const char* name) {
    if (!req.is_object() || !req.contains(name)) {
        throw ApiError{400, std::string("missing field '") + name + "'", name};
    }
    return req.at(name);
}

Bytes decode_field(const nlohmann::json& req, const char* name) {
    const auto& v = require_field(req, name);
    if (!v.is_string()) {
        throw ApiError{400, std::string("field '") + name + "' must be a base64 string", name};
    }
    try {
        return base64_decode(v.get<std::string>());
    } catch (const FormatError& e) {
        throw ApiError{400, std::string("field '") + name + "': " + e.what(), name};
    }
}

SegmentationMask decode_mask_field(const nlohmann::json& req, int s) {
    const Bytes png = decode_field(req, "mask");
    try {
        return decode_mask_png(png, s);
    } catch (const LabelRangeError& e) {
        throw ApiError{422, e.what(), "mask"};
    } catch (const Error& e) {
        throw ApiError{400, std::string("mask: ") + e.what(), "mask"};
    }
}

Tensor decode_image_field(const nlohmann::json& req) {
    const Bytes png = decode_field(req, "image");
    try {
        return decode_image_png(png);
    } catch (const Error& e) {
        throw ApiError{400, std::string("image: ") + e.what(), "image"};
    }
}

PaletteVector parse_wire_palette(const nlohmann::json& req, int s) {
    const auto& p = require_field(req, "palette");
    if (!p.is_array()) {
        throw ApiError{400, "palette must be an array of [r,g,b] triples", "palette"};
    }
    if (static_cast<int>(p.size()) != s) {
        throw ApiError{400,
                       "palette has " + std::to_string(p.size()) + " entries, expected " + std::to_string(s),
                       "palette"};
    }
    PaletteVector palette(s);
    for (int l = 0; l < s; ++l) {
        const auto& e = p[static_cast<std::size_t>(l)];
        if (!e.is_array() || e.size() != 3) {
            throw ApiError{400, "palette[" + std::to_string(l) + "] must be [r,g,b]", "palette"};
        }
        Rgb8 rgb{};
        for (int c = 0; c < 3; ++c) {
            const auto& v = e[static_cast<std::size_t>(c)];
            if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > 255) {
                throw ApiError{400, "palette[" + std::to_string(l) + "] values must be integers in [0,255]",
                               "palette"};
            }
            rgb[c] = v.get<int>();
        }
        palette.colors[static_cast<std::size_t>(l)] = bank_to_unit(rgb);
        palette.present[static_cast<std::size_t>(l)] = true;
    }
    return palette;
}

nlohmann::json wire_palette(const PaletteVector& p) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : p.colors) {
        const Rgb8 v = unit_to_bank(c);
        out.push_back({v[0], v[1], v[2]});
    }
    return out;
}

template <class F>
ApiResponse guarded(F&& fn) {
    try {
        return fn();
    } catch (const ApiError& e) {
        return error(e.status, e.message, e.field);
    } catch (const DimensionError& e) {
        return error(400, e.what());
    } catch (const LabelRangeError& e) {
        return error(422, e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

StudioService::StudioService(ServiceOptions options) : options_(std::move(options)) {
    if (options_.checkpoint) {
        auto g = std::make_shared<Generator>(load_generator(*options_.checkpoint));
        checkpoint_id_ = options_.checkpoint->filename().string() + "@" + hex64(hash_parameters(g->parameters()));
        generator_ = std::move(g);
    }
    init_tables();
}

StudioService::StudioService(ServiceOptions options, std::shared_ptr<const Generator> generator,
                             std::string checkpoint_id)
    : options_(std::move(options)), generator_(std::move(generator)), checkpoint_id_(std::move(checkpoint_id)) {
    init_tables();
}

void StudioService::init_tables() {
    if (generator_) {
        num_labels_ = generator_->config().num_labels;
        image_size_ = generator_->config().height;
    } else {
        image_size_ = options_.image_size;
    }
    if (options_.label_table) {
        labels_ = load_label_table(*options_.label_table);
        if (num_labels_ == 0) {
            num_labels_ = static_cast<int>(labels_.size());
        } else if (static_cast<int>(labels_.size()) != num_labels_) {
            throw ConfigurationError("label table has " + std::to_string(labels_.size()) +
                                     " entries but the model uses " + std::to_string(num_labels_) + " labels");
        }
    } else {
        if (num_labels_ == 0) {
            num_labels_ = options_.num_labels;
        }
        if (num_labels_ < 1) {
            throw ConfigurationError("server needs a checkpoint, a label table or num_labels");
        }
        labels_ = default_label_table(num_labels_);
    }
    bank_ = default_color_bank();
}

ApiResponse StudioService::synthesize(const nlohmann::json& req) {
    return guarded([&]() -> ApiResponse {
        if (!generator_) {
            return error(409, "no model loaded; start the server with a checkpoint");
        }
        const auto t0 = std::chrono::steady_clock::now();
        SegmentationMask mask = decode_mask_field(req, num_labels_);
        PaletteVector palette = parse_wire_palette(req, num_labels_);
        std::uint64_t seed = options_.default_seed;
        if (req.contains("seed") && !req.at("seed").is_null()) {
            if (!req.at("seed").is_number_integer() || req.at("seed").get<long long>() < 0) {
                throw ApiError{400, "seed must be a non-negative integer", "seed"};
            }
            seed = req.at("seed").get<std::uint64_t>();
        }
        int out_size = image_size_;
        if (req.contains("size") && !req.at("size").is_null()) {
            const auto& s = req.at("size");
            if (!s.is_number_integer() || s.get<int>() < 8 || s.get<int>() > 2048) {
                throw ApiError{400, "size must be an integer in [8, 2048]", "size"};
            }
            out_size = s.get<int>();
        }
        const GeneratorConfig& gc = generator_->config();
        if (mask.height() != gc.height || mask.width() != gc.width) {
            mask = resize_nearest(mask, gc.height, gc.width);
        }
        for (int l = 0; l < num_labels_; ++l) {
            palette.present[static_cast<std::size_t>(l)] = false;
        }
        for (int l : mask.present_labels()) {
            palette.present[static_cast<std::size_t>(l)] = true;
        }
        auto gen = generator_;
        Tensor image = queue_.submit([gen, mask, palette, seed] { return gen->synthesize(mask, palette, seed); }).get();
        if (out_size != gc.height || out_size != gc.width) {
            image = resize_bilinear(image, out_size, out_size);
        }
        const Bytes png = encode_image_png(image);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return {200, {{"image", base64_encode(png)}, {"latency_ms", ms}, {"seed", seed}}};
    });
}

ApiResponse StudioService::extract_palette(const nlohmann::json& req) const {
    return guarded([&]() -> ApiResponse {
        const Tensor image = decode_image_field(req);
        const SegmentationMask mask = decode_mask_field(req, num_labels_);
        if (image.dim(1) != mask.height() || image.dim(2) != mask.width()) {
            throw ApiError{400,
                           "image is " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(1)) +
                               " but mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()),
                           "mask"};
        }
        const PaletteVector p = rucgan::extract_palette(image, mask);
        return {200, {{"palette", wire_palette(p)}, {"present", p.present}}};
    });
}

ApiResponse StudioService::segment(const nlohmann::json& req) const {
    return guarded([&]() -> ApiResponse {
        if (!options_.segmenter) {
            return error(501, "no segmentation plugin configured; draw or upload a mask instead");
        }
        const Tensor image = decode_image_field(req);
        SegmentationMask mask;
        try {
            mask = options_.segmenter->segment(image, num_labels_);
        } catch (const std::exception& e) {
            return error(502, std::string("segmentation plugin failed: ") + e.what());
        }
        if (mask.num_labels() > num_labels_) {
            return error(502, "segmentation plugin produced labels for " + std::to_string(mask.num_labels()) +
                                  " classes, server uses " + std::to_string(num_labels_));
        }
        for (int l : mask.present_labels()) {
            if (l >= num_labels_) {
                return error(502, "segmentation plugin produced label " + std::to_string(l) + " >= " +
                                      std::to_string(num_labels_));
            }
        }
        return {200, {{"mask", base64_encode(encode_mask_png(mask))}}};
    });
}

ApiResponse StudioService::colorbank() const {
    return {200, color_bank_to_json(bank_)};
}

ApiResponse StudioService::labels() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& l : labels_) {
        out.push_back({{"id", l.id}, {"name", l.name}, {"color", l.color}});
    }
    return {200, out};
}

ApiResponse StudioService::health() const {
    return {200,
            {{"status", generator_ ? "ok" : "no_model"},
             {"checkpoint_id", generator_ ? nlohmann::json(checkpoint_id_) : nlohmann::json(nullptr)},
             {"num_labels", num_labels_},
             {"image_size", image_size_}}};
}

ApiResponse StudioService::handle(std::string_view method, std::string_view path, std::string_view body) {
    if (method == "GET") {
        if (path == "/api/colorbank") {
            return colorbank();
        }
        if (path == "/api/labels") {
            return labels();
        }
        if (path == "/api/health") {
            return health();
        }
    } else if (method == "POST") {
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            return error(400, std::string("request body is not valid JSON: ") + e.what());
        }
        if (!req.is_object()) {
            return error(400, "request body must be a JSON object");
        }
        if (path == "/api/synthesize") {
            return synthesize(req);
        }
        if (path == "/api/palette/extract") {
            return extract_palette(req);
        }
        if (path == "/api/segment") {
            return segment(req);
        }
    }
    return error(404, "no route for " + std::string(method) + " " + std::string(path));
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

struct HttpServer::Impl {
    StudioService& service;
    httplib::Server http;

    explicit Impl(StudioService& s) : service(s) {
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
        http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        const auto route = [this](const httplib::Request& req, httplib::Response& res) {
            const ApiResponse r = service.handle(req.method, req.path, req.body);
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
            std::fprintf(stderr, "%s %s -> %d\n", req.method.c_str(), req.path.c_str(), r.status);
        };
        http.Get(R"(/api/.*)", route);
        http.Post(R"(/api/.*)", route);
        http.set_payload_max_length(64u << 20);
    }
};

HttpServer::HttpServer(StudioService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) {
    return impl_->http.listen(host, port);
}

int HttpServer::bind_any(const std::string& host) {
    return impl_->http.bind_to_any_port(host);
}

bool HttpServer::serve_bound() {
    return impl_->http.listen_after_bind();
}

void HttpServer::stop() {
    impl_->http.stop();
}

}  // namespace rucgan
