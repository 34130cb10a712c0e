// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/dataio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "rucgan/error.hpp"

namespace rucgan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// one-hot
// ---------------------------------------------------------------------------

Tensor one_hot(const SegmentationMask& mask, int num_labels) {
    if (num_labels < mask.num_labels()) {
        for (auto l : mask.labels()) {
            if (l >= num_labels) {
                throw LabelRangeError("one_hot: label " + std::to_string(l) + " >= " + std::to_string(num_labels));
            }
        }
    }
    Tensor planes({num_labels, mask.height(), mask.width()});
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            planes.at(mask.at(y, x), y, x) = 1.0;
        }
    }
    return planes;
}

Tensor one_hot_batch(std::span<const SegmentationMask> masks) {
    if (masks.empty()) {
        throw DimensionError("one_hot_batch: no masks");
    }
    const auto& m0 = masks[0];
    const int s = m0.num_labels();
    Tensor out({static_cast<int>(masks.size()), s, m0.height(), m0.width()});
    const std::size_t per = static_cast<std::size_t>(s) * m0.height() * m0.width();
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].height() != m0.height() || masks[i].width() != m0.width() || masks[i].num_labels() != s) {
            throw DimensionError("one_hot_batch: masks differ in size or label count");
        }
        const Tensor planes = one_hot(masks[i], s);
        std::copy(planes.data().begin(), planes.data().end(), out.ptr() + i * per);
    }
    return out;
}

SegmentationMask argmax_labels(const Tensor& planes) {
    if (planes.rank() != 3) {
        throw DimensionError("argmax_labels expects s×H×W");
    }
    const int s = planes.dim(0), h = planes.dim(1), w = planes.dim(2);
    std::vector<std::int32_t> labels(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = 0;
            for (int l = 1; l < s; ++l) {
                if (planes.at(l, y, x) > planes.at(best, y, x)) {
                    best = l;
                }
            }
            labels[static_cast<std::size_t>(y) * w + x] = best;
        }
    }
    return SegmentationMask(h, w, s, std::move(labels));
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

struct PngImage {
    png_image image{};
    PngImage() {
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

Bytes encode_png(const std::uint8_t* pixels, int width, int height, png_uint_32 format) {
    PngImage img;
    img.image.width = static_cast<png_uint_32>(width);
    img.image.height = static_cast<png_uint_32>(height);
    img.image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img.image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw FormatError(std::string("PNG encode failed: ") + img.image.message);
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&img.image, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw FormatError(std::string("PNG encode failed: ") + img.image.message);
    }
    out.resize(size);
    return out;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp((v + 1.0) * 127.5, 0.0, 255.0)));
}

}  // namespace

Bytes encode_image_png(const Tensor& image) {
    require_image(image, "encode_image_png");
    const int h = image.dim(1), w = image.dim(2);
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] = to_byte(image.at(c, y, x));
            }
        }
    }
    return encode_png(pixels.data(), w, h, PNG_FORMAT_RGB);
}

Tensor decode_image_png(std::span<const std::uint8_t> png) {
    PngImage img;
    if (!png_image_begin_read_from_memory(&img.image, png.data(), png.size())) {
        throw FormatError(std::string("PNG decode failed: ") + img.image.message);
    }
    img.image.format = PNG_FORMAT_RGB;
    const int w = static_cast<int>(img.image.width), h = static_cast<int>(img.image.height);
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img.image));
    if (!png_image_finish_read(&img.image, nullptr, pixels.data(), 0, nullptr)) {
        throw FormatError(std::string("PNG decode failed: ") + img.image.message);
    }
    Tensor image({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                image.at(c, y, x) = pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 127.5 - 1.0;
            }
        }
    }
    return image;
}

Bytes encode_mask_png(const SegmentationMask& mask) {
    if (mask.num_labels() > 256) {
        throw LabelRangeError("8-bit mask PNG supports at most 256 labels");
    }
    std::vector<std::uint8_t> pixels(mask.labels().begin(), mask.labels().end());
    return encode_png(pixels.data(), mask.width(), mask.height(), PNG_FORMAT_GRAY);
}

SegmentationMask decode_mask_png(std::span<const std::uint8_t> png, int num_labels) {
    PngImage img;
    if (!png_image_begin_read_from_memory(&img.image, png.data(), png.size())) {
        throw FormatError(std::string("mask PNG decode failed: ") + img.image.message);
    }
    if ((img.image.format & PNG_FORMAT_FLAG_COLOR) != 0 && (img.image.format & PNG_FORMAT_FLAG_COLORMAP) == 0) {
        throw FormatError("mask PNG must be single-channel label indices, got a color image");
    }
    img.image.format = PNG_FORMAT_GRAY;
    const int w = static_cast<int>(img.image.width), h = static_cast<int>(img.image.height);
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img.image));
    if (!png_image_finish_read(&img.image, nullptr, pixels.data(), 0, nullptr)) {
        throw FormatError(std::string("mask PNG decode failed: ") + img.image.message);
    }
    std::vector<std::int32_t> labels(pixels.begin(), pixels.end());
    for (auto l : labels) {
        if (l >= num_labels) {
            throw LabelRangeError("mask label " + std::to_string(l) + " >= num_labels " + std::to_string(num_labels));
        }
    }
    return SegmentationMask(h, w, num_labels, std::move(labels));
}

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot read " + path.string());
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_image_png(const fs::path& path) { return decode_image_png(read_file(path)); }
void write_image_png(const fs::path& path, const Tensor& image) { write_file(path, encode_image_png(image)); }
SegmentationMask read_mask_png(const fs::path& path, int num_labels) {
    return decode_mask_png(read_file(path), num_labels);
}
void write_mask_png(const fs::path& path, const SegmentationMask& mask) { write_file(path, encode_mask_png(mask)); }

// ---------------------------------------------------------------------------
// resizing
// ---------------------------------------------------------------------------

Tensor resize_bilinear(const Tensor& image, int height, int width) {
    require_image(image, "resize_bilinear");
    const int sh = image.dim(1), sw = image.dim(2);
    if (sh == height && sw == width) {
        return image;
    }
    Tensor out({3, height, width});
    const double ry = static_cast<double>(sh) / height;
    const double rx = static_cast<double>(sw) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * ry - 0.5, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, sh - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * rx - 0.5, 0.0, static_cast<double>(sw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, sw - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
                const double bot = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

SegmentationMask resize_nearest(const SegmentationMask& mask, int height, int width) {
    if (mask.height() == height && mask.width() == width) {
        return mask;
    }
    std::vector<std::int32_t> labels(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * mask.height() / height), mask.height() - 1);
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * mask.width() / width), mask.width() - 1);
            labels[static_cast<std::size_t>(y) * width + x] = mask.at(sy, sx);
        }
    }
    return SegmentationMask(height, width, mask.num_labels(), std::move(labels));
}

// ---------------------------------------------------------------------------
// manifests
// ---------------------------------------------------------------------------

DatasetManifest load_manifest(const fs::path& path, int num_labels, int image_size, std::string split) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open manifest " + path.string());
    }
    DatasetManifest manifest;
    manifest.num_labels = num_labels;
    manifest.image_size = image_size;
    manifest.split = std::move(split);
    const fs::path base = path.parent_path();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestRecord rec{base / j.at("image").get<std::string>(), base / j.at("mask").get<std::string>()};
            for (const auto& p : {rec.image, rec.mask}) {
                if (!fs::exists(p)) {
                    throw FormatError("manifest line " + std::to_string(lineno) + ": missing file " + p.string());
                }
            }
            manifest.records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (manifest.records.empty()) {
        throw FormatError("manifest " + path.string() + " has no records");
    }
    return manifest;
}

Sample load_sample(const ManifestRecord& record, int image_size, int num_labels) {
    Tensor image = read_image_png(record.image);
    SegmentationMask mask = read_mask_png(record.mask, num_labels);
    return Sample{resize_bilinear(image, image_size, image_size), resize_nearest(mask, image_size, image_size)};
}

std::vector<Sample> load_dataset(const DatasetManifest& manifest) {
    std::vector<Sample> samples;
    samples.reserve(manifest.records.size());
    for (const auto& r : manifest.records) {
        samples.push_back(load_sample(r, manifest.image_size, manifest.num_labels));
    }
    return samples;
}

// ---------------------------------------------------------------------------
// label table
// ---------------------------------------------------------------------------

std::vector<LabelInfo> load_label_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open label table " + path.string());
    }
    std::vector<LabelInfo> labels;
    try {
        nlohmann::json j;
        in >> j;
        for (const auto& e : j) {
            LabelInfo info{e.at("id").get<int>(), e.at("name").get<std::string>(), {}};
            const auto& c = e.at("color");
            for (std::size_t k = 0; k < 3; ++k) {
                info.color[k] = c.at(k).get<int>();
            }
            labels.push_back(std::move(info));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("label table " + path.string() + ": " + e.what());
    }
    return labels;
}

void save_label_table(const fs::path& path, const std::vector<LabelInfo>& labels) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& l : labels) {
        j.push_back({{"id", l.id}, {"name", l.name}, {"color", {l.color[0], l.color[1], l.color[2]}}});
    }
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write label table " + path.string());
    }
    out << j.dump(2) << '\n';
}

std::vector<LabelInfo> default_label_table(int num_labels) {
    static const char* kNames[] = {"sky", "ground", "disc", "band"};
    const ColorBank bank = default_color_bank();
    std::vector<LabelInfo> labels;
    for (int l = 0; l < num_labels; ++l) {
        LabelInfo info;
        info.id = l;
        info.name = l < 4 ? kNames[l] : "label-" + std::to_string(l);
        info.color = bank.entries[static_cast<std::size_t>(l * 5) % bank.entries.size()].rgb;
        labels.push_back(std::move(info));
    }
    return labels;
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

std::vector<Sample> make_toy_samples(int count, int size, int num_labels, Rng& rng) {
    if (num_labels < 2) {
        throw ParameterError("toy scenes need at least 2 labels");
    }
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    // Base colors in [-1, 1]: sky, ground, disc, band, then extra patches.
    const std::vector<Rgb> base = {{-0.3, 0.1, 0.8}, {-0.2, 0.4, -0.5}, {0.9, 0.6, -0.6}, {0.2, -0.5, 0.3},
                                   {0.7, -0.6, -0.4}, {-0.7, 0.7, 0.6}};
    std::vector<Sample> samples;
    for (int i = 0; i < count; ++i) {
        SegmentationMask mask(size, size, num_labels, 0);
        const int horizon = static_cast<int>(size * (0.4 + 0.2 * u01(rng)));
        const double cx = size * (0.25 + 0.5 * u01(rng));
        const double cy = size * (0.2 + 0.3 * u01(rng));
        const double radius = size * (0.1 + 0.08 * u01(rng));
        const int band_y = horizon + static_cast<int>(size * (0.15 + 0.15 * u01(rng)));
        const int band_h = std::max(2, size / 10);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                int label = y < horizon ? 0 : 1;
                if (num_labels > 3 && y >= band_y && y < band_y + band_h) {
                    label = 3;
                }
                if (num_labels > 2 && (x - cx) * (x - cx) + (y - cy) * (y - cy) < radius * radius) {
                    label = 2;
                }
                mask.set(y, x, label);
            }
        }
        for (int l = 4; l < num_labels; ++l) {
            const int px = static_cast<int>(u01(rng) * (size - size / 6));
            const int py = horizon + static_cast<int>(u01(rng) * std::max(1, size - horizon - size / 6));
            for (int y = py; y < std::min(size, py + size / 6); ++y) {
                for (int x = px; x < std::min(size, px + size / 6); ++x) {
                    mask.set(y, x, l);
                }
            }
        }
        std::vector<Rgb> colors(static_cast<std::size_t>(num_labels));
        for (int l = 0; l < num_labels; ++l) {
            const Rgb& b = base[static_cast<std::size_t>(l) % base.size()];
            for (std::size_t c = 0; c < 3; ++c) {
                colors[static_cast<std::size_t>(l)][c] = std::clamp(b[c] + 0.3 * (u01(rng) - 0.5), -0.95, 0.95);
            }
        }
        Tensor image({3, size, size});
        for (int y = 0; y < size; ++y) {
            const double shade = 0.15 * (static_cast<double>(y) / size - 0.5);
            for (int x = 0; x < size; ++x) {
                const Rgb& rgb = colors[static_cast<std::size_t>(mask.at(y, x))];
                for (int c = 0; c < 3; ++c) {
                    image.at(c, y, x) = std::clamp(rgb[static_cast<std::size_t>(c)] + shade, -1.0, 1.0);
                }
            }
        }
        samples.push_back(Sample{std::move(image), std::move(mask)});
    }
    return samples;
}

fs::path write_toy_dataset(const fs::path& dir, int count, int size, int num_labels, std::uint64_t seed) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    Rng rng(seed);
    const auto samples = make_toy_samples(count, size, num_labels, rng);
    const fs::path manifest = dir / "manifest.jsonl";
    std::ofstream out(manifest);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string stem = "sample_" + std::to_string(i) + ".png";
        write_image_png(dir / "images" / stem, samples[i].image);
        write_mask_png(dir / "masks" / stem, samples[i].mask);
        out << nlohmann::json{{"image", "images/" + stem}, {"mask", "masks/" + stem}}.dump() << '\n';
    }
    save_label_table(dir / "labels.json", default_label_table(num_labels));
    return manifest;
}

}  // namespace rucgan
