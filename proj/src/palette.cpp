// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/palette.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "rucgan/error.hpp"

namespace rucgan {

namespace {

void check_label(int label, int num_labels) {
    if (label < 0 || label >= num_labels) {
        throw LabelRangeError("label " + std::to_string(label) + " outside [0, " + std::to_string(num_labels) + ")");
    }
}

void require_match(const PaletteVector& palette, const SegmentationMask& mask) {
    if (palette.num_labels() != mask.num_labels()) {
        throw LabelRangeError("palette has " + std::to_string(palette.num_labels()) + " entries but mask has " +
                              std::to_string(mask.num_labels()) + " labels");
    }
}

}  // namespace

SegmentationMask::SegmentationMask(int height, int width, int num_labels, int fill)
    : SegmentationMask(height, width, num_labels,
                       std::vector<std::int32_t>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0),
                                                 fill)) {}

SegmentationMask::SegmentationMask(int height, int width, int num_labels, std::vector<std::int32_t> labels)
    : height_(height), width_(width), num_labels_(num_labels), labels_(std::move(labels)) {
    if (height < 1 || width < 1) {
        throw DimensionError("mask dimensions must be >= 1");
    }
    if (num_labels < 1) {
        throw LabelRangeError("num_labels must be >= 1");
    }
    if (labels_.size() != static_cast<std::size_t>(height) * width) {
        throw DimensionError("mask label count does not match " + std::to_string(height) + "x" + std::to_string(width));
    }
    for (auto l : labels_) {
        check_label(l, num_labels);
    }
}

void SegmentationMask::set(int y, int x, int label) {
    check_label(label, num_labels_);
    labels_[static_cast<std::size_t>(y) * width_ + x] = label;
}

std::vector<int> SegmentationMask::present_labels() const {
    std::vector<char> seen(static_cast<std::size_t>(num_labels_), 0);
    for (auto l : labels_) {
        seen[static_cast<std::size_t>(l)] = 1;
    }
    std::vector<int> out;
    for (int l = 0; l < num_labels_; ++l) {
        if (seen[static_cast<std::size_t>(l)]) {
            out.push_back(l);
        }
    }
    return out;
}

std::optional<Rgb8> ColorBank::find(std::string_view name) const {
    for (const auto& e : entries) {
        if (e.name == name) {
            return e.rgb;
        }
    }
    return std::nullopt;
}

void require_image(const Tensor& image, const char* what) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw DimensionError(std::string(what) + ": expected a 3×H×W image, got " + shape_str(image.shape()));
    }
}

PaletteVector extract_palette(const Tensor& image, const SegmentationMask& mask) {
    require_image(image, "extract_palette");
    if (image.dim(1) != mask.height() || image.dim(2) != mask.width()) {
        throw DimensionError("extract_palette: image " + shape_str(image.shape()) + " vs mask " +
                             std::to_string(mask.height()) + "x" + std::to_string(mask.width()));
    }
    const int s = mask.num_labels();
    std::vector<std::array<double, 3>> sums(static_cast<std::size_t>(s), {0, 0, 0});
    std::vector<long> counts(static_cast<std::size_t>(s), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const auto l = static_cast<std::size_t>(mask.at(y, x));
            for (int c = 0; c < 3; ++c) {
                sums[l][static_cast<std::size_t>(c)] += image.at(c, y, x);
            }
            ++counts[l];
        }
    }
    PaletteVector palette(s);
    for (std::size_t l = 0; l < static_cast<std::size_t>(s); ++l) {
        if (counts[l] == 0) {
            continue;
        }
        palette.present[l] = true;
        for (std::size_t c = 0; c < 3; ++c) {
            palette.colors[l][c] = sums[l][c] / static_cast<double>(counts[l]);
        }
    }
    return palette;
}

Tensor semantic_sampling(const PaletteVector& palette, const SegmentationMask& mask) {
    require_match(palette, mask);
    const int s = mask.num_labels();
    Tensor planes({3 * s, mask.height(), mask.width()});
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const int l = mask.at(y, x);
            const Rgb& rgb = palette.colors[static_cast<std::size_t>(l)];
            for (int c = 0; c < 3; ++c) {
                planes.at(3 * l + c, y, x) = rgb[static_cast<std::size_t>(c)];
            }
        }
    }
    return planes;
}

Tensor semantic_sampling_batch(std::span<const PaletteVector> palettes, std::span<const SegmentationMask> masks) {
    if (palettes.size() != masks.size() || masks.empty()) {
        throw DimensionError("semantic_sampling_batch: palette and mask counts differ or are zero");
    }
    const auto& m0 = masks[0];
    const int n = static_cast<int>(masks.size());
    const int ch = 3 * m0.num_labels();
    Tensor out({n, ch, m0.height(), m0.width()});
    const std::size_t per = static_cast<std::size_t>(ch) * m0.height() * m0.width();
    for (int i = 0; i < n; ++i) {
        if (masks[i].height() != m0.height() || masks[i].width() != m0.width() ||
            masks[i].num_labels() != m0.num_labels()) {
            throw DimensionError("semantic_sampling_batch: masks differ in size or label count");
        }
        const Tensor planes = semantic_sampling(palettes[i], masks[i]);
        std::copy(planes.data().begin(), planes.data().end(), out.ptr() + i * per);
    }
    return out;
}

Tensor paint_by_palette(const PaletteVector& palette, const SegmentationMask& mask) {
    require_match(palette, mask);
    Tensor image({3, mask.height(), mask.width()});
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const Rgb& rgb = palette.colors[static_cast<std::size_t>(mask.at(y, x))];
            for (int c = 0; c < 3; ++c) {
                image.at(c, y, x) = rgb[static_cast<std::size_t>(c)];
            }
        }
    }
    return image;
}

SegmentationMask downsample_mask(const SegmentationMask& mask, int factor) {
    if (factor < 1 || (factor & (factor - 1)) != 0) {
        throw ParameterError("downsample factor must be a power of two, got " + std::to_string(factor));
    }
    if (mask.height() % factor != 0 || mask.width() % factor != 0) {
        throw DimensionError("mask " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                             " is not divisible by " + std::to_string(factor));
    }
    if (factor == 1) {
        return mask;
    }
    const int h = mask.height() / factor;
    const int w = mask.width() / factor;
    std::vector<std::int32_t> labels(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            labels[static_cast<std::size_t>(y) * w + x] = mask.at(y * factor, x * factor);
        }
    }
    return SegmentationMask(h, w, mask.num_labels(), std::move(labels));
}

ColorBank default_color_bank() {
    // Twelve hues at 30° steps, their dark variants, natural-scene tones and neutrals.
    return ColorBank{{
        {"red", {255, 0, 0}},
        {"orange", {255, 128, 0}},
        {"yellow", {255, 255, 0}},
        {"chartreuse", {128, 255, 0}},
        {"green", {0, 255, 0}},
        {"spring-green", {0, 255, 128}},
        {"cyan", {0, 255, 255}},
        {"azure", {0, 128, 255}},
        {"blue", {0, 0, 255}},
        {"violet", {128, 0, 255}},
        {"magenta", {255, 0, 255}},
        {"rose", {255, 0, 128}},
        {"maroon", {128, 0, 0}},
        {"olive", {128, 128, 0}},
        {"dark-green", {0, 128, 0}},
        {"teal", {0, 128, 128}},
        {"navy", {0, 0, 128}},
        {"purple", {128, 0, 128}},
        {"sky", {135, 206, 235}},
        {"sea", {46, 139, 87}},
        {"sand", {194, 178, 128}},
        {"forest", {34, 139, 34}},
        {"earth", {139, 90, 43}},
        {"skin", {224, 172, 105}},
        {"white", {255, 255, 255}},
        {"light-gray", {192, 192, 192}},
        {"gray", {128, 128, 128}},
        {"dark-gray", {64, 64, 64}},
        {"black", {0, 0, 0}},
    }};
}

Rgb bank_to_unit(const Rgb8& rgb) {
    Rgb out{};
    for (std::size_t c = 0; c < 3; ++c) {
        if (rgb[c] < 0 || rgb[c] > 255) {
            throw ParameterError("color component " + std::to_string(rgb[c]) + " outside [0, 255]");
        }
        out[c] = rgb[c] / 127.5 - 1.0;
    }
    return out;
}

Rgb8 unit_to_bank(const Rgb& rgb) {
    Rgb8 out{};
    for (std::size_t c = 0; c < 3; ++c) {
        out[c] = static_cast<int>(std::lround(std::clamp((rgb[c] + 1.0) * 127.5, 0.0, 255.0)));
    }
    return out;
}

nlohmann::json palette_to_json(const PaletteVector& palette) {
    nlohmann::json colors = nlohmann::json::array();
    for (const auto& c : palette.colors) {
        colors.push_back({c[0], c[1], c[2]});
    }
    nlohmann::json present = nlohmann::json::array();
    for (bool p : palette.present) {
        present.push_back(p);
    }
    return {{"num_labels", palette.num_labels()}, {"colors", colors}, {"present", present}};
}

PaletteVector palette_from_json(const nlohmann::json& j) {
    try {
        const int s = j.at("num_labels").get<int>();
        const auto& colors = j.at("colors");
        if (s < 1 || colors.size() != static_cast<std::size_t>(s)) {
            throw LabelRangeError("palette lists " + std::to_string(colors.size()) + " colors for num_labels " +
                                  std::to_string(s));
        }
        PaletteVector p(s);
        for (std::size_t l = 0; l < colors.size(); ++l) {
            const auto& c = colors[l];
            if (c.size() != 3) {
                throw FormatError("palette color " + std::to_string(l) + " is not an RGB triple");
            }
            for (std::size_t k = 0; k < 3; ++k) {
                const double v = c[k].get<double>();
                if (!(v >= -1.0 && v <= 1.0)) {
                    throw ParameterError("palette channel value " + std::to_string(v) + " outside [-1, 1]");
                }
                p.colors[l][k] = v;
            }
        }
        if (j.contains("present")) {
            const auto& pr = j.at("present");
            if (pr.size() != static_cast<std::size_t>(s)) {
                throw LabelRangeError("palette 'present' length does not match num_labels");
            }
            for (std::size_t l = 0; l < pr.size(); ++l) {
                p.present[l] = pr[l].get<bool>();
            }
        } else {
            std::fill(p.present.begin(), p.present.end(), true);
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("palette JSON: ") + e.what());
    }
}

PaletteVector load_palette(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open palette file " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("palette file " + path + ": " + e.what());
    }
    return palette_from_json(j);
}

void save_palette(const PaletteVector& palette, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot write palette file " + path);
    }
    out << palette_to_json(palette).dump(2) << '\n';
}

nlohmann::json color_bank_to_json(const ColorBank& bank) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : bank.entries) {
        j.push_back({{"name", e.name}, {"rgb", {e.rgb[0], e.rgb[1], e.rgb[2]}}});
    }
    return j;
}

ColorBank color_bank_from_json(const nlohmann::json& j) {
    ColorBank bank;
    std::set<std::string> names;
    try {
        for (const auto& e : j) {
            ColorBankEntry entry{e.at("name").get<std::string>(), {}};
            const auto& rgb = e.at("rgb");
            if (rgb.size() != 3) {
                throw FormatError("color bank entry '" + entry.name + "' is not an RGB triple");
            }
            for (std::size_t c = 0; c < 3; ++c) {
                entry.rgb[c] = rgb[c].get<int>();
                if (entry.rgb[c] < 0 || entry.rgb[c] > 255) {
                    throw ParameterError("color bank entry '" + entry.name + "' component outside [0, 255]");
                }
            }
            if (!names.insert(entry.name).second) {
                throw FormatError("duplicate color bank name '" + entry.name + "'");
            }
            bank.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("color bank JSON: ") + e.what());
    }
    return bank;
}

}  // namespace rucgan
