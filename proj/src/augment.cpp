// Copyright 2026 The RUCGAN Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "rucgan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "rucgan/error.hpp"

namespace rucgan {

Hsv rgb_to_hsv(double r, double g, double b) {
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    const double range = maxc - minc;
    Hsv out{0.0, 0.0, maxc};
    if (range <= 0.0) {
        return out;
    }
    out.s = maxc > 0.0 ? range / maxc : 0.0;
    double h;
    if (maxc == r) {
        h = (g - b) / range;
    } else if (maxc == g) {
        h = 2.0 + (b - r) / range;
    } else {
        h = 4.0 + (r - g) / range;
    }
    h /= 6.0;
    out.h = h - std::floor(h);
    return out;
}

void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
    const double h6 = hsv.h * 6.0;
    const double i = std::floor(h6);
    const double f = h6 - i;
    const double p = hsv.v * (1.0 - hsv.s);
    const double q = hsv.v * (1.0 - hsv.s * f);
    const double t = hsv.v * (1.0 - hsv.s * (1.0 - f));
    switch (static_cast<int>(i) % 6) {
        case 0: r = hsv.v; g = t; b = p; break;
        case 1: r = q; g = hsv.v; b = p; break;
        case 2: r = p; g = hsv.v; b = t; break;
        case 3: r = p; g = q; b = hsv.v; break;
        case 4: r = t; g = p; b = hsv.v; break;
        default: r = hsv.v; g = p; b = q; break;
    }
}

Tensor hue_jitter(const Tensor& image, double delta) {
    require_image(image, "hue_jitter");
    if (!(delta >= -kMaxHueShift && delta <= kMaxHueShift)) {
        throw ParameterError("hue shift " + std::to_string(delta) + " outside [-0.5, 0.5]");
    }
    Tensor out = image;
    if (delta == 0.0) {
        return out;
    }
    const int h = image.dim(1), w = image.dim(2);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r0 = image.at(0, y, x), g0 = image.at(1, y, x), b0 = image.at(2, y, x);
            if (r0 == g0 && g0 == b0) {
                continue;
            }
            Hsv hsv = rgb_to_hsv((r0 + 1.0) * 0.5, (g0 + 1.0) * 0.5, (b0 + 1.0) * 0.5);
            hsv.h += delta;
            hsv.h -= std::floor(hsv.h);
            double r, g, b;
            hsv_to_rgb(hsv, r, g, b);
            out.at(0, y, x) = std::clamp(r * 2.0 - 1.0, -1.0, 1.0);
            out.at(1, y, x) = std::clamp(g * 2.0 - 1.0, -1.0, 1.0);
            out.at(2, y, x) = std::clamp(b * 2.0 - 1.0, -1.0, 1.0);
        }
    }
    return out;
}

MixSelection make_selection(const SegmentationMask& mask, std::vector<int> selected) {
    std::sort(selected.begin(), selected.end());
    std::vector<char> chosen(static_cast<std::size_t>(mask.num_labels()), 0);
    for (int l : selected) {
        if (l < 0 || l >= mask.num_labels()) {
            throw LabelRangeError("selected label " + std::to_string(l) + " outside mask label range");
        }
        chosen[static_cast<std::size_t>(l)] = 1;
    }
    MixSelection sel;
    sel.selected = std::move(selected);
    sel.height = mask.height();
    sel.width = mask.width();
    sel.indicator.resize(static_cast<std::size_t>(mask.height()) * mask.width());
    const auto labels = mask.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sel.indicator[i] = chosen[static_cast<std::size_t>(labels[i])] ? 1 : 0;
    }
    return sel;
}

MixSelection select_labels(const SegmentationMask& mask, Rng& rng) {
    const std::vector<int> present = mask.present_labels();
    std::vector<int> chosen;
    std::sample(present.begin(), present.end(), std::back_inserter(chosen), present.size() / 2, rng);
    return make_selection(mask, std::move(chosen));
}

Tensor apply_color_mix(const Tensor& original, const Tensor& jittered, const MixSelection& selection) {
    require_image(original, "apply_color_mix");
    require_same_shape(original, jittered, "apply_color_mix");
    if (original.dim(1) != selection.height || original.dim(2) != selection.width) {
        throw DimensionError("apply_color_mix: selection does not match image size");
    }
    Tensor out = jittered;
    for (int y = 0; y < selection.height; ++y) {
        for (int x = 0; x < selection.width; ++x) {
            if (selection.keeps(y, x)) {
                for (int c = 0; c < 3; ++c) {
                    out.at(c, y, x) = original.at(c, y, x);
                }
            }
        }
    }
    return out;
}

MixResult semantic_color_mix(const Tensor& image, const SegmentationMask& mask, Rng& rng) {
    require_image(image, "semantic_color_mix");
    if (image.dim(1) != mask.height() || image.dim(2) != mask.width()) {
        throw DimensionError("semantic_color_mix: image " + shape_str(image.shape()) + " does not match mask");
    }
    MixResult result;
    result.selection = select_labels(mask, rng);
    std::uniform_real_distribution<double> dist(-kMaxHueShift, kMaxHueShift);
    result.delta = dist(rng);
    result.mixed = apply_color_mix(image, hue_jitter(image, result.delta), result.selection);
    return result;
}

}  // namespace rucgan
