#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/stereo_ops.hpp"
#include "msfnet/tensor.hpp"

namespace msfnet {

template <typename T>
struct StereoSample {
    Tensor<T> left;       // N x 3 x H x W, values in [0, 1]
    Tensor<T> right;
    DisparityMap<T> gt;   // full resolution; gt.valid is the supervision mask
    Tensor<T> occlusion;  // N x 1 x H x W, 1 = no visible correspondence in the right view
};

struct DatasetFilterRule {
    double fraction_threshold = 0.25;
    double disparity_threshold = 300.0;
};

// Random-dot stereogram with exact integer ground truth. A textured
// background plane at a base disparity is overlaid with rectangular
// foreground layers at larger disparities; the right view is rendered by
// forward mapping with a nearer-wins z-buffer, and left pixels that lose
// their target or map off-image are marked occluded. Right-view holes get
// fresh dots.
template <typename T>
StereoSample<T> generate_random_dot(uint64_t seed, int64_t h, int64_t w, int64_t max_disp,
                                    int64_t shape_count) {
    if (h < 1 || w < 1) {
        throw std::invalid_argument("generate_random_dot: empty image");
    }
    if (max_disp < 0 || max_disp * 4 >= w) {
        throw std::invalid_argument("generate_random_dot: max_disp must satisfy 0 <= max_disp < W/4");
    }
    if (shape_count < 0) {
        throw std::invalid_argument("generate_random_dot: negative shape_count");
    }
    if (shape_count > 0 && (w < 8 || h < 8)) {
        throw std::invalid_argument("generate_random_dot: image too small for foreground shapes");
    }

    std::mt19937 rng(static_cast<uint32_t>(seed));

    // Integer disparity field, background first, then painter-ordered shapes.
    std::vector<int64_t> field(static_cast<size_t>(h * w), 0);
    int64_t base = 0;
    if (max_disp > 0) {
        base = std::uniform_int_distribution<int64_t>(0, max_disp / 2)(rng);
    }
    for (auto& f : field) f = base;
    for (int64_t i = 0; i < shape_count; ++i) {
        const int64_t sw = std::uniform_int_distribution<int64_t>(w / 8 + 1, w / 3 + 1)(rng);
        const int64_t sh = std::uniform_int_distribution<int64_t>(h / 8 + 1, h / 2 + 1)(rng);
        const int64_t x0 = std::uniform_int_distribution<int64_t>(0, w - sw)(rng);
        const int64_t y0 = std::uniform_int_distribution<int64_t>(0, h - sh)(rng);
        const int64_t d = max_disp > base
                              ? std::uniform_int_distribution<int64_t>(base + 1, max_disp)(rng)
                              : base;
        for (int64_t y = y0; y < y0 + sh; ++y) {
            for (int64_t x = x0; x < x0 + sw; ++x) {
                field[static_cast<size_t>(y * w + x)] = d;
            }
        }
    }

    StereoSample<T> s;
    s.left = Tensor<T>(Shape{1, 3, h, w});
    s.right = Tensor<T>(Shape{1, 3, h, w});
    s.occlusion = Tensor<T>(Shape{1, 1, h, w});
    std::uniform_real_distribution<double> dot(0.0, 1.0);
    for (auto& v : s.left.data()) v = static_cast<T>(dot(rng));

    // Forward mapping: each left pixel lands at x - d; the larger disparity
    // (nearer surface) wins a contested target.
    std::vector<int64_t> src(static_cast<size_t>(w));
    std::vector<int64_t> zbuf(static_cast<size_t>(w));
    for (int64_t y = 0; y < h; ++y) {
        std::fill(src.begin(), src.end(), -1);
        std::fill(zbuf.begin(), zbuf.end(), -1);
        for (int64_t x = 0; x < w; ++x) {
            const int64_t d = field[static_cast<size_t>(y * w + x)];
            const int64_t xr = x - d;
            if (xr < 0) continue;
            if (d > zbuf[static_cast<size_t>(xr)]) {
                zbuf[static_cast<size_t>(xr)] = d;
                src[static_cast<size_t>(xr)] = x;
            }
        }
        for (int64_t x = 0; x < w; ++x) {
            const int64_t d = field[static_cast<size_t>(y * w + x)];
            const int64_t xr = x - d;
            const bool visible = xr >= 0 && src[static_cast<size_t>(xr)] == x;
            s.occlusion.at(0, 0, y, x) = visible ? T(0) : T(1);
        }
        for (int64_t xr = 0; xr < w; ++xr) {
            const int64_t x = src[static_cast<size_t>(xr)];
            for (int64_t c = 0; c < 3; ++c) {
                s.right.at(0, c, y, xr) =
                    x >= 0 ? s.left.at(0, c, y, x) : static_cast<T>(dot(rng));
            }
        }
    }

    Tensor<T> gt(Shape{1, 1, h, w});
    for (int64_t i = 0; i < h * w; ++i) {
        gt.data()[i] = static_cast<T>(field[static_cast<size_t>(i)]);
    }
    s.gt = make_disparity(std::move(gt), 1);
    return s;
}

namespace detail {

template <typename T>
Tensor<T> crop_tensor(const Tensor<T>& t, int64_t oy, int64_t ox, int64_t ch, int64_t cw) {
    const Shape s = t.shape();
    Tensor<T> out(Shape{s.n, s.c, ch, cw});
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
            for (int64_t y = 0; y < ch; ++y) {
                for (int64_t x = 0; x < cw; ++x) {
                    out.at(n, c, y, x) = t.at(n, c, oy + y, ox + x);
                }
            }
        }
    }
    return out;
}

}  // namespace detail

// Identical crop window across images, disparity and masks. Horizontal
// cropping leaves disparity values unchanged.
template <typename T>
StereoSample<T> random_crop(const StereoSample<T>& sample, int64_t crop_h, int64_t crop_w,
                            uint64_t seed) {
    const Shape s = sample.left.shape();
    if (crop_h > s.h || crop_w > s.w || crop_h < 1 || crop_w < 1) {
        throw std::invalid_argument("random_crop: crop " + std::to_string(crop_h) + "x" +
                                    std::to_string(crop_w) + " larger than image " + s.str());
    }
    if (crop_h % 64 != 0 || crop_w % 64 != 0) {
        throw std::invalid_argument("random_crop: crop dims must be divisible by 64");
    }
    std::mt19937 rng(static_cast<uint32_t>(seed));
    const int64_t oy = std::uniform_int_distribution<int64_t>(0, s.h - crop_h)(rng);
    const int64_t ox = std::uniform_int_distribution<int64_t>(0, s.w - crop_w)(rng);

    StereoSample<T> out;
    out.left = detail::crop_tensor(sample.left, oy, ox, crop_h, crop_w);
    out.right = detail::crop_tensor(sample.right, oy, ox, crop_h, crop_w);
    out.gt.values = detail::crop_tensor(sample.gt.values, oy, ox, crop_h, crop_w);
    out.gt.valid = detail::crop_tensor(sample.gt.valid, oy, ox, crop_h, crop_w);
    out.gt.scale = sample.gt.scale;
    out.occlusion = detail::crop_tensor(sample.occlusion, oy, ox, crop_h, crop_w);
    return out;
}

// Keep unless strictly more than the threshold fraction of valid disparities
// exceeds the disparity threshold.
template <typename T>
bool apply_filter(const StereoSample<T>& sample, const DatasetFilterRule& rule) {
    const auto& gt = sample.gt.values.data();
    const auto& valid = sample.gt.valid.data();
    int64_t total = 0, above = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (valid[i] == T(0)) continue;
        ++total;
        if (static_cast<double>(gt[i]) > rule.disparity_threshold) ++above;
    }
    if (total == 0) {
        throw std::invalid_argument("apply_filter: no valid ground truth");
    }
    return !(static_cast<double>(above) / static_cast<double>(total) > rule.fraction_threshold);
}

// Concatenates equal-sized samples along the batch dimension.
template <typename T>
StereoSample<T> stack_samples(const std::vector<StereoSample<T>>& samples) {
    if (samples.empty()) {
        throw std::invalid_argument("stack_samples: empty batch");
    }
    const Shape s0 = samples[0].left.shape();
    int64_t n_total = 0;
    for (const auto& s : samples) {
        const Shape si = s.left.shape();
        if (si.c != s0.c || si.h != s0.h || si.w != s0.w) {
            throw std::invalid_argument("stack_samples: mixed shapes " + s0.str() + " vs " +
                                        si.str());
        }
        n_total += si.n;
    }
    auto stack = [&](auto select) {
        const Shape part = select(samples[0]).shape();
        Tensor<T> out(Shape{n_total, part.c, part.h, part.w});
        int64_t off = 0;
        for (const auto& s : samples) {
            const Tensor<T>& t = select(s);
            std::copy(t.data().begin(), t.data().end(), out.data().begin() + off);
            off += t.numel();
        }
        return out;
    };
    StereoSample<T> out;
    out.left = stack([](const StereoSample<T>& s) -> const Tensor<T>& { return s.left; });
    out.right = stack([](const StereoSample<T>& s) -> const Tensor<T>& { return s.right; });
    out.gt.values = stack([](const StereoSample<T>& s) -> const Tensor<T>& { return s.gt.values; });
    out.gt.valid = stack([](const StereoSample<T>& s) -> const Tensor<T>& { return s.gt.valid; });
    out.gt.scale = samples[0].gt.scale;
    out.occlusion = stack([](const StereoSample<T>& s) -> const Tensor<T>& { return s.occlusion; });
    return out;
}

}  // namespace msfnet
