#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/nn_ops.hpp"
#include "msfnet/tape.hpp"
#include "msfnet/tensor.hpp"

namespace msfnet {

// Horizontal-displacement correlation settings. Only the paper's point-wise
// setting (patch size 1, unit strides) is supported.
struct CorrSpec {
    int64_t max_displacement = 40;
    int64_t patch_size = 1;
    int64_t stride1 = 1;
    int64_t stride2 = 1;

    int64_t out_channels() const { return max_displacement + 1; }

    void validate() const {
        if (max_displacement < 0) {
            throw std::invalid_argument("CorrSpec: max_displacement must be >= 0");
        }
        if (patch_size != 1 || stride1 != 1 || stride2 != 1) {
            throw std::invalid_argument("CorrSpec: only k=1, s1=s2=1 is supported");
        }
    }
};

// Disparity field at 1/scale of full resolution. Values are stored in the
// map's own pixel units, i.e. full-resolution disparity divided by scale.
template <typename T>
struct DisparityMap {
    Tensor<T> values;  // N x 1 x H x W
    Tensor<T> valid;   // same shape; 1 = ground truth defined
    int64_t scale = 1;
};

template <typename T>
DisparityMap<T> make_disparity(Tensor<T> values, int64_t scale = 1) {
    if (values.shape().c != 1) {
        throw std::invalid_argument("disparity map must have one channel, got " +
                                    values.shape().str());
    }
    DisparityMap<T> d;
    d.valid = Tensor<T>::full(values.shape(), T(1));
    d.values = std::move(values);
    d.scale = scale;
    return d;
}

// One-sided 1-D correlation: channel d holds the channel-mean product of the
// left feature at x with the right feature at x-d. Out-of-range positions
// contribute zero.
template <typename T>
Tensor<T> correlation_1d(const Tensor<T>& left, const Tensor<T>& right, const CorrSpec& spec) {
    spec.validate();
    require_same_shape(left, right, "correlation_1d");
    const int64_t N = left.shape().n, C = left.shape().c, H = left.shape().h, W = left.shape().w;
    const int64_t D = spec.max_displacement;
    if (D >= W) {
        throw std::invalid_argument("correlation_1d: max_displacement " + std::to_string(D) +
                                    " >= width " + std::to_string(W));
    }

    Tensor<T> out(Shape{N, D + 1, H, W});
    const T inv_c = T(1) / static_cast<T>(C);
    const T* L = left.data().data();
    const T* R = right.data().data();
    T* O = out.data().data();
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t d = 0; d <= D; ++d) {
            T* oplane = O + (n * (D + 1) + d) * H * W;
            for (int64_t y = 0; y < H; ++y) {
                T* orow = oplane + y * W;
                for (int64_t x = 0; x < d; ++x) orow[x] = T(0);
                for (int64_t c = 0; c < C; ++c) {
                    const T* lrow = L + ((n * C + c) * H + y) * W;
                    const T* rrow = R + ((n * C + c) * H + y) * W;
                    if (c == 0) {
                        for (int64_t x = d; x < W; ++x) orow[x] = lrow[x] * rrow[x - d];
                    } else {
                        for (int64_t x = d; x < W; ++x) orow[x] += lrow[x] * rrow[x - d];
                    }
                }
                for (int64_t x = d; x < W; ++x) orow[x] *= inv_c;
            }
        }
    }

    Tensor<T> l_t = left, r_t = right;
    record_op(left.requires_grad() || right.requires_grad(), out, [l_t, r_t, out, D]() mutable {
        if (!out.has_grad()) return;
        const int64_t N = l_t.shape().n, C = l_t.shape().c, H = l_t.shape().h, W = l_t.shape().w;
        const T inv_c = T(1) / static_cast<T>(C);
        const T* g = out.grad().data();
        const T* L = l_t.data().data();
        const T* R = r_t.data().data();
        T* gl = l_t.requires_grad() ? l_t.grad().data() : nullptr;
        T* gr = r_t.requires_grad() ? r_t.grad().data() : nullptr;
        for (int64_t n = 0; n < N; ++n) {
            for (int64_t d = 0; d <= D; ++d) {
                const T* gplane = g + (n * (D + 1) + d) * H * W;
                for (int64_t c = 0; c < C; ++c) {
                    const int64_t base = ((n * C + c) * H) * W;
                    for (int64_t y = 0; y < H; ++y) {
                        const T* grow = gplane + y * W;
                        const T* lrow = L + base + y * W;
                        const T* rrow = R + base + y * W;
                        if (gl != nullptr) {
                            T* glrow = gl + base + y * W;
                            for (int64_t x = d; x < W; ++x) {
                                glrow[x] += inv_c * grow[x] * rrow[x - d];
                            }
                        }
                        if (gr != nullptr) {
                            T* grrow = gr + base + y * W;
                            for (int64_t x = d; x < W; ++x) {
                                grrow[x - d] += inv_c * grow[x] * lrow[x];
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

// Bilinear horizontal warp: out(x, y) samples source at (x - d(x,y), y) with
// coordinates clamped to [0, W-1]. Differentiable in source and disparity;
// the disparity derivative is 0 where the coordinate clamps.
template <typename T>
Tensor<T> warp_horizontal(const Tensor<T>& source, const Tensor<T>& disparity) {
    const Shape s = source.shape();
    const Shape ds = disparity.shape();
    if (ds.c != 1 || ds.n != s.n || ds.h != s.h || ds.w != s.w) {
        throw std::invalid_argument("warp_horizontal: disparity " + ds.str() +
                                    " incompatible with source " + s.str());
    }
    Tensor<T> out(s);
    const T* src = source.data().data();
    const T* dsp = disparity.data().data();
    T* o = out.data().data();
    const int64_t N = s.n, C = s.c, H = s.h, W = s.w;
    for (int64_t n = 0; n < N; ++n) {
        const T* dplane = dsp + n * H * W;
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t x = 0; x < W; ++x) {
                T xs = static_cast<T>(x) - dplane[y * W + x];
                if (xs < T(0)) xs = T(0);
                if (xs > static_cast<T>(W - 1)) xs = static_cast<T>(W - 1);
                int64_t x0 = static_cast<int64_t>(std::floor(static_cast<double>(xs)));
                if (x0 > W - 2) x0 = W - 2;
                if (x0 < 0) x0 = 0;
                const T f = W > 1 ? xs - static_cast<T>(x0) : T(0);
                for (int64_t c = 0; c < C; ++c) {
                    const T* srow = src + ((n * C + c) * H + y) * W;
                    const T v0 = srow[x0];
                    const T v1 = W > 1 ? srow[x0 + 1] : v0;
                    o[((n * C + c) * H + y) * W + x] = (T(1) - f) * v0 + f * v1;
                }
            }
        }
    }

    Tensor<T> src_t = source, dsp_t = disparity;
    record_op(source.requires_grad() || disparity.requires_grad(), out,
              [src_t, dsp_t, out]() mutable {
                  if (!out.has_grad()) return;
                  const Shape s = src_t.shape();
                  const int64_t N = s.n, C = s.c, H = s.h, W = s.w;
                  const T* g = out.grad().data();
                  const T* src = src_t.data().data();
                  const T* dsp = dsp_t.data().data();
                  T* gs = src_t.requires_grad() ? src_t.grad().data() : nullptr;
                  T* gd = dsp_t.requires_grad() ? dsp_t.grad().data() : nullptr;
                  for (int64_t n = 0; n < N; ++n) {
                      const T* dplane = dsp + n * H * W;
                      for (int64_t y = 0; y < H; ++y) {
                          for (int64_t x = 0; x < W; ++x) {
                              const T raw = static_cast<T>(x) - dplane[y * W + x];
                              const bool clamped = raw <= T(0) || raw >= static_cast<T>(W - 1);
                              T xs = raw;
                              if (xs < T(0)) xs = T(0);
                              if (xs > static_cast<T>(W - 1)) xs = static_cast<T>(W - 1);
                              int64_t x0 = static_cast<int64_t>(std::floor(static_cast<double>(xs)));
                              if (x0 > W - 2) x0 = W - 2;
                              if (x0 < 0) x0 = 0;
                              const T f = W > 1 ? xs - static_cast<T>(x0) : T(0);
                              T d_acc = T(0);
                              for (int64_t c = 0; c < C; ++c) {
                                  const int64_t row = ((n * C + c) * H + y) * W;
                                  const T gv = g[row + x];
                                  if (gv == T(0)) continue;
                                  if (gs != nullptr) {
                                      gs[row + x0] += (T(1) - f) * gv;
                                      if (W > 1) gs[row + x0 + 1] += f * gv;
                                  }
                                  if (gd != nullptr && !clamped && W > 1) {
                                      d_acc += gv * (src[row + x0 + 1] - src[row + x0]);
                                  }
                              }
                              // d xs / d disparity = -1 inside the image.
                              if (gd != nullptr) gd[n * H * W + y * W + x] += -d_acc;
                          }
                      }
                  }
              });
    return out;
}

// Elementwise absolute difference |a - b|; gradient at equality is 0.
template <typename T>
Tensor<T> error_map(const Tensor<T>& left_feature, const Tensor<T>& warped_feature) {
    require_same_shape(left_feature, warped_feature, "error_map");
    Tensor<T> out(left_feature.shape());
    const auto& a = left_feature.data();
    const auto& b = warped_feature.data();
    auto& o = out.data();
    for (size_t i = 0; i < a.size(); ++i) {
        o[i] = a[i] >= b[i] ? a[i] - b[i] : b[i] - a[i];
    }
    Tensor<T> a_t = left_feature, b_t = warped_feature;
    record_op(left_feature.requires_grad() || warped_feature.requires_grad(), out,
              [a_t, b_t, out]() mutable {
                  if (!out.has_grad()) return;
                  const auto& g = out.grad();
                  const auto& a = a_t.data();
                  const auto& b = b_t.data();
                  T* ga = a_t.requires_grad() ? a_t.grad().data() : nullptr;
                  T* gb = b_t.requires_grad() ? b_t.grad().data() : nullptr;
                  for (size_t i = 0; i < g.size(); ++i) {
                      const T sgn = a[i] > b[i] ? T(1) : (a[i] < b[i] ? T(-1) : T(0));
                      if (ga != nullptr) ga[i] += sgn * g[i];
                      if (gb != nullptr) gb[i] -= sgn * g[i];
                  }
              });
    return out;
}

// Mean absolute difference over valid pixels.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& valid) {
    require_same_shape(pred, gt, "l1_loss");
    require_same_shape(pred, valid, "l1_loss mask");
    const auto& p = pred.data();
    const auto& g = gt.data();
    const auto& m = valid.data();
    T count = T(0);
    T sum = T(0);
    for (size_t i = 0; i < p.size(); ++i) {
        if (m[i] != T(0)) {
            count += T(1);
            sum += std::abs(p[i] - g[i]);
        }
    }
    if (count == T(0)) {
        throw std::invalid_argument("l1_loss: zero valid pixels");
    }
    Tensor<T> out = Tensor<T>::full(Shape{1, 1, 1, 1}, sum / count);

    Tensor<T> p_t = pred, g_t = gt, m_t = valid;
    record_op(pred.requires_grad() || gt.requires_grad(), out, [p_t, g_t, m_t, out, count]() mutable {
        if (!out.has_grad()) return;
        const T go = out.grad()[0] / count;
        const auto& p = p_t.data();
        const auto& g = g_t.data();
        const auto& m = m_t.data();
        T* gp = p_t.requires_grad() ? p_t.grad().data() : nullptr;
        T* gg = g_t.requires_grad() ? g_t.grad().data() : nullptr;
        for (size_t i = 0; i < p.size(); ++i) {
            if (m[i] == T(0)) continue;
            const T sgn = p[i] > g[i] ? T(1) : (p[i] < g[i] ? T(-1) : T(0));
            if (gp != nullptr) gp[i] += sgn * go;
            if (gg != nullptr) gg[i] -= sgn * go;
        }
    });
    return out;
}

template <typename T>
Tensor<T> l1_loss(const DisparityMap<T>& pred, const DisparityMap<T>& gt) {
    if (pred.scale != gt.scale) {
        throw std::invalid_argument("l1_loss: scale mismatch " + std::to_string(pred.scale) +
                                    " vs " + std::to_string(gt.scale));
    }
    return l1_loss(pred.values, gt.values, gt.valid);
}

// Valid-aware block-average downsampling of ground truth. Values are divided
// by the factor so the result stays scale-consistent; blocks with no valid
// pixel are marked invalid. Not differentiable (ground-truth side only).
template <typename T>
DisparityMap<T> downsample_disparity(const DisparityMap<T>& gt, int64_t factor) {
    if (factor < 1 || (factor & (factor - 1)) != 0) {
        throw std::invalid_argument("downsample_disparity: factor must be a positive power of two");
    }
    const Shape s = gt.values.shape();
    if (factor == 1) {
        DisparityMap<T> out = gt;
        return out;
    }
    if (s.h % factor != 0 || s.w % factor != 0) {
        throw std::invalid_argument("downsample_disparity: " + s.str() + " not divisible by " +
                                    std::to_string(factor));
    }
    const int64_t OH = s.h / factor, OW = s.w / factor;
    DisparityMap<T> out;
    out.values = Tensor<T>(Shape{s.n, 1, OH, OW});
    out.valid = Tensor<T>(Shape{s.n, 1, OH, OW});
    out.scale = gt.scale * factor;
    for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t oy = 0; oy < OH; ++oy) {
            for (int64_t ox = 0; ox < OW; ++ox) {
                T sum = T(0), cnt = T(0);
                for (int64_t dy = 0; dy < factor; ++dy) {
                    for (int64_t dx = 0; dx < factor; ++dx) {
                        const int64_t y = oy * factor + dy, x = ox * factor + dx;
                        if (gt.valid.at(n, 0, y, x) != T(0)) {
                            sum += gt.values.at(n, 0, y, x);
                            cnt += T(1);
                        }
                    }
                }
                if (cnt > T(0)) {
                    out.values.at(n, 0, oy, ox) = sum / cnt / static_cast<T>(factor);
                    out.valid.at(n, 0, oy, ox) = T(1);
                } else {
                    out.values.at(n, 0, oy, ox) = T(0);
                    out.valid.at(n, 0, oy, ox) = T(0);
                }
            }
        }
    }
    return out;
}

template <typename T>
struct MultiscaleLoss {
    Tensor<T> total;              // scalar
    std::vector<T> components;    // unweighted per-prediction L1 values
};

// Weighted sum of per-scale L1 losses against valid-aware downsampled ground
// truth. `weights` must align with `preds`.
template <typename T>
MultiscaleLoss<T> multiscale_loss(const std::vector<DisparityMap<T>>& preds,
                                  const DisparityMap<T>& gt_full, const std::vector<T>& weights) {
    if (preds.empty()) {
        throw std::invalid_argument("multiscale_loss: no predictions");
    }
    if (weights.size() != preds.size()) {
        throw std::invalid_argument("multiscale_loss: " + std::to_string(weights.size()) +
                                    " weights for " + std::to_string(preds.size()) +
                                    " predictions");
    }
    if (gt_full.scale != 1) {
        throw std::invalid_argument("multiscale_loss: ground truth must be full resolution");
    }
    MultiscaleLoss<T> result;
    Tensor<T> total;
    for (size_t i = 0; i < preds.size(); ++i) {
        const int64_t s = preds[i].scale;
        if (s < 1 || s > 64 || (s & (s - 1)) != 0) {
            throw std::invalid_argument("multiscale_loss: prediction scale " + std::to_string(s) +
                                        " is not a power of two <= 64");
        }
        DisparityMap<T> target = downsample_disparity(gt_full, s);
        Tensor<T> comp = l1_loss(preds[i].values, target.values, target.valid);
        result.components.push_back(comp.data()[0]);
        Tensor<T> weighted = scale(comp, weights[i]);
        total = total.defined() ? add(total, weighted) : weighted;
    }
    result.total = total;
    return result;
}

// Mean absolute disparity error over valid pixels (1-D endpoint error).
template <typename T>
T epe(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& valid) {
    require_same_shape(pred, gt, "epe");
    require_same_shape(pred, valid, "epe mask");
    const auto& p = pred.data();
    const auto& g = gt.data();
    const auto& m = valid.data();
    double sum = 0.0;
    int64_t count = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (m[i] != T(0)) {
            sum += std::abs(static_cast<double>(p[i]) - static_cast<double>(g[i]));
            ++count;
        }
    }
    if (count == 0) {
        throw std::invalid_argument("epe: zero valid pixels");
    }
    return static_cast<T>(sum / static_cast<double>(count));
}

// Percentage of valid pixels whose absolute error is strictly above 3 px.
template <typename T>
T three_px_error(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& valid) {
    require_same_shape(pred, gt, "three_px_error");
    require_same_shape(pred, valid, "three_px_error mask");
    const auto& p = pred.data();
    const auto& g = gt.data();
    const auto& m = valid.data();
    int64_t bad = 0, count = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (m[i] != T(0)) {
            ++count;
            if (std::abs(static_cast<double>(p[i]) - static_cast<double>(g[i])) > 3.0) ++bad;
        }
    }
    if (count == 0) {
        throw std::invalid_argument("three_px_error: zero valid pixels");
    }
    return static_cast<T>(100.0 * static_cast<double>(bad) / static_cast<double>(count));
}

}  // namespace msfnet
