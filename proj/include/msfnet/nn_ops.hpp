#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/tape.hpp"
#include "msfnet/tensor.hpp"

namespace msfnet {

// One (de)convolution layer description. Forward convs use weights shaped
// (out_channels, in_channels, k, k); transposed convs use
// (in_channels, out_channels, k, k) so that a conv and a transposed conv with
// equal specs can share one weight buffer and act as adjoints.
struct ConvSpec {
    int64_t kernel = 1;
    int64_t stride = 1;
    int64_t padding = 0;
    int64_t in_channels = 1;
    int64_t out_channels = 1;
    bool transposed = false;

    int64_t out_extent(int64_t in) const {
        if (transposed) {
            return (in - 1) * stride - 2 * padding + kernel;
        }
        return (in + 2 * padding - kernel) / stride + 1;
    }

    int64_t weight_count() const { return in_channels * out_channels * kernel * kernel; }

    Shape weight_shape() const {
        if (transposed) {
            return Shape{in_channels, out_channels, kernel, kernel};
        }
        return Shape{out_channels, in_channels, kernel, kernel};
    }

    void validate() const {
        if (kernel <= 0 || stride <= 0 || padding < 0 || in_channels <= 0 || out_channels <= 0) {
            throw std::invalid_argument("invalid ConvSpec: k=" + std::to_string(kernel) +
                                        " s=" + std::to_string(stride) +
                                        " p=" + std::to_string(padding));
        }
    }
};

namespace detail {

// Smallest/largest out index o such that 0 <= o*stride + off < in_extent,
// clamped to [0, out_extent). Empty range yields lo > hi.
inline void stride_bounds(int64_t off, int64_t stride, int64_t in_extent, int64_t out_extent,
                          int64_t& lo, int64_t& hi) {
    int64_t a = -off;
    lo = (a > 0) ? (a + stride - 1) / stride : 0;
    hi = (in_extent - 1 - off) / stride;
    if (in_extent - 1 - off < 0) hi = -1;
    if (hi > out_extent - 1) hi = out_extent - 1;
}

template <typename T>
inline void check_conv_args(const Tensor<T>& input, const Tensor<T>& weights,
                            const Tensor<T>& bias, const ConvSpec& spec, const char* op) {
    spec.validate();
    if (input.shape().c != spec.in_channels) {
        throw std::invalid_argument(std::string(op) + ": input has " +
                                    std::to_string(input.shape().c) + " channels, spec expects " +
                                    std::to_string(spec.in_channels));
    }
    if (!(weights.shape() == spec.weight_shape())) {
        throw std::invalid_argument(std::string(op) + ": weights shaped " + weights.shape().str() +
                                    ", spec expects " + spec.weight_shape().str());
    }
    if (bias.numel() != spec.out_channels) {
        throw std::invalid_argument(std::string(op) + ": bias has " + std::to_string(bias.numel()) +
                                    " values, spec expects " + std::to_string(spec.out_channels));
    }
}

}  // namespace detail

// Direct 2-D convolution, NCHW, square kernel, equal strides.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 const ConvSpec& spec) {
    if (spec.transposed) {
        throw std::invalid_argument("conv2d: spec is transposed, use transpose_conv2d");
    }
    detail::check_conv_args(input, weights, bias, spec, "conv2d");

    const int64_t N = input.shape().n, IC = spec.in_channels, IH = input.shape().h,
                  IW = input.shape().w;
    const int64_t OC = spec.out_channels, K = spec.kernel, S = spec.stride, P = spec.padding;
    const int64_t OH = spec.out_extent(IH), OW = spec.out_extent(IW);
    if (OH <= 0 || OW <= 0) {
        throw std::invalid_argument("conv2d: zero-sized spatial output (" + std::to_string(OH) +
                                    "x" + std::to_string(OW) + ") for input " + input.shape().str() +
                                    " with k=" + std::to_string(K) + " s=" + std::to_string(S) +
                                    " p=" + std::to_string(P));
    }

    Tensor<T> out(Shape{N, OC, OH, OW});
    const T* in = input.data().data();
    const T* w = weights.data().data();
    const T* b = bias.data().data();
    T* o = out.data().data();

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t oc = 0; oc < OC; ++oc) {
            T* plane = o + (n * OC + oc) * OH * OW;
            std::fill(plane, plane + OH * OW, b[oc]);
            for (int64_t ic = 0; ic < IC; ++ic) {
                const T* in_plane = in + (n * IC + ic) * IH * IW;
                const T* w_base = w + ((oc * IC + ic) * K) * K;
                for (int64_t ky = 0; ky < K; ++ky) {
                    int64_t ylo, yhi;
                    detail::stride_bounds(ky - P, S, IH, OH, ylo, yhi);
                    for (int64_t kx = 0; kx < K; ++kx) {
                        const T wv = w_base[ky * K + kx];
                        int64_t xlo, xhi;
                        detail::stride_bounds(kx - P, S, IW, OW, xlo, xhi);
                        for (int64_t oy = ylo; oy <= yhi; ++oy) {
                            const T* in_row = in_plane + (oy * S + ky - P) * IW + (kx - P);
                            T* out_row = plane + oy * OW;
                            for (int64_t ox = xlo; ox <= xhi; ++ox) {
                                out_row[ox] += wv * in_row[ox * S];
                            }
                        }
                    }
                }
            }
        }
    }

    Tensor<T> in_t = input, w_t = weights, b_t = bias;
    record_op(input.requires_grad() || weights.requires_grad() || bias.requires_grad(), out,
              [in_t, w_t, b_t, out, spec]() mutable {
                  if (!out.has_grad()) return;
                  const int64_t N = in_t.shape().n, IC = spec.in_channels, IH = in_t.shape().h,
                                IW = in_t.shape().w;
                  const int64_t OC = spec.out_channels, K = spec.kernel, S = spec.stride,
                                P = spec.padding;
                  const int64_t OH = out.shape().h, OW = out.shape().w;
                  const T* g = out.grad().data();
                  const T* in = in_t.data().data();
                  const T* w = w_t.data().data();
                  T* gin = in_t.requires_grad() ? in_t.grad().data() : nullptr;
                  T* gw = w_t.requires_grad() ? w_t.grad().data() : nullptr;
                  T* gb = b_t.requires_grad() ? b_t.grad().data() : nullptr;

                  for (int64_t n = 0; n < N; ++n) {
                      for (int64_t oc = 0; oc < OC; ++oc) {
                          const T* gplane = g + (n * OC + oc) * OH * OW;
                          if (gb != nullptr) {
                              T acc = T(0);
                              for (int64_t i = 0; i < OH * OW; ++i) acc += gplane[i];
                              gb[oc] += acc;
                          }
                          if (gin == nullptr && gw == nullptr) continue;
                          for (int64_t ic = 0; ic < IC; ++ic) {
                              const T* in_plane = in + (n * IC + ic) * IH * IW;
                              T* gin_plane = gin ? gin + (n * IC + ic) * IH * IW : nullptr;
                              const int64_t w_off = (oc * IC + ic) * K * K;
                              for (int64_t ky = 0; ky < K; ++ky) {
                                  int64_t ylo, yhi;
                                  detail::stride_bounds(ky - P, S, IH, OH, ylo, yhi);
                                  for (int64_t kx = 0; kx < K; ++kx) {
                                      int64_t xlo, xhi;
                                      detail::stride_bounds(kx - P, S, IW, OW, xlo, xhi);
                                      const T wv = w[w_off + ky * K + kx];
                                      T wacc = T(0);
                                      for (int64_t oy = ylo; oy <= yhi; ++oy) {
                                          const int64_t in_off = (oy * S + ky - P) * IW + (kx - P);
                                          const T* grow = gplane + oy * OW;
                                          if (gw != nullptr) {
                                              const T* in_row = in_plane + in_off;
                                              for (int64_t ox = xlo; ox <= xhi; ++ox) {
                                                  wacc += grow[ox] * in_row[ox * S];
                                              }
                                          }
                                          if (gin != nullptr) {
                                              T* gin_row = gin_plane + in_off;
                                              for (int64_t ox = xlo; ox <= xhi; ++ox) {
                                                  gin_row[ox * S] += wv * grow[ox];
                                              }
                                          }
                                      }
                                      if (gw != nullptr) gw[w_off + ky * K + kx] += wacc;
                                  }
                              }
                          }
                      }
                  }
              });
    return out;
}

// Transposed convolution (fractional stride upsampling). Output placement is
// the scatter adjoint of conv2d with an equal spec.
template <typename T>
Tensor<T> transpose_conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                           const ConvSpec& spec) {
    if (!spec.transposed) {
        throw std::invalid_argument("transpose_conv2d: spec is not transposed");
    }
    detail::check_conv_args(input, weights, bias, spec, "transpose_conv2d");

    const int64_t N = input.shape().n, IC = spec.in_channels, IH = input.shape().h,
                  IW = input.shape().w;
    const int64_t OC = spec.out_channels, K = spec.kernel, S = spec.stride, P = spec.padding;
    const int64_t OH = spec.out_extent(IH), OW = spec.out_extent(IW);
    if (OH <= 0 || OW <= 0) {
        throw std::invalid_argument("transpose_conv2d: zero-sized spatial output for input " +
                                    input.shape().str());
    }

    Tensor<T> out(Shape{N, OC, OH, OW});
    const T* in = input.data().data();
    const T* w = weights.data().data();
    const T* b = bias.data().data();
    T* o = out.data().data();

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t oc = 0; oc < OC; ++oc) {
            T* plane = o + (n * OC + oc) * OH * OW;
            std::fill(plane, plane + OH * OW, b[oc]);
            for (int64_t ic = 0; ic < IC; ++ic) {
                const T* in_plane = in + (n * IC + ic) * IH * IW;
                const T* w_base = w + ((ic * OC + oc) * K) * K;
                for (int64_t ky = 0; ky < K; ++ky) {
                    int64_t ylo, yhi;
                    detail::stride_bounds(ky - P, S, OH, IH, ylo, yhi);
                    for (int64_t kx = 0; kx < K; ++kx) {
                        const T wv = w_base[ky * K + kx];
                        int64_t xlo, xhi;
                        detail::stride_bounds(kx - P, S, OW, IW, xlo, xhi);
                        for (int64_t iy = ylo; iy <= yhi; ++iy) {
                            const T* in_row = in_plane + iy * IW;
                            T* out_row = plane + (iy * S + ky - P) * OW + (kx - P);
                            for (int64_t ix = xlo; ix <= xhi; ++ix) {
                                out_row[ix * S] += wv * in_row[ix];
                            }
                        }
                    }
                }
            }
        }
    }

    Tensor<T> in_t = input, w_t = weights, b_t = bias;
    record_op(input.requires_grad() || weights.requires_grad() || bias.requires_grad(), out,
              [in_t, w_t, b_t, out, spec]() mutable {
                  if (!out.has_grad()) return;
                  const int64_t N = in_t.shape().n, IC = spec.in_channels, IH = in_t.shape().h,
                                IW = in_t.shape().w;
                  const int64_t OC = spec.out_channels, K = spec.kernel, S = spec.stride,
                                P = spec.padding;
                  const int64_t OH = out.shape().h, OW = out.shape().w;
                  const T* g = out.grad().data();
                  const T* in = in_t.data().data();
                  const T* w = w_t.data().data();
                  T* gin = in_t.requires_grad() ? in_t.grad().data() : nullptr;
                  T* gw = w_t.requires_grad() ? w_t.grad().data() : nullptr;
                  T* gb = b_t.requires_grad() ? b_t.grad().data() : nullptr;

                  for (int64_t n = 0; n < N; ++n) {
                      for (int64_t oc = 0; oc < OC; ++oc) {
                          const T* gplane = g + (n * OC + oc) * OH * OW;
                          if (gb != nullptr) {
                              T acc = T(0);
                              for (int64_t i = 0; i < OH * OW; ++i) acc += gplane[i];
                              gb[oc] += acc;
                          }
                          if (gin == nullptr && gw == nullptr) continue;
                          for (int64_t ic = 0; ic < IC; ++ic) {
                              const T* in_plane = in + (n * IC + ic) * IH * IW;
                              T* gin_plane = gin ? gin + (n * IC + ic) * IH * IW : nullptr;
                              const int64_t w_off = (ic * OC + oc) * K * K;
                              for (int64_t ky = 0; ky < K; ++ky) {
                                  int64_t ylo, yhi;
                                  detail::stride_bounds(ky - P, S, OH, IH, ylo, yhi);
                                  for (int64_t kx = 0; kx < K; ++kx) {
                                      int64_t xlo, xhi;
                                      detail::stride_bounds(kx - P, S, OW, IW, xlo, xhi);
                                      const T wv = w[w_off + ky * K + kx];
                                      T wacc = T(0);
                                      for (int64_t iy = ylo; iy <= yhi; ++iy) {
                                          const int64_t out_off = (iy * S + ky - P) * OW + (kx - P);
                                          const T* grow = gplane + out_off;
                                          const T* in_row = in_plane + iy * IW;
                                          T* gin_row = gin_plane ? gin_plane + iy * IW : nullptr;
                                          for (int64_t ix = xlo; ix <= xhi; ++ix) {
                                              const T gv = grow[ix * S];
                                              if (gw != nullptr) wacc += gv * in_row[ix];
                                              if (gin_row != nullptr) gin_row[ix] += wv * gv;
                                          }
                                      }
                                      if (gw != nullptr) gw[w_off + ky * K + kx] += wacc;
                                  }
                              }
                          }
                      }
                  }
              });
    return out;
}

// Elementwise max(0, x). Derivative at exactly 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out(input.shape());
    const auto& in = input.data();
    auto& o = out.data();
    for (size_t i = 0; i < in.size(); ++i) {
        o[i] = in[i] > T(0) ? in[i] : T(0);
    }
    Tensor<T> in_t = input;
    record_op(input.requires_grad(), out, [in_t, out]() mutable {
        if (!out.has_grad()) return;
        if (!in_t.requires_grad()) return;
        const auto& g = out.grad();
        const auto& in = in_t.data();
        auto& gin = in_t.grad();
        for (size_t i = 0; i < g.size(); ++i) {
            if (in[i] > T(0)) gin[i] += g[i];
        }
    });
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& o = out.data();
    for (size_t i = 0; i < av.size(); ++i) o[i] = av[i] + bv[i];

    Tensor<T> a_t = a, b_t = b;
    record_op(a.requires_grad() || b.requires_grad(), out, [a_t, b_t, out]() mutable {
        if (!out.has_grad()) return;
        const auto& g = out.grad();
        if (a_t.requires_grad()) {
            auto& ga = a_t.grad();
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b_t.requires_grad()) {
            auto& gb = b_t.grad();
            for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
    return out;
}

// Channel concatenation in argument order.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_channels: no inputs");
    }
    const Shape s0 = parts[0].shape();
    int64_t total_c = 0;
    bool any_grad = false;
    for (size_t i = 0; i < parts.size(); ++i) {
        const Shape si = parts[i].shape();
        if (si.n != s0.n || si.h != s0.h || si.w != s0.w) {
            throw std::invalid_argument("concat_channels: spatial mismatch between part 0 (" +
                                        s0.str() + ") and part " + std::to_string(i) + " (" +
                                        si.str() + ")");
        }
        total_c += si.c;
        any_grad = any_grad || parts[i].requires_grad();
    }
    Tensor<T> out(Shape{s0.n, total_c, s0.h, s0.w});
    const int64_t plane = s0.h * s0.w;
    T* o = out.data().data();
    for (int64_t n = 0; n < s0.n; ++n) {
        int64_t c_off = 0;
        for (const auto& p : parts) {
            const int64_t pc = p.shape().c;
            const T* src = p.data().data() + n * pc * plane;
            std::copy(src, src + pc * plane, o + (n * total_c + c_off) * plane);
            c_off += pc;
        }
    }

    std::vector<Tensor<T>> parts_t = parts;
    record_op(any_grad, out, [parts_t, out, plane, total_c]() mutable {
        if (!out.has_grad()) return;
        const T* g = out.grad().data();
        const int64_t N = out.shape().n;
        for (int64_t n = 0; n < N; ++n) {
            int64_t c_off = 0;
            for (auto& p : parts_t) {
                const int64_t pc = p.shape().c;
                if (p.requires_grad()) {
                    T* gp = p.grad().data() + n * pc * plane;
                    const T* gsrc = g + (n * total_c + c_off) * plane;
                    for (int64_t i = 0; i < pc * plane; ++i) gp[i] += gsrc[i];
                }
                c_off += pc;
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor) {
    Tensor<T> out(input.shape());
    const auto& in = input.data();
    auto& o = out.data();
    for (size_t i = 0; i < in.size(); ++i) o[i] = in[i] * factor;
    Tensor<T> in_t = input;
    record_op(input.requires_grad(), out, [in_t, out, factor]() mutable {
        if (!out.has_grad() || !in_t.requires_grad()) return;
        const auto& g = out.grad();
        auto& gin = in_t.grad();
        for (size_t i = 0; i < g.size(); ++i) gin[i] += factor * g[i];
    });
    return out;
}

// Nearest-neighbor integer upsampling; value_scale multiplies sample values
// (used to keep disparity maps scale-consistent across resolutions).
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, int64_t factor, T value_scale = T(1)) {
    if (factor < 1) {
        throw std::invalid_argument("upsample_nearest: factor must be >= 1");
    }
    const Shape s = input.shape();
    Tensor<T> out(Shape{s.n, s.c, s.h * factor, s.w * factor});
    const T* in = input.data().data();
    T* o = out.data().data();
    const int64_t OH = s.h * factor, OW = s.w * factor;
    for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
        const T* ip = in + nc * s.h * s.w;
        T* op = o + nc * OH * OW;
        for (int64_t oy = 0; oy < OH; ++oy) {
            const T* irow = ip + (oy / factor) * s.w;
            T* orow = op + oy * OW;
            for (int64_t ox = 0; ox < OW; ++ox) {
                orow[ox] = irow[ox / factor] * value_scale;
            }
        }
    }
    Tensor<T> in_t = input;
    record_op(input.requires_grad(), out, [in_t, out, factor, value_scale]() mutable {
        if (!out.has_grad() || !in_t.requires_grad()) return;
        const Shape s = in_t.shape();
        const int64_t OH = s.h * factor, OW = s.w * factor;
        const T* g = out.grad().data();
        T* gin = in_t.grad().data();
        for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
            const T* gp = g + nc * OH * OW;
            T* gip = gin + nc * s.h * s.w;
            for (int64_t oy = 0; oy < OH; ++oy) {
                const T* grow = gp + oy * OW;
                T* girow = gip + (oy / factor) * s.w;
                for (int64_t ox = 0; ox < OW; ++ox) {
                    girow[ox / factor] += value_scale * grow[ox];
                }
            }
        }
    });
    return out;
}

// Scalar sum over all elements.
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& input) {
    T acc = T(0);
    for (T v : input.data()) acc += v;
    Tensor<T> out = Tensor<T>::full(Shape{1, 1, 1, 1}, acc);
    Tensor<T> in_t = input;
    record_op(input.requires_grad(), out, [in_t, out]() mutable {
        if (!out.has_grad() || !in_t.requires_grad()) return;
        const T g = out.grad()[0];
        for (auto& v : in_t.grad()) v += g;
    });
    return out;
}

// Throws when any value is NaN or infinite; `where` names the producing stage.
template <typename T>
inline void check_finite(const Tensor<T>& t, const std::string& where) {
    if (!t.all_finite()) {
        throw std::runtime_error("non-finite values detected in " + where);
    }
}

}  // namespace msfnet
