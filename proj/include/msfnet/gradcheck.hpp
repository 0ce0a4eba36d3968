#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msfnet/nn_ops.hpp"
#include "msfnet/stereo_ops.hpp"
#include "msfnet/tape.hpp"
#include "msfnet/tensor.hpp"

namespace msfnet {

struct GradCheck {
    std::string name;
    double max_rel_err = 0.0;
    int64_t probes = 0;
};

inline double rel_err(double fd, double an) {
    const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
    return std::abs(fd - an) / denom;
}

// Central finite differences against the tape gradient. `make_loss` must
// rebuild the scalar loss from `inputs` every call; it runs once under a
// recording tape and twice per probe without one. Probes are strided so big
// tensors stay cheap.
template <typename MakeLoss>
GradCheck check_gradients(const std::string& name, std::vector<Tensor<double>> inputs,
                          MakeLoss make_loss, double step = 1e-4,
                          int64_t max_probes_per_input = 200) {
    for (auto& t : inputs) t.set_requires_grad(true);

    Tape<double> tape;
    Tensor<double> loss;
    {
        typename Tape<double>::Scope scope(tape);
        loss = make_loss();
    }
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) {
        analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(t.numel(), 0.0));
    }

    GradCheck r;
    r.name = name;
    for (size_t i = 0; i < inputs.size(); ++i) {
        auto& data = inputs[i].data();
        const int64_t n = inputs[i].numel();
        const int64_t stride = std::max<int64_t>(1, n / max_probes_per_input);
        for (int64_t j = 0; j < n; j += stride) {
            const double orig = data[static_cast<size_t>(j)];
            data[static_cast<size_t>(j)] = orig + step;
            const double lp = make_loss().data()[0];
            data[static_cast<size_t>(j)] = orig - step;
            const double lm = make_loss().data()[0];
            data[static_cast<size_t>(j)] = orig;
            const double fd = (lp - lm) / (2.0 * step);
            r.max_rel_err = std::max(r.max_rel_err, rel_err(fd, analytic[i][static_cast<size_t>(j)]));
            ++r.probes;
        }
    }
    return r;
}

namespace detail {

inline Tensor<double> rand_uniform(Shape s, double lo, double hi, std::mt19937& rng) {
    Tensor<double> t(s);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

// Values in ±[margin, 1]; keeps ReLU and absolute-value kinks at a safe
// distance from every finite-difference probe.
inline Tensor<double> rand_signed(Shape s, double margin, std::mt19937& rng) {
    Tensor<double> t(s);
    std::uniform_real_distribution<double> mag(margin, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
    return t;
}

// Disparities whose fractional part stays in [0.2, 0.8], so probes never
// cross a bilinear cell boundary or the border clamp.
inline Tensor<double> rand_disparity(Shape s, int64_t max_whole, std::mt19937& rng) {
    Tensor<double> t(s);
    std::uniform_int_distribution<int64_t> whole(0, max_whole);
    std::uniform_real_distribution<double> frac(0.2, 0.8);
    for (auto& v : t.data()) v = static_cast<double>(whole(rng)) + frac(rng);
    return t;
}

}  // namespace detail

// Named finite-difference checks covering every differentiable operator.
// All should come in below 1e-5.
inline std::vector<GradCheck> run_gradient_suite(uint64_t seed = 7) {
    std::mt19937 rng(static_cast<uint32_t>(seed));
    std::vector<GradCheck> results;

    auto conv_case = [&](const std::string& name, ConvSpec spec, Shape in_shape) {
        Tensor<double> x = detail::rand_signed(in_shape, 0.05, rng);
        Tensor<double> w = detail::rand_signed(spec.weight_shape(), 0.05, rng);
        Tensor<double> b = detail::rand_signed(Shape{1, spec.out_channels, 1, 1}, 0.05, rng);
        results.push_back(check_gradients(name, {x, w, b}, [=]() {
            return reduce_sum(spec.transposed ? transpose_conv2d(x, w, b, spec)
                                              : conv2d(x, w, b, spec));
        }));
    };
    conv_case("conv2d_k3s1p1", ConvSpec{3, 1, 1, 3, 4, false}, Shape{2, 3, 6, 7});
    conv_case("conv2d_k3s2p1", ConvSpec{3, 2, 1, 3, 4, false}, Shape{2, 3, 7, 9});
    conv_case("conv2d_k5s2p2", ConvSpec{5, 2, 2, 2, 3, false}, Shape{1, 2, 9, 11});
    conv_case("conv2d_k7s2p3", ConvSpec{7, 2, 3, 2, 2, false}, Shape{1, 2, 10, 12});
    conv_case("conv2d_k1s1p0", ConvSpec{1, 1, 0, 5, 3, false}, Shape{2, 5, 4, 6});
    conv_case("conv2d_k3s4p1", ConvSpec{3, 4, 1, 2, 3, false}, Shape{1, 2, 12, 16});
    conv_case("deconv_k4s2p1", ConvSpec{4, 2, 1, 3, 4, true}, Shape{2, 3, 4, 5});
    conv_case("deconv_k4s4p0", ConvSpec{4, 4, 0, 2, 3, true}, Shape{1, 2, 3, 4});
    conv_case("deconv_k8s4p2", ConvSpec{8, 4, 2, 2, 2, true}, Shape{1, 2, 3, 5});

    {
        Tensor<double> x = detail::rand_signed(Shape{2, 3, 5, 6}, 0.05, rng);
        results.push_back(
            check_gradients("relu", {x}, [=]() { return reduce_sum(relu(x)); }));
    }
    {
        Tensor<double> a = detail::rand_signed(Shape{2, 3, 4, 5}, 0.05, rng);
        Tensor<double> b = detail::rand_signed(Shape{2, 3, 4, 5}, 0.05, rng);
        results.push_back(
            check_gradients("add", {a, b}, [=]() { return reduce_sum(add(a, b)); }));
    }
    {
        Tensor<double> a = detail::rand_signed(Shape{1, 2, 4, 5}, 0.05, rng);
        Tensor<double> b = detail::rand_signed(Shape{1, 3, 4, 5}, 0.05, rng);
        Tensor<double> c = detail::rand_signed(Shape{1, 1, 4, 5}, 0.05, rng);
        results.push_back(check_gradients("concat_channels", {a, b, c}, [=]() {
            return reduce_sum(concat_channels<double>({a, b, c}));
        }));
    }
    {
        Tensor<double> x = detail::rand_signed(Shape{1, 2, 3, 4}, 0.05, rng);
        results.push_back(
            check_gradients("scale", {x}, [=]() { return reduce_sum(scale(x, 0.37)); }));
    }
    {
        Tensor<double> x = detail::rand_signed(Shape{1, 2, 3, 4}, 0.05, rng);
        results.push_back(check_gradients("upsample_nearest", {x}, [=]() {
            return reduce_sum(upsample_nearest(x, 2, 2.0));
        }));
    }
    {
        Tensor<double> l = detail::rand_signed(Shape{2, 4, 5, 9}, 0.05, rng);
        Tensor<double> r = detail::rand_signed(Shape{2, 4, 5, 9}, 0.05, rng);
        results.push_back(check_gradients("correlation_1d", {l, r}, [=]() {
            return reduce_sum(correlation_1d(l, r, CorrSpec{3}));
        }));
    }
    {
        Tensor<double> src = detail::rand_uniform(Shape{1, 3, 4, 12}, -1.0, 1.0, rng);
        Tensor<double> d = detail::rand_disparity(Shape{1, 1, 4, 12}, 3, rng);
        results.push_back(check_gradients("warp_source", {src}, [=]() {
            return reduce_sum(warp_horizontal(src, d));
        }));
        results.push_back(check_gradients("warp_disparity", {d}, [=]() {
            return reduce_sum(warp_horizontal(src, d));
        }));
    }
    {
        Tensor<double> a = detail::rand_uniform(Shape{1, 2, 4, 5}, 1.0, 2.0, rng);
        Tensor<double> b = detail::rand_uniform(Shape{1, 2, 4, 5}, -1.0, 0.5, rng);
        results.push_back(check_gradients("error_map", {a, b}, [=]() {
            return reduce_sum(error_map(a, b));
        }));
    }
    {
        Tensor<double> pred = detail::rand_uniform(Shape{1, 1, 5, 6}, 2.0, 3.0, rng);
        Tensor<double> gt = detail::rand_uniform(Shape{1, 1, 5, 6}, 0.0, 1.0, rng);
        Tensor<double> valid(Shape{1, 1, 5, 6});
        std::bernoulli_distribution keep(0.7);
        for (auto& v : valid.data()) v = keep(rng) ? 1.0 : 0.0;
        valid.data()[0] = 1.0;
        results.push_back(
            check_gradients("l1_loss", {pred}, [=]() { return l1_loss(pred, gt, valid); }));
    }
    {
        // Eq.-1 guidance as a function of disparity: left details vs the
        // warped right details, pushed through the absolute error.
        Tensor<double> left = detail::rand_uniform(Shape{1, 3, 4, 12}, 0.0, 0.5, rng);
        Tensor<double> right = detail::rand_uniform(Shape{1, 3, 4, 12}, 1.5, 2.0, rng);
        Tensor<double> d = detail::rand_disparity(Shape{1, 1, 4, 12}, 3, rng);
        results.push_back(check_gradients("guidance_disparity", {d}, [=]() {
            return reduce_sum(error_map(left, warp_horizontal(right, d)));
        }));
    }
    return results;
}

}  // namespace msfnet
