#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/params.hpp"
#include "msfnet/tensor.hpp"

namespace msfnet {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;  // first moments, aligned with the parameter set
    std::vector<Tensor<T>> v;  // second moments
    int64_t step = 0;

    void init(const ParamSet<T>& params) {
        m.clear();
        v.clear();
        step = 0;
        for (size_t i = 0; i < params.size(); ++i) {
            m.emplace_back(params.at(i).shape());
            v.emplace_back(params.at(i).shape());
        }
    }
};

// Bias-corrected Adam update over every parameter tensor.
template <typename T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, double lr,
               const AdamConfig& cfg = AdamConfig{}) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: moment buffers do not match parameter set");
    }
    state.step += 1;
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(state.step))));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(state.step))));
    const T step_size = static_cast<T>(lr);
    const T eps = static_cast<T>(cfg.eps);

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = params.at(i);
        if (!p.has_grad()) continue;
        const auto& g = p.grad();
        for (int64_t j = 0; j < p.numel(); ++j) {
            if (!std::isfinite(static_cast<double>(g[j]))) {
                throw std::runtime_error("adam_step: non-finite gradient in " + params.names()[i]);
            }
        }
        auto& mv = state.m[i].data();
        auto& vv = state.v[i].data();
        auto& pv = p.data();
        for (int64_t j = 0; j < p.numel(); ++j) {
            mv[j] = b1 * mv[j] + (T(1) - b1) * g[j];
            vv[j] = b2 * vv[j] + (T(1) - b2) * g[j] * g[j];
            pv[j] -= step_size * (mv[j] * c1) / (std::sqrt(vv[j] * c2) + eps);
        }
    }
}

// Piecewise-constant decay: either halve every fixed interval or at explicit
// boundaries. An iteration equal to a boundary already uses the reduced rate.
struct LrSchedule {
    double base = 1e-4;
    double factor = 0.5;
    int64_t halve_every = 0;           // 0 disables the periodic rule
    std::vector<int64_t> boundaries;   // takes precedence when non-empty

    double at(int64_t iteration) const {
        if (iteration < 0) {
            throw std::invalid_argument("lr_schedule: negative iteration");
        }
        int64_t drops = 0;
        if (!boundaries.empty()) {
            for (int64_t b : boundaries) {
                if (iteration >= b) ++drops;
            }
        } else if (halve_every > 0) {
            drops = iteration / halve_every;
        }
        return base * std::pow(factor, static_cast<double>(drops));
    }
};

}  // namespace msfnet
