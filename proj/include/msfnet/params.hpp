#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "msfnet/nn_ops.hpp"
#include "msfnet/tensor.hpp"

namespace msfnet {

// Ordered collection of named learnable tensors. Order is creation order and
// is the canonical iteration order for the optimizer and checkpoints.
template <typename T>
class ParamSet {
  public:
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<T>& create(const std::string& name, Shape shape) {
        if (contains(name)) {
            throw std::invalid_argument("parameter already registered: " + name);
        }
        index_[name] = names_.size();
        names_.push_back(name);
        tensors_.emplace_back(shape, /*requires_grad=*/true);
        return tensors_.back();
    }

    Tensor<T>& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw std::invalid_argument("unknown parameter: " + name);
        }
        return tensors_[it->second];
    }
    const Tensor<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw std::invalid_argument("unknown parameter: " + name);
        }
        return tensors_[it->second];
    }

    size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    Tensor<T>& at(size_t i) { return tensors_[i]; }
    const Tensor<T>& at(size_t i) const { return tensors_[i]; }

    int64_t scalar_count() const {
        int64_t total = 0;
        for (const auto& t : tensors_) total += t.numel();
        return total;
    }

    void zero_grads() {
        for (auto& t : tensors_) t.zero_grad();
    }

  private:
    std::vector<std::string> names_;
    std::vector<Tensor<T>> tensors_;
    std::unordered_map<std::string, size_t> index_;
};

// Fan-in-scaled uniform init, bound = sqrt(1 / fan_in). For transposed
// weights (in, out, k, k) the fan is taken over dim 1, matching the usual
// deconv convention. Biases start at zero.
template <typename T>
void init_conv_params(Tensor<T>& weight, Tensor<T>& bias, const ConvSpec& spec,
                      std::mt19937& rng) {
    const int64_t fan_in =
        (spec.transposed ? spec.out_channels : spec.in_channels) * spec.kernel * spec.kernel;
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : weight.data()) v = static_cast<T>(dist(rng));
    for (auto& v : bias.data()) v = T(0);
}

// One named (de)conv layer. Several graph nodes may apply the same layer
// (shared weights across the Siamese branches).
template <typename T>
struct ConvLayer {
    std::string param_name;
    ConvSpec spec;
    bool relu_after = true;
    bool zero_init = false;
    Tensor<T> weight;
    Tensor<T> bias;

    void init(ParamSet<T>& params, std::mt19937& rng) {
        if (params.contains(param_name + ".weight")) {
            weight = params.get(param_name + ".weight");
            bias = params.get(param_name + ".bias");
            return;
        }
        weight = params.create(param_name + ".weight", spec.weight_shape());
        bias = params.create(param_name + ".bias", Shape{1, spec.out_channels, 1, 1});
        if (!zero_init) {
            init_conv_params(weight, bias, spec, rng);
        }
    }

    // Attach to an existing parameter set (checkpoint restore path).
    void attach(ParamSet<T>& params) {
        weight = params.get(param_name + ".weight");
        bias = params.get(param_name + ".bias");
    }

    int64_t scalar_count() const { return spec.weight_count() + spec.out_channels; }

    Tensor<T> apply(const Tensor<T>& x, const std::string& node_name) const {
        Tensor<T> y;
        try {
            y = spec.transposed ? transpose_conv2d(x, weight, bias, spec)
                                : conv2d(x, weight, bias, spec);
        } catch (const std::exception& e) {
            throw std::runtime_error("layer " + node_name + ": " + e.what());
        }
        check_finite(y, node_name);
        return relu_after ? relu(y) : y;
    }
};

// One line of the graph-description dump:
// "name kernel stride pad in_ch out_ch WxH inputs..."
struct WiringRow {
    std::string name;
    std::string k = "-";
    std::string s = "-";
    std::string p = "-";
    int64_t in_ch = 0;
    int64_t out_ch = 0;
    int64_t out_w = 0;
    int64_t out_h = 0;
    std::vector<std::string> inputs;

    std::string line() const {
        std::ostringstream os;
        os << name << " " << k << " " << s << " " << p << " " << in_ch << " " << out_ch << " "
           << out_w << "x" << out_h;
        for (const auto& in : inputs) os << " " << in;
        return os.str();
    }
};

inline WiringRow conv_row(const std::string& name, const ConvSpec& spec, int64_t out_w,
                          int64_t out_h, std::vector<std::string> inputs) {
    WiringRow r;
    r.name = name;
    r.k = std::to_string(spec.kernel);
    r.s = std::to_string(spec.stride);
    r.p = std::to_string(spec.padding);
    r.in_ch = spec.in_channels;
    r.out_ch = spec.out_channels;
    r.out_w = out_w;
    r.out_h = out_h;
    r.inputs = std::move(inputs);
    return r;
}

inline WiringRow plain_row(const std::string& name, int64_t in_ch, int64_t out_ch, int64_t out_w,
                           int64_t out_h, std::vector<std::string> inputs) {
    WiringRow r;
    r.name = name;
    r.in_ch = in_ch;
    r.out_ch = out_ch;
    r.out_w = out_w;
    r.out_h = out_h;
    r.inputs = std::move(inputs);
    return r;
}

}  // namespace msfnet
