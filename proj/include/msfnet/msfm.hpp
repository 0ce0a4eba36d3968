#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/params.hpp"
#include "msfnet/stereo_ops.hpp"

namespace msfnet {

// Width-scaled channel count: ceil(base * m), floor of 2.
inline int64_t scaled_channels(int64_t base, double multiplier) {
    const int64_t c = static_cast<int64_t>(std::ceil(static_cast<double>(base) * multiplier - 1e-9));
    return c < 2 ? 2 : c;
}

struct MsfmConfig {
    double width_multiplier = 1.0;
    bool relu_on_reducers = false;  // the 1x1 fusion projections are linear by default

    void validate() const {
        if (!(width_multiplier > 0.0 && width_multiplier <= 1.0)) {
            throw std::invalid_argument("width_multiplier must be in (0, 1]");
        }
    }
    int64_t ch(int64_t base) const { return scaled_channels(base, width_multiplier); }
};

template <typename T>
struct MsfmOutputs {
    Tensor<T> local_prior_feature;               // 1/8 res, 64m channels, left branch
    Tensor<T> local_details_left;                // full res, 32m channels
    Tensor<T> local_details_right;
    Tensor<T> compressed_left;                   // 1/2 res, 16m channels
    Tensor<T> compressed_right;
    Tensor<T> fused_eighth_left;                 // 1/8 res stack-3 fusion, 128m channels
    Tensor<T> fused_eighth_right;
};

// Siamese multi-scale feature extractor. Five stacked conv pairs per branch
// with shared weights, element-wise fusion of each stride-2/stride-1 pair,
// and three heads: the 1/8-res prior feature (left branch only), the
// full-res detail features, and the 1/2-res compressed features.
template <typename T>
class Msfm {
  public:
    explicit Msfm(const MsfmConfig& config) : cfg_(config) {
        cfg_.validate();
        const auto c = [&](int64_t base) { return cfg_.ch(base); };

        stack_[0] = {mk("msfm.conv_1", 7, 2, 3, 3, c(32)), mk("msfm.conv_1_1", 3, 1, 1, c(32), c(32))};
        stack_[1] = {mk("msfm.conv_2", 5, 2, 2, c(32), c(64)), mk("msfm.conv_2_1", 3, 1, 1, c(64), c(64))};
        stack_[2] = {mk("msfm.conv_3", 5, 2, 2, c(64), c(128)), mk("msfm.conv_3_1", 3, 1, 1, c(128), c(128))};
        stack_[3] = {mk("msfm.conv_4", 3, 2, 1, c(128), c(256)), mk("msfm.conv_4_1", 3, 1, 1, c(256), c(256))};
        stack_[4] = {mk("msfm.conv_5", 3, 2, 1, c(256), c(512)), mk("msfm.conv_5_1", 3, 1, 1, c(512), c(512))};

        down_sample_1a_ = mk("msfm.down_sample_1a", 3, 4, 1, c(32), c(32));
        upsample_5a_ = mkt("msfm.upsample_5a", 4, 4, 0, c(512), c(512));
        prior_reduce_ = mk("msfm.conv_convat1_5_3a", 1, 1, 0, c(32) + c(512) + c(128), c(64));
        prior_reduce_.relu_after = cfg_.relu_on_reducers;

        upsample_2_ = mkt("msfm.upsample_2", 8, 4, 2, c(64), c(32));
        upsample_1_ = mkt("msfm.upsample_1", 4, 2, 1, c(32), c(32));
        detail_reduce_ = mk("msfm.conv_convat", 1, 1, 0, c(32) + c(32), c(32));
        detail_reduce_.relu_after = cfg_.relu_on_reducers;

        compress_ = mk("msfm.conv_1_r", 3, 1, 1, c(32), c(16));
    }

    void init_params(ParamSet<T>& params, std::mt19937& rng) {
        for (auto& s : stack_) {
            s.first.init(params, rng);
            s.second.init(params, rng);
        }
        down_sample_1a_.init(params, rng);
        upsample_5a_.init(params, rng);
        prior_reduce_.init(params, rng);
        upsample_2_.init(params, rng);
        upsample_1_.init(params, rng);
        detail_reduce_.init(params, rng);
        compress_.init(params, rng);
    }

    void attach_params(ParamSet<T>& params) {
        for (auto& s : stack_) {
            s.first.attach(params);
            s.second.attach(params);
        }
        down_sample_1a_.attach(params);
        upsample_5a_.attach(params);
        prior_reduce_.attach(params);
        upsample_2_.attach(params);
        upsample_1_.attach(params);
        detail_reduce_.attach(params);
        compress_.attach(params);
    }

    static void validate_resolution(const Shape& s) {
        if (s.c != 3) {
            throw std::invalid_argument("msfm expects 3-channel input, got " + s.str());
        }
        if (s.h % 64 != 0 || s.w % 64 != 0) {
            throw std::invalid_argument("msfm input resolution " + std::to_string(s.h) + "x" +
                                        std::to_string(s.w) + " not divisible by 64");
        }
    }

    MsfmOutputs<T> forward(const Tensor<T>& left, const Tensor<T>& right) const {
        validate_resolution(left.shape());
        require_same_shape(left, right, "msfm_forward");

        Branch a = run_branch(left, "a");
        Branch b = run_branch(right, "b");

        // Local Prior Feature: fuse scales 1/2, 1/32, 1/8 at 1/8 resolution.
        Tensor<T> ds1 = down_sample_1a_.apply(a.ew1, "down_sample_1a");
        Tensor<T> us5 = upsample_5a_.apply(a.ew5, "upsample_5a");
        Tensor<T> prior =
            prior_reduce_.apply(concat_channels<T>({ds1, us5, a.ew3}), "conv_convat1_5_3a");

        MsfmOutputs<T> out;
        out.local_prior_feature = prior;
        out.local_details_left = details(a, "a");
        out.local_details_right = details(b, "b");
        out.compressed_left = compress_.apply(a.c1, "conv_1a_r");
        out.compressed_right = compress_.apply(b.c1, "conv_1b_r");
        out.fused_eighth_left = a.ew3;
        out.fused_eighth_right = b.ew3;
        return out;
    }

    int64_t parameter_count() const {
        int64_t total = 0;
        for (const auto& s : stack_) {
            total += s.first.scalar_count() + s.second.scalar_count();
        }
        total += down_sample_1a_.scalar_count() + upsample_5a_.scalar_count() +
                 prior_reduce_.scalar_count() + upsample_2_.scalar_count() +
                 upsample_1_.scalar_count() + detail_reduce_.scalar_count() +
                 compress_.scalar_count();
        return total;
    }

    void append_wiring(std::vector<WiringRow>& rows, int64_t h, int64_t w) const {
        // Resolutions per scale; index k = downscale exponent.
        auto res_h = [&](int k) { return h >> k; };
        auto res_w = [&](int k) { return w >> k; };

        const char* img[2] = {"image_left", "image_right"};
        const char* br[2] = {"a", "b"};
        for (int i = 0; i < 5; ++i) {
            const auto& first = stack_[i].first.spec;
            const auto& second = stack_[i].second.spec;
            const std::string num = std::to_string(i + 1);
            for (int s = 0; s < 2; ++s) {
                rows.push_back(conv_row("conv_" + num + br[s], first, res_w(i + 1), res_h(i + 1),
                                        {i == 0 ? img[s] : "conv_" + std::to_string(i) + br[s] + "_1"}));
            }
            for (int s = 0; s < 2; ++s) {
                rows.push_back(conv_row("conv_" + num + br[s] + "_1", second, res_w(i + 1),
                                        res_h(i + 1), {"conv_" + num + br[s]}));
            }
        }
        auto add_row = [&](const std::string& name, int64_t ch, int k, const std::string& a,
                           const std::string& b) {
            rows.push_back(plain_row(name, ch, ch, res_w(k), res_h(k), {a, b}));
        };
        add_row("element_wise_1a", cfg_.ch(32), 1, "conv_1a", "conv_1a_1");
        add_row("element_wise_3a", cfg_.ch(128), 3, "conv_3a", "conv_3a_1");
        add_row("element_wise_5a", cfg_.ch(512), 5, "conv_5a", "conv_5a_1");
        rows.push_back(conv_row("down_sample_1a", down_sample_1a_.spec, res_w(3), res_h(3),
                                {"element_wise_1a"}));
        rows.push_back(
            conv_row("upsample_5a", upsample_5a_.spec, res_w(3), res_h(3), {"element_wise_5a"}));
        rows.push_back(conv_row("conv_convat1_5_3a", prior_reduce_.spec, res_w(3), res_h(3),
                                {"down_sample_1a", "upsample_5a", "element_wise_3a"}));
        add_row("element_wise_2a", cfg_.ch(64), 2, "conv_2a", "conv_2a_1");
        rows.push_back(
            conv_row("upsample_2a", upsample_2_.spec, res_w(0), res_h(0), {"element_wise_2a"}));
        rows.push_back(
            conv_row("upsample_1a", upsample_1_.spec, res_w(0), res_h(0), {"element_wise_1a"}));
        rows.push_back(conv_row("conv_convat_a", detail_reduce_.spec, res_w(0), res_h(0),
                                {"upsample_1a", "upsample_2a"}));
        add_row("element_wise_1b", cfg_.ch(32), 1, "conv_1b", "conv_1b_1");
        add_row("element_wise_2b", cfg_.ch(64), 2, "conv_2b", "conv_2b_1");
        add_row("element_wise_3b", cfg_.ch(128), 3, "conv_3b", "conv_3b_1");
        rows.push_back(
            conv_row("upsample_2b", upsample_2_.spec, res_w(0), res_h(0), {"element_wise_2b"}));
        rows.push_back(
            conv_row("upsample_1b", upsample_1_.spec, res_w(0), res_h(0), {"element_wise_1b"}));
        rows.push_back(conv_row("conv_convat_b", detail_reduce_.spec, res_w(0), res_h(0),
                                {"upsample_1b", "upsample_2b"}));
        rows.push_back(conv_row("conv_1a_r", compress_.spec, res_w(1), res_h(1), {"conv_1a"}));
        rows.push_back(conv_row("conv_1b_r", compress_.spec, res_w(1), res_h(1), {"conv_1b"}));
    }

    const MsfmConfig& config() const { return cfg_; }

  private:
    struct Branch {
        Tensor<T> c1;           // first conv output (compressed-feature source)
        Tensor<T> ew1, ew2, ew3, ew5;
    };

    static ConvLayer<T> mk(const std::string& name, int64_t k, int64_t s, int64_t p, int64_t in,
                           int64_t out) {
        ConvLayer<T> l;
        l.param_name = name;
        l.spec = ConvSpec{k, s, p, in, out, false};
        return l;
    }
    static ConvLayer<T> mkt(const std::string& name, int64_t k, int64_t s, int64_t p, int64_t in,
                            int64_t out) {
        ConvLayer<T> l;
        l.param_name = name;
        l.spec = ConvSpec{k, s, p, in, out, true};
        return l;
    }

    Branch run_branch(const Tensor<T>& image, const std::string& suffix) const {
        Branch br;
        Tensor<T> x = image;
        for (int i = 0; i < 5; ++i) {
            const std::string num = std::to_string(i + 1);
            Tensor<T> first = stack_[i].first.apply(x, "conv_" + num + suffix);
            Tensor<T> second = stack_[i].second.apply(first, "conv_" + num + suffix + "_1");
            // Each stage feeds the next from its stride-1 conv; the fused sum
            // is a side output. Stack 4 has none, stack 5 fuses on a only.
            if (i == 0) {
                br.c1 = first;
                br.ew1 = add(first, second);
            } else if (i == 1) {
                br.ew2 = add(first, second);
            } else if (i == 2) {
                br.ew3 = add(first, second);
            } else if (i == 4 && suffix == "a") {
                br.ew5 = add(first, second);
            }
            x = second;
        }
        return br;
    }

    Tensor<T> details(const Branch& br, const std::string& suffix) const {
        Tensor<T> us2 = upsample_2_.apply(br.ew2, "upsample_2" + suffix);
        Tensor<T> us1 = upsample_1_.apply(br.ew1, "upsample_1" + suffix);
        return detail_reduce_.apply(concat_channels<T>({us1, us2}), "conv_convat_" + suffix);
    }

    MsfmConfig cfg_;
    std::pair<ConvLayer<T>, ConvLayer<T>> stack_[5];
    ConvLayer<T> down_sample_1a_;
    ConvLayer<T> upsample_5a_;
    ConvLayer<T> prior_reduce_;
    ConvLayer<T> upsample_2_;
    ConvLayer<T> upsample_1_;
    ConvLayer<T> detail_reduce_;
    ConvLayer<T> compress_;
};

}  // namespace msfnet
