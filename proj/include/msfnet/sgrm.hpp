#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/msfm.hpp"
#include "msfnet/params.hpp"
#include "msfnet/stereo_ops.hpp"

namespace msfnet {

struct SgrmConfig {
    double width_multiplier = 1.0;
    int64_t fine_displacement = 10;  // correlation range at 1/2 resolution
    int64_t stacks = 3;
    bool guidance_enabled = true;              // warp-error guidance channels
    bool use_local_details_in_guidance = true; // false: guide from compressed features
    bool add_local_prior = false;              // append the upsampled 1/8 prior feature
    bool share_stack_params = false;
    bool zero_init_residual = true;

    void validate() const {
        if (!(width_multiplier > 0.0 && width_multiplier <= 1.0)) {
            throw std::invalid_argument("width_multiplier must be in (0, 1]");
        }
        if (stacks < 1) {
            throw std::invalid_argument("sgrm: stacks must be >= 1");
        }
        if (fine_displacement < 0) {
            throw std::invalid_argument("sgrm: fine_displacement must be >= 0");
        }
    }
    int64_t ch(int64_t base) const { return scaled_channels(base, width_multiplier); }
    int64_t guidance_channels() const { return use_local_details_in_guidance ? ch(32) : ch(16); }
    int64_t input_channels() const {
        return 1 + guidance_channels() + ch(32) + fine_displacement + 1 +
               (add_local_prior ? ch(64) : 0);
    }
};

template <typename T>
struct SgrmInputs {
    DisparityMap<T> initial;  // full-resolution starting disparity
    Tensor<T> details_left;   // 32m channels, full res
    Tensor<T> details_right;
    Tensor<T> compressed_left;  // 16m channels, 1/2 res
    Tensor<T> compressed_right;
    Tensor<T> prior;  // 64m channels, 1/8 res; only read when add_local_prior
};

template <typename T>
struct SgrmOutputs {
    std::vector<DisparityMap<T>> refined;  // one full-res map per stack
    std::vector<Tensor<T>> residuals;      // the per-stack additive corrections
    DisparityMap<T> output;                // refined.back()
};

// Stacked refinement. Each stack warps the right-view guide features by the
// current disparity, takes the absolute error against the left-view guide as
// guidance, runs a small hourglass over [disparity, guidance, details,
// upsampled fine correlation] and adds the predicted residual.
template <typename T>
class Sgrm {
  public:
    explicit Sgrm(const SgrmConfig& config) : cfg_(config) {
        cfg_.validate();
        const auto c = [&](int64_t base) { return cfg_.ch(base); };
        const size_t variants = cfg_.share_stack_params ? 1 : static_cast<size_t>(cfg_.stacks);
        for (size_t i = 0; i < variants; ++i) {
            const std::string prefix =
                cfg_.share_stack_params ? "sgrm" : "sgrm" + std::to_string(i + 1);
            Stage st;
            st.enc1 = conv(prefix + ".enc_1", 3, 2, 1, cfg_.input_channels(), c(32));
            st.enc2 = conv(prefix + ".enc_2", 3, 2, 1, c(32), c(64));
            st.enc3 = conv(prefix + ".enc_3", 3, 2, 1, c(64), c(128));
            st.dec3 = deconv(prefix + ".dec_3", 4, 2, 1, c(128), c(64));
            st.dec2 = deconv(prefix + ".dec_2", 4, 2, 1, c(64) + c(64), c(32));
            st.dec1 = deconv(prefix + ".dec_1", 4, 2, 1, c(32) + c(32), c(16));
            st.residual = conv(prefix + ".residual", 3, 1, 1, c(16), 1);
            st.residual.relu_after = false;
            st.residual.zero_init = cfg_.zero_init_residual;
            stages_.push_back(std::move(st));
        }
    }

    void init_params(ParamSet<T>& params, std::mt19937& rng) {
        for (auto& st : stages_) st.for_each([&](ConvLayer<T>& l) { l.init(params, rng); });
    }
    void attach_params(ParamSet<T>& params) {
        for (auto& st : stages_) st.for_each([&](ConvLayer<T>& l) { l.attach(params); });
    }

    SgrmOutputs<T> forward(const SgrmInputs<T>& in) const {
        Tensor<T> fine =
            correlation_1d(in.compressed_left, in.compressed_right, CorrSpec{cfg_.fine_displacement});
        check_finite(fine, "sgrm_fine_corr");
        Tensor<T> fine_up = upsample_nearest(fine, 2);

        Tensor<T> guide_l, guide_r;
        if (cfg_.guidance_enabled) {
            if (cfg_.use_local_details_in_guidance) {
                guide_l = in.details_left;
                guide_r = in.details_right;
            } else {
                guide_l = upsample_nearest(in.compressed_left, 2);
                guide_r = upsample_nearest(in.compressed_right, 2);
            }
        }
        Tensor<T> prior_up;
        if (cfg_.add_local_prior) {
            if (!in.prior.defined()) {
                throw std::invalid_argument("sgrm: add_local_prior set but no prior given");
            }
            prior_up = upsample_nearest(in.prior, 8);
        }

        SgrmOutputs<T> out;
        Tensor<T> d = in.initial.values;
        for (int64_t i = 0; i < cfg_.stacks; ++i) {
            const std::string tag = "sgrm" + std::to_string(i + 1);
            Tensor<T> err;
            if (cfg_.guidance_enabled) {
                Tensor<T> warped = warp_horizontal(guide_r, d);
                err = error_map(guide_l, warped);
                check_finite(err, tag + "_error");
            } else {
                err = Tensor<T>::zeros(
                    Shape{d.shape().n, cfg_.guidance_channels(), d.shape().h, d.shape().w});
            }
            std::vector<Tensor<T>> parts = {d, err, in.details_left, fine_up};
            if (cfg_.add_local_prior) parts.push_back(prior_up);
            Tensor<T> x = concat_channels<T>(parts);

            const Stage& st = stages_[cfg_.share_stack_params ? 0 : static_cast<size_t>(i)];
            Tensor<T> e1 = st.enc1.apply(x, tag + "_enc_1");
            Tensor<T> e2 = st.enc2.apply(e1, tag + "_enc_2");
            Tensor<T> e3 = st.enc3.apply(e2, tag + "_enc_3");
            Tensor<T> d3 = st.dec3.apply(e3, tag + "_dec_3");
            Tensor<T> d2 = st.dec2.apply(concat_channels<T>({d3, e2}), tag + "_dec_2");
            Tensor<T> d1 = st.dec1.apply(concat_channels<T>({d2, e1}), tag + "_dec_1");
            Tensor<T> res = st.residual.apply(d1, tag + "_residual");
            d = add(d, res);
            out.residuals.push_back(res);
            out.refined.push_back(make_disparity(d, 1));
        }
        out.output = out.refined.back();
        return out;
    }

    int64_t parameter_count() const {
        int64_t total = 0;
        for (const auto& st : stages_) {
            st.for_each_const([&](const ConvLayer<T>& l) { total += l.scalar_count(); });
        }
        return total;
    }

    void append_wiring(std::vector<WiringRow>& rows, int64_t h, int64_t w) const {
        const int64_t corr_ch = cfg_.fine_displacement + 1;
        rows.push_back(plain_row("sgrm_fine_corr", cfg_.ch(16), corr_ch, w / 2, h / 2,
                                 {"conv_1a_r", "conv_1b_r"}));
        rows.push_back(
            plain_row("sgrm_fine_corr_up", corr_ch, corr_ch, w, h, {"sgrm_fine_corr"}));

        std::string guide_l = "conv_convat_a", guide_r = "conv_convat_b";
        if (cfg_.guidance_enabled && !cfg_.use_local_details_in_guidance) {
            const int64_t gc = cfg_.ch(16);
            rows.push_back(plain_row("sgrm_guide_left_up", gc, gc, w, h, {"conv_1a_r"}));
            rows.push_back(plain_row("sgrm_guide_right_up", gc, gc, w, h, {"conv_1b_r"}));
            guide_l = "sgrm_guide_left_up";
            guide_r = "sgrm_guide_right_up";
        }
        if (!cfg_.guidance_enabled) {
            const int64_t gc = cfg_.guidance_channels();
            rows.push_back(plain_row("sgrm_guidance_zeros", gc, gc, w, h, {}));
        }
        if (cfg_.add_local_prior) {
            const int64_t pc = cfg_.ch(64);
            rows.push_back(plain_row("sgrm_prior_up", pc, pc, w, h, {"conv_convat1_5_3a"}));
        }

        std::string prev = "schm_pred_1";
        for (int64_t i = 0; i < cfg_.stacks; ++i) {
            const std::string tag = "sgrm" + std::to_string(i + 1);
            const Stage& st = stages_[cfg_.share_stack_params ? 0 : static_cast<size_t>(i)];
            std::string err_name = "sgrm_guidance_zeros";
            if (cfg_.guidance_enabled) {
                const int64_t gc = cfg_.guidance_channels();
                rows.push_back(plain_row(tag + "_warp", gc, gc, w, h, {guide_r, prev}));
                rows.push_back(
                    plain_row(tag + "_error", gc, gc, w, h, {guide_l, tag + "_warp"}));
                err_name = tag + "_error";
            }
            std::vector<std::string> enc_in = {prev, err_name, "conv_convat_a",
                                               "sgrm_fine_corr_up"};
            if (cfg_.add_local_prior) enc_in.push_back("sgrm_prior_up");
            rows.push_back(conv_row(tag + "_enc_1", st.enc1.spec, w / 2, h / 2, enc_in));
            rows.push_back(conv_row(tag + "_enc_2", st.enc2.spec, w / 4, h / 4, {tag + "_enc_1"}));
            rows.push_back(conv_row(tag + "_enc_3", st.enc3.spec, w / 8, h / 8, {tag + "_enc_2"}));
            rows.push_back(conv_row(tag + "_dec_3", st.dec3.spec, w / 4, h / 4, {tag + "_enc_3"}));
            rows.push_back(conv_row(tag + "_dec_2", st.dec2.spec, w / 2, h / 2,
                                    {tag + "_dec_3", tag + "_enc_2"}));
            rows.push_back(conv_row(tag + "_dec_1", st.dec1.spec, w, h,
                                    {tag + "_dec_2", tag + "_enc_1"}));
            rows.push_back(
                conv_row(tag + "_residual", st.residual.spec, w, h, {tag + "_dec_1"}));
            rows.push_back(plain_row(tag + "_sum", 1, 1, w, h, {prev, tag + "_residual"}));
            prev = tag + "_sum";
        }
    }

    const SgrmConfig& config() const { return cfg_; }

  private:
    struct Stage {
        ConvLayer<T> enc1, enc2, enc3, dec3, dec2, dec1, residual;

        template <typename F>
        void for_each(F f) {
            f(enc1); f(enc2); f(enc3); f(dec3); f(dec2); f(dec1); f(residual);
        }
        template <typename F>
        void for_each_const(F f) const {
            f(enc1); f(enc2); f(enc3); f(dec3); f(dec2); f(dec1); f(residual);
        }
    };

    static ConvLayer<T> conv(const std::string& name, int64_t k, int64_t s, int64_t p, int64_t in,
                             int64_t out) {
        ConvLayer<T> l;
        l.param_name = name;
        l.spec = ConvSpec{k, s, p, in, out, false};
        return l;
    }
    static ConvLayer<T> deconv(const std::string& name, int64_t k, int64_t s, int64_t p, int64_t in,
                               int64_t out) {
        ConvLayer<T> l;
        l.param_name = name;
        l.spec = ConvSpec{k, s, p, in, out, true};
        return l;
    }

    SgrmConfig cfg_;
    std::vector<Stage> stages_;
};

}  // namespace msfnet
