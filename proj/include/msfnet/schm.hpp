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

struct SchmConfig {
    double width_multiplier = 1.0;
    int64_t cost_channels = 41;  // channels of the assembled cost volume at 1/8
    bool supervise_64 = false;   // include the 1/64 head in the training loss

    void validate() const {
        if (!(width_multiplier > 0.0 && width_multiplier <= 1.0)) {
            throw std::invalid_argument("width_multiplier must be in (0, 1]");
        }
        if (cost_channels < 1) {
            throw std::invalid_argument("cost_channels must be >= 1");
        }
    }
    int64_t ch(int64_t base) const { return scaled_channels(base, width_multiplier); }
};

template <typename T>
struct SchmOutputs {
    // Supervised predictions, coarse to fine; the last entry is full resolution.
    std::vector<DisparityMap<T>> multiscale;
    DisparityMap<T> full_res;
};

// Skip-connected hourglass over the cost volume. The encoder descends from
// 1/8 to 1/64; the decoder climbs back to full resolution, at every level
// concatenating the upsampled features, the upsampled coarser disparity and
// a skip (encoder features, the cost volume itself, or the full-resolution
// detail features), then predicting a disparity map.
template <typename T>
class Schm {
  public:
    explicit Schm(const SchmConfig& config) : cfg_(config) {
        cfg_.validate();
        const auto c = [&](int64_t base) { return cfg_.ch(base); };

        enc_[0] = conv("schm.enc_1", 3, 2, 1, cfg_.cost_channels, c(128));
        enc_[1] = conv("schm.enc_1_1", 3, 1, 1, c(128), c(128));
        enc_[2] = conv("schm.enc_2", 3, 2, 1, c(128), c(256));
        enc_[3] = conv("schm.enc_2_1", 3, 1, 1, c(256), c(256));
        enc_[4] = conv("schm.enc_3", 3, 2, 1, c(256), c(512));
        enc_[5] = conv("schm.enc_3_1", 3, 1, 1, c(512), c(512));
        pred_64_ = head("schm.pred_64", c(512));

        const int64_t up_in[6] = {c(512), c(256), c(128), c(64), c(32), c(16)};
        const int64_t up_out[6] = {c(256), c(128), c(64), c(32), c(16), c(16)};
        const int64_t skip_ch[6] = {c(256), c(128), cfg_.cost_channels, 0, 0, c(32)};
        for (int i = 0; i < 6; ++i) {
            Stage& st = stages_[i];
            st.scale = 32 >> i;
            const std::string sfx = std::to_string(st.scale);
            st.skip_channels = skip_ch[i];
            st.up = deconv("schm.up_" + sfx, 4, 2, 1, up_in[i], up_out[i]);
            st.iconv = conv("schm.iconv_" + sfx, 3, 1, 1, up_out[i] + skip_ch[i] + 1, up_out[i]);
            st.pred = head("schm.pred_" + sfx, up_out[i]);
        }
    }

    void init_params(ParamSet<T>& params, std::mt19937& rng) {
        for (auto& l : enc_) l.init(params, rng);
        pred_64_.init(params, rng);
        for (auto& st : stages_) {
            st.up.init(params, rng);
            st.iconv.init(params, rng);
            st.pred.init(params, rng);
        }
    }

    void attach_params(ParamSet<T>& params) {
        for (auto& l : enc_) l.attach(params);
        pred_64_.attach(params);
        for (auto& st : stages_) {
            st.up.attach(params);
            st.iconv.attach(params);
            st.pred.attach(params);
        }
    }

    SchmOutputs<T> forward(const Tensor<T>& cost_volume, const Tensor<T>& details_left) const {
        if (cost_volume.shape().c != cfg_.cost_channels) {
            throw std::invalid_argument("schm: cost volume has " +
                                        std::to_string(cost_volume.shape().c) +
                                        " channels, expected " +
                                        std::to_string(cfg_.cost_channels));
        }
        Tensor<T> e1 = enc_[0].apply(cost_volume, "schm_enc_1");
        Tensor<T> e1_1 = enc_[1].apply(e1, "schm_enc_1_1");
        Tensor<T> e2 = enc_[2].apply(e1_1, "schm_enc_2");
        Tensor<T> e2_1 = enc_[3].apply(e2, "schm_enc_2_1");
        Tensor<T> e3 = enc_[4].apply(e2_1, "schm_enc_3");
        Tensor<T> e3_1 = enc_[5].apply(e3, "schm_enc_3_1");

        SchmOutputs<T> out;
        Tensor<T> features = e3_1;
        Tensor<T> prev_pred = pred_64_.apply(e3_1, "schm_pred_64");
        if (cfg_.supervise_64) {
            out.multiscale.push_back(make_disparity(prev_pred, 64));
        }
        const Tensor<T>* skips[6] = {&e2_1, &e1_1, &cost_volume, nullptr, nullptr, &details_left};
        for (int i = 0; i < 6; ++i) {
            const Stage& st = stages_[i];
            const std::string sfx = std::to_string(st.scale);
            Tensor<T> up = st.up.apply(features, "schm_up_" + sfx);
            Tensor<T> disp_up = upsample_nearest(prev_pred, 2, T(2));
            std::vector<Tensor<T>> parts = {up};
            if (skips[i] != nullptr) parts.push_back(*skips[i]);
            parts.push_back(disp_up);
            features = st.iconv.apply(concat_channels<T>(parts), "schm_iconv_" + sfx);
            prev_pred = st.pred.apply(features, "schm_pred_" + sfx);
            out.multiscale.push_back(make_disparity(prev_pred, st.scale));
        }
        out.full_res = out.multiscale.back();
        return out;
    }

    int64_t parameter_count() const {
        int64_t total = pred_64_.scalar_count();
        for (const auto& l : enc_) total += l.scalar_count();
        for (const auto& st : stages_) {
            total += st.up.scalar_count() + st.iconv.scalar_count() + st.pred.scalar_count();
        }
        return total;
    }

    void append_wiring(std::vector<WiringRow>& rows, int64_t h, int64_t w) const {
        const char* enc_names[6] = {"schm_enc_1", "schm_enc_1_1", "schm_enc_2",
                                    "schm_enc_2_1", "schm_enc_3", "schm_enc_3_1"};
        const char* enc_inputs[6] = {"cost_volume", "schm_enc_1", "schm_enc_1_1",
                                     "schm_enc_2", "schm_enc_2_1", "schm_enc_3"};
        const int enc_down[6] = {16, 16, 32, 32, 64, 64};
        for (int i = 0; i < 6; ++i) {
            rows.push_back(conv_row(enc_names[i], enc_[i].spec, w / enc_down[i], h / enc_down[i],
                                    {enc_inputs[i]}));
        }
        rows.push_back(conv_row("schm_pred_64", pred_64_.spec, w / 64, h / 64, {"schm_enc_3_1"}));

        const char* skip_names[6] = {"schm_enc_2_1", "schm_enc_1_1", "cost_volume",
                                     nullptr, nullptr, "conv_convat_a"};
        std::string prev_features = "schm_enc_3_1";
        std::string prev_pred = "schm_pred_64";
        for (int i = 0; i < 6; ++i) {
            const Stage& st = stages_[i];
            const std::string sfx = std::to_string(st.scale);
            const int64_t ow = w / st.scale, oh = h / st.scale;
            rows.push_back(conv_row("schm_up_" + sfx, st.up.spec, ow, oh, {prev_features}));
            rows.push_back(plain_row("schm_disp_to_" + sfx, 1, 1, ow, oh, {prev_pred}));
            std::vector<std::string> iconv_in = {"schm_up_" + sfx};
            if (skip_names[i] != nullptr) iconv_in.push_back(skip_names[i]);
            iconv_in.push_back("schm_disp_to_" + sfx);
            rows.push_back(conv_row("schm_iconv_" + sfx, st.iconv.spec, ow, oh, iconv_in));
            rows.push_back(conv_row("schm_pred_" + sfx, st.pred.spec, ow, oh, {"schm_iconv_" + sfx}));
            prev_features = "schm_iconv_" + sfx;
            prev_pred = "schm_pred_" + sfx;
        }
    }

    const SchmConfig& config() const { return cfg_; }

  private:
    struct Stage {
        int64_t scale = 1;
        int64_t skip_channels = 0;
        ConvLayer<T> up;
        ConvLayer<T> iconv;
        ConvLayer<T> pred;
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
    static ConvLayer<T> head(const std::string& name, int64_t in) {
        ConvLayer<T> l;
        l.param_name = name;
        l.spec = ConvSpec{3, 1, 1, in, 1, false};
        l.relu_after = false;
        return l;
    }

    SchmConfig cfg_;
    ConvLayer<T> enc_[6];
    ConvLayer<T> pred_64_;
    Stage stages_[6];
};

}  // namespace msfnet
