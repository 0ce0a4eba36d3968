#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/msfm.hpp"
#include "msfnet/params.hpp"
#include "msfnet/schm.hpp"
#include "msfnet/sgrm.hpp"
#include "msfnet/stereo_ops.hpp"

namespace msfnet {

struct NetworkConfig {
    double width_multiplier = 1.0;
    int64_t max_displacement = 40;   // coarse correlation range at 1/8 resolution
    int64_t fine_displacement = 10;  // fine correlation range at 1/2 resolution
    int64_t sgrm_stacks = 3;
    bool supervise_64 = false;
    bool guidance_enabled = true;
    bool use_local_prior_in_cost = true;
    bool use_local_details_in_guidance = true;
    bool add_local_prior_to_sgrm = false;
    bool share_sgrm_params = false;
    bool zero_init_residual = true;
    bool relu_on_reducers = false;

    void validate() const {
        if (!(width_multiplier > 0.0 && width_multiplier <= 1.0)) {
            throw std::invalid_argument("width_multiplier must be in (0, 1]");
        }
        if (max_displacement < 0) {
            throw std::invalid_argument("max_displacement must be >= 0");
        }
        if (fine_displacement < 0) {
            throw std::invalid_argument("fine_displacement must be >= 0");
        }
        if (sgrm_stacks < 1) {
            throw std::invalid_argument("sgrm_stacks must be >= 1");
        }
    }

    int64_t ch(int64_t base) const { return scaled_channels(base, width_multiplier); }
    int64_t cost_channels() const {
        return max_displacement + 1 + (use_local_prior_in_cost ? ch(64) : 0);
    }

    MsfmConfig msfm() const {
        MsfmConfig c;
        c.width_multiplier = width_multiplier;
        c.relu_on_reducers = relu_on_reducers;
        return c;
    }
    SchmConfig schm() const {
        SchmConfig c;
        c.width_multiplier = width_multiplier;
        c.cost_channels = cost_channels();
        c.supervise_64 = supervise_64;
        return c;
    }
    SgrmConfig sgrm() const {
        SgrmConfig c;
        c.width_multiplier = width_multiplier;
        c.fine_displacement = fine_displacement;
        c.stacks = sgrm_stacks;
        c.guidance_enabled = guidance_enabled;
        c.use_local_details_in_guidance = use_local_details_in_guidance;
        c.add_local_prior = add_local_prior_to_sgrm;
        c.share_stack_params = share_sgrm_params;
        c.zero_init_residual = zero_init_residual;
        return c;
    }
};

template <typename T>
struct NetworkOutputs {
    MsfmOutputs<T> features;
    SchmOutputs<T> initial;
    SgrmOutputs<T> refined;
    std::vector<DisparityMap<T>> supervised;  // initial multiscale then refined stacks
    DisparityMap<T> disparity;                // final full-resolution output
};

template <typename T>
class Network {
  public:
    explicit Network(const NetworkConfig& config)
        : cfg_(config), msfm_(config.msfm()), schm_(config.schm()), sgrm_(config.sgrm()) {
        cfg_.validate();
    }

    void init_params(ParamSet<T>& params, std::mt19937& rng) {
        msfm_.init_params(params, rng);
        schm_.init_params(params, rng);
        sgrm_.init_params(params, rng);
    }

    void attach_params(ParamSet<T>& params) {
        msfm_.attach_params(params);
        schm_.attach_params(params);
        sgrm_.attach_params(params);
    }

    NetworkOutputs<T> forward(const Tensor<T>& left, const Tensor<T>& right) const {
        NetworkOutputs<T> out;
        out.features = msfm_.forward(left, right);

        Tensor<T> corr = correlation_1d(out.features.fused_eighth_left,
                                        out.features.fused_eighth_right,
                                        CorrSpec{cfg_.max_displacement});
        check_finite(corr, "correlation");
        Tensor<T> cost =
            cfg_.use_local_prior_in_cost
                ? concat_channels<T>({corr, out.features.local_prior_feature})
                : corr;

        out.initial = schm_.forward(cost, out.features.local_details_left);

        SgrmInputs<T> rin;
        rin.initial = out.initial.full_res;
        rin.details_left = out.features.local_details_left;
        rin.details_right = out.features.local_details_right;
        rin.compressed_left = out.features.compressed_left;
        rin.compressed_right = out.features.compressed_right;
        rin.prior = out.features.local_prior_feature;
        out.refined = sgrm_.forward(rin);

        out.supervised = out.initial.multiscale;
        for (const auto& d : out.refined.refined) out.supervised.push_back(d);
        out.disparity = out.refined.output;
        return out;
    }

    int64_t parameter_count() const {
        return msfm_.parameter_count() + schm_.parameter_count() + sgrm_.parameter_count();
    }

    std::vector<WiringRow> wiring(int64_t h, int64_t w) const {
        std::vector<WiringRow> rows;
        msfm_.append_wiring(rows, h, w);
        const int64_t corr_ch = cfg_.max_displacement + 1;
        rows.push_back(plain_row("correlation", cfg_.ch(128), corr_ch, w / 8, h / 8,
                                 {"element_wise_3a", "element_wise_3b"}));
        std::vector<std::string> cost_in = {"correlation"};
        if (cfg_.use_local_prior_in_cost) cost_in.push_back("conv_convat1_5_3a");
        rows.push_back(
            plain_row("cost_volume", corr_ch, cfg_.cost_channels(), w / 8, h / 8, cost_in));
        schm_.append_wiring(rows, h, w);
        sgrm_.append_wiring(rows, h, w);
        return rows;
    }

    std::string wiring_text(int64_t h, int64_t w) const {
        std::ostringstream os;
        for (const auto& row : wiring(h, w)) os << row.line() << "\n";
        return os.str();
    }

    const NetworkConfig& config() const { return cfg_; }
    const Msfm<T>& msfm() const { return msfm_; }
    const Schm<T>& schm() const { return schm_; }
    const Sgrm<T>& sgrm() const { return sgrm_; }

  private:
    NetworkConfig cfg_;
    Msfm<T> msfm_;
    Schm<T> schm_;
    Sgrm<T> sgrm_;
};

}  // namespace msfnet
