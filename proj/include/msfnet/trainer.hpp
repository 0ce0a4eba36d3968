#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/checkpoint.hpp"
#include "msfnet/config.hpp"
#include "msfnet/data.hpp"
#include "msfnet/dataset.hpp"
#include "msfnet/network.hpp"
#include "msfnet/optim.hpp"

namespace msfnet {

struct IterationMetrics {
    int64_t iteration = 0;  // 0-based
    double loss = 0.0;
    double epe = 0.0;
    double d3px = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
    std::vector<double> components;  // per-scale unweighted L1 terms

    std::string csv_row() const {
        std::ostringstream os;
        os.precision(10);
        os << iteration << "," << loss << "," << epe << "," << d3px << "," << lr;
        return os.str();
    }
};

struct EvalReport {
    double epe = 0.0;
    double d3px = 0.0;
    std::vector<double> per_sample_epe;
    std::vector<double> per_sample_d3px;
};

template <typename T>
class Trainer {
  public:
    explicit Trainer(const TrainConfig& config)
        : cfg_(config), net_(config.network()), rng_(static_cast<uint32_t>(config.seed)) {
        cfg_.validate();
        check_data_geometry();
        net_.init_params(params_, rng_);
        adam_.init(params_);
        build_datasets();
    }

    explicit Trainer(const Checkpoint<T>& ck)
        : cfg_(ck.config), net_(ck.config.network()), params_(ck.params), adam_(ck.adam),
          iteration_(ck.iteration) {
        cfg_.validate();
        check_data_geometry();
        net_.attach_params(params_);
        std::istringstream is(ck.rng_state);
        is >> rng_;
        if (!is) {
            throw std::runtime_error("checkpoint: bad generator state");
        }
        build_datasets();
    }

    // Runs the remaining iterations, reporting metrics for every iteration.
    void train(const std::function<void(const IterationMetrics&)>& on_metrics) {
        while (iteration_ < cfg_.iterations) {
            IterationMetrics m = step();
            if (on_metrics) on_metrics(m);
            if (cfg_.checkpoint_every > 0 && iteration_ % cfg_.checkpoint_every == 0 &&
                iteration_ < cfg_.iterations) {
                save_checkpoint(checkpoint(), cfg_.checkpoint_path);
            }
        }
    }

    IterationMetrics step() {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<StereoSample<T>> items;
        for (int64_t j = 0; j < cfg_.batch_size; ++j) {
            const size_t idx = static_cast<size_t>((iteration_ * cfg_.batch_size + j) %
                                                   static_cast<int64_t>(train_set_.size()));
            items.push_back(train_set_[idx]);
        }
        StereoSample<T> batch = stack_samples(items);

        params_.zero_grads();
        Tape<T> tape;
        NetworkOutputs<T> out;
        MultiscaleLoss<T> ml;
        {
            typename Tape<T>::Scope scope(tape);
            try {
                out = net_.forward(batch.left, batch.right);
                ml = multiscale_loss(out.supervised, batch.gt, weights());
            } catch (const std::exception& e) {
                throw std::runtime_error("iteration " + std::to_string(iteration_) + ": " +
                                         e.what());
            }
            if (!std::isfinite(static_cast<double>(ml.total.data()[0]))) {
                throw std::runtime_error("non-finite loss at iteration " +
                                         std::to_string(iteration_));
            }
            tape.backward(ml.total);
        }
        const double lr = cfg_.schedule().at(iteration_);
        adam_step(params_, adam_, lr);

        IterationMetrics m;
        m.iteration = iteration_;
        m.loss = static_cast<double>(ml.total.data()[0]);
        m.epe = static_cast<double>(msfnet::epe(out.disparity.values, batch.gt.values,
                                                batch.gt.valid));
        m.d3px = static_cast<double>(three_px_error(out.disparity.values, batch.gt.values,
                                                    batch.gt.valid));
        m.lr = lr;
        for (T c : ml.components) m.components.push_back(static_cast<double>(c));
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ++iteration_;
        return m;
    }

    // Batch-1 inference metrics over a sample list.
    EvalReport evaluate(const std::vector<StereoSample<T>>& samples) const {
        if (samples.empty()) {
            throw std::invalid_argument("evaluate: no samples");
        }
        EvalReport r;
        for (const auto& s : samples) {
            NetworkOutputs<T> out = net_.forward(s.left, s.right);
            r.per_sample_epe.push_back(static_cast<double>(
                msfnet::epe(out.disparity.values, s.gt.values, s.gt.valid)));
            r.per_sample_d3px.push_back(static_cast<double>(
                three_px_error(out.disparity.values, s.gt.values, s.gt.valid)));
        }
        for (double v : r.per_sample_epe) r.epe += v;
        for (double v : r.per_sample_d3px) r.d3px += v;
        r.epe /= static_cast<double>(r.per_sample_epe.size());
        r.d3px /= static_cast<double>(r.per_sample_d3px.size());
        return r;
    }

    DisparityMap<T> infer(const Tensor<T>& left, const Tensor<T>& right) const {
        return net_.forward(left, right).disparity;
    }

    Checkpoint<T> checkpoint() const {
        Checkpoint<T> ck;
        ck.config = cfg_;
        ck.iteration = iteration_;
        ck.params = params_;
        ck.adam = adam_;
        std::ostringstream os;
        os << rng_;
        ck.rng_state = os.str();
        return ck;
    }

    const TrainConfig& config() const { return cfg_; }
    const Network<T>& network() const { return net_; }
    ParamSet<T>& params() { return params_; }
    int64_t iteration() const { return iteration_; }
    const std::vector<StereoSample<T>>& train_set() const { return train_set_; }
    const std::vector<StereoSample<T>>& val_set() const { return val_set_; }

  private:
    void check_data_geometry() const {
        if (cfg_.dataset_dir.empty() && cfg_.data_max_disp * 4 >= cfg_.width) {
            throw std::invalid_argument("config: data_max_disp must be < width/4");
        }
    }

    std::vector<T> weights() const { return cfg_.template resolved_loss_weights<T>(); }

    // Synthetic sets are derived from the config seed: training sample i uses
    // seed + i, validation sample j uses seed + 1000000 + j.
    void build_datasets() {
        if (cfg_.dataset_dir.empty()) {
            for (int64_t i = 0; i < cfg_.sample_count; ++i) {
                train_set_.push_back(generate_random_dot<T>(cfg_.seed + static_cast<uint64_t>(i),
                                                            cfg_.height, cfg_.width,
                                                            cfg_.data_max_disp,
                                                            cfg_.data_shape_count));
            }
            for (int64_t j = 0; j < cfg_.val_count; ++j) {
                val_set_.push_back(generate_random_dot<T>(
                    cfg_.seed + 1000000 + static_cast<uint64_t>(j), cfg_.height, cfg_.width,
                    cfg_.data_max_disp, cfg_.data_shape_count));
            }
        } else {
            std::vector<StereoSample<T>> loaded = load_dataset<T>(cfg_.dataset_dir);
            for (size_t i = 0; i < loaded.size(); ++i) {
                train_set_.push_back(fit_resolution(loaded[i], static_cast<uint64_t>(i)));
            }
            const size_t vc = std::min(static_cast<size_t>(cfg_.val_count), train_set_.size());
            val_set_.assign(train_set_.begin(), train_set_.begin() + static_cast<int64_t>(vc));
        }
    }

    StereoSample<T> fit_resolution(const StereoSample<T>& s, uint64_t index) const {
        const Shape sh = s.left.shape();
        if (sh.h == cfg_.height && sh.w == cfg_.width) return s;
        if (sh.h >= cfg_.height && sh.w >= cfg_.width) {
            return random_crop(s, cfg_.height, cfg_.width, cfg_.seed + index);
        }
        throw std::runtime_error("dataset sample " + sh.str() + " smaller than configured " +
                                 std::to_string(cfg_.height) + "x" + std::to_string(cfg_.width));
    }

    TrainConfig cfg_;
    Network<T> net_;
    ParamSet<T> params_;
    AdamState<T> adam_;
    std::mt19937 rng_;
    int64_t iteration_ = 0;
    std::vector<StereoSample<T>> train_set_;
    std::vector<StereoSample<T>> val_set_;
};

}  // namespace msfnet
