#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/trainer.hpp"

using namespace msfnet;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.width_multiplier = 0.125;
    cfg.height = 64;
    cfg.width = 64;
    cfg.max_displacement = 6;
    cfg.fine_displacement = 4;
    cfg.stack_count = 1;
    cfg.batch_size = 1;
    cfg.sample_count = 2;
    cfg.data_max_disp = 6;
    cfg.data_shape_count = 2;
    cfg.val_count = 1;
    cfg.seed = 3;
    return cfg;
}

struct ScalarProblem {
    ParamSet<float> params;
    AdamState<float> adam;
    Tensor<float>* x;

    explicit ScalarProblem(float x0) {
        x = &params.create("x.weight", make_shape(1, 1, 1, 1));
        x->data()[0] = x0;
        adam.init(params);
    }

    void step_with_grad(float g, double lr) {
        params.zero_grads();
        x->grad()[0] = g;
        adam_step(params, adam, lr);
    }

    float value() const { return x->data()[0]; }
};

}  // namespace

TEST_CASE("adam drives a quadratic to its minimum") {
    ScalarProblem p(0.0f);
    for (int i = 0; i < 100; ++i) {
        p.step_with_grad(2.0f * (p.value() - 3.0f), 0.1);
    }
    REQUIRE(std::abs(p.value() - 3.0f) < 0.5f);
}

TEST_CASE("adam with zero gradient leaves fresh parameters in place") {
    ScalarProblem p(1.25f);
    for (int i = 0; i < 5; ++i) p.step_with_grad(0.0f, 0.1);
    REQUIRE(p.value() == 1.25f);
    REQUIRE(p.adam.m[0].data()[0] == 0.0f);
    REQUIRE(p.adam.v[0].data()[0] == 0.0f);

    // once moments exist, zero gradients decay them geometrically
    p.step_with_grad(1.0f, 0.1);
    const float m1 = p.adam.m[0].data()[0];
    for (int i = 0; i < 10; ++i) p.step_with_grad(0.0f, 0.1);
    const float expect = m1 * std::pow(0.9f, 10.0f);
    REQUIRE(p.adam.m[0].data()[0] == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("adam update magnitude saturates at the learning rate") {
    ScalarProblem p(0.0f);
    const double lr = 0.01;
    float prev = p.value();
    float last_delta = 0.0f;
    for (int i = 0; i < 200; ++i) {
        p.step_with_grad(0.5f, lr);
        last_delta = std::abs(p.value() - prev);
        prev = p.value();
    }
    REQUIRE(last_delta == Catch::Approx(lr).epsilon(0.05));
}

TEST_CASE("adam refuses non-finite gradients and names the parameter") {
    ScalarProblem p(0.0f);
    p.params.zero_grads();
    p.x->grad()[0] = std::numeric_limits<float>::quiet_NaN();
    REQUIRE_THROWS_WITH(adam_step(p.params, p.adam, 0.1),
                        Catch::Matchers::ContainsSubstring("non-finite gradient in x.weight"));

    AdamState<float> mismatched;
    REQUIRE_THROWS_WITH(adam_step(p.params, mismatched, 0.1),
                        Catch::Matchers::ContainsSubstring("moment buffers"));
}

TEST_CASE("learning rate schedule halves at the configured points") {
    LrSchedule s;
    s.base = 1e-4;
    REQUIRE(s.at(0) == 1e-4);
    REQUIRE(s.at(999999) == 1e-4);  // no rule configured

    s.halve_every = 100000;
    REQUIRE(s.at(0) == 1e-4);
    REQUIRE(s.at(99999) == 1e-4);
    REQUIRE(s.at(100000) == Catch::Approx(5e-5));
    REQUIRE(s.at(250000) == Catch::Approx(2.5e-5));

    s.boundaries = {1000, 2000};  // takes precedence
    REQUIRE(s.at(999) == 1e-4);
    REQUIRE(s.at(1000) == Catch::Approx(5e-5));
    REQUIRE(s.at(1500) == Catch::Approx(5e-5));
    REQUIRE(s.at(2000) == Catch::Approx(2.5e-5));

    REQUIRE_THROWS_AS(s.at(-1), std::invalid_argument);
}

TEST_CASE("schm training on one sample halves the loss in 200 steps") {
    const int64_t h = 64, w = 64;
    auto sample = generate_random_dot<float>(13, h, w, 6, 2);

    NetworkConfig nc;
    nc.width_multiplier = 0.125;
    nc.max_displacement = 6;
    Msfm<float> msfm(nc.msfm());
    Schm<float> schm(nc.schm());
    ParamSet<float> params;
    std::mt19937 rng(5);
    msfm.init_params(params, rng);
    schm.init_params(params, rng);
    AdamState<float> adam;
    adam.init(params);
    const std::vector<float> weights(6, 1.0f / 6.0f);

    float first = 0.0f, last = 0.0f;
    for (int iter = 0; iter < 200; ++iter) {
        params.zero_grads();
        Tape<float> tape;
        Tape<float>::Scope scope(tape);
        auto f = msfm.forward(sample.left, sample.right);
        Tensor<float> corr = correlation_1d(f.fused_eighth_left, f.fused_eighth_right,
                                            CorrSpec{nc.max_displacement});
        Tensor<float> cost = concat_channels<float>({corr, f.local_prior_feature});
        auto out = schm.forward(cost, f.local_details_left);
        auto ml = multiscale_loss(out.multiscale, sample.gt, weights);
        tape.backward(ml.total);
        adam_step(params, adam, 1e-3);

        if (iter == 0) first = ml.total.data()[0];
        last = ml.total.data()[0];
    }
    INFO("loss " << first << " -> " << last);
    REQUIRE(last < 0.5f * first);
}

TEST_CASE("metric streams are deterministic per seed") {
    auto cfg = tiny_config();
    cfg.iterations = 4;

    auto run = [&]() {
        Trainer<float> t(cfg);
        std::vector<IterationMetrics> ms;
        t.train([&](const IterationMetrics& m) { ms.push_back(m); });
        return ms;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == 4);
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].iteration == static_cast<int64_t>(i));
        REQUIRE(a[i].loss == b[i].loss);
        REQUIRE(a[i].epe == b[i].epe);
        REQUIRE(a[i].d3px == b[i].d3px);
        REQUIRE(a[i].lr == cfg.learning_rate);
        REQUIRE(a[i].components.size() == 7);  // six scales and one stack
        REQUIRE(a[i].seconds > 0.0);
    }
}

TEST_CASE("resume from a checkpoint reproduces the straight run") {
    auto cfg = tiny_config();
    cfg.iterations = 12;

    Trainer<float> straight(cfg);
    std::vector<double> straight_losses;
    for (int i = 0; i < 12; ++i) straight_losses.push_back(straight.step().loss);

    Trainer<float> first_leg(cfg);
    for (int i = 0; i < 8; ++i) {
        const double loss = first_leg.step().loss;
        REQUIRE(loss == straight_losses[static_cast<size_t>(i)]);
    }

    const fs::path path = fs::temp_directory_path() / "msfnet_test_resume.msfn";
    save_checkpoint(first_leg.checkpoint(), path.string());
    Trainer<float> resumed(load_checkpoint<float>(path.string()));
    REQUIRE(resumed.iteration() == 8);
    for (int i = 8; i < 12; ++i) {
        REQUIRE(resumed.step().loss == straight_losses[static_cast<size_t>(i)]);
    }
    fs::remove(path);
}

TEST_CASE("periodic checkpointing writes a resumable file") {
    const fs::path path = fs::temp_directory_path() / "msfnet_test_periodic.msfn";
    auto cfg = tiny_config();
    cfg.iterations = 4;
    cfg.checkpoint_every = 2;
    cfg.checkpoint_path = path.string();

    Trainer<float> t(cfg);
    t.train(nullptr);
    auto ck = load_checkpoint<float>(path.string());
    REQUIRE(ck.iteration == 2);
    REQUIRE(ck.config.serialize() == t.config().serialize());
    fs::remove(path);
}

TEST_CASE("evaluation equals the per-sample metric recomputation") {
    auto cfg = tiny_config();
    Trainer<float> t(cfg);
    const auto& val = t.val_set();
    REQUIRE(val.size() == 1);

    EvalReport r = t.evaluate(val);
    REQUIRE(r.per_sample_epe.size() == 1);

    DisparityMap<float> pred = t.infer(val[0].left, val[0].right);
    const double epe_direct =
        static_cast<double>(epe(pred.values, val[0].gt.values, val[0].gt.valid));
    const double d3_direct =
        static_cast<double>(three_px_error(pred.values, val[0].gt.values, val[0].gt.valid));
    REQUIRE(r.per_sample_epe[0] == epe_direct);
    REQUIRE(r.per_sample_d3px[0] == d3_direct);
    REQUIRE(r.epe == epe_direct);
    REQUIRE(r.d3px == d3_direct);

    // a perfect prediction scores zero on both metrics
    REQUIRE(epe(val[0].gt.values, val[0].gt.values, val[0].gt.valid) == 0.0f);
    REQUIRE(three_px_error(val[0].gt.values, val[0].gt.values, val[0].gt.valid) == 0.0f);

    REQUIRE_THROWS_WITH(t.evaluate({}), Catch::Matchers::ContainsSubstring("no samples"));
}

TEST_CASE("training aborts on a poisoned parameter with the iteration number") {
    auto cfg = tiny_config();
    Trainer<float> t(cfg);
    t.params().get("msfm.conv_1.weight").data()[0] = std::numeric_limits<float>::quiet_NaN();
    REQUIRE_THROWS_WITH(t.step(), Catch::Matchers::ContainsSubstring("iteration 0"));
}

TEST_CASE("trainer validates data geometry against the resolution") {
    auto cfg = tiny_config();
    cfg.data_max_disp = 16;  // width 64
    REQUIRE_THROWS_WITH(Trainer<float>(cfg),
                        Catch::Matchers::ContainsSubstring("data_max_disp must be < width/4"));
}

TEST_CASE("trainer consumes a dataset directory with cropping") {
    const fs::path dir = fs::temp_directory_path() / "msfnet_test_trainer_data";
    fs::remove_all(dir);
    write_sample(generate_random_dot<float>(81, 64, 128, 10, 3), dir.string(), 0);
    write_sample(generate_random_dot<float>(82, 64, 128, 10, 3), dir.string(), 1);

    auto cfg = tiny_config();
    cfg.dataset_dir = dir.string();
    Trainer<float> t(cfg);  // 64x64 config crops the 64x128 samples
    REQUIRE(t.train_set().size() == 2);
    REQUIRE(t.train_set()[0].left.shape() == make_shape(1, 3, 64, 64));
    REQUIRE(t.step().loss > 0.0);

    auto wide = tiny_config();
    wide.dataset_dir = dir.string();
    wide.width = 256;
    wide.height = 64;
    REQUIRE_THROWS_WITH(Trainer<float>(wide),
                        Catch::Matchers::ContainsSubstring("smaller than configured"));
    fs::remove_all(dir);
}

TEST_CASE("metrics rows serialize as comma-separated values") {
    IterationMetrics m;
    m.iteration = 3;
    m.loss = 1.5;
    m.epe = 2.0;
    m.d3px = 0.5;
    m.lr = 0.0001;
    REQUIRE(m.csv_row() == "3,1.5,2,0.5,0.0001");
}
