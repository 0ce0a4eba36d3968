// Command-line front end: training, evaluation, inference, gradient checks,
// graph dumps and synthetic dataset emission.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msfnet/msfnet.hpp"

namespace {

using msfnet::Checkpoint;
using msfnet::TrainConfig;
using msfnet::Trainer;

TrainConfig make_config(const std::string& config_path, const std::vector<std::string>& sets,
                        TrainConfig base = TrainConfig{}) {
    TrainConfig cfg = base;
    if (!config_path.empty()) {
        cfg = TrainConfig::from_file(config_path);
    }
    for (const auto& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        }
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& resume) {
    std::unique_ptr<Trainer<float>> trainer;
    if (!resume.empty()) {
        Checkpoint<float> ck = msfnet::load_checkpoint<float>(resume);
        for (const auto& kv : sets) {
            const size_t eq = kv.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            }
            ck.config.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        trainer = std::make_unique<Trainer<float>>(ck);
    } else {
        trainer = std::make_unique<Trainer<float>>(make_config(config_path, sets));
    }
    const TrainConfig& cfg = trainer->config();
    std::cout << "training " << trainer->network().parameter_count() << " parameters, "
              << cfg.iterations << " iterations, batch " << cfg.batch_size << "\n";

    std::ofstream metrics;
    if (!cfg.metrics_path.empty()) {
        const bool fresh = trainer->iteration() == 0;
        metrics.open(cfg.metrics_path, fresh ? std::ios::trunc : std::ios::app);
        if (!metrics) {
            throw std::runtime_error("cannot write metrics to " + cfg.metrics_path);
        }
        if (fresh) metrics << "iteration,loss,epe,d3px,lr\n";
    }
    trainer->train([&](const msfnet::IterationMetrics& m) {
        if (metrics.is_open()) metrics << m.csv_row() << "\n";
        if ((m.iteration + 1) % cfg.log_every == 0 || m.iteration + 1 == cfg.iterations) {
            std::printf("iter %6lld  loss %.5f  epe %.4f  3px %.2f%%  lr %.2e  %.2fs\n",
                        static_cast<long long>(m.iteration), m.loss, m.epe, m.d3px, m.lr,
                        m.seconds);
        }
    });
    msfnet::save_checkpoint(trainer->checkpoint(), cfg.checkpoint_path);
    std::cout << "checkpoint written to " << cfg.checkpoint_path << "\n";

    const msfnet::EvalReport train_r = trainer->evaluate(trainer->train_set());
    std::printf("train set: epe %.4f  3px %.2f%%\n", train_r.epe, train_r.d3px);
    if (!trainer->val_set().empty()) {
        const msfnet::EvalReport val_r = trainer->evaluate(trainer->val_set());
        std::printf("validation: epe %.4f  3px %.2f%%\n", val_r.epe, val_r.d3px);
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir) {
    Checkpoint<float> ck = msfnet::load_checkpoint<float>(checkpoint_path);
    if (!dataset_dir.empty()) {
        ck.config.dataset_dir = dataset_dir;
    }
    Trainer<float> trainer(ck);
    const auto& samples =
        trainer.val_set().empty() ? trainer.train_set() : trainer.val_set();
    const msfnet::EvalReport r = trainer.evaluate(samples);
    std::printf("samples %zu  epe %.4f  3px %.2f%%\n", r.per_sample_epe.size(), r.epe, r.d3px);
    return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& left_path,
              const std::string& right_path, const std::string& out_pfm,
              const std::string& out_image, double max_disp) {
    for (const std::string& p : {left_path, right_path}) {
        if (!std::filesystem::exists(p)) {
            throw std::runtime_error("missing input image: " + p);
        }
    }
    Checkpoint<float> ck = msfnet::load_checkpoint<float>(checkpoint_path);
    msfnet::Tensor<float> left = msfnet::load_ppm<float>(left_path);
    msfnet::Tensor<float> right = msfnet::load_ppm<float>(right_path);
    Trainer<float> trainer(ck);
    msfnet::DisparityMap<float> disp = trainer.infer(left, right);
    if (!out_pfm.empty()) {
        msfnet::save_pfm(disp.values, out_pfm);
        std::cout << "wrote " << out_pfm << "\n";
    }
    if (!out_image.empty()) {
        msfnet::export_disparity_image(disp, out_image, max_disp);
        std::cout << "wrote " << out_image << "\n";
    }
    return 0;
}

int cmd_gradcheck(uint64_t seed) {
    bool all_ok = true;
    std::printf("%-22s %8s %14s\n", "op", "probes", "max_rel_err");
    for (const auto& r : msfnet::run_gradient_suite(seed)) {
        const bool ok = r.max_rel_err < 1e-5;
        all_ok = all_ok && ok;
        std::printf("%-22s %8lld %14.3e  %s\n", r.name.c_str(),
                    static_cast<long long>(r.probes), r.max_rel_err, ok ? "ok" : "FAIL");
    }
    if (!all_ok) {
        std::cerr << "gradient checks failed\n";
        return 1;
    }
    return 0;
}

int cmd_dumpgraph(const std::string& config_path, const std::vector<std::string>& sets,
                  const std::string& out_path) {
    // Defaults describe the full-scale network.
    TrainConfig base;
    base.width_multiplier = 1.0;
    base.height = 384;
    base.width = 768;
    base.max_displacement = 40;
    base.fine_displacement = 10;
    const TrainConfig cfg = make_config(config_path, sets, base);
    msfnet::Network<float> net(cfg.network());
    const std::string text = net.wiring_text(cfg.height, cfg.width);
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + out_path);
        }
        out << text;
    }
    return 0;
}

int cmd_gen_data(const std::string& out_dir, int64_t count, int64_t height, int64_t width,
                 int64_t max_disp, int64_t shapes, uint64_t seed) {
    for (int64_t i = 0; i < count; ++i) {
        const msfnet::StereoSample<float> s = msfnet::generate_random_dot<float>(
            seed + static_cast<uint64_t>(i), height, width, max_disp, shapes);
        msfnet::write_sample(s, out_dir, i);
    }
    std::cout << "wrote " << count << " samples under " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stereo disparity network trainer"};
    app.require_subcommand(1);

    std::string config_path, resume, checkpoint_path, dataset_dir;
    std::vector<std::string> sets;

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--set", sets, "override a config key (key=value, repeatable)");
    train->add_option("--resume", resume, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--dataset", dataset_dir, "dataset directory (default: config data)");

    std::string left_path, right_path, out_pfm, out_image;
    double viz_max_disp = 64.0;
    auto* infer = app.add_subcommand("infer", "predict disparity for one stereo pair");
    infer->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    infer->add_option("--left", left_path, "left image (PPM)")->required();
    infer->add_option("--right", right_path, "right image (PPM)")->required();
    infer->add_option("--out-pfm", out_pfm, "output disparity PFM");
    infer->add_option("--out-image", out_image, "output grayscale PGM");
    infer->add_option("--max-disp", viz_max_disp, "visualization scaling");

    uint64_t gc_seed = 7;
    auto* gradcheck = app.add_subcommand("gradcheck", "run the finite-difference suite");
    gradcheck->add_option("--seed", gc_seed, "suite seed");

    std::string graph_out;
    auto* dumpgraph = app.add_subcommand("dumpgraph", "write the layer wiring table");
    dumpgraph->add_option("--config", config_path, "key=value config file");
    dumpgraph->add_option("--set", sets, "override a config key (key=value, repeatable)");
    dumpgraph->add_option("--out", graph_out, "output file ('-' for stdout)");

    std::string data_dir;
    int64_t data_count = 8, data_h = 64, data_w = 128, data_disp = 12, data_shapes = 4;
    uint64_t data_seed = 1;
    auto* gen = app.add_subcommand("gen-data", "emit a random-dot dataset");
    gen->add_option("--out", data_dir, "output directory")->required();
    gen->add_option("--count", data_count, "number of samples");
    gen->add_option("--height", data_h, "image height");
    gen->add_option("--width", data_w, "image width");
    gen->add_option("--max-disp", data_disp, "maximum disparity");
    gen->add_option("--shapes", data_shapes, "foreground shapes per sample");
    gen->add_option("--seed", data_seed, "base seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, sets, resume);
        if (eval->parsed()) return cmd_eval(checkpoint_path, dataset_dir);
        if (infer->parsed())
            return cmd_infer(checkpoint_path, left_path, right_path, out_pfm, out_image,
                             viz_max_disp);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed);
        if (dumpgraph->parsed()) return cmd_dumpgraph(config_path, sets, graph_out);
        if (gen->parsed())
            return cmd_gen_data(data_dir, data_count, data_h, data_w, data_disp, data_shapes,
                                data_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
