#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/network.hpp"
#include "msfnet/optim.hpp"

namespace msfnet {

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + value + "'");
}

// Accepts a decimal ("0.125") or a rational ("1/8").
inline double parse_multiplier(const std::string& value) {
    const size_t slash = value.find('/');
    try {
        if (slash != std::string::npos) {
            const double num = std::stod(value.substr(0, slash));
            const double den = std::stod(value.substr(slash + 1));
            if (den == 0.0) throw std::invalid_argument("zero denominator");
            return num / den;
        }
        return std::stod(value);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad multiplier '" + value + "'");
    }
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& value, F convert) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(convert(item));
        } catch (const std::exception&) {
            throw std::invalid_argument("config: bad list entry for " + key + ": '" + item + "'");
        }
    }
    return out;
}

}  // namespace detail

// Everything one training or evaluation run needs. Defaults are the desk
// scale so the whole pipeline runs in minutes on a CPU; paper-scale values
// are reachable through the same keys.
struct TrainConfig {
    // model
    double width_multiplier = 0.125;
    int64_t height = 64;
    int64_t width = 128;
    int64_t max_displacement = 8;
    int64_t fine_displacement = 4;
    int64_t stack_count = 3;
    bool guidance_enabled = true;
    bool use_local_prior_in_cost = true;
    bool use_local_details_in_guidance = true;
    bool add_local_prior_to_sgrm = false;
    bool share_sgrm_params = false;
    bool supervise_64 = false;

    // optimization
    double learning_rate = 1e-4;
    double lr_factor = 0.5;
    int64_t lr_halve_every = 0;
    std::vector<int64_t> lr_boundaries;
    int64_t iterations = 2000;
    int64_t batch_size = 2;
    uint64_t seed = 1;
    std::vector<double> loss_weights;  // empty: equal weights normalized by count

    // data (synthetic random dots unless a dataset directory is given)
    std::string dataset_dir;
    int64_t sample_count = 8;
    int64_t data_max_disp = 12;
    int64_t data_shape_count = 4;
    int64_t val_count = 4;

    // bookkeeping
    int64_t log_every = 10;
    int64_t checkpoint_every = 0;  // 0: only at the end
    std::string checkpoint_path = "checkpoint.msfn";
    std::string metrics_path = "metrics.csv";

    void validate() const {
        network().validate();
        if (height % 64 != 0 || width % 64 != 0) {
            throw std::invalid_argument("config: resolution must be divisible by 64");
        }
        if (height < 64 || width < 64) {
            throw std::invalid_argument("config: resolution too small");
        }
        if (!(learning_rate > 0.0)) {
            throw std::invalid_argument("config: learning_rate must be > 0");
        }
        if (!(lr_factor > 0.0 && lr_factor <= 1.0)) {
            throw std::invalid_argument("config: lr_factor must be in (0, 1]");
        }
        if (iterations < 1 || batch_size < 1 || sample_count < 1) {
            throw std::invalid_argument("config: iterations, batch_size and sample_count must be >= 1");
        }
        if (data_max_disp < 0 || data_shape_count < 0 || val_count < 0) {
            throw std::invalid_argument("config: negative data settings");
        }
        if (log_every < 1) {
            throw std::invalid_argument("config: log_every must be >= 1");
        }
        if (!loss_weights.empty() && loss_weights.size() != static_cast<size_t>(supervision_count())) {
            throw std::invalid_argument("config: expected " + std::to_string(supervision_count()) +
                                        " loss weights, got " + std::to_string(loss_weights.size()));
        }
    }

    int64_t supervision_count() const { return 6 + (supervise_64 ? 1 : 0) + stack_count; }

    NetworkConfig network() const {
        NetworkConfig n;
        n.width_multiplier = width_multiplier;
        n.max_displacement = max_displacement;
        n.fine_displacement = fine_displacement;
        n.sgrm_stacks = stack_count;
        n.supervise_64 = supervise_64;
        n.guidance_enabled = guidance_enabled;
        n.use_local_prior_in_cost = use_local_prior_in_cost;
        n.use_local_details_in_guidance = use_local_details_in_guidance;
        n.add_local_prior_to_sgrm = add_local_prior_to_sgrm;
        n.share_sgrm_params = share_sgrm_params;
        return n;
    }

    LrSchedule schedule() const {
        LrSchedule s;
        s.base = learning_rate;
        s.factor = lr_factor;
        s.halve_every = lr_halve_every;
        s.boundaries = lr_boundaries;
        return s;
    }

    template <typename T>
    std::vector<T> resolved_loss_weights() const {
        const size_t count = static_cast<size_t>(supervision_count());
        std::vector<T> w(count);
        if (loss_weights.empty()) {
            for (auto& v : w) v = T(1) / static_cast<T>(count);
        } else {
            for (size_t i = 0; i < count; ++i) w[i] = static_cast<T>(loss_weights[i]);
        }
        return w;
    }

    void set(const std::string& key, const std::string& value) {
        auto to_i = [&](const std::string& v) {
            try {
                return static_cast<int64_t>(std::stoll(v));
            } catch (const std::exception&) {
                throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
            }
        };
        auto to_d = [&](const std::string& v) {
            try {
                return std::stod(v);
            } catch (const std::exception&) {
                throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
            }
        };
        if (key == "width_multiplier") width_multiplier = detail::parse_multiplier(value);
        else if (key == "height") height = to_i(value);
        else if (key == "width") width = to_i(value);
        else if (key == "max_displacement") max_displacement = to_i(value);
        else if (key == "fine_displacement") fine_displacement = to_i(value);
        else if (key == "stack_count") stack_count = to_i(value);
        else if (key == "guidance_enabled") guidance_enabled = detail::parse_bool(key, value);
        else if (key == "use_local_prior_in_cost") use_local_prior_in_cost = detail::parse_bool(key, value);
        else if (key == "use_local_details_in_guidance") use_local_details_in_guidance = detail::parse_bool(key, value);
        else if (key == "add_local_prior_to_sgrm") add_local_prior_to_sgrm = detail::parse_bool(key, value);
        else if (key == "share_sgrm_params") share_sgrm_params = detail::parse_bool(key, value);
        else if (key == "supervise_64") supervise_64 = detail::parse_bool(key, value);
        else if (key == "learning_rate") learning_rate = to_d(value);
        else if (key == "lr_factor") lr_factor = to_d(value);
        else if (key == "lr_halve_every") lr_halve_every = to_i(value);
        else if (key == "lr_boundaries") lr_boundaries = detail::parse_list<int64_t>(key, value, [](const std::string& v) { return std::stoll(v); });
        else if (key == "iterations") iterations = to_i(value);
        else if (key == "batch_size") batch_size = to_i(value);
        else if (key == "seed") seed = static_cast<uint64_t>(to_i(value));
        else if (key == "loss_weights") loss_weights = detail::parse_list<double>(key, value, [](const std::string& v) { return std::stod(v); });
        else if (key == "dataset_dir") dataset_dir = value;
        else if (key == "sample_count") sample_count = to_i(value);
        else if (key == "data_max_disp") data_max_disp = to_i(value);
        else if (key == "data_shape_count") data_shape_count = to_i(value);
        else if (key == "val_count") val_count = to_i(value);
        else if (key == "log_every") log_every = to_i(value);
        else if (key == "checkpoint_every") checkpoint_every = to_i(value);
        else if (key == "checkpoint_path") checkpoint_path = value;
        else if (key == "metrics_path") metrics_path = value;
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    std::string serialize() const {
        std::ostringstream os;
        os.precision(17);
        os << "width_multiplier=" << width_multiplier << "\n";
        os << "height=" << height << "\n";
        os << "width=" << width << "\n";
        os << "max_displacement=" << max_displacement << "\n";
        os << "fine_displacement=" << fine_displacement << "\n";
        os << "stack_count=" << stack_count << "\n";
        os << "guidance_enabled=" << (guidance_enabled ? 1 : 0) << "\n";
        os << "use_local_prior_in_cost=" << (use_local_prior_in_cost ? 1 : 0) << "\n";
        os << "use_local_details_in_guidance=" << (use_local_details_in_guidance ? 1 : 0) << "\n";
        os << "add_local_prior_to_sgrm=" << (add_local_prior_to_sgrm ? 1 : 0) << "\n";
        os << "share_sgrm_params=" << (share_sgrm_params ? 1 : 0) << "\n";
        os << "supervise_64=" << (supervise_64 ? 1 : 0) << "\n";
        os << "learning_rate=" << learning_rate << "\n";
        os << "lr_factor=" << lr_factor << "\n";
        os << "lr_halve_every=" << lr_halve_every << "\n";
        os << "lr_boundaries=" << join(lr_boundaries) << "\n";
        os << "iterations=" << iterations << "\n";
        os << "batch_size=" << batch_size << "\n";
        os << "seed=" << seed << "\n";
        os << "loss_weights=" << join(loss_weights) << "\n";
        os << "dataset_dir=" << dataset_dir << "\n";
        os << "sample_count=" << sample_count << "\n";
        os << "data_max_disp=" << data_max_disp << "\n";
        os << "data_shape_count=" << data_shape_count << "\n";
        os << "val_count=" << val_count << "\n";
        os << "log_every=" << log_every << "\n";
        os << "checkpoint_every=" << checkpoint_every << "\n";
        os << "checkpoint_path=" << checkpoint_path << "\n";
        os << "metrics_path=" << metrics_path << "\n";
        return os.str();
    }

    void apply_text(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        int64_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            const size_t eq = t.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                            " is not key=value: '" + t + "'");
            }
            set(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
        }
    }

    static TrainConfig from_text(const std::string& text) {
        TrainConfig c;
        c.apply_text(text);
        return c;
    }

    static TrainConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw std::runtime_error("config: cannot open " + path);
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return from_text(buf.str());
    }

  private:
    template <typename V>
    static std::string join(const std::vector<V>& values) {
        std::ostringstream os;
        os.precision(17);
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) os << ",";
            os << values[i];
        }
        return os.str();
    }
};

}  // namespace msfnet
