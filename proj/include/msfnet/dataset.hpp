#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/data.hpp"
#include "msfnet/image_io.hpp"
#include "msfnet/pfm.hpp"

namespace msfnet {

// Directory-pair layout: left/NNNN.ppm, right/NNNN.ppm, disp/NNNN.pfm.
inline std::string sample_stem(int64_t index) {
    std::ostringstream os;
    os << std::setw(4) << std::setfill('0') << index;
    return os.str();
}

template <typename T>
void write_sample(const StereoSample<T>& sample, const std::string& dir, int64_t index) {
    if (sample.left.shape().n != 1) {
        throw std::invalid_argument("write_sample: batch size must be 1");
    }
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "left");
    fs::create_directories(fs::path(dir) / "right");
    fs::create_directories(fs::path(dir) / "disp");
    const std::string stem = sample_stem(index);
    save_ppm(sample.left, (fs::path(dir) / "left" / (stem + ".ppm")).string());
    save_ppm(sample.right, (fs::path(dir) / "right" / (stem + ".ppm")).string());

    Tensor<float> disp(sample.gt.values.shape());
    for (int64_t i = 0; i < disp.numel(); ++i) {
        disp.data()[i] = sample.gt.valid.data()[i] != T(0)
                             ? static_cast<float>(sample.gt.values.data()[i])
                             : std::numeric_limits<float>::infinity();
    }
    save_pfm(disp, (fs::path(dir) / "disp" / (stem + ".pfm")).string());
}

// Loads one indexed sample. Non-finite or negative disparities are marked
// invalid (Scene Flow files use such values for missing ground truth).
template <typename T>
StereoSample<T> load_sample(const std::string& dir, int64_t index) {
    namespace fs = std::filesystem;
    const std::string stem = sample_stem(index);
    StereoSample<T> s;
    s.left = load_ppm<T>((fs::path(dir) / "left" / (stem + ".ppm")).string());
    s.right = load_ppm<T>((fs::path(dir) / "right" / (stem + ".ppm")).string());
    Tensor<float> disp = load_pfm((fs::path(dir) / "disp" / (stem + ".pfm")).string());
    if (!(disp.shape().h == s.left.shape().h && disp.shape().w == s.left.shape().w)) {
        throw std::runtime_error("load_sample: disparity " + disp.shape().str() +
                                 " does not match image " + s.left.shape().str());
    }
    s.gt.values = Tensor<T>(disp.shape());
    s.gt.valid = Tensor<T>(disp.shape());
    s.gt.scale = 1;
    for (int64_t i = 0; i < disp.numel(); ++i) {
        const float v = disp.data()[i];
        const bool ok = std::isfinite(v) && v >= 0.0f;
        s.gt.values.data()[i] = ok ? static_cast<T>(v) : T(0);
        s.gt.valid.data()[i] = ok ? T(1) : T(0);
    }
    s.occlusion = Tensor<T>(Shape{1, 1, disp.shape().h, disp.shape().w});
    return s;
}

inline int64_t count_samples(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path left = fs::path(dir) / "left";
    if (!fs::is_directory(left)) {
        throw std::runtime_error("dataset: missing directory " + left.string());
    }
    int64_t count = 0;
    for (const auto& e : fs::directory_iterator(left)) {
        if (e.path().extension() == ".ppm") ++count;
    }
    return count;
}

template <typename T>
std::vector<StereoSample<T>> load_dataset(const std::string& dir) {
    const int64_t count = count_samples(dir);
    if (count == 0) {
        throw std::runtime_error("dataset: no samples under " + dir);
    }
    std::vector<StereoSample<T>> samples;
    samples.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        samples.push_back(load_sample<T>(dir, i));
    }
    return samples;
}

}  // namespace msfnet
