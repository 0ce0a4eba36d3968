#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/pfm.hpp"
#include "msfnet/stereo_ops.hpp"
#include "msfnet/tensor.hpp"

namespace msfnet {

namespace detail {

inline void write_pnm(const std::string& path, const std::string& magic, int64_t w, int64_t h,
                      const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << magic << "\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("short write to " + path);
    }
}

inline std::vector<uint8_t> read_pnm(const std::string& path, const std::string& expect_magic,
                                     int64_t& w, int64_t& h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    const std::string magic = pfm_token(in);
    if (magic != expect_magic) {
        throw std::runtime_error(path + ": expected " + expect_magic + ", got '" + magic + "'");
    }
    int64_t maxval;
    try {
        w = std::stoll(pfm_token(in));
        h = std::stoll(pfm_token(in));
        maxval = std::stoll(pfm_token(in));
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed header");
    }
    if (w < 1 || h < 1 || maxval != 255) {
        throw std::runtime_error(path + ": unsupported header");
    }
    const int64_t channels = expect_magic == "P6" ? 3 : 1;
    std::vector<uint8_t> bytes(static_cast<size_t>(w * h * channels));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw std::runtime_error(path + ": truncated payload");
    }
    return bytes;
}

inline uint8_t quantize_unit(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
}

}  // namespace detail

// 8-bit binary PGM of a 1x1xHxW tensor with values in [0, 1].
template <typename T>
void save_pgm(const Tensor<T>& t, const std::string& path) {
    const Shape s = t.shape();
    if (s.n != 1 || s.c != 1) {
        throw std::invalid_argument("save_pgm: expected 1x1xHxW tensor, got " + s.str());
    }
    std::vector<uint8_t> bytes(static_cast<size_t>(s.h * s.w));
    for (int64_t i = 0; i < s.h * s.w; ++i) {
        bytes[static_cast<size_t>(i)] = detail::quantize_unit(static_cast<double>(t.data()[i]));
    }
    detail::write_pnm(path, "P5", s.w, s.h, bytes);
}

// 8-bit binary PPM of a 1x3xHxW tensor with values in [0, 1].
template <typename T>
void save_ppm(const Tensor<T>& t, const std::string& path) {
    const Shape s = t.shape();
    if (s.n != 1 || s.c != 3) {
        throw std::invalid_argument("save_ppm: expected 1x3xHxW tensor, got " + s.str());
    }
    std::vector<uint8_t> bytes(static_cast<size_t>(s.h * s.w * 3));
    size_t i = 0;
    for (int64_t y = 0; y < s.h; ++y) {
        for (int64_t x = 0; x < s.w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                bytes[i++] = detail::quantize_unit(static_cast<double>(t.at(0, c, y, x)));
            }
        }
    }
    detail::write_pnm(path, "P6", s.w, s.h, bytes);
}

template <typename T>
Tensor<T> load_ppm(const std::string& path) {
    int64_t w = 0, h = 0;
    const std::vector<uint8_t> bytes = detail::read_pnm(path, "P6", w, h);
    Tensor<T> t(Shape{1, 3, h, w});
    size_t i = 0;
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                t.at(0, c, y, x) = static_cast<T>(bytes[i++]) / T(255);
            }
        }
    }
    return t;
}

// Grayscale visualization: value = round(255 * clamp(d, 0, max_disp) / max_disp),
// rounding half up.
template <typename T>
void export_disparity_image(const DisparityMap<T>& map, const std::string& path, double max_disp) {
    if (!(max_disp > 0.0)) {
        throw std::invalid_argument("export_disparity_image: max_disp must be > 0");
    }
    const Shape s = map.values.shape();
    if (s.n != 1) {
        throw std::invalid_argument("export_disparity_image: batch size must be 1");
    }
    std::vector<uint8_t> bytes(static_cast<size_t>(s.h * s.w));
    for (int64_t i = 0; i < s.h * s.w; ++i) {
        double d = static_cast<double>(map.values.data()[i]);
        if (d < 0.0) d = 0.0;
        if (d > max_disp) d = max_disp;
        bytes[static_cast<size_t>(i)] = static_cast<uint8_t>(std::floor(255.0 * d / max_disp + 0.5));
    }
    detail::write_pnm(path, "P5", s.w, s.h, bytes);
}

}  // namespace msfnet
