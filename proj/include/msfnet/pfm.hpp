#pragma once

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/tensor.hpp"

namespace msfnet {

namespace detail {

// Header tokens are separated by arbitrary whitespace; exactly one whitespace
// byte follows the scale before the pixel payload.
inline std::string pfm_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF && std::isspace(c)) c = in.get();
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (tok.empty()) {
        throw std::runtime_error("pfm: truncated header");
    }
    return tok;
}

inline void pfm_byteswap(std::vector<float>& v) {
    for (auto& f : v) {
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        bits = ((bits & 0xff000000u) >> 24) | ((bits & 0x00ff0000u) >> 8) |
               ((bits & 0x0000ff00u) << 8) | ((bits & 0x000000ffu) << 24);
        std::memcpy(&f, &bits, 4);
    }
}

inline bool host_is_little_endian() {
    const uint32_t probe = 1;
    unsigned char byte;
    std::memcpy(&byte, &probe, 1);
    return byte == 1;
}

}  // namespace detail

// Reads a grayscale portable float map into a 1x1xHxW tensor. PFM stores
// rows bottom to top; the result is top to bottom.
inline Tensor<float> load_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("pfm: cannot open " + path);
    }
    const std::string magic = detail::pfm_token(in);
    if (magic == "PF") {
        throw std::runtime_error("pfm: color images unsupported in " + path);
    }
    if (magic != "Pf") {
        throw std::runtime_error("pfm: bad magic '" + magic + "' in " + path);
    }
    int64_t w, h;
    double scale;
    try {
        w = std::stoll(detail::pfm_token(in));
        h = std::stoll(detail::pfm_token(in));
        scale = std::stod(detail::pfm_token(in));
    } catch (const std::exception&) {
        throw std::runtime_error("pfm: malformed header in " + path);
    }
    if (w < 1 || h < 1) {
        throw std::runtime_error("pfm: bad dimensions in " + path);
    }
    if (scale == 0.0) {
        throw std::runtime_error("pfm: zero scale in " + path);
    }

    std::vector<float> row(static_cast<size_t>(w));
    Tensor<float> out(Shape{1, 1, h, w});
    const bool file_little = scale < 0.0;
    for (int64_t y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), w * 4);
        if (in.gcount() != w * 4) {
            throw std::runtime_error("pfm: truncated payload in " + path);
        }
        if (file_little != detail::host_is_little_endian()) {
            detail::pfm_byteswap(row);
        }
        std::memcpy(out.data().data() + y * w, row.data(), static_cast<size_t>(w) * 4);
    }
    return out;
}

// Writes a 1x1xHxW tensor as a little-endian grayscale PFM.
inline void save_pfm(const Tensor<float>& t, const std::string& path) {
    const Shape s = t.shape();
    if (s.n != 1 || s.c != 1) {
        throw std::invalid_argument("pfm: expected 1x1xHxW tensor, got " + s.str());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("pfm: cannot write " + path);
    }
    out << "Pf\n" << s.w << " " << s.h << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(s.w));
    for (int64_t y = s.h - 1; y >= 0; --y) {
        std::memcpy(row.data(), t.data().data() + y * s.w, static_cast<size_t>(s.w) * 4);
        if (!detail::host_is_little_endian()) {
            detail::pfm_byteswap(row);
        }
        out.write(reinterpret_cast<const char*>(row.data()), s.w * 4);
    }
    if (!out) {
        throw std::runtime_error("pfm: short write to " + path);
    }
}

}  // namespace msfnet
