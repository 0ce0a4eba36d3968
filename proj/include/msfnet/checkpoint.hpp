#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfnet/config.hpp"
#include "msfnet/optim.hpp"
#include "msfnet/params.hpp"

namespace msfnet {

template <typename T>
struct Checkpoint {
    TrainConfig config;
    int64_t iteration = 0;
    ParamSet<T> params;
    AdamState<T> adam;
    std::string rng_state;  // textual mt19937 state
};

namespace detail {

inline void ck_write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t ck_read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw std::runtime_error("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void ck_write_string(std::ostream& out, const std::string& s) {
    ck_write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ck_read_string(std::istream& in) {
    const uint64_t len = ck_read_u64(in);
    if (len > (1ull << 32)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len)) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    return s;
}

template <typename T>
void ck_write_record(std::ostream& out, const std::string& name, const Tensor<T>& t) {
    ck_write_string(out, name);
    const Shape s = t.shape();
    ck_write_u64(out, static_cast<uint64_t>(s.n));
    ck_write_u64(out, static_cast<uint64_t>(s.c));
    ck_write_u64(out, static_cast<uint64_t>(s.h));
    ck_write_u64(out, static_cast<uint64_t>(s.w));
    std::vector<unsigned char> bytes(static_cast<size_t>(t.numel()) * 4);
    for (int64_t i = 0; i < t.numel(); ++i) {
        const float f = static_cast<float>(t.data()[i]);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        for (int j = 0; j < 4; ++j) {
            bytes[static_cast<size_t>(i) * 4 + j] =
                static_cast<unsigned char>((bits >> (8 * j)) & 0xff);
        }
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
Tensor<T> ck_read_record(std::istream& in, std::string& name) {
    name = ck_read_string(in);
    const int64_t n = static_cast<int64_t>(ck_read_u64(in));
    const int64_t c = static_cast<int64_t>(ck_read_u64(in));
    const int64_t h = static_cast<int64_t>(ck_read_u64(in));
    const int64_t w = static_cast<int64_t>(ck_read_u64(in));
    Tensor<T> t(Shape{n, c, h, w});
    std::vector<unsigned char> bytes(static_cast<size_t>(t.numel()) * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw std::runtime_error("checkpoint: truncated record " + name);
    }
    for (int64_t i = 0; i < t.numel(); ++i) {
        uint32_t bits = 0;
        for (int j = 0; j < 4; ++j) {
            bits |= static_cast<uint32_t>(bytes[static_cast<size_t>(i) * 4 + j]) << (8 * j);
        }
        float f;
        std::memcpy(&f, &bits, 4);
        t.data()[i] = static_cast<T>(f);
    }
    return t;
}

}  // namespace detail

// Layout: magic "MSFN", version, serialized config, iteration, Adam step,
// generator state, then the parameter tensors followed by the Adam moment
// buffers as length-prefixed named records of little-endian 32-bit floats.
template <typename T>
void save_checkpoint(const Checkpoint<T>& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot write " + path);
    }
    out.write("MSFN", 4);
    detail::ck_write_u64(out, 1);  // format version
    detail::ck_write_string(out, ck.config.serialize());
    detail::ck_write_u64(out, static_cast<uint64_t>(ck.iteration));
    detail::ck_write_u64(out, static_cast<uint64_t>(ck.adam.step));
    detail::ck_write_string(out, ck.rng_state);

    const size_t n = ck.params.size();
    if (ck.adam.m.size() != n || ck.adam.v.size() != n) {
        throw std::invalid_argument("checkpoint: moment buffers do not match parameters");
    }
    detail::ck_write_u64(out, n);
    for (size_t i = 0; i < n; ++i) {
        detail::ck_write_record(out, ck.params.names()[i], ck.params.at(i));
    }
    for (size_t i = 0; i < n; ++i) {
        detail::ck_write_record(out, ck.params.names()[i], ck.adam.m[i]);
    }
    for (size_t i = 0; i < n; ++i) {
        detail::ck_write_record(out, ck.params.names()[i], ck.adam.v[i]);
    }
    if (!out) {
        throw std::runtime_error("checkpoint: short write to " + path);
    }
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string(magic, 4) != "MSFN") {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const uint64_t version = detail::ck_read_u64(in);
    if (version != 1) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint<T> ck;
    ck.config = TrainConfig::from_text(detail::ck_read_string(in));
    ck.iteration = static_cast<int64_t>(detail::ck_read_u64(in));
    ck.adam.step = static_cast<int64_t>(detail::ck_read_u64(in));
    ck.rng_state = detail::ck_read_string(in);

    const uint64_t n = detail::ck_read_u64(in);
    for (uint64_t i = 0; i < n; ++i) {
        std::string name;
        Tensor<T> t = detail::ck_read_record<T>(in, name);
        ck.params.create(name, t.shape()).data() = t.data();
    }
    auto read_moments = [&](std::vector<Tensor<T>>& dst) {
        for (uint64_t i = 0; i < n; ++i) {
            std::string name;
            Tensor<T> t = detail::ck_read_record<T>(in, name);
            if (name != ck.params.names()[i]) {
                throw std::runtime_error("checkpoint: moment record order mismatch at " + name);
            }
            dst.push_back(std::move(t));
        }
    };
    read_moments(ck.adam.m);
    read_moments(ck.adam.v);
    return ck;
}

}  // namespace msfnet
