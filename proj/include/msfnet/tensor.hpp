#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msfnet {

// Dense 4-D extents, NCHW.
struct Shape {
    int64_t n = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    int64_t numel() const { return n * c * h * w; }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << n << "x" << c << "x" << h << "x" << w;
        return os.str();
    }
};

inline Shape make_shape(int64_t n, int64_t c, int64_t h, int64_t w) {
    if (n < 0 || c < 0 || h < 0 || w < 0) {
        throw std::invalid_argument("negative tensor extent");
    }
    return Shape{n, c, h, w};
}

template <typename T>
class Tape;

// Dense NCHW tensor with value semantics over a shared buffer. The buffer is
// treated as immutable once the tensor has been consumed by an operator;
// builders may mutate through data() before that point. The gradient buffer
// is allocated lazily on first accumulation.
template <typename T>
class Tensor {
    struct Impl {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;
        bool requires_grad = false;
        const void* tape = nullptr;
        int64_t node = -1;
    };

  public:
    Tensor() = default;

    explicit Tensor(Shape s, bool requires_grad = false) : impl_(std::make_shared<Impl>()) {
        impl_->shape = s;
        impl_->data.assign(static_cast<size_t>(s.numel()), T(0));
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape s) { return Tensor(s); }

    static Tensor full(Shape s, T value) {
        Tensor t(s);
        for (auto& v : t.data()) v = value;
        return t;
    }

    static Tensor from(Shape s, std::vector<T> values) {
        if (static_cast<int64_t>(values.size()) != s.numel()) {
            throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                        " does not match shape " + s.str());
        }
        Tensor t(s);
        t.data() = std::move(values);
        return t;
    }

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const { return impl_->shape; }
    int64_t numel() const { return impl_->shape.numel(); }

    std::vector<T>& data() { return impl_->data; }
    const std::vector<T>& data() const { return impl_->data; }

    T& at(int64_t n, int64_t c, int64_t y, int64_t x) {
        return impl_->data[static_cast<size_t>(index(n, c, y, x))];
    }
    T at(int64_t n, int64_t c, int64_t y, int64_t x) const {
        return impl_->data[static_cast<size_t>(index(n, c, y, x))];
    }

    int64_t index(int64_t n, int64_t c, int64_t y, int64_t x) const {
        const Shape& s = impl_->shape;
        return ((n * s.c + c) * s.h + y) * s.w + x;
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    bool has_grad() const { return !impl_->grad.empty(); }

    // Gradient buffer, zero-allocated on first touch.
    std::vector<T>& grad() {
        if (impl_->grad.empty()) {
            impl_->grad.assign(impl_->data.size(), T(0));
        }
        return impl_->grad;
    }
    const std::vector<T>& grad() const { return impl_->grad; }

    void zero_grad() {
        if (!impl_->grad.empty()) {
            std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
        }
    }

    void drop_grad() { impl_->grad.clear(); }

    bool all_finite() const {
        for (T v : impl_->data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    // Identity of the underlying buffer; distinct tensors sharing an impl
    // alias the same storage.
    const void* id() const { return impl_.get(); }

    // Tape bookkeeping (set by operator recording).
    void mark_recorded(const void* tape, int64_t node) {
        impl_->tape = tape;
        impl_->node = node;
        impl_->requires_grad = true;
    }
    const void* tape() const { return impl_->tape; }
    int64_t node() const { return impl_->node; }

  private:
    std::shared_ptr<Impl> impl_;
};

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
    }
}

}  // namespace msfnet
