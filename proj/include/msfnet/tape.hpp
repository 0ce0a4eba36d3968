#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "msfnet/tensor.hpp"

namespace msfnet {

// Reverse-mode tape. Operators record one backward step per recorded op;
// backward() replays the steps in exact reverse order. Gradients accumulate
// additively, so a tensor feeding several consumers receives the sum of the
// incoming gradients. One tape per network step, single-threaded.
template <typename T>
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int64_t size() const { return static_cast<int64_t>(steps_.size()); }

    void push(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

    void backward(Tensor<T>& loss) {
        if (loss.numel() != 1) {
            throw std::invalid_argument("backward: loss must be scalar, got " + loss.shape().str());
        }
        if (loss.tape() != this) {
            throw std::invalid_argument("backward: loss was not produced by this tape");
        }
        loss.grad()[0] = T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
            (*it)();
        }
    }

    static Tape* current() { return current_; }

    // RAII scope making a tape the recording target for the current thread.
    class Scope {
      public:
        explicit Scope(Tape& t) : prev_(current_) { current_ = &t; }
        ~Scope() { current_ = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

      private:
        Tape* prev_;
    };

  private:
    std::vector<std::function<void()>> steps_;
    inline static thread_local Tape* current_ = nullptr;
};

// Records `backward_step` for `out` when a tape is active and any input wants
// gradients. Returns true when recorded.
template <typename T, typename F>
inline bool record_op(bool any_input_requires_grad, Tensor<T>& out, F&& backward_step) {
    Tape<T>* t = Tape<T>::current();
    if (t == nullptr || !any_input_requires_grad) {
        return false;
    }
    out.mark_recorded(t, t->size());
    t->push(std::forward<F>(backward_step));
    return true;
}

}  // namespace msfnet
