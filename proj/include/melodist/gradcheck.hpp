#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "melodist/tensor.hpp"

namespace melodist {

struct GradCheckResult {
    double max_rel_err = 0.0;
    size_t checked = 0;
};

// Compares tape gradients of a scalar-valued function against central
// differences over every entry of every input. `make_loss` must rebuild the
// graph from scratch each call (tapes are single-use). rel = |a-b| /
// max(1, |a|, |b|).
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& make_loss,
                           std::vector<Tensor<T>> inputs, double h = 1e-5) {
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.clear_grad();
    }
    {
        Tape<T> tape;
        typename Tape<T>::Scope scope(tape);
        Tensor<T> loss = make_loss();
        tape.backward(loss);
    }
    GradCheckResult res;
    for (auto& in : inputs) {
        std::vector<T> analytic = in.has_grad() ? in.grad() : std::vector<T>(in.numel(), T(0));
        in.set_requires_grad(false);
        for (size_t i = 0; i < in.numel(); ++i) {
            const T orig = in.values()[i];
            in.values_mut()[i] = orig + static_cast<T>(h);
            const double fp = static_cast<double>(make_loss().item());
            in.values_mut()[i] = orig - static_cast<T>(h);
            const double fm = static_cast<double>(make_loss().item());
            in.values_mut()[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = static_cast<double>(analytic[i]);
            const double rel =
                std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.checked;
        }
        in.set_requires_grad(true);
    }
    return res;
}

}  // namespace melodist
