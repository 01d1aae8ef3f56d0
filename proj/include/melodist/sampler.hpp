#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "melodist/denoiser.hpp"
#include "melodist/rng.hpp"
#include "melodist/schedule.hpp"
#include "melodist/tensor.hpp"

namespace melodist {

enum class TeacherSolver { euler, heun };

template <typename T>
struct SampleResult {
    Tensor<T> x;
    int nfe = 0;  // denoiser evaluations actually performed
    // (t, state) pairs when recording: initial noise plus every update
    std::vector<std::pair<T, Tensor<T>>> trajectory;
};

namespace detail {

template <typename T>
void ensure_finite_state(const Tensor<T>& x) {
    for (T v : x.values())
        if (!std::isfinite(static_cast<double>(v))) fail("non-finite state");
}

}  // namespace detail

// Integrates dx/dt = (x - D(x,t,cond))/t from t_N down to epsilon over the
// grid. Euler does one evaluation per step; Heun adds the trapezoidal
// correction stage everywhere except the final step down to epsilon.
template <typename T>
SampleResult<T> sample_teacher(const DenoiseFn<T>& D, const Tensor<T>& cond,
                               std::vector<size_t> shape, const TimeGrid<T>& grid, Rng& rng,
                               TeacherSolver solver = TeacherSolver::euler,
                               bool record_trajectory = false) {
    const int N = grid.n_steps;
    SampleResult<T> r;
    Tensor<T> x = scalar_mul(randn<T>(rng, std::move(shape)), grid.times[N]);
    if (record_trajectory) r.trajectory.emplace_back(grid.times[N], x.clone());
    for (int i = N; i >= 1; --i) {
        const T t = grid.times[i];
        const T t_prev = grid.times[i - 1];
        try {
            Tensor<T> d0 = D(x, t, cond);
            ++r.nfe;
            Tensor<T> slope = scalar_mul(sub(x, d0), T(1) / t);
            Tensor<T> x_e = add(x, scalar_mul(slope, t_prev - t));
            if (solver == TeacherSolver::heun && i > 1) {
                Tensor<T> d1 = D(x_e, t_prev, cond);
                ++r.nfe;
                Tensor<T> slope1 = scalar_mul(sub(x_e, d1), T(1) / t_prev);
                x = add(x, scalar_mul(add(slope, slope1), (t_prev - t) / T(2)));
            } else {
                x = x_e;
            }
            detail::ensure_finite_state(x);
        } catch (const Error& e) {
            fail("sample_teacher: step ", N - i + 1, ": ", e.what());
        }
        if (record_trajectory) r.trajectory.emplace_back(t_prev, x.clone());
    }
    r.x = x;
    return r;
}

// Noise levels used by k-step student sampling: k grid indices, evenly spaced
// as round(N*(k-j)/k) for j = 0..k-1. Strictly descending, always starts at N,
// never reaches index 0 (epsilon itself is the output level, not an input).
inline std::vector<int> student_subgrid(int steps, int n_grid_steps) {
    if (steps < 1 || steps > n_grid_steps)
        fail("sample_student: steps must be in [1,", n_grid_steps, "], got ", steps);
    std::vector<int> idx(static_cast<size_t>(steps));
    for (int j = 0; j < steps; ++j)
        idx[static_cast<size_t>(j)] = static_cast<int>(
            std::llround(static_cast<double>(n_grid_steps) * (steps - j) / steps));
    return idx;
}

// k-step consistency sampling: denoise pure noise at t_N, then alternate
// re-noising to the next sub-grid level with a fresh draw and denoising again.
template <typename T>
SampleResult<T> sample_student(const DenoiseFn<T>& D, const Tensor<T>& cond,
                               std::vector<size_t> shape, int steps, const TimeGrid<T>& grid,
                               Rng& rng, bool record_trajectory = false) {
    const std::vector<int> idx = student_subgrid(steps, grid.n_steps);
    const T eps = grid.epsilon;
    SampleResult<T> r;
    Tensor<T> x = scalar_mul(randn<T>(rng, std::move(shape)), grid.times[grid.n_steps]);
    if (record_trajectory) r.trajectory.emplace_back(grid.times[grid.n_steps], x.clone());
    try {
        x = D(x, grid.times[grid.n_steps], cond);
        ++r.nfe;
        detail::ensure_finite_state(x);
    } catch (const Error& e) {
        fail("sample_student: step 1: ", e.what());
    }
    if (record_trajectory) r.trajectory.emplace_back(eps, x.clone());
    for (size_t j = 1; j < idx.size(); ++j) {
        const T t = grid.times[static_cast<size_t>(idx[j])];
        try {
            Tensor<T> z = randn<T>(rng, x.shape());
            Tensor<T> x_t = add(x, scalar_mul(z, std::sqrt(t * t - eps * eps)));
            x = D(x_t, t, cond);
            ++r.nfe;
            detail::ensure_finite_state(x);
        } catch (const Error& e) {
            fail("sample_student: step ", j + 1, ": ", e.what());
        }
        if (record_trajectory) r.trajectory.emplace_back(eps, x.clone());
    }
    r.x = x;
    return r;
}

}  // namespace melodist
