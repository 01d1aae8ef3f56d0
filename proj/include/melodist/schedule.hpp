#pragma once

#include <cmath>
#include <vector>

#include "melodist/common.hpp"
#include "melodist/rng.hpp"

namespace melodist {

// Noise-level grid warped by rho: times[i] = (eps^(1/rho) + (i/N)*(t_max^(1/rho)
// - eps^(1/rho)))^rho, increasing from epsilon to t_max.
template <typename T>
struct TimeGrid {
    T epsilon;
    T t_max;
    int n_steps;
    T rho;
    std::vector<T> times;  // n_steps + 1 entries
};

template <typename T>
TimeGrid<T> karras_grid(int n_steps, T epsilon, T t_max, T rho) {
    if (n_steps < 1) fail("karras_grid: n_steps must be >= 1, got ", n_steps);
    if (!(epsilon > T(0))) fail("karras_grid: epsilon must be positive, got ", epsilon);
    if (!(epsilon < t_max)) fail("karras_grid: need epsilon < t_max, got ", epsilon, " vs ", t_max);
    if (!(rho >= T(1))) fail("karras_grid: rho must be >= 1, got ", rho);
    TimeGrid<T> g{epsilon, t_max, n_steps, rho, {}};
    g.times.resize(static_cast<size_t>(n_steps) + 1);
    const T inv = T(1) / rho;
    const T lo = std::pow(epsilon, inv);
    const T hi = std::pow(t_max, inv);
    for (int i = 0; i <= n_steps; ++i) {
        const T f = static_cast<T>(i) / static_cast<T>(n_steps);
        g.times[static_cast<size_t>(i)] = std::pow(lo + f * (hi - lo), rho);
    }
    g.times.front() = epsilon;  // pin endpoints against pow round-trip error
    g.times.back() = t_max;
    for (size_t i = 1; i < g.times.size(); ++i)
        if (!(g.times[i] > g.times[i - 1]))
            fail("karras_grid: times not strictly increasing at index ", i);
    return g;
}

template <typename T>
struct Precond {
    T sigma_data;
    T epsilon;       // boundary time where the denoiser must be the identity
    T t_max = T(80); // upper end of the valid noise-level range
};

template <typename T>
struct PrecondCoeffs {
    T c_skip, c_out, c_in, c_noise;
};

// Skip/output scales enforce D(x, eps) = x structurally; c_in normalizes the
// network input magnitude and c_noise conditions on log noise level.
template <typename T>
PrecondCoeffs<T> precond_coeffs(T t, const Precond<T>& p) {
    if (!(p.sigma_data > T(0)) || !std::isfinite(static_cast<double>(p.sigma_data)))
        fail("precond_coeffs: sigma_data must be finite and positive, got ", p.sigma_data);
    if (t < p.epsilon) fail("precond_coeffs: t=", t, " below epsilon=", p.epsilon);
    const T sd2 = p.sigma_data * p.sigma_data;
    const T dt = t - p.epsilon;
    PrecondCoeffs<T> c;
    c.c_skip = sd2 / (dt * dt + sd2);
    c.c_out = p.sigma_data * dt / std::sqrt(sd2 + t * t);
    c.c_in = T(1) / std::sqrt(sd2 + t * t);
    c.c_noise = std::log(t) / T(4);
    return c;
}

// lambda(t) = (t^2 + sigma_d^2) / (t * sigma_d)^2: up-weights low-noise levels
// so the effective loss stays O(1) across the grid.
template <typename T>
T loss_weight(T t, const Precond<T>& p) {
    if (!(t > T(0))) fail("loss_weight: t must be positive, got ", t);
    const T sd2 = p.sigma_data * p.sigma_data;
    return (t * t + sd2) / (t * t * sd2);
}

template <typename T>
struct NoiseLevelDist {
    T p_mean = T(-1.2);
    T p_std = T(1.2);
    T t_lo = T(0.002);
    T t_hi = T(80);
};

// ln t ~ Normal(p_mean, p_std^2), clamped to [t_lo, t_hi]
template <typename T>
T sample_train_noise_level(Rng& rng, const NoiseLevelDist<T>& d = {}) {
    const T t = std::exp(d.p_mean + d.p_std * static_cast<T>(rng.normal()));
    return std::min(d.t_hi, std::max(d.t_lo, t));
}

}  // namespace melodist
