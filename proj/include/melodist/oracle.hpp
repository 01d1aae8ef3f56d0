#pragma once

#include <cmath>

#include "melodist/common.hpp"
#include "melodist/tensor.hpp"

namespace melodist {

// Diagonal Gaussian data model N(mu, sigma_d^2 I); mu is a single scalar
// (applied to every element) or one value per element of x.
template <typename T>
struct GaussianSpec {
    std::vector<T> mu;
    T sigma_d;

    static GaussianSpec scalar(T mu_v, T sigma_d_v) { return {{mu_v}, sigma_d_v}; }

    T mu_at(size_t i) const { return mu.size() == 1 ? mu[0] : mu[i]; }
    void check(size_t n) const {
        if (!(sigma_d > T(0))) fail("GaussianSpec: sigma_d must be positive, got ", sigma_d);
        if (mu.size() != 1 && mu.size() != n)
            fail("GaussianSpec: mu has ", mu.size(), " entries for tensor of ", n);
    }
};

// Posterior mean of x_0 given x_t = x_0 + t z: D*(x,t) = (sd^2 x + t^2 mu) /
// (sd^2 + t^2). The ideal denoiser every trained one is compared against.
template <typename T>
Tensor<T> analytic_denoiser(const Tensor<T>& x, T t, const GaussianSpec<T>& g) {
    g.check(x.numel());
    if (t < T(0)) fail("analytic_denoiser: t must be >= 0, got ", t);
    const T sd2 = g.sigma_d * g.sigma_d;
    const T t2 = t * t;
    const T denom = sd2 + t2;
    std::vector<T> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = (sd2 * x.values()[i] + t2 * g.mu_at(i)) / denom;
    return Tensor<T>(x.shape(), std::move(out));
}

// Closed-form PF-ODE solution through (x_T, T): x(t) = mu + (x_T - mu) *
// sqrt((sd^2 + t^2)/(sd^2 + T^2)). Satisfies dx/dt = (x - D*)/t.
template <typename T>
Tensor<T> analytic_trajectory(const Tensor<T>& x_T, T t_start, T t, const GaussianSpec<T>& g) {
    g.check(x_T.numel());
    if (!(t > T(0))) fail("analytic_trajectory: t must be positive, got ", t);
    if (t > t_start)
        fail("analytic_trajectory: t=", t, " beyond trajectory start T=", t_start);
    const T sd2 = g.sigma_d * g.sigma_d;
    const T scale = std::sqrt((sd2 + t * t) / (sd2 + t_start * t_start));
    std::vector<T> out(x_T.numel());
    for (size_t i = 0; i < out.size(); ++i) {
        const T m = g.mu_at(i);
        out[i] = m + (x_T.values()[i] - m) * scale;
    }
    return Tensor<T>(x_T.shape(), std::move(out));
}

// Exact consistency function: where the trajectory through (x_t, t) lands at
// epsilon. f(x, eps) == x by construction.
template <typename T>
Tensor<T> analytic_consistency(const Tensor<T>& x_t, T t, const GaussianSpec<T>& g, T epsilon) {
    if (t < epsilon) fail("analytic_consistency: t=", t, " below epsilon=", epsilon);
    return analytic_trajectory(x_t, t, epsilon, g);
}

}  // namespace melodist
