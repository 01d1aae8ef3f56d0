#include <doctest.h>

#include <cmath>

#include "melodist/oracle.hpp"
#include "melodist/rng.hpp"

using namespace melodist;

using Td = Tensor<double>;

TEST_CASE("analytic_denoiser: frozen points and limits") {
    auto g = GaussianSpec<double>::scalar(0.0, 1.0);
    Td x({1}, {2.0});

    CHECK(analytic_denoiser(x, 0.0, g).item() == 2.0);
    CHECK(analytic_denoiser(x, 1.0, g).item() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(analytic_denoiser(x, 1e9, g).item() == doctest::Approx(0.0).epsilon(1e-12));

    auto g2 = GaussianSpec<double>::scalar(3.0, 0.5);
    CHECK(analytic_denoiser(x, 1e9, g2).item() == doctest::Approx(3.0).epsilon(1e-12));

    // per-element mu
    GaussianSpec<double> gv{{1.0, -1.0}, 1.0};
    Td x2({2}, {0.0, 0.0});
    auto d = analytic_denoiser(x2, 1e9, gv);
    CHECK(d.values()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.values()[1] == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS(analytic_denoiser(x, -1.0, g));
}

TEST_CASE("analytic_trajectory: identity at start, endpoint, parameter errors") {
    auto g = GaussianSpec<double>::scalar(0.0, 1.0);
    Td xT({1}, {std::sqrt(5.0)});

    CHECK(analytic_trajectory(xT, 2.0, 2.0, g).item() == xT.item());
    // x(t->0) = sqrt(1/5) * sqrt(5) = 1
    CHECK(analytic_trajectory(xT, 2.0, 1e-12, g).item() == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS(analytic_trajectory(xT, 2.0, 0.0, g));
    CHECK_THROWS(analytic_trajectory(xT, 2.0, 3.0, g));
}

TEST_CASE("analytic_trajectory satisfies the flow ODE dx/dt = (x - D*)/t") {
    auto g = GaussianSpec<double>::scalar(0.3, 0.7);
    const double T0 = 80.0;
    double worst = 0.0;
    for (double xT : {-2.0, -0.5, 1.0, 3.0}) {
        Td start({1}, {xT});
        for (double t = 0.01; t < 70.0; t *= 1.9) {
            const double h = 1e-5 * t;
            double xp = analytic_trajectory(start, T0, t + h, g).item();
            double xm = analytic_trajectory(start, T0, t - h, g).item();
            double dxdt = (xp - xm) / (2.0 * h);
            Td xt({1}, {analytic_trajectory(start, T0, t, g).item()});
            double rhs = (xt.item() - analytic_denoiser(xt, t, g).item()) / t;
            worst = std::max(worst, std::abs(dxdt - rhs));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("analytic_consistency: boundary, self-consistency, homogeneity") {
    auto g = GaussianSpec<double>::scalar(0.4, 0.8);
    const double eps = 0.002;

    Td x({1}, {1.3});
    CHECK(analytic_consistency(x, eps, g, eps).item() == x.item());
    CHECK_THROWS(analytic_consistency(x, 0.001, g, eps));

    // two points on one trajectory map to the same endpoint
    Td xT({1}, {1.7});
    const double T0 = 80.0;
    for (double tm : {40.0, 5.0, 0.9, 0.01}) {
        Td xm({1}, {analytic_trajectory(xT, T0, tm, g).item()});
        double em = analytic_consistency(xm, tm, g, eps).item();
        double eT = analytic_consistency(xT, T0, g, eps).item();
        CHECK(std::abs(em - eT) < 1e-9);
    }

    // mu = 0: f(alpha x, t) = alpha f(x, t)
    auto g0 = GaussianSpec<double>::scalar(0.0, 0.8);
    Td x1({1}, {0.6});
    Td x2({1}, {0.6 * 3.5});
    double f1 = analytic_consistency(x1, 2.0, g0, eps).item();
    double f2 = analytic_consistency(x2, 2.0, g0, eps).item();
    CHECK(f2 == doctest::Approx(3.5 * f1).epsilon(1e-12));
}

TEST_CASE("analytic_denoiser minimizes the weighted denoising loss") {
    // common random numbers: same draws for D* and for perturbed D* + delta
    auto g = GaussianSpec<double>::scalar(0.2, 0.6);
    Rng rng(23);
    const double t = 0.9;
    const int n = 20000;
    double base = 0.0, up = 0.0, down = 0.0;
    const double delta = 0.05;
    for (int i = 0; i < n; ++i) {
        double x0 = g.mu[0] + g.sigma_d * rng.normal();
        double xt = x0 + t * rng.normal();
        Td xtt({1}, {xt});
        double d = analytic_denoiser(xtt, t, g).item();
        base += (d - x0) * (d - x0);
        up += (d + delta - x0) * (d + delta - x0);
        down += (d - delta - x0) * (d - delta - x0);
    }
    CHECK(base < up);
    CHECK(base < down);
}
