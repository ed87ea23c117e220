#include "catch_amalgamated.hpp"

#include <cmath>

#include <levyforest/mechanism.hpp>
#include <levyforest/numerics.hpp>
#include <levyforest/rng.hpp>

using namespace levyforest;

namespace {

// Independent quadrature oracle for the Levy-part integral
// int_0^inf (e^{-lambda r} - 1 + lambda r) c r^{-1-gamma} dr.
double stable_integral_oracle(double c, double gamma, double lambda) {
    // adaptive quadrature in log coordinates on [eps, R], plus the Taylor
    // expansion of the integrand below eps and the asymptotic tail beyond R
    // (both carry real mass when gamma is near 2 resp. near 1)
    const double eps = 1e-7 / lambda;
    const double R = 1e16 / lambda;
    const auto g = [&](double t) {
        const double r = std::exp(t);
        return c * (std::expm1(-lambda * r) + lambda * r) * std::pow(r, -gamma);
    };
    const double body = integrate(g, std::log(eps), std::log(R), 1e-13);
    const double l2 = lambda * lambda;
    const double head =
        c * (l2 * std::pow(eps, 2.0 - gamma) / (2.0 * (2.0 - gamma)) -
             l2 * lambda * std::pow(eps, 3.0 - gamma) / (6.0 * (3.0 - gamma)) +
             l2 * l2 * std::pow(eps, 4.0 - gamma) / (24.0 * (4.0 - gamma)));
    const double tail = c * (lambda * std::pow(R, 1.0 - gamma) / (gamma - 1.0) -
                             std::pow(R, -gamma) / gamma);
    return head + body + tail;
}

double tail_integral_oracle(const BranchingMechanism& m, double x) {
    return integrate(
        [&](double t) {
            const double u = std::exp(t);
            return u / m.psi(u);
        },
        std::log(x), std::log(1e9), 1e-13);
}

} // namespace

TEST_CASE("psi closed forms") {
    const auto quad = BranchingMechanism::quadratic(1.0);
    CHECK(quad.psi(3.0) == Catch::Approx(9.0).margin(1e-14));
    CHECK(quad.psi(0.0) == 0.0);

    const auto ns = BranchingMechanism::normalized_stable(1.5);
    CHECK(ns.psi(4.0) == Catch::Approx(8.0).epsilon(1e-12));

    const auto st = BranchingMechanism::stable(1.0, 1.5);
    const double closed = std::tgamma(0.5) / (1.5 * 0.5) * std::pow(2.0, 1.5);
    CHECK(st.psi(2.0) == Catch::Approx(closed).epsilon(1e-12));
}

TEST_CASE("stable Levy integral matches quadrature oracle to 1e-8") {
    for (double gamma : {1.2, 1.5, 1.8}) {
        const auto m = BranchingMechanism::stable(1.0, gamma);
        for (double lambda : {0.5, 2.0, 7.0}) {
            const double oracle = stable_integral_oracle(1.0, gamma, lambda);
            CHECK(m.psi(lambda) == Catch::Approx(oracle).epsilon(1e-8));
        }
    }
}

TEST_CASE("psi_prime closed forms and finite-difference oracle") {
    CHECK(BranchingMechanism::quadratic(1.0).psi_prime(5.0) ==
          Catch::Approx(10.0).margin(1e-12));
    CHECK(BranchingMechanism::normalized_stable(1.5).psi_prime(4.0) ==
          Catch::Approx(3.0).epsilon(1e-12));

    const std::vector<BranchingMechanism> ms = {
        BranchingMechanism::quadratic(0.7, 0.3),
        BranchingMechanism::normalized_stable(1.3),
        BranchingMechanism::stable(0.9, 1.7, 0.1, 0.2),
        BranchingMechanism::with_atoms(0.5, {{1.0, 0.4}, {2.5, 0.2}}, 0.1),
    };
    const double h = 1e-5;
    for (const auto& m : ms) {
        const double fd = (m.psi(1.0 + h) - m.psi(1.0 - h)) / (2.0 * h);
        CHECK(m.psi_prime(1.0) == Catch::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("solve_v closed forms") {
    const auto quad = BranchingMechanism::quadratic(1.0);
    CHECK(quad.solve_v(0.5) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(quad.solve_v(1e6) == Catch::Approx(1e-6).epsilon(1e-12));

    const auto ns = BranchingMechanism::normalized_stable(1.5);
    CHECK(ns.solve_v(1.0) == Catch::Approx(4.0).epsilon(1e-12));

    // strict monotone decrease over a grid
    for (const auto& m : {quad, ns}) {
        double prev = m.solve_v(1e-2);
        for (int i = 1; i <= 100; ++i) {
            const double a = 1e-2 * std::pow(1.1, i);
            const double v = m.solve_v(a);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("solve_v defining equation holds for numeric families") {
    const auto atoms = BranchingMechanism::with_atoms(0.8, {{0.7, 1.1}, {3.0, 0.25}}, 0.05);
    const auto mixed = BranchingMechanism::stable(0.6, 1.4, 0.0, 0.5);
    for (const auto& m : {atoms, mixed}) {
        for (double a : {0.1, 1.0, 7.5}) {
            const double v = m.solve_v(a);
            CHECK(tail_integral_oracle(m, v) == Catch::Approx(a).margin(1e-8 * std::max(1.0, a)));
        }
    }
}

TEST_CASE("solve_u closed forms and properties") {
    const auto quad = BranchingMechanism::quadratic(1.0);
    CHECK(quad.solve_u(1.0, 1.0) == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(quad.solve_u(0.0, 7.0) == 7.0);
    const auto ns = BranchingMechanism::normalized_stable(1.5);
    CHECK(ns.solve_u(2.0, 1.0) == Catch::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("semigroup property of u on random (s,t,lambda)") {
    const std::vector<BranchingMechanism> ms = {
        BranchingMechanism::quadratic(1.0),
        BranchingMechanism::normalized_stable(1.5),
        BranchingMechanism::with_atoms(1.0, {{1.5, 0.5}}),
    };
    Rng rng(20240811);
    for (const auto& m : ms) {
        for (int i = 0; i < 100; ++i) {
            const double s = rng.uniform(0.01, 2.0);
            const double t = rng.uniform(0.01, 2.0);
            const double lam = rng.uniform(0.01, 5.0);
            const double lhs = m.solve_u(s + t, lam);
            const double rhs = m.solve_u(s, m.solve_u(t, lam));
            CHECK(lhs == Catch::Approx(rhs).margin(1e-6));
        }
    }
}

TEST_CASE("v(a) is the lambda->infinity limit of u_a") {
    // quadratic: the gap at lambda = 1e6 is O(1/(a*lambda))
    const auto quad = BranchingMechanism::quadratic(1.0);
    for (double a : {0.25, 1.0, 3.0}) {
        CHECK(quad.solve_u(a, 1e6) == Catch::Approx(quad.solve_v(a)).epsilon(1e-4));
    }
    // stable: the gap decays like lambda^{1-gamma}, so the 1e-4 agreement
    // needs lambda ~ 1e12 for gamma = 1.5; also check the decay itself
    const auto ns = BranchingMechanism::normalized_stable(1.5);
    for (double a : {0.25, 1.0, 3.0}) {
        const double v = ns.solve_v(a);
        CHECK(ns.solve_u(a, 1e12) == Catch::Approx(v).epsilon(1e-4));
        const double gap6 = std::fabs(ns.solve_u(a, 1e6) / v - 1.0);
        const double gap8 = std::fabs(ns.solve_u(a, 1e8) / v - 1.0);
        CHECK(gap8 < gap6);
        CHECK(gap6 < 2.0 * std::pow(1e6, -0.5) / (0.5 * 0.5 * a));
    }
}

TEST_CASE("convexity, psi(0)=0, psi'(0)=alpha") {
    const std::vector<BranchingMechanism> ms = {
        BranchingMechanism::quadratic(2.0, 0.5),
        BranchingMechanism::normalized_stable(1.2),
        BranchingMechanism::with_atoms(0.3, {{0.5, 2.0}, {4.0, 0.1}}, 0.7),
    };
    Rng rng(42);
    for (const auto& m : ms) {
        CHECK(m.psi(0.0) == 0.0);
        // by convexity alpha = psi'(0) <= (psi(h)-psi(0))/h <= psi'(h), and the
        // quotient shrinks toward alpha as h decreases
        const double h = 1e-7;
        const double q = (m.psi(h) - m.psi(0.0)) / h;
        const double q16 = (m.psi(h / 16.0) - m.psi(0.0)) / (h / 16.0);
        CHECK(q >= m.alpha() - 1e-12);
        CHECK(q <= m.psi_prime(h) + 1e-12);
        CHECK(q16 - m.alpha() <= (q - m.alpha()) + 1e-12);
        for (int i = 0; i < 1000; ++i) {
            double l1 = rng.uniform(0.0, 10.0), l3 = rng.uniform(0.0, 10.0);
            if (l1 > l3) std::swap(l1, l3);
            const double mid = 0.5 * (l1 + l3);
            const double lhs = m.psi(mid);
            const double rhs = 0.5 * (m.psi(l1) + m.psi(l3));
            CHECK(lhs <= rhs + 1e-12 * std::max(1.0, rhs));
            CHECK(m.psi(l3) + 1e-12 * std::max(1.0, m.psi(l3)) >= m.psi(l1));
        }
    }
}

TEST_CASE("bound psi'(lambda) <= 2 psi(2 lambda)/lambda on a log grid") {
    const std::vector<BranchingMechanism> ms = {
        BranchingMechanism::quadratic(1.0),
        BranchingMechanism::normalized_stable(1.5),
        BranchingMechanism::with_atoms(0.4, {{1.0, 1.0}}, 0.2),
    };
    for (const auto& m : ms) {
        for (double lg = -3.0; lg <= 6.0; lg += 0.25) {
            const double lam = std::pow(10.0, lg);
            CHECK(m.psi_prime(lam) <= 2.0 * m.psi(2.0 * lam) / lam * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("indices by family and numeric growth cross-check") {
    const auto quad = BranchingMechanism::quadratic(1.0);
    CHECK(quad.indices().gamma_low == 2.0);
    CHECK(quad.indices().eta_up == 2.0);

    const auto ns = BranchingMechanism::normalized_stable(1.5);
    CHECK(ns.indices().gamma_low == 1.5);
    CHECK(ns.indices().eta_up == 1.5);

    const auto am = BranchingMechanism::with_atoms(1.0, {{1.0, 1.0}});
    CHECK(am.indices().gamma_low == 2.0);
    // lambda^{-1.9} psi -> inf, lambda^{-2.1} psi -> 0 (rate lambda^{+-0.1})
    CHECK(am.psi(1e40) * std::pow(1e40, -1.9) > 1e3);
    CHECK(am.psi(1e40) * std::pow(1e40, -2.1) < 1e-3);
}

TEST_CASE("theoretical dimension formulas") {
    const auto quad = BranchingMechanism::quadratic(1.0);
    const auto d0 = quad.theoretical_dims(0.0, 3);
    CHECK(d0.dim_h_T == Catch::Approx(2.0));
    CHECK(d0.dim_h_level == Catch::Approx(1.0));
    CHECK(d0.dim_range == Catch::Approx(2.0));

    const auto ns = BranchingMechanism::normalized_stable(1.5);
    const auto d1 = ns.theoretical_dims(0.0, 3);
    CHECK(d1.dim_h_T == Catch::Approx(3.0));
    CHECK(d1.dim_p_T == Catch::Approx(3.0));
    CHECK(d1.dim_range == Catch::Approx(3.0));

    const auto d2 = quad.theoretical_dims(1.0, 1);
    CHECK(d2.dim_range == Catch::Approx(1.0));
}

TEST_CASE("quadratic CSBP sampler moments and Laplace transform") {
    Rng rng(777);
    CHECK(csbp_sample_quadratic(1.0, 0.0, 1.0, rng) == 0.0);

    const int n = 1'000'000;
    double sum = 0.0, laplace = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = csbp_sample_quadratic(1.0, 1.0, 1.0, rng);
        sum += y;
        laplace += std::exp(-y);
    }
    CHECK(sum / n == Catch::Approx(1.0).margin(0.01));
    CHECK(laplace / n == Catch::Approx(std::exp(-0.5)).margin(0.003));
}

TEST_CASE("construction rejects unsupported mechanisms") {
    CHECK_THROWS_AS(BranchingMechanism::quadratic(0.0), NonExtinct);
    CHECK_THROWS_AS(BranchingMechanism::with_atoms(0.0, {{1.0, 1.0}}), NonExtinct);
    CHECK_THROWS(BranchingMechanism::stable(1.0, 2.5));
    CHECK_THROWS(BranchingMechanism::stable(1.0, 1.0));
}

TEST_CASE("extinction integral converges for supported families") {
    CHECK(extinction_integral_converges(BranchingMechanism::quadratic(1.0)));
    CHECK(extinction_integral_converges(BranchingMechanism::normalized_stable(1.2)));
    CHECK(extinction_integral_converges(
        BranchingMechanism::with_atoms(0.5, {{1.0, 1.0}}, 0.0)));
}
