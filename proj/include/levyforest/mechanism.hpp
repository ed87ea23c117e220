#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <levyforest/common.hpp>
#include <levyforest/numerics.hpp>
#include <levyforest/rng.hpp>

namespace levyforest {

struct IndexPair {
    double gamma_low = 0.0;
    double eta_up = 0.0;
};

struct DimensionReport {
    double dim_h_TE = 0.0;
    double dim_p_TE = 0.0;
    double dim_h_T = 0.0;
    double dim_p_T = 0.0;
    double dim_h_level = 0.0;
    double dim_p_level = 0.0;
    double dim_range = 0.0;
};

/**
 * Critical/subcritical branching mechanism
 *     psi(u) = alpha*u + beta*u^2 + int (e^{-u r} - 1 + u r) pi(dr)
 * restricted to three Levy-part families: none, a stable tail
 * pi(dr) = c r^{-1-gamma} dr with gamma in (1,2), or finitely many atoms.
 * Every family admits closed-form or machine-accurate evaluation of psi,
 * psi', the tail integral F(x) = int_x^inf du/psi(u) and its inverse, which
 * is all that v(a) and u_t(lambda) need.
 *
 * Construction enforces the infinite-variation condition (beta > 0 or a
 * stable tail) and almost-sure extinction; both hold by family structure.
 */
class BranchingMechanism {
public:
    enum class LevyKind { None, StableTail, FiniteAtoms };

    struct Atom {
        double r;
        double mass;
    };

    static BranchingMechanism quadratic(double beta, double alpha = 0.0) {
        BranchingMechanism m;
        m.alpha_ = alpha;
        m.beta_ = beta;
        m.kind_ = LevyKind::None;
        m.validate();
        return m;
    }

    /// psi(u) = u^gamma exactly: the stable-tail constant is chosen so the
    /// closed form c * Gamma(2-gamma)/(gamma*(gamma-1)) * u^gamma equals u^gamma.
    static BranchingMechanism normalized_stable(double gamma) {
        return stable(gamma * (gamma - 1.0) / std::tgamma(2.0 - gamma), gamma);
    }

    static BranchingMechanism stable(double c, double gamma, double alpha = 0.0,
                                     double beta = 0.0) {
        BranchingMechanism m;
        m.alpha_ = alpha;
        m.beta_ = beta;
        m.kind_ = LevyKind::StableTail;
        m.c_ = c;
        m.gamma_ = gamma;
        m.stable_coeff_ = c * std::tgamma(2.0 - gamma) / (gamma * (gamma - 1.0));
        m.validate();
        return m;
    }

    static BranchingMechanism with_atoms(double beta, std::vector<Atom> atoms,
                                         double alpha = 0.0) {
        BranchingMechanism m;
        m.alpha_ = alpha;
        m.beta_ = beta;
        m.kind_ = LevyKind::FiniteAtoms;
        m.atoms_ = std::move(atoms);
        m.validate();
        return m;
    }

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    LevyKind levy_kind() const { return kind_; }
    double stable_c() const { return c_; }
    double stable_gamma() const { return gamma_; }
    /// Coefficient c' in the closed form of the stable Levy integral c'*u^gamma.
    double stable_coeff() const { return stable_coeff_; }
    const std::vector<Atom>& atoms() const { return atoms_; }

    bool is_pure_quadratic() const { return kind_ == LevyKind::None; }
    bool is_pure_stable() const { return kind_ == LevyKind::StableTail && beta_ == 0.0; }
    bool is_normalized_stable() const {
        return is_pure_stable() && alpha_ == 0.0 && std::fabs(stable_coeff_ - 1.0) < 1e-12;
    }

    double psi(double lambda) const {
        if (lambda < 0) throw Error("psi: negative argument");
        double value = alpha_ * lambda + beta_ * lambda * lambda;
        switch (kind_) {
            case LevyKind::None:
                break;
            case LevyKind::StableTail:
                value += stable_coeff_ * std::pow(lambda, gamma_);
                break;
            case LevyKind::FiniteAtoms:
                for (const auto& a : atoms_)
                    value += a.mass * (std::expm1(-lambda * a.r) + lambda * a.r);
                break;
        }
        return value;
    }

    double psi_prime(double lambda) const {
        if (lambda < 0) throw Error("psi_prime: negative argument");
        double value = alpha_ + 2.0 * beta_ * lambda;
        switch (kind_) {
            case LevyKind::None:
                break;
            case LevyKind::StableTail:
                value += stable_coeff_ * gamma_ * std::pow(lambda, gamma_ - 1.0);
                break;
            case LevyKind::FiniteAtoms:
                for (const auto& a : atoms_)
                    value += a.mass * a.r * (-std::expm1(-lambda * a.r));
                break;
        }
        return value;
    }

    /// Tail integral F(x) = int_x^infty du / psi(u), finite for x > 0.
    double tail_integral(double x) const {
        if (x <= 0) throw Error("tail_integral: x must be positive");
        if (kind_ == LevyKind::None) {
            if (alpha_ == 0.0) return 1.0 / (beta_ * x);
            return std::log1p(alpha_ / (beta_ * x)) / alpha_;
        }
        if (is_pure_stable()) {
            if (alpha_ == 0.0)
                return std::pow(x, 1.0 - gamma_) / ((gamma_ - 1.0) * stable_coeff_);
            return std::log1p(alpha_ / (stable_coeff_ * std::pow(x, gamma_ - 1.0))) /
                   ((gamma_ - 1.0) * alpha_);
        }
        return tail_integral_numeric(x);
    }

    /// v(a): unique solution of int_{v}^infty du/psi(u) = a.
    double solve_v(double a) const {
        if (a <= 0) throw Error("solve_v: a must be positive");
        if (kind_ == LevyKind::None) {
            if (alpha_ == 0.0) return 1.0 / (beta_ * a);
            return alpha_ / (beta_ * std::expm1(alpha_ * a));
        }
        if (is_pure_stable()) {
            if (alpha_ == 0.0)
                return std::pow((gamma_ - 1.0) * stable_coeff_ * a, -1.0 / (gamma_ - 1.0));
            return std::pow(alpha_ / (stable_coeff_ * std::expm1((gamma_ - 1.0) * alpha_ * a)),
                            1.0 / (gamma_ - 1.0));
        }
        return invert_tail(a);
    }

    /// u_t(lambda): the CSBP Laplace flow du/dt = -psi(u), u_0 = lambda.
    /// Computed through the first integral F(u_t) = F(lambda) + t.
    double solve_u(double t, double lambda) const {
        if (t < 0 || lambda < 0) throw Error("solve_u: bad arguments");
        if (t == 0.0 || lambda == 0.0) return lambda;
        if (kind_ == LevyKind::None) {
            if (alpha_ == 0.0) return lambda / (1.0 + beta_ * lambda * t);
            const double e = std::exp(-alpha_ * t);
            return alpha_ * lambda * e / (alpha_ + beta_ * lambda * (1.0 - e));
        }
        if (is_pure_stable() && alpha_ == 0.0) {
            return std::pow(std::pow(lambda, 1.0 - gamma_) + (gamma_ - 1.0) * stable_coeff_ * t,
                            -1.0 / (gamma_ - 1.0));
        }
        return invert_tail(tail_integral(lambda) + t);
    }

    /// Lower and upper growth indices of psi at infinity, exact by family.
    IndexPair indices() const {
        if (beta_ > 0.0) return {2.0, 2.0};
        return {gamma_, gamma_};
    }

    /// Dimension formulas for the tree, level sets, T(E) and the snake range.
    DimensionReport theoretical_dims(double d_E, int k) const {
        if (d_E < 0 || d_E > 1 || k < 1) throw Error("theoretical_dims: bad arguments");
        const IndexPair ix = indices();
        if (ix.gamma_low <= 1.0)
            throw IndexTooLow("theoretical_dims: gamma <= 1 yields infinite dimension");
        DimensionReport d;
        d.dim_h_TE = d_E + 1.0 / (ix.eta_up - 1.0);
        d.dim_p_TE = d_E + 1.0 / (ix.gamma_low - 1.0);
        d.dim_h_T = ix.eta_up / (ix.eta_up - 1.0);
        d.dim_p_T = ix.gamma_low / (ix.gamma_low - 1.0);
        d.dim_h_level = 1.0 / (ix.eta_up - 1.0);
        d.dim_p_level = 1.0 / (ix.gamma_low - 1.0);
        d.dim_range = std::min(2.0 * d_E + 2.0 / (ix.eta_up - 1.0), double(k));
        return d;
    }

private:
    void validate() const {
        if (alpha_ < 0 || beta_ < 0) throw Error("mechanism: alpha, beta must be >= 0");
        switch (kind_) {
            case LevyKind::None:
                if (beta_ <= 0.0)
                    throw NonExtinct("mechanism: beta = 0 with no Levy part");
                break;
            case LevyKind::StableTail:
                if (!(gamma_ > 1.0 && gamma_ < 2.0))
                    throw Error("mechanism: stable gamma must lie in (1,2)");
                if (c_ <= 0.0) throw Error("mechanism: stable c must be positive");
                break;
            case LevyKind::FiniteAtoms:
                if (beta_ <= 0.0)
                    throw NonExtinct("mechanism: finite atoms require beta > 0");
                for (const auto& a : atoms_)
                    if (a.r <= 0 || a.mass <= 0)
                        throw Error("mechanism: atoms need r > 0, mass > 0");
                break;
        }
    }

    // Numeric F for the finite-atoms and mixed beta+stable families:
    // adaptive quadrature in log coordinates up to L, analytic tail beyond.
    double tail_integral_numeric(double x) const {
        const double L = std::max({1e7, 1e3 * x, atoms_cutoff()});
        const auto integrand = [this](double t) {
            const double u = std::exp(t);
            return u / psi(u);
        };
        const double body = integrate(integrand, std::log(x), std::log(L), 1e-13);
        return body + analytic_tail(L);
    }

    double atoms_cutoff() const {
        if (kind_ != LevyKind::FiniteAtoms) return 0.0;
        double rmin = atoms_.front().r;
        for (const auto& a : atoms_) rmin = std::min(rmin, a.r);
        return 80.0 / rmin;
    }

    double analytic_tail(double L) const {
        if (kind_ == LevyKind::FiniteAtoms) {
            // Beyond L the exponentials are dead: psi(u) = beta u^2 + b u + c0.
            double b = alpha_, c0 = 0.0;
            for (const auto& a : atoms_) {
                b += a.mass * a.r;
                c0 -= a.mass;
            }
            const double disc = b * b - 4.0 * beta_ * c0;
            const double sq = std::sqrt(disc);
            const double r1 = (-b + sq) / (2.0 * beta_);
            const double r2 = (-b - sq) / (2.0 * beta_);
            // int_L^inf du / (beta (u-r1)(u-r2)), both roots < L
            return std::log((L - r2) / (L - r1)) / (beta_ * (r1 - r2));
        }
        // beta > 0 with a stable tail: expand 1/psi = (beta u^2)^{-1} (1 - w + w^2 - w^3)
        // with w = alpha/(beta u) + (c'/beta) u^{gamma-2}; remainder ~ w^4 / u^2.
        const double a1 = alpha_ / beta_;           // coefficient of u^{-1} in w
        const double a2 = stable_coeff_ / beta_;    // coefficient of u^{gamma-2} in w
        const double e2 = gamma_ - 2.0;
        double tail = 0.0;
        // term k: (-1)^k * sum_j C(k,j) a1^{k-j} a2^j * int_L u^{-2-(k-j)+j*e2}
        for (int k = 0; k <= 3; ++k) {
            double binom = 1.0;
            for (int j = 0; j <= k; ++j) {
                const double coeff = binom * std::pow(a1, k - j) * std::pow(a2, j);
                const double expo = -2.0 - double(k - j) + double(j) * e2;
                tail += (k % 2 == 0 ? 1.0 : -1.0) * coeff *
                        std::pow(L, expo + 1.0) / (-(expo + 1.0));
                binom = binom * double(k - j) / double(j + 1);
            }
        }
        return tail / beta_;
    }

    double invert_tail(double target) const {
        // F is strictly decreasing from +inf (x->0) to 0 (x->inf).
        double lo = 1.0, hi = 1.0;
        double flo = tail_integral(lo);
        int guard = 0;
        while (flo < target) {
            lo *= 0.25;
            flo = tail_integral(lo);
            if (++guard > 400) throw NoBracket("invert_tail: lower bracket failed");
        }
        double fhi = tail_integral(hi);
        guard = 0;
        while (fhi > target) {
            hi *= 4.0;
            fhi = tail_integral(hi);
            if (++guard > 400) throw NoBracket("invert_tail: upper bracket failed");
        }
        const double ftol = 1e-10 * std::max(1.0, target);
        return brent_root([&](double x) { return tail_integral(x) - target; }, lo, hi,
                          0.0, ftol);
    }

    double alpha_ = 0.0;
    double beta_ = 0.0;
    LevyKind kind_ = LevyKind::None;
    double c_ = 0.0;
    double gamma_ = 0.0;
    double stable_coeff_ = 0.0;
    std::vector<Atom> atoms_;
};

/// One draw of the quadratic CSBP at time t started from x0, via the
/// compound-Poisson representation implied by u_t(lambda) = lambda/(1+beta*lambda*t).
inline double csbp_sample_quadratic(double beta, double x0, double t, Rng& rng) {
    if (beta <= 0 || t <= 0 || x0 < 0) throw Error("csbp_sample_quadratic: bad arguments");
    if (x0 == 0.0) return 0.0;
    const std::uint64_t m = rng.poisson(x0 / (beta * t));
    double sum = 0.0;
    for (std::uint64_t i = 0; i < m; ++i) sum += rng.exponential(beta * t);
    return sum;
}

/// Numeric check that int_1^L du/psi(u) converges as L grows: per-decade
/// increments must shrink geometrically (they are ~ constant when psi grows
/// only linearly, which is the divergent boundary case).
inline bool extinction_integral_converges(const BranchingMechanism& m) {
    const auto decade = [&](int k) {
        return integrate(
            [&](double t) {
                const double u = std::exp(t);
                return u / m.psi(u);
            },
            std::log(std::pow(10.0, k)), std::log(std::pow(10.0, k + 1)), 1e-12);
    };
    double prev = decade(2);
    for (int k = 3; k <= 10; ++k) {
        const double cur = decade(k);
        if (cur > 0.97 * prev) return false;
        prev = cur;
    }
    return true;
}

} // namespace levyforest
