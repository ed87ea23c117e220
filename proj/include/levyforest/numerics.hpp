#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <levyforest/common.hpp>

namespace levyforest {

/// Adaptive Simpson quadrature on [a,b] with absolute/relative tolerance.
template <typename F>
double integrate(F&& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
    struct Rec {
        static double simpson(const F& f, double a, double fa, double b, double fb,
                              double fm) {
            return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        }
        static double go(const F& f, double a, double fa, double b, double fb,
                         double fm, double whole, double tol, double floor,
                         int depth) {
            const double m = 0.5 * (a + b);
            if (m <= a || m >= b) return whole;
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            const double left = simpson(f, a, fa, m, fm, flm);
            const double right = simpson(f, m, fm, b, fb, frm);
            const double delta = left + right - whole;
            if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
                return left + right + delta / 15.0;
            const double half = std::max(0.5 * tol, floor);
            return go(f, a, fa, m, fm, flm, left, half, floor, depth - 1) +
                   go(f, m, fm, b, fb, frm, right, half, floor, depth - 1);
        }
    };
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = Rec::simpson(f, a, fa, b, fb, fm);
    const double scale = std::max({1.0, std::fabs(whole)});
    const double floor = std::numeric_limits<double>::epsilon() * scale;
    return Rec::go(f, a, fa, b, fb, fm, whole, std::max(tol * scale, floor), floor,
                   max_depth);
}

/// Brent root bracket solver; requires f(a) and f(b) of opposite sign.
template <typename F>
double brent_root(F&& f, double a, double b, double xtol = 0.0, double ftol = 0.0,
                  int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0)) throw NoBracket("brent_root: endpoints do not bracket");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 =
            2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * xtol;
        const double xm = 0.5 * (c - b);
        if (std::fabs(xm) <= tol1 || fb == 0.0 || std::fabs(fb) <= ftol) return b;
        if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0) q = -q;
            p = std::fabs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::fabs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
    }
    return b;
}

struct Regression {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

inline Regression linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw Error("linear_fit: need >= 2 points");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) throw Error("linear_fit: degenerate abscissae");
    Regression r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    if (n > 2) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - (r.intercept + r.slope * x[i]);
            rss += e * e;
        }
        r.slope_stderr = std::sqrt(rss / double(n - 2) / sxx);
    }
    return r;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace detail {

// Regularized incomplete gamma P(a,x) by series, Q(a,x) by continued fraction.
inline double gamma_p_series(double a, double x) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double eps = 1e-15, fpmin = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / fpmin, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace detail

/// Regularized upper incomplete gamma Q(a,x) = P(X > x) for Gamma(a,1).
inline double gamma_q(double a, double x) {
    if (x < 0 || a <= 0) throw Error("gamma_q: bad arguments");
    if (x == 0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

/// Chi-square survival function with k degrees of freedom.
inline double chi2_sf(double x, double k) { return gamma_q(0.5 * k, 0.5 * x); }
inline double chi2_cdf(double x, double k) { return 1.0 - chi2_sf(x, k); }

/// Kolmogorov distribution tail Q(t) = P(sup|B| > t), for KS p-values.
inline double kolmogorov_sf(double t) {
    if (t <= 0) return 1.0;
    if (t < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * t * t);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

inline double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

inline double variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

} // namespace levyforest
