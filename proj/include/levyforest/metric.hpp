#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <levyforest/common.hpp>
#include <levyforest/excursion.hpp>

namespace levyforest {

/**
 * A finite rooted metric tree given by its distance matrix. Construction
 * checks symmetry, the triangle inequality and the four-point condition,
 * so anything accepted here really is (close to) a tree metric.
 */
class FiniteMetricTree {
public:
    FiniteMetricTree(std::size_t n, std::vector<double> dmat, std::size_t root = 0)
        : n_(n), d_(std::move(dmat)), root_(root) {
        if (d_.size() != n_ * n_) throw Error("metric tree: matrix size mismatch");
        if (root_ >= n_) throw Error("metric tree: root out of range");
        const double tol = 1e-10;
        for (std::size_t i = 0; i < n_; ++i) {
            if (std::fabs(at(i, i)) > tol) throw Error("metric tree: nonzero diagonal");
            for (std::size_t j = 0; j < n_; ++j) {
                if (std::fabs(at(i, j) - at(j, i)) > tol)
                    throw Error("metric tree: asymmetric matrix");
                if (at(i, j) < -tol) throw Error("metric tree: negative distance");
            }
        }
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                for (std::size_t k = 0; k < n_; ++k) {
                    if (at(i, k) > at(i, j) + at(j, k) + tol)
                        throw Error("metric tree: triangle inequality fails");
                    for (std::size_t l = 0; l < n_; ++l) {
                        const double a = at(i, j) + at(k, l);
                        const double b = at(i, k) + at(j, l);
                        const double c = at(i, l) + at(j, k);
                        if (a > std::max(b, c) + tol)
                            throw Error("metric tree: four-point condition fails");
                    }
                }
    }

    std::size_t size() const { return n_; }
    std::size_t root() const { return root_; }
    double at(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }

    double diameter() const {
        double m = 0.0;
        for (double v : d_) m = std::max(m, v);
        return m;
    }

    FiniteMetricTree scaled(double r) const {
        std::vector<double> d(d_);
        for (double& v : d) v *= r;
        return FiniteMetricTree(n_, std::move(d), root_);
    }

private:
    std::size_t n_;
    std::vector<double> d_;
    std::size_t root_;
};

struct Correspondence {
    std::vector<std::pair<std::uint8_t, std::uint8_t>> pairs;
};

/// Distance matrix of tree points sampled at the given times (first must be 0,
/// the root).
inline FiniteMetricTree subsample(const Excursion& e, const std::vector<double>& times) {
    if (times.empty() || times.front() != 0.0)
        throw Error("subsample: first time must be the root time 0");
    const std::size_t n = times.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = e.dist(times[i], times[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    return FiniteMetricTree(n, std::move(d), 0);
}

inline double distortion(const Correspondence& c, const FiniteMetricTree& a,
                         const FiniteMetricTree& b) {
    double dis = 0.0;
    for (std::size_t p = 0; p < c.pairs.size(); ++p)
        for (std::size_t q = p; q < c.pairs.size(); ++q) {
            const auto [x1, x2] = c.pairs[p];
            const auto [y1, y2] = c.pairs[q];
            dis = std::max(dis, std::fabs(a.at(x1, y1) - b.at(x2, y2)));
        }
    return dis;
}

/**
 * Exact rooted Gromov-Hausdorff distance between two small trees:
 * half the minimal distortion over root-preserving correspondences.
 * Every minimal correspondence is graph(f) u graph(h)^{-1} for total maps
 * f: A->B, h: B->A fixing the roots, so enumerating those pairs attains
 * the optimum. Cost n^m * m^n, capped.
 */
inline double gh_exact(const FiniteMetricTree& a, const FiniteMetricTree& b,
                       std::size_t cap = 6) {
    const std::size_t n = a.size(), m = b.size();
    if (n > cap || m > cap) throw TooLarge("gh_exact: instance exceeds cap");
    const std::size_t ra = a.root(), rb = b.root();

    std::vector<std::uint8_t> f(n), h(m);
    f[ra] = static_cast<std::uint8_t>(rb);
    h[rb] = static_cast<std::uint8_t>(ra);
    std::vector<std::size_t> fa, hb; // free slots
    for (std::size_t i = 0; i < n; ++i)
        if (i != ra) fa.push_back(i);
    for (std::size_t j = 0; j < m; ++j)
        if (j != rb) hb.push_back(j);

    double best = std::numeric_limits<double>::infinity();
    const auto eval = [&]() {
        // distortion of R = graph(f) u graph(h)^{-1}
        double dis = 0.0;
        for (std::size_t i = 0; i < n && dis < best; ++i)
            for (std::size_t j = i; j < n; ++j)
                dis = std::max(dis, std::fabs(a.at(i, j) - b.at(f[i], f[j])));
        for (std::size_t i = 0; i < m && dis < best; ++i)
            for (std::size_t j = i; j < m; ++j)
                dis = std::max(dis, std::fabs(a.at(h[i], h[j]) - b.at(i, j)));
        for (std::size_t i = 0; i < n && dis < best; ++i)
            for (std::size_t j = 0; j < m; ++j)
                dis = std::max(dis, std::fabs(a.at(i, h[j]) - b.at(f[i], j)));
        best = std::min(best, dis);
    };

    const std::uint64_t fcount = [&] {
        std::uint64_t c = 1;
        for (std::size_t k = 0; k < fa.size(); ++k) c *= m;
        return c;
    }();
    const std::uint64_t hcount = [&] {
        std::uint64_t c = 1;
        for (std::size_t k = 0; k < hb.size(); ++k) c *= n;
        return c;
    }();

    for (std::uint64_t fi = 0; fi < fcount; ++fi) {
        std::uint64_t rem = fi;
        for (std::size_t k = 0; k < fa.size(); ++k) {
            f[fa[k]] = static_cast<std::uint8_t>(rem % m);
            rem /= m;
        }
        for (std::uint64_t hi = 0; hi < hcount; ++hi) {
            std::uint64_t r2 = hi;
            for (std::size_t k = 0; k < hb.size(); ++k) {
                h[hb[k]] = static_cast<std::uint8_t>(r2 % n);
                r2 /= n;
            }
            eval();
        }
    }
    return 0.5 * best;
}

/// Coding bound d_GH(T_g1, T_g2) <= 2 ||g1 - g2||, with the sup over the
/// union of both knot sets after aligning durations by linear interpolation.
inline double gh_upper_coding(const Excursion& g1, const Excursion& g2) {
    double sup = 0.0;
    const auto scan = [&](const Excursion& a, const Excursion& b) {
        for (std::size_t i = 0; i <= a.segments(); ++i) {
            const double t = a.knot_time(i);
            const double tb = std::min(t, b.zeta());
            sup = std::max(sup, std::fabs(a.heights()[i] - b.value(tb)));
        }
    };
    // clamping to the shorter duration is exact: the shorter excursion ends at 0
    scan(g1, g2);
    scan(g2, g1);
    return 2.0 * sup;
}

inline double gh_lower_diam(const FiniteMetricTree& a, const FiniteMetricTree& b) {
    return 0.5 * std::fabs(a.diameter() - b.diameter());
}

} // namespace levyforest
