#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <levyforest/common.hpp>
#include <levyforest/rng.hpp>

namespace levyforest {

/// O(1) range-minimum queries over a value array after O(n log n) setup.
/// Stores argmin positions so levels cost 4 bytes per entry.
class RangeMinTable {
public:
    RangeMinTable() = default;

    explicit RangeMinTable(const std::vector<double>& values) { build(values); }

    void build(const std::vector<double>& values) {
        values_ = &values;
        const std::size_t n = values.size();
        levels_.clear();
        if (n == 0) return;
        log2_.resize(n + 1);
        log2_[1] = 0;
        for (std::size_t i = 2; i <= n; ++i) log2_[i] = log2_[i / 2] + 1;
        levels_.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) levels_[0][i] = static_cast<std::uint32_t>(i);
        for (std::size_t k = 1; (1u << k) <= n; ++k) {
            const std::size_t len = n - (std::size_t(1) << k) + 1;
            levels_.emplace_back(len);
            for (std::size_t i = 0; i < len; ++i) {
                const std::uint32_t a = levels_[k - 1][i];
                const std::uint32_t b = levels_[k - 1][i + (std::size_t(1) << (k - 1))];
                levels_[k][i] = values[a] <= values[b] ? a : b;
            }
        }
    }

    /// Argmin over the closed index range [i, j].
    std::uint32_t argmin(std::size_t i, std::size_t j) const {
        const int k = log2_[j - i + 1];
        const std::uint32_t a = levels_[k][i];
        const std::uint32_t b = levels_[k][j - (std::size_t(1) << k) + 1];
        return (*values_)[a] <= (*values_)[b] ? a : b;
    }

    double min(std::size_t i, std::size_t j) const { return (*values_)[argmin(i, j)]; }

private:
    const std::vector<double>* values_ = nullptr;
    std::vector<std::vector<std::uint32_t>> levels_;
    std::vector<int> log2_;
};

struct TreePoint {
    double s = 0.0;
};

class Excursion;

struct LevelComponent {
    double begin = 0.0;       // crossing time into {g > a}
    double end = 0.0;         // crossing time out
    double root_time = 0.0;   // = begin; projects to the component root at level a
    std::size_t sub_index = 0; // index into LevelDecomposition::sub_excursions
};

struct LevelDecomposition {
    double level = 0.0;
    std::vector<LevelComponent> components;
    std::vector<Excursion> sub_excursions;
};

struct AncestralEntry {
    double level = 0.0; // height at which the subtree hangs off the ancestral line
    bool forward = false;
    std::size_t sub_index = 0;
};

struct AncestralDecomposition {
    std::vector<AncestralEntry> entries;
    std::vector<Excursion> sub_excursions;
    double spine_time = 0.0; // Lebesgue time where the path sits on its running inf
};

/**
 * A nonnegative piecewise-linear excursion g on [0, zeta] with g(0)=g(zeta)=0,
 * coding the R-tree T_g through d_g(s,t) = g(s)+g(t)-2 min_{[s,t]} g.
 *
 * Knots are a uniform grid by default; re-rooting and level operations create
 * excursions with explicit knot times because their exact kink points fall
 * between grid nodes. All crossing times are solved exactly on segments, so
 * set operations (level components, occupation times, truncation bookkeeping)
 * are exact for the represented function. Immutable after construction.
 */
class Excursion {
public:
    Excursion(double zeta, std::vector<double> heights)
        : zeta_(zeta), heights_(std::move(heights)) {
        validate();
        rmq_.build(heights_);
    }

    Excursion(std::vector<double> times, std::vector<double> heights)
        : zeta_(times.empty() ? 0.0 : times.back()),
          heights_(std::move(heights)),
          times_(std::move(times)) {
        if (times_.size() != heights_.size())
            throw Error("excursion: knot arrays must have equal length");
        if (times_.front() != 0.0) throw Error("excursion: knots must start at 0");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1]))
                throw Error("excursion: knot times must increase");
        validate();
        rmq_.build(heights_);
    }

    double zeta() const { return zeta_; }
    std::size_t segments() const { return heights_.size() - 1; }
    const std::vector<double>& heights() const { return heights_; }
    bool uniform_grid() const { return times_.empty(); }

    double knot_time(std::size_t i) const {
        return times_.empty() ? zeta_ * double(i) / double(segments()) : times_[i];
    }

    /// Largest knot index with knot_time <= t.
    std::size_t locate(double t) const {
        if (times_.empty()) {
            const auto i = static_cast<std::size_t>(std::floor(
                t / zeta_ * double(segments())));
            return std::min(i, segments());
        }
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        return static_cast<std::size_t>(it - times_.begin()) - 1;
    }

    double value(double t) const {
        check_time(t);
        const std::size_t i = locate(t);
        if (i >= segments()) return heights_.back();
        const double t0 = knot_time(i), t1 = knot_time(i + 1);
        const double w = (t - t0) / (t1 - t0);
        return heights_[i] + w * (heights_[i + 1] - heights_[i]);
    }

    /// Exact min of the interpolant over the closed interval [s, t].
    double running_min(double s, double t) const {
        check_time(s);
        check_time(t);
        if (s > t) std::swap(s, t);
        double m = std::min(value(s), value(t));
        std::size_t i0 = locate(s);
        if (knot_time(i0) < s) ++i0;
        std::size_t i1 = locate(t);
        if (i0 <= i1) m = std::min(m, rmq_.min(i0, i1));
        return m;
    }

    double dist(double s, double t) const {
        return value(s) + value(t) - 2.0 * running_min(s, t);
    }

    double height() const { return *std::max_element(heights_.begin(), heights_.end()); }

    TreePoint mass_sample(Rng& rng) const { return TreePoint{rng.uniform() * zeta_}; }

    Excursion reroot(double s0) const;
    LevelDecomposition level_decomposition(double a) const;
    std::size_t count_Z(double a, double eps) const;
    std::pair<double, double> local_time_mass(double a, double eps, double v_eps) const;
    double occupation_time(double lo, double hi) const;
    Excursion truncate(double a) const;
    int multiplicity(double s, double tol) const;
    std::pair<double, double> class_interval(double s, double tol) const;
    std::vector<std::pair<double, double>> extinction_points() const;
    AncestralDecomposition ancestral_decomposition(double s) const;

    static constexpr int kMultiplicityCap = 64;

private:
    void validate() const {
        if (heights_.size() < 2) throw Error("excursion: need at least two knots");
        if (!(zeta_ > 0)) throw Error("excursion: zeta must be positive");
        if (heights_.front() != 0.0 || heights_.back() != 0.0)
            throw Error("excursion: endpoints must be zero");
        for (double h : heights_)
            if (h < 0) throw Error("excursion: negative height");
    }

    void check_time(double t) const {
        if (t < 0.0 || t > zeta_) throw Error("excursion: time out of range");
    }

    double zeta_ = 0.0;
    std::vector<double> heights_;
    std::vector<double> times_; // empty for uniform grids
    RangeMinTable rmq_;
};

namespace detail {

/// Collects (time, height) knots, fusing duplicates and collinear interior points.
class KnotBuilder {
public:
    void add(double t, double h) {
        if (!ts_.empty() && t <= ts_.back() + 0.0) {
            // keep the later sample on exact time collisions
            if (t <= ts_.back()) {
                hs_.back() = h;
                return;
            }
        }
        ts_.push_back(t);
        hs_.push_back(std::max(0.0, h));
    }

    Excursion finish() {
        hs_.front() = 0.0;
        hs_.back() = 0.0;
        return Excursion(std::move(ts_), std::move(hs_));
    }

private:
    std::vector<double> ts_, hs_;
};

} // namespace detail

inline Excursion Excursion::reroot(double s0) const {
    check_time(s0);
    if (s0 >= zeta_) throw Error("reroot: s0 must lie in [0, zeta)");
    const double g0 = value(s0);
    detail::KnotBuilder out;
    out.add(0.0, 0.0);

    // forward sweep: u in (s0, zeta], m = running min over [s0, u];
    // a kink appears where a descending segment crosses the current min
    double m = g0;
    double prev_t = s0, prev_h = g0;
    std::size_t i = locate(s0);
    if (knot_time(i) <= s0) ++i;
    for (; i < heights_.size(); ++i) {
        const double t = knot_time(i), h = heights_[i];
        if (h < m) {
            if (prev_h > m) {
                const double tc = prev_t + (prev_h - m) / (prev_h - h) * (t - prev_t);
                out.add(tc - s0, g0 + m - 2.0 * m);
            }
            m = h;
        }
        out.add(t - s0, g0 + h - 2.0 * m);
        prev_t = t;
        prev_h = h;
    }

    // wrapped part: u in [0, s0], m = min over [u, s0]; sweep backwards from s0
    // to compute the suffix minima, then emit forward
    if (s0 > 0.0) {
        std::vector<double> ts, hs, ms;
        ts.push_back(s0);
        hs.push_back(g0);
        ms.push_back(g0);
        std::size_t j = locate(s0);
        if (knot_time(j) >= s0) --j;
        double mm = g0;
        double nt = s0, nh = g0;
        for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(j); k >= 0; --k) {
            const double t = knot_time(static_cast<std::size_t>(k));
            const double h = heights_[static_cast<std::size_t>(k)];
            if (h < mm) {
                if (nh > mm) {
                    const double tc = t + (h - mm) / (h - nh) * (nt - t);
                    ts.push_back(tc);
                    hs.push_back(mm);
                    ms.push_back(mm);
                }
                mm = h;
            }
            ts.push_back(t);
            hs.push_back(h);
            ms.push_back(mm);
            nt = t;
            nh = h;
        }
        for (std::size_t k = ts.size(); k-- > 0;) {
            out.add(zeta_ - s0 + ts[k], g0 + hs[k] - 2.0 * ms[k]);
        }
    }
    return out.finish();
}

inline LevelDecomposition Excursion::level_decomposition(double a) const {
    if (!(a > 0)) throw Error("level_decomposition: a must be positive");
    LevelDecomposition out;
    out.level = a;
    const std::size_t n = heights_.size();
    std::size_t i = 0;
    while (i + 1 < n) {
        // find an up-crossing of a
        if (heights_[i] <= a && heights_[i + 1] > a) {
            const double t0 = knot_time(i), t1 = knot_time(i + 1);
            const double alpha =
                t0 + (a - heights_[i]) / (heights_[i + 1] - heights_[i]) * (t1 - t0);
            std::vector<double> ts{0.0}, hs{0.0};
            std::size_t j = i + 1;
            while (heights_[j] > a) {
                ts.push_back(knot_time(j) - alpha);
                hs.push_back(heights_[j] - a);
                ++j;
            }
            const double u0 = knot_time(j - 1), u1 = knot_time(j);
            const double beta =
                u0 + (heights_[j - 1] - a) / (heights_[j - 1] - heights_[j]) * (u1 - u0);
            ts.push_back(beta - alpha);
            hs.push_back(0.0);
            LevelComponent comp;
            comp.begin = alpha;
            comp.end = beta;
            comp.root_time = alpha;
            comp.sub_index = out.sub_excursions.size();
            out.components.push_back(comp);
            out.sub_excursions.emplace_back(std::move(ts), std::move(hs));
            i = j;
        } else if (heights_[i] > a) {
            // starts above a: cannot happen since heights_[0] = 0 and we land
            // here only after consuming whole components
            ++i;
        } else {
            ++i;
        }
    }
    return out;
}

inline std::size_t Excursion::count_Z(double a, double eps) const {
    if (!(a > 0) || !(eps > 0)) throw Error("count_Z: a, eps must be positive");
    if (a >= height()) return 0;
    const auto dec = level_decomposition(a);
    std::size_t n = 0;
    for (const auto& sub : dec.sub_excursions)
        if (sub.height() >= eps) ++n;
    return n;
}

inline double Excursion::occupation_time(double lo, double hi) const {
    // Lebesgue measure of {t : lo < g(t) <= hi}, exact on segments
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < heights_.size(); ++i) {
        const double y0 = heights_[i], y1 = heights_[i + 1];
        const double t0 = knot_time(i), t1 = knot_time(i + 1);
        if (y0 == y1) {
            if (y0 > lo && y0 <= hi) total += t1 - t0;
            continue;
        }
        const double ylo = std::min(y0, y1), yhi = std::max(y0, y1);
        const double a = std::max(lo, ylo), b = std::min(hi, yhi);
        if (b > a) total += (b - a) / (yhi - ylo) * (t1 - t0);
    }
    return total;
}

inline std::pair<double, double> Excursion::local_time_mass(double a, double eps,
                                                            double v_eps) const {
    if (!(eps > 0) || !(eps < a)) throw Error("local_time_mass: need 0 < eps < a");
    if (!(v_eps > 0)) throw Error("local_time_mass: v_eps must be positive");
    const double h = height();
    if (a > h) return {0.0, 0.0};
    const double counting = double(count_Z(a - eps, eps)) / v_eps;
    const double occupation = occupation_time(a - eps, a) / eps;
    return {counting, occupation};
}

inline Excursion Excursion::truncate(double a) const {
    if (!(a > 0)) throw Error("truncate: a must be positive");
    if (a >= height()) return *this;
    // time change A(s) = int_0^s 1{g <= a}: cut out the above-a components and
    // glue at the crossing level
    std::vector<double> ts{0.0}, hs{0.0};
    const auto emit = [&](double t, double h) {
        if (t > ts.back()) {
            ts.push_back(t);
            hs.push_back(h);
        }
    };
    double shift = 0.0;
    const std::size_t n = heights_.size();
    std::size_t i = 0;
    while (i + 1 < n) {
        const double y0 = heights_[i], y1 = heights_[i + 1];
        const double t0 = knot_time(i), t1 = knot_time(i + 1);
        if (y0 <= a && y1 > a) {
            const double tc = t0 + (a - y0) / (y1 - y0) * (t1 - t0);
            emit(tc - shift, a);
            // skip to the down-crossing; the glued path continues linearly
            // from value a toward the knot that ends that segment
            std::size_t j = i + 1;
            while (heights_[j] > a) ++j;
            const double u0 = knot_time(j - 1), u1 = knot_time(j);
            const double td =
                u0 + (heights_[j - 1] - a) / (heights_[j - 1] - heights_[j]) * (u1 - u0);
            shift += td - tc;
            emit(knot_time(j) - shift, heights_[j]);
            i = j;
        } else {
            emit(t1 - shift, y1);
            ++i;
        }
    }
    // keep the exact knot set (kept grid nodes plus crossing times); losing
    // the crossing knots to a uniform resample would clip every glued peak
    hs.front() = 0.0;
    hs.back() = 0.0;
    return Excursion(std::move(ts), std::move(hs));
}

inline std::pair<double, double> Excursion::class_interval(double s, double tol) const {
    // The extreme admissible times are exactly where the path first dips below
    // g(s) - tol on either side of s: there the running-min constraint becomes
    // tight and the path value sits at the edge of the tolerance band.
    check_time(s);
    const double gs = value(s);
    const double floor_level = gs - tol;

    double left = 0.0;
    {
        std::size_t i = locate(s);
        if (knot_time(i) >= s && i > 0) --i;
        double cur_t = s, cur_h = gs;
        for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i); k >= 0; --k) {
            const double t = knot_time(static_cast<std::size_t>(k));
            const double h = heights_[static_cast<std::size_t>(k)];
            if (h < floor_level) {
                left = t + (floor_level - h) / (cur_h - h) * (cur_t - t);
                break;
            }
            cur_t = t;
            cur_h = h;
        }
    }

    double right = zeta_;
    {
        std::size_t i = locate(s);
        if (knot_time(i) <= s) ++i;
        double cur_t = s, cur_h = gs;
        for (std::size_t k = i; k < heights_.size(); ++k) {
            const double t = knot_time(k), h = heights_[k];
            if (h < floor_level) {
                right = cur_t + (cur_h - floor_level) / (cur_h - h) * (t - cur_t);
                break;
            }
            cur_t = t;
            cur_h = h;
        }
    }
    return {left, right};
}

inline int Excursion::multiplicity(double s, double tol) const {
    check_time(s);
    const double gs = value(s);
    const auto [left, right] = class_interval(s, tol);
    // count maximal intervals of {g > gs + tol} inside (left, right)
    int count = 0;
    const double lvl = gs + tol;
    bool above = value(std::min(left, zeta_)) > lvl;
    if (above) ++count;
    std::size_t i = locate(left);
    if (knot_time(i) <= left) ++i;
    for (std::size_t k = i; k < heights_.size() && knot_time(k) < right; ++k) {
        const bool now = heights_[k] > lvl;
        if (now && !above) ++count;
        above = now;
        if (count > kMultiplicityCap) return kInfiniteMultiplicity;
    }
    if (gs > tol) ++count; // root-side component
    return count == 0 ? 1 : count; // a leaf keeps multiplicity 1 (root side or not)
}

inline std::vector<std::pair<double, double>> Excursion::extinction_points() const {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 1; i + 1 < heights_.size(); ++i) {
        if (heights_[i] > heights_[i - 1] && heights_[i] > heights_[i + 1])
            out.emplace_back(knot_time(i), heights_[i]);
    }
    return out;
}

inline AncestralDecomposition Excursion::ancestral_decomposition(double s) const {
    if (!(s > 0.0) || !(s < zeta_))
        throw Error("ancestral_decomposition: s must lie in (0, zeta)");
    AncestralDecomposition out;

    // walk one direction, extracting excursions of h above its running infimum;
    // while an excursion is open the invariant cur_h > m holds (equality closes it)
    const auto sweep = [&](bool forward) {
        double m = value(s);
        double cur_t = s;
        double cur_h = m;
        std::vector<double> ts, hs;
        bool open = false;
        double level = 0.0;
        const auto step = [&](double t, double h) {
            const double span = std::fabs(t - cur_t);
            if (!open) {
                if (h > m) {
                    level = m;
                    ts.assign(1, 0.0);
                    hs.assign(1, 0.0);
                    ts.push_back(span);
                    hs.push_back(h - m);
                    open = true;
                } else {
                    m = h;
                }
            } else if (h > m) {
                ts.push_back(ts.back() + span);
                hs.push_back(h - m);
            } else {
                // crossing back to the running min inside this piece
                const double frac = (cur_h - m) / (cur_h - h);
                ts.push_back(ts.back() + span * frac);
                hs.push_back(0.0);
                out.entries.push_back({level, forward, out.sub_excursions.size()});
                out.sub_excursions.emplace_back(std::move(ts), std::move(hs));
                ts.clear();
                hs.clear();
                open = false;
                m = h;
            }
            cur_t = t;
            cur_h = h;
        };

        if (forward) {
            std::size_t i = locate(s);
            if (knot_time(i) <= s) ++i;
            for (; i < heights_.size(); ++i) step(knot_time(i), heights_[i]);
        } else {
            std::size_t i = locate(s);
            if (knot_time(i) >= s && i > 0) --i;
            for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i); k >= 0; --k)
                step(knot_time(static_cast<std::size_t>(k)),
                     heights_[static_cast<std::size_t>(k)]);
        }
        if (open) throw Error("ancestral_decomposition: path did not close");
    };

    sweep(true);
    sweep(false);

    double excursion_time = 0.0;
    for (const auto& sub : out.sub_excursions) excursion_time += sub.zeta();
    out.spine_time = zeta_ - excursion_time;
    return out;
}

} // namespace levyforest
