#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <levyforest/common.hpp>
#include <levyforest/excursion.hpp>
#include <levyforest/galton_watson.hpp>
#include <levyforest/mechanism.hpp>
#include <levyforest/numerics.hpp>
#include <levyforest/rng.hpp>

namespace levyforest {

/**
 * Discrete-to-continuum dictionary for approximating the psi-tree by scaled
 * Galton-Watson trees at resolution n:
 *
 *   quadratic psi(u) = beta u^2  -> GeometricCritical offspring (variance 2),
 *       height_scale = 1/(beta n), pop_scale = n;
 *   stable psi(u) = c' u^gamma   -> StableGF(gamma) offspring,
 *       height_scale = 1/(c' n), pop_scale = (n/gamma)^{1/(gamma-1)}.
 *
 * pop_scale D converts generation sizes to local time (ell^a ~ Z_{[a/h]}/D)
 * and is fixed by Laplace-exponent matching of the rescaled process; the
 * contour time axis carries height_scale/(2D) per step so that occupation
 * times match int ell^b db. With these choices n * P(h >= n) -> v(1) and the
 * Ray-Knight and branching-property normalizations are consistent, which the
 * acceptance suite locks down.
 */
struct GwScaling {
    OffspringDistribution offspring;
    double height_scale = 0.0;
    double time_scale = 0.0;
    double pop_scale = 0.0;
    int condition_gen = 0;

    int gen_of(double height) const {
        return static_cast<int>(std::llround(height / height_scale));
    }
};

inline GwScaling gw_scaling(const BranchingMechanism& m, double n, double a) {
    if (!(n > 0)) throw Error("gw_scaling: n must be positive");
    if (m.alpha() != 0.0)
        throw Error("gw_scaling: only critical (alpha = 0) mechanisms are sampled");
    if (m.is_pure_quadratic()) {
        GwScaling s{OffspringDistribution::geometric_critical(), 0, 0, 0, 0};
        s.height_scale = 1.0 / (m.beta() * n);
        s.pop_scale = n;
        s.time_scale = s.height_scale / (2.0 * s.pop_scale);
        s.condition_gen = a > 0 ? (int)std::ceil(a / s.height_scale - 1e-9) : 0;
        return s;
    }
    if (m.is_pure_stable()) {
        const double gamma = m.stable_gamma();
        GwScaling s{OffspringDistribution::stable_gf(gamma), 0, 0, 0, 0};
        s.height_scale = 1.0 / (m.stable_coeff() * n);
        s.pop_scale = std::pow(n / gamma, 1.0 / (gamma - 1.0));
        s.time_scale = s.height_scale / (2.0 * s.pop_scale);
        s.condition_gen = a > 0 ? (int)std::ceil(a / s.height_scale - 1e-9) : 0;
        return s;
    }
    throw Error("gw_scaling: sampling supports quadratic or stable mechanisms");
}

struct Provenance {
    std::string mechanism;
    double n = 0.0;
    std::string conditioning;
    std::uint64_t seed = 0;
    double height_scale = 0.0;
    double time_scale = 0.0;
    double pop_scale = 0.0;
};

struct TreeSample {
    Excursion excursion;
    Provenance provenance;
    bool truncated = false;
    std::uint64_t attempts = 0;
};

namespace detail {

inline std::string mechanism_tag(const BranchingMechanism& m) {
    if (m.is_pure_quadratic()) return "quadratic beta=" + std::to_string(m.beta());
    return "stable gamma=" + std::to_string(m.stable_gamma()) +
           " c'=" + std::to_string(m.stable_coeff());
}

} // namespace detail

/**
 * One tree from the approximant of Theta(. | h > a) at resolution n:
 * rejection over mu-trees until the height condition holds, contour scaled
 * per gw_scaling. depth_prune (in tree height units, <= 0 disables) caps the
 * sampled tree at that level without changing the law of anything below it.
 */
inline TreeSample sample_levy_tree(const BranchingMechanism& m, double n, double a,
                                   std::uint64_t seed,
                                   std::uint64_t node_cap = 10'000'000,
                                   double depth_prune = 0.0,
                                   std::uint64_t max_attempts = 50'000'000) {
    const GwScaling sc = gw_scaling(m, n, a);
    Rng rng(seed);
    const int prune_gen = depth_prune > 0 ? sc.gen_of(depth_prune) : -1;
    std::vector<int> contour;
    for (std::uint64_t attempt = 1; attempt <= max_attempts; ++attempt) {
        contour.clear();
        const auto st = sample_contour_stream(sc.offspring, rng, node_cap, prune_gen,
                                              [&](int d) { contour.push_back(d); });
        if (st.height >= sc.condition_gen && !st.truncated) {
            TreeSample out{contour_to_excursion(contour, sc.height_scale, sc.time_scale),
                           Provenance{detail::mechanism_tag(m), n,
                                      "height>" + std::to_string(a), seed,
                                      sc.height_scale, sc.time_scale, sc.pop_scale},
                           false, attempt};
            return out;
        }
        if (st.truncated && st.height >= sc.condition_gen) {
            // tall enough but over the node budget: surface the flag
            TreeSample out{contour_to_excursion(contour, sc.height_scale, sc.time_scale),
                           Provenance{detail::mechanism_tag(m), n,
                                      "height>" + std::to_string(a), seed,
                                      sc.height_scale, sc.time_scale, sc.pop_scale},
                           true, attempt};
            return out;
        }
    }
    throw AttemptsExhausted("sample_levy_tree: height condition never met",
                            1.0 / double(max_attempts));
}

/// Contour of the first excursion of S - min S reaching target_gen, where S
/// is a simple random walk: the direct quadratic-case sampler, independent of
/// the Galton-Watson code path. Returns the +-1 contour heights.
inline std::vector<int> walk_excursion_conditioned(int target_gen, Rng& rng,
                                                   std::uint64_t step_cap = 1u << 30) {
    std::vector<int> path;
    std::uint64_t steps = 0;
    while (steps < step_cap) {
        // one first-passage excursion: walk from 0 until hitting -1
        path.clear();
        path.push_back(0);
        int h = 0, peak = 0;
        std::uint64_t bits = 0;
        int avail = 0;
        while (h >= 0) {
            if (avail == 0) {
                bits = rng.next_u64();
                avail = 64;
            }
            h += (bits & 1) ? 1 : -1;
            bits >>= 1;
            --avail;
            ++steps;
            if (h >= 0) path.push_back(h);
            peak = std::max(peak, h);
            if (steps >= step_cap) break;
        }
        if (peak >= target_gen) return path;
    }
    throw AttemptsExhausted("walk_excursion_conditioned: step cap exhausted", 0.0);
}

inline TreeSample sample_levy_tree_walk(const BranchingMechanism& m, double n, double a,
                                        std::uint64_t seed,
                                        std::uint64_t step_cap = 1u << 30) {
    if (!m.is_pure_quadratic())
        throw Error("sample_levy_tree_walk: quadratic mechanisms only");
    const GwScaling sc = gw_scaling(m, n, a);
    Rng rng(seed);
    const auto contour = walk_excursion_conditioned(sc.condition_gen, rng, step_cap);
    return TreeSample{contour_to_excursion(contour, sc.height_scale, sc.time_scale),
                      Provenance{detail::mechanism_tag(m) + " (walk route)", n,
                                 "height>" + std::to_string(a), seed, sc.height_scale,
                                 sc.time_scale, sc.pop_scale},
                      false, 1};
}

/**
 * Generation-size process of a Galton-Watson forest: Z_{k+1} is a sum of Z_k
 * offspring draws. Closed-form compound steps for the geometric family
 * (negative binomial via the gamma-Poisson mixture) and the Poisson family
 * keep a whole generation O(1).
 */
inline std::uint64_t generation_step(const OffspringDistribution& off, std::uint64_t z,
                                     Rng& rng) {
    using F = OffspringDistribution::Family;
    if (z == 0) return 0;
    switch (off.family()) {
        case F::GeometricCritical:
            if (z > 16) return rng.poisson(rng.gamma(double(z)));
            break;
        case F::PoissonCritical:
            return rng.poisson(double(z));
        default:
            break;
    }
    std::uint64_t sum = 0;
    for (std::uint64_t i = 0; i < z; ++i) sum += off.sample(rng);
    return sum;
}

/// n * P(h(theta) >= n) over `samples` trees; targets v(1) with beta=sigma^2/2.
inline double height_tail_check(const OffspringDistribution& off, int n,
                                std::uint64_t samples, Rng& rng) {
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < samples; ++i) {
        std::uint64_t z = 1;
        for (int k = 0; k < n && z > 0; ++k) z = generation_step(off, z, rng);
        if (z > 0) ++hits;
    }
    return double(n) * double(hits) / double(samples);
}

/// One conditioned tail observation: given survival to gen_a, did the
/// process survive to gen_b? q[j] must hold survival-from-one probabilities
/// q_j for j <= gen_b; once z * q_{remaining} is large the outcome is forced
/// and the simulation stops early.
inline bool tail_indicator_conditioned(const OffspringDistribution& off, int gen_a,
                                       int gen_b, const std::vector<double>& q,
                                       Rng& rng) {
    while (true) { // rejection on survival to gen_a
        std::uint64_t z = 1;
        int died_at = -1;
        for (int k = 0; k < gen_b; ++k) {
            // z * q_{gen_b - k} >= 40 forces survival of both milestones up to e^-40
            if (double(z) * q[static_cast<std::size_t>(gen_b - k)] >= 40.0) return true;
            z = generation_step(off, z, rng);
            if (z == 0) {
                died_at = k + 1;
                break;
            }
        }
        if (z > 0) return true;          // alive at gen_b
        if (died_at <= gen_a) continue;  // conditioning on h >= gen_a failed
        return false;                    // died in (gen_a, gen_b]
    }
}

inline std::vector<double> survival_table(const OffspringDistribution& off, int max_gen) {
    std::vector<double> q(static_cast<std::size_t>(max_gen) + 1);
    long double s = 0.0L;
    q[0] = 1.0;
    for (int j = 1; j <= max_gen; ++j) {
        s = off.gf(double(s));
        q[static_cast<std::size_t>(j)] = double(1.0L - s);
    }
    return q;
}

/// Forest of p independent mu-trees: generation sizes at [a*n] for each grid
/// level, scaled by 1/p (the discrete Ray-Knight profile with r = p/n).
inline std::vector<double> ray_knight_profile(const OffspringDistribution& off,
                                              std::uint64_t p, double n,
                                              const std::vector<double>& a_grid,
                                              Rng& rng) {
    std::vector<int> gens;
    for (double a : a_grid) {
        gens.push_back(static_cast<int>(std::floor(a * n)));
        if (gens.size() > 1 && gens.back() < gens[gens.size() - 2])
            throw Error("ray_knight_profile: level grid must be nondecreasing");
    }
    std::vector<double> out(a_grid.size(), 0.0);
    std::uint64_t z = p;
    int k = 0;
    for (std::size_t idx = 0; idx < gens.size(); ++idx) {
        while (k < gens[idx] && z > 0) {
            z = generation_step(off, z, rng);
            ++k;
        }
        out[idx] = double(z) / double(p);
    }
    return out;
}

struct BranchingMomentReport {
    double ratio = 0.0;      // E[Z(a,eps)] / E[ell_hat^a] / v(eps)
    double ci_lo = 0.0;      // bootstrap 99% CI for the normalized ratio
    double ci_hi = 0.0;
    double dispersion = 0.0; // pooled within-bucket Var/Mean of Z
    std::uint64_t samples = 0;
    std::uint64_t capped = 0;
};

/**
 * First-moment check of the branching property: over trees conditioned on
 * h > a(1-margin), E[Z(a,eps)] = v(eps) E[ell^a]; ell^a is estimated by the
 * occupation density on (a-eps', a] with eps' = eps/8. Both statistics only
 * involve the tree below a+eps, so sampling is pruned there.
 */
inline BranchingMomentReport branching_moment_check(const BranchingMechanism& m,
                                                    double n, double a, double eps,
                                                    std::uint64_t samples,
                                                    std::uint64_t seed,
                                                    std::uint64_t node_cap = 20'000'000) {
    const double margin = 0.1;
    const GwScaling sc = gw_scaling(m, n, a * (1.0 - margin));
    const int gen_a = sc.gen_of(a);
    const int gen_eps = sc.gen_of(eps);
    const int gen_prune = gen_a + gen_eps;
    const double eps_occ = eps / 8.0;
    // evaluate v at the realized grid level so threshold rounding cancels
    const double v_eps = m.solve_v(double(gen_eps) * sc.height_scale);

    std::vector<double> zs(samples), ells(samples);
    BranchingMomentReport rep;
    rep.samples = samples;

    Rng rng(seed);
    std::vector<int> contour;
    for (std::uint64_t i = 0; i < samples; ++i) {
        while (true) {
            contour.clear();
            const auto st =
                sample_contour_stream(sc.offspring, rng, node_cap, gen_prune,
                                      [&](int d) { contour.push_back(d); });
            if (st.truncated) {
                ++rep.capped;
                continue;
            }
            if (st.height < sc.condition_gen) continue;
            break;
        }
        // occupation time of (a - eps', a] divided by eps', from the integer
        // contour: an up or down step spans height_scale over time_scale
        const double lo = a - eps_occ;
        double occ = 0.0;
        std::size_t z_count = 0;
        int state_above_a = 0; // tracks components of {h > gen_a} reaching +eps
        bool reached = false;
        for (std::size_t j = 1; j < contour.size(); ++j) {
            const int h0 = contour[j - 1], h1 = contour[j];
            const double y0 = double(std::min(h0, h1)) * sc.height_scale;
            const double y1 = double(std::max(h0, h1)) * sc.height_scale;
            const double ov = std::min(a, y1) - std::max(lo, y0);
            if (ov > 0) occ += ov / (y1 - y0) * sc.time_scale;
            if (h1 > gen_a && h0 == gen_a) {
                state_above_a = 1;
                reached = false;
            }
            if (state_above_a && h1 >= gen_a + gen_eps && !reached) {
                reached = true;
                ++z_count;
            }
            if (h1 == gen_a) state_above_a = 0;
        }
        zs[i] = double(z_count);
        ells[i] = occ / eps_occ;
    }

    const double mz = mean(zs);
    const double ml = mean(ells);
    if (ml <= 0) throw Error("branching_moment_check: degenerate denominator");
    rep.ratio = mz / ml / v_eps;

    // percentile bootstrap on the ratio
    Rng brng(derive_seed(seed, 0xb007));
    std::vector<double> boots(1000);
    for (auto& bval : boots) {
        double sz = 0, sl = 0;
        for (std::uint64_t i = 0; i < samples; ++i) {
            const auto j = brng.uniform_index(samples);
            sz += zs[j];
            sl += ells[j];
        }
        bval = sz / sl / v_eps;
    }
    std::sort(boots.begin(), boots.end());
    rep.ci_lo = boots[5];
    rep.ci_hi = boots[994];

    // dispersion within quantile buckets of the occupation estimate
    std::vector<std::size_t> order(samples);
    for (std::size_t i = 0; i < samples; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return ells[x] < ells[y]; });
    const std::size_t buckets = 20;
    double disp_num = 0.0, disp_den = 0.0;
    for (std::size_t b = 0; b < buckets; ++b) {
        const std::size_t lo_i = b * samples / buckets;
        const std::size_t hi_i = (b + 1) * samples / buckets;
        if (hi_i - lo_i < 10) continue;
        std::vector<double> bucket;
        for (std::size_t i = lo_i; i < hi_i; ++i) bucket.push_back(zs[order[i]]);
        const double bm = mean(bucket);
        if (bm <= 0) continue;
        const double bv = variance(bucket);
        disp_num += (bv / bm) * double(bucket.size());
        disp_den += double(bucket.size());
    }
    rep.dispersion = disp_den > 0 ? disp_num / disp_den : 0.0;
    return rep;
}

/// Occupation estimates of <ell^a, 1> over a grid of levels.
inline std::vector<double> local_time_cadlag_probe(const BranchingMechanism& m,
                                                   const std::vector<double>& levels,
                                                   const Excursion& e, double eps) {
    std::vector<double> out;
    out.reserve(levels.size());
    for (double a : levels) {
        if (a > e.height() || eps >= a)
            out.push_back(0.0);
        else
            out.push_back(e.occupation_time(a - eps, a) / eps);
    }
    (void)m;
    return out;
}

/// n(sigma, eps)/v(eps) over an eps grid: counts of subtrees hanging at the
/// vertex p_g(s) (components of {g > g(s)} inside the tolerance class) that
/// climb at least eps above it.
inline std::vector<double> infinite_branch_local_time(const BranchingMechanism& m,
                                                      const Excursion& e, double s,
                                                      const std::vector<double>& eps_grid,
                                                      double tol) {
    const auto [lo, hi] = e.class_interval(s, tol);
    const double gs = e.value(s);
    std::vector<double> out;
    for (double eps : eps_grid) {
        // count components of {g > gs + tol} in (lo, hi) whose max reaches gs+eps
        std::size_t count = 0;
        bool above = false;
        double peak = 0.0;
        std::size_t i = e.locate(lo);
        if (e.knot_time(i) <= lo) ++i;
        for (std::size_t k = i; k < e.heights().size() && e.knot_time(k) < hi; ++k) {
            const double h = e.heights()[k];
            if (h > gs + tol) {
                if (!above) {
                    above = true;
                    peak = h;
                } else {
                    peak = std::max(peak, h);
                }
            } else if (above) {
                if (peak >= gs + eps) ++count;
                above = false;
            }
        }
        if (above && peak >= gs + eps) ++count;
        out.push_back(double(count) / m.solve_v(eps));
    }
    return out;
}

} // namespace levyforest
