#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <levyforest/common.hpp>
#include <levyforest/excursion.hpp>
#include <levyforest/rng.hpp>

namespace levyforest {

/**
 * Critical/subcritical offspring distribution. Four families:
 *  - GeometricCritical: mu(k) = 2^{-k-1}, mean 1, variance 2;
 *  - PoissonCritical: Poisson(1);
 *  - StableGF(gamma): generating function f(s) = s + (1-s)^gamma / gamma,
 *    mu(0) = 1/gamma, mu(1) = 0, mu(k) = |C(gamma,k)|/gamma with the
 *    generalized binomial coefficient, tail mu(k) ~ c k^{-1-gamma};
 *  - Explicit pmf.
 *
 * Heavy-tailed pmfs are sampled through an alias table up to 2^20 with a
 * Pareto continuation for the (tiny, <= 1e-8) remaining tail mass.
 */
class OffspringDistribution {
public:
    enum class Family { GeometricCritical, PoissonCritical, StableGF, Explicit };

    static OffspringDistribution geometric_critical() {
        return OffspringDistribution(Family::GeometricCritical, 0.0, {});
    }
    static OffspringDistribution poisson_critical() {
        return OffspringDistribution(Family::PoissonCritical, 0.0, {});
    }
    static OffspringDistribution stable_gf(double gamma) {
        if (!(gamma > 1.0 && gamma < 2.0))
            throw Error("stable_gf: gamma must lie in (1,2)");
        return OffspringDistribution(Family::StableGF, gamma, {});
    }
    static OffspringDistribution explicit_pmf(std::vector<double> pmf) {
        return OffspringDistribution(Family::Explicit, 0.0, std::move(pmf));
    }

    Family family() const { return family_; }
    double gamma_exp() const { return gamma_; }

    double pmf(std::uint64_t k) const {
        switch (family_) {
            case Family::GeometricCritical:
                return std::pow(2.0, -double(k) - 1.0);
            case Family::PoissonCritical: {
                return std::exp(-1.0 - std::lgamma(double(k) + 1.0));
            }
            case Family::StableGF: {
                if (k == 0) return 1.0 / gamma_;
                if (k == 1) return 0.0;
                // |C(gamma, k)| by the stable downward recurrence
                double a = gamma_ * (gamma_ - 1.0) / 2.0;
                for (std::uint64_t j = 2; j < k; ++j)
                    a *= (double(j) - gamma_) / double(j + 1);
                return a / gamma_;
            }
            case Family::Explicit:
                return k < pmf_.size() ? pmf_[k] : 0.0;
        }
        return 0.0;
    }

    double mean() const {
        if (family_ == Family::Explicit) {
            double m = 0.0;
            for (std::size_t k = 0; k < pmf_.size(); ++k) m += double(k) * pmf_[k];
            return m;
        }
        return 1.0;
    }

    double variance() const {
        switch (family_) {
            case Family::GeometricCritical: return 2.0;
            case Family::PoissonCritical: return 1.0;
            case Family::StableGF: return std::numeric_limits<double>::infinity();
            case Family::Explicit: {
                double m = mean(), s = 0.0;
                for (std::size_t k = 0; k < pmf_.size(); ++k)
                    s += (double(k) - m) * (double(k) - m) * pmf_[k];
                return s;
            }
        }
        return 0.0;
    }

    /// Generating function f(s) = E[s^xi].
    double gf(double s) const {
        switch (family_) {
            case Family::GeometricCritical: return 1.0 / (2.0 - s);
            case Family::PoissonCritical: return std::exp(s - 1.0);
            case Family::StableGF: return s + std::pow(1.0 - s, gamma_) / gamma_;
            case Family::Explicit: {
                double acc = 0.0;
                for (std::size_t k = pmf_.size(); k-- > 0;) acc = acc * s + pmf_[k];
                return acc;
            }
        }
        return 0.0;
    }

    /// q_m = P(tree reaches generation m) by iterating the generating function.
    double survival_to_generation(std::uint64_t m) const {
        long double s = 0.0L;
        for (std::uint64_t i = 0; i < m; ++i) {
            switch (family_) {
                case Family::GeometricCritical: s = 1.0L / (2.0L - s); break;
                case Family::PoissonCritical: s = std::exp(s - 1.0L); break;
                case Family::StableGF:
                    s = s + std::pow(1.0L - s, (long double)gamma_) / gamma_;
                    break;
                case Family::Explicit: {
                    long double acc = 0.0L;
                    for (std::size_t k = pmf_.size(); k-- > 0;) acc = acc * s + pmf_[k];
                    s = acc;
                    break;
                }
            }
        }
        return double(1.0L - s);
    }

    std::uint64_t sample(Rng& rng) const {
        switch (family_) {
            case Family::GeometricCritical:
                return rng.geometric_half();
            case Family::PoissonCritical:
                return rng.poisson(1.0);
            case Family::StableGF: {
                const std::uint64_t k = alias_.sample(rng);
                if (k < kTableSize) return k;
                return pareto_tail(rng, gamma_);
            }
            case Family::Explicit:
                return alias_.sample(rng);
        }
        return 0;
    }

    /// Draw from the size-biased law k*mu(k)/mean.
    std::uint64_t sample_size_biased(Rng& rng) const {
        if (sb_alias_.size() == 0)
            throw Error("offspring: size-biased law undefined for this pmf");
        const std::uint64_t k = sb_alias_.sample(rng);
        if (family_ == Family::StableGF && k >= kTableSize)
            return pareto_tail(rng, gamma_ - 1.0);
        return k;
    }

    static constexpr std::uint64_t kTableSize = 1u << 20;

private:
    OffspringDistribution(Family f, double gamma, std::vector<double> pmf_values)
        : family_(f), gamma_(gamma), pmf_(std::move(pmf_values)) {
        if (family_ == Family::Explicit) {
            double total = 0.0;
            for (double p : pmf_) {
                if (p < 0) throw Error("offspring: negative probability");
                total += p;
            }
            if (std::fabs(total - 1.0) > 1e-12)
                throw Error("offspring: probabilities must sum to 1");
            if (mean() > 1.0 + 1e-12) throw Error("offspring: supercritical mean");
            if (pmf_.size() > 1 && std::fabs(pmf_[1] - 1.0) < 1e-15)
                throw Error("offspring: degenerate mu(1) = 1");
            alias_ = DiscreteAlias(pmf_);
        }
        if (family_ == Family::StableGF) {
            std::vector<double> w(kTableSize + 1, 0.0);
            w[0] = 1.0 / gamma_;
            double a = gamma_ * (gamma_ - 1.0) / 2.0; // |C(gamma,2)|
            double acc = w[0], comp = 0.0;
            for (std::uint64_t k = 2; k < kTableSize; ++k) {
                w[k] = a / gamma_;
                // compensated accumulation of the cdf
                const double y = w[k] - comp;
                const double t = acc + y;
                comp = (t - acc) - y;
                acc = t;
                a *= (double(k) - gamma_) / double(k + 1);
            }
            w[kTableSize] = std::max(0.0, 1.0 - acc); // Pareto tail slot
            alias_ = DiscreteAlias(w);
            // size-biased weights k*mu(k)
            std::vector<double> sw(kTableSize + 1, 0.0);
            double sacc = 0.0;
            for (std::uint64_t k = 2; k < kTableSize; ++k) {
                sw[k] = double(k) * w[k];
                sacc += sw[k];
            }
            sw[kTableSize] = std::max(0.0, 1.0 - sacc);
            sb_alias_ = DiscreteAlias(sw);
        }
        if (family_ == Family::GeometricCritical || family_ == Family::PoissonCritical ||
            family_ == Family::Explicit) {
            // size-biased table: k mu(k) decays at least geometrically here
            std::vector<double> sw;
            double total = 0.0;
            for (std::uint64_t k = 1; k < 256; ++k) {
                const double wk = double(k) * pmf(k);
                if (family_ == Family::Explicit && k >= pmf_.size()) break;
                sw.resize(k + 1, 0.0);
                sw[k] = wk;
                total += wk;
                if (family_ != Family::Explicit && wk < 1e-18 && k > 8) break;
            }
            if (total > 0.0) sb_alias_ = DiscreteAlias(sw);
        }
    }

    static std::uint64_t pareto_tail(Rng& rng, double index) {
        const double u = rng.uniform();
        const double k = double(kTableSize) * std::pow(u, -1.0 / index);
        if (k > 1e15) return std::uint64_t(1e15);
        return static_cast<std::uint64_t>(k);
    }

    Family family_;
    double gamma_ = 0.0;
    std::vector<double> pmf_;
    DiscreteAlias alias_;
    DiscreteAlias sb_alias_;
};

/// Arena-backed rooted ordered tree: parent / first-child / next-sibling links,
/// nodes in depth-first (preorder) creation order.
struct UlamTree {
    static constexpr std::int32_t nil = -1;

    struct Node {
        std::int32_t parent = nil;
        std::int32_t first_child = nil;
        std::int32_t next_sibling = nil;
    };

    std::vector<Node> nodes;
    int height = 0;

    std::size_t size() const { return nodes.size(); }

    std::size_t offspring_count(std::size_t v) const {
        std::size_t k = 0;
        for (std::int32_t c = nodes[v].first_child; c != nil; c = nodes[c].next_sibling)
            ++k;
        return k;
    }

    int depth(std::size_t v) const {
        int d = 0;
        for (std::int32_t p = nodes[v].parent; p != nil; p = nodes[p].parent) ++d;
        return d;
    }
};

struct TreeSampleResult {
    UlamTree tree;
    bool truncated = false;
};

/// Depth-first sampling of a mu-Galton-Watson tree. If the arena reaches
/// node_cap the remaining offspring draws are suppressed and the result is
/// flagged; callers must discard or resample.
inline TreeSampleResult sample_tree(const OffspringDistribution& off, Rng& rng,
                                    std::size_t node_cap = 10'000'000) {
    TreeSampleResult out;
    auto& nodes = out.tree.nodes;
    nodes.emplace_back();

    struct Frame {
        std::int32_t node;
        std::uint64_t remaining;
        std::int32_t last_child;
    };
    std::vector<Frame> stack;
    stack.push_back({0, off.sample(rng), UlamTree::nil});
    int max_depth = 0;

    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.remaining == 0) {
            stack.pop_back();
            continue;
        }
        --top.remaining;
        if (nodes.size() >= node_cap) {
            out.truncated = true;
            stack.clear();
            break;
        }
        const auto child = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        nodes[child].parent = top.node;
        if (top.last_child == UlamTree::nil)
            nodes[top.node].first_child = child;
        else
            nodes[top.last_child].next_sibling = child;
        top.last_child = child;
        const int d = static_cast<int>(stack.size());
        max_depth = std::max(max_depth, d);
        stack.push_back({child, off.sample(rng), UlamTree::nil});
    }
    out.tree.height = max_depth;
    return out;
}

/// Rejection sampling of a tree conditioned on h(theta) >= n.
inline UlamTree sample_conditioned_height(const OffspringDistribution& off, int n,
                                          Rng& rng, std::uint64_t max_attempts = 0,
                                          std::size_t node_cap = 10'000'000) {
    if (n < 1) throw Error("sample_conditioned_height: n >= 1 required");
    if (max_attempts == 0) {
        // Kolmogorov-style budget: acceptance ~ 2/(sigma^2 n) for finite
        // variance, slower for stable tails; pad generously
        max_attempts = 2000ull * std::uint64_t(n) * std::uint64_t(n) + 100000ull;
    }
    for (std::uint64_t attempt = 1; attempt <= max_attempts; ++attempt) {
        auto res = sample_tree(off, rng, node_cap);
        if (res.truncated) continue;
        if (res.tree.height >= n) return std::move(res.tree);
    }
    throw AttemptsExhausted("sample_conditioned_height: no acceptance",
                            1.0 / double(max_attempts));
}

/// Contour (Dyck-path) heights of the depth-first traversal at unit speed:
/// 2*(edges)+1 integers starting and ending at 0.
inline std::vector<int> contour(const UlamTree& t) {
    std::vector<int> out;
    out.push_back(0);
    if (t.nodes.empty()) return out;
    std::vector<std::int32_t> cursor(t.nodes.size());
    for (std::size_t v = 0; v < t.nodes.size(); ++v) cursor[v] = t.nodes[v].first_child;
    std::vector<std::int32_t> stack{0};
    int depth = 0;
    while (!stack.empty()) {
        const std::int32_t v = stack.back();
        if (cursor[v] != UlamTree::nil) {
            const std::int32_t c = cursor[v];
            cursor[v] = t.nodes[c].next_sibling;
            ++depth;
            out.push_back(depth);
            stack.push_back(c);
        } else {
            stack.pop_back();
            if (!stack.empty()) {
                --depth;
                out.push_back(depth);
            }
        }
    }
    return out;
}

/// Contour plus, for every node, the contour index of its first visit.
inline std::pair<std::vector<int>, std::vector<std::size_t>> contour_with_first_visit(
    const UlamTree& t) {
    std::vector<int> out;
    std::vector<std::size_t> first(t.nodes.size(), 0);
    out.push_back(0);
    std::vector<std::int32_t> cursor(t.nodes.size());
    for (std::size_t v = 0; v < t.nodes.size(); ++v) cursor[v] = t.nodes[v].first_child;
    std::vector<std::int32_t> stack{0};
    int depth = 0;
    while (!stack.empty()) {
        const std::int32_t v = stack.back();
        if (cursor[v] != UlamTree::nil) {
            const std::int32_t c = cursor[v];
            cursor[v] = t.nodes[c].next_sibling;
            ++depth;
            first[static_cast<std::size_t>(c)] = out.size();
            out.push_back(depth);
            stack.push_back(c);
        } else {
            stack.pop_back();
            if (!stack.empty()) {
                --depth;
                out.push_back(depth);
            }
        }
    }
    return {std::move(out), std::move(first)};
}

/// Scaled contour as an Excursion: heights times height_scale on a grid of
/// spacing time_scale. A single-node tree yields the null two-knot excursion.
inline Excursion to_excursion(const UlamTree& t, double height_scale,
                              double time_scale) {
    if (!(height_scale > 0) || !(time_scale > 0))
        throw Error("to_excursion: scales must be positive");
    const auto c = contour(t);
    if (c.size() < 2) return Excursion(time_scale, {0.0, 0.0});
    std::vector<double> h(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) h[i] = double(c[i]) * height_scale;
    h.front() = 0.0;
    h.back() = 0.0;
    return Excursion(time_scale * double(c.size() - 1), std::move(h));
}

inline Excursion contour_to_excursion(const std::vector<int>& c, double height_scale,
                                      double time_scale) {
    if (c.size() < 2) return Excursion(time_scale, {0.0, 0.0});
    std::vector<double> h(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) h[i] = double(c[i]) * height_scale;
    h.front() = 0.0;
    h.back() = 0.0;
    return Excursion(time_scale * double(c.size() - 1), std::move(h));
}

struct SpineSample {
    UlamTree tree;
    std::vector<std::int32_t> spine; // node indices, generation 0..n
    bool truncated = false;
};

/**
 * Size-biased tree with a distinguished spine to generation n: spine nodes
 * get size-biased offspring counts with a uniformly chosen spine child;
 * off-spine children root independent mu-trees. The tip itself gets an
 * ordinary subtree. Sampling device for the ancestral-line Palm tests.
 */
inline SpineSample spine_sample(const OffspringDistribution& off, int n, Rng& rng,
                                std::size_t node_cap = 10'000'000) {
    SpineSample out;
    auto& nodes = out.tree.nodes;
    nodes.emplace_back();
    out.spine.push_back(0);

    const auto grow_subtree = [&](std::int32_t root) {
        std::vector<std::pair<std::int32_t, std::uint64_t>> stack;
        std::vector<std::int32_t> last;
        stack.push_back({root, off.sample(rng)});
        last.push_back(UlamTree::nil);
        while (!stack.empty()) {
            auto& [v, rem] = stack.back();
            if (rem == 0) {
                stack.pop_back();
                last.pop_back();
                continue;
            }
            --rem;
            if (nodes.size() >= node_cap) {
                out.truncated = true;
                return;
            }
            const auto child = static_cast<std::int32_t>(nodes.size());
            nodes.emplace_back();
            nodes[child].parent = v;
            if (last.back() == UlamTree::nil)
                nodes[v].first_child = child;
            else
                nodes[last.back()].next_sibling = child;
            last.back() = child;
            stack.push_back({child, off.sample(rng)});
            last.push_back(UlamTree::nil);
        }
    };

    for (int gen = 0; gen < n; ++gen) {
        const std::int32_t v = out.spine.back();
        const std::uint64_t k = off.sample_size_biased(rng); // k >= 1
        const std::uint64_t spine_pos = rng.uniform_index(k);
        std::int32_t prev = UlamTree::nil;
        std::int32_t spine_child = UlamTree::nil;
        for (std::uint64_t j = 0; j < k; ++j) {
            if (nodes.size() >= node_cap) {
                out.truncated = true;
                break;
            }
            const auto child = static_cast<std::int32_t>(nodes.size());
            nodes.emplace_back();
            nodes[child].parent = v;
            if (prev == UlamTree::nil)
                nodes[v].first_child = child;
            else
                nodes[prev].next_sibling = child;
            prev = child;
            if (j == spine_pos)
                spine_child = child;
            else
                grow_subtree(child);
            if (out.truncated) break;
        }
        if (out.truncated || spine_child == UlamTree::nil) {
            out.truncated = true;
            break;
        }
        out.spine.push_back(spine_child);
    }
    if (!out.truncated) grow_subtree(out.spine.back());

    // nodes are in preorder, so parents precede children
    std::vector<int> depth(nodes.size(), 0);
    int h = 0;
    for (std::size_t v = 1; v < nodes.size(); ++v) {
        depth[v] = depth[static_cast<std::size_t>(nodes[v].parent)] + 1;
        h = std::max(h, depth[v]);
    }
    out.tree.height = h;
    return out;
}

struct ContourStreamStats {
    std::uint64_t nodes = 0;
    int height = 0;
    bool truncated = false;
};

/**
 * Streams the contour of a freshly sampled mu-tree without materializing it.
 * sink(depth) is called for every contour step (2E+1 calls). If depth_prune
 * >= 0, nodes at that depth are treated as leaves: the subtree law above the
 * prune level is never sampled, which leaves every statistic of the tree
 * below the prune level unchanged.
 */
template <typename Sink>
ContourStreamStats sample_contour_stream(const OffspringDistribution& off, Rng& rng,
                                         std::uint64_t node_cap, int depth_prune,
                                         Sink&& sink) {
    ContourStreamStats st;
    st.nodes = 1;
    std::vector<std::uint64_t> stack;
    stack.push_back(depth_prune == 0 ? 0 : off.sample(rng));
    sink(0);
    while (!stack.empty()) {
        if (stack.back() == 0) {
            stack.pop_back();
            if (!stack.empty()) sink(static_cast<int>(stack.size()) - 1);
            continue;
        }
        --stack.back();
        const int depth = static_cast<int>(stack.size());
        sink(depth);
        st.height = std::max(st.height, depth);
        ++st.nodes;
        if (st.nodes >= node_cap) {
            st.truncated = true;
            for (auto& r : stack) r = 0; // stop all pending expansion
            stack.push_back(0);
            continue;
        }
        stack.push_back(depth == depth_prune ? 0 : off.sample(rng));
    }
    return st;
}

} // namespace levyforest
