#include "catch_amalgamated.hpp"

#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include <levyforest/galton_watson.hpp>
#include <levyforest/numerics.hpp>

using namespace levyforest;

namespace {

// build an UlamTree from a nested children-count specification in preorder:
// each entry is the offspring count of the node in preorder position
UlamTree tree_from_preorder(const std::vector<int>& counts) {
    UlamTree t;
    t.nodes.resize(counts.size());
    std::vector<std::pair<std::int32_t, int>> stack; // (node, remaining children)
    std::size_t next = 1;
    stack.push_back({0, counts[0]});
    std::vector<std::int32_t> last(counts.size(), UlamTree::nil);
    int h = 0;
    while (!stack.empty()) {
        auto& [v, rem] = stack.back();
        if (rem == 0) {
            stack.pop_back();
            continue;
        }
        --rem;
        const auto c = static_cast<std::int32_t>(next++);
        t.nodes[c].parent = v;
        if (last[v] == UlamTree::nil)
            t.nodes[v].first_child = c;
        else
            t.nodes[last[v]].next_sibling = c;
        last[v] = c;
        h = std::max(h, static_cast<int>(stack.size()));
        stack.push_back({c, counts[c]});
    }
    t.height = h;
    return t;
}

// graph distances between all vertex pairs by BFS over the arena
std::vector<std::vector<int>> graph_distances(const UlamTree& t) {
    const std::size_t n = t.size();
    std::vector<std::vector<int>> adj(n);
    for (std::size_t v = 1; v < n; ++v) {
        adj[v].push_back(t.nodes[v].parent);
        adj[t.nodes[v].parent].push_back(static_cast<int>(v));
    }
    std::vector<std::vector<int>> d(n, std::vector<int>(n, -1));
    for (std::size_t s = 0; s < n; ++s) {
        std::queue<int> q;
        q.push(static_cast<int>(s));
        d[s][s] = 0;
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            for (int w : adj[v])
                if (d[s][w] < 0) {
                    d[s][w] = d[s][v] + 1;
                    q.push(w);
                }
        }
    }
    return d;
}

// enumerate the preorder offspring-count sequences of all ordered trees with
// exactly e edges
void enumerate_trees(int edges, std::vector<std::vector<int>>& out) {
    std::vector<int> counts;
    // recursively assign children counts in preorder with a budget of nodes
    std::function<void(int)> rec = [&](int remaining_nodes) {
        if (static_cast<int>(counts.size()) == edges + 1) {
            if (remaining_nodes == 0) out.push_back(counts);
            return;
        }
        // pending = number of nodes already promised but not yet emitted
        // simpler: generate Lukasiewicz paths: sum(counts)+1 = nodes
        for (int k = 0; k <= remaining_nodes; ++k) {
            counts.push_back(k);
            rec(remaining_nodes - k);
            counts.pop_back();
        }
    };
    // Lukasiewicz: a preorder count sequence is valid iff partial sums
    // satisfy sum_{i<j}(c_i - 1) > -1 for j < n and total = edges
    std::vector<int> seq;
    std::function<void(int, int)> build = [&](int placed, int walk) {
        if (placed == edges + 1) {
            if (walk == -1) out.push_back(seq);
            return;
        }
        if (walk < 0) return;
        for (int k = 0; k <= edges + 1 - placed; ++k) {
            seq.push_back(k);
            build(placed + 1, walk + k - 1);
            seq.pop_back();
        }
    };
    build(0, 0);
}

} // namespace

TEST_CASE("pmf closed values") {
    const auto geo = OffspringDistribution::geometric_critical();
    CHECK(geo.pmf(0) == Catch::Approx(0.5));
    CHECK(geo.pmf(3) == Catch::Approx(1.0 / 16.0));

    const auto st = OffspringDistribution::stable_gf(1.5);
    CHECK(st.pmf(0) == Catch::Approx(2.0 / 3.0));
    CHECK(st.pmf(1) == 0.0);
    // |C(1.5, 2)| / 1.5 = (1.5 * 0.5 / 2) / 1.5 = 0.25
    CHECK(st.pmf(2) == Catch::Approx(0.25));
}

TEST_CASE("stable pmf sums to one with unit mean") {
    // k mu(k) = |C(gamma-1, k-1)| and sum_j |C(gamma-1, j)| = 1, so the mean
    // of the truncated series plus the closed-form remainder must be exactly 1
    for (double gamma : {1.2, 1.5, 1.8}) {
        const auto st = OffspringDistribution::stable_gf(gamma);
        const std::uint64_t K = 2'000'000;
        long double total = 1.0L / gamma, mean = 0.0L;
        long double c = gamma * (gamma - 1.0L) / 2.0L;
        for (std::uint64_t k = 2; k < K; ++k) {
            total += c / gamma;
            mean += double(k) * c / gamma;
            c *= (double(k) - gamma) / double(k + 1);
        }
        long double sb_partial = 0.0L; // sum_{j=1}^{K-2} |C(gamma-1, j)|
        long double b = gamma - 1.0L;
        for (std::uint64_t j = 1; j <= K - 2; ++j) {
            sb_partial += b;
            b *= (double(j) - (gamma - 1.0L)) / double(j + 1);
        }
        const double mean_tail = double(1.0L - sb_partial);
        // total tail: sum_{k>=K} mu(k) <= mean tail / K
        CHECK(double(total) == Catch::Approx(1.0).margin(mean_tail / K + 1e-10));
        CHECK(double(mean) + mean_tail == Catch::Approx(1.0).margin(1e-9));
        CHECK(st.gf(1.0) == Catch::Approx(1.0));
    }
}

TEST_CASE("stable pmf tail exponent") {
    const double gamma = 1.5;
    const auto st = OffspringDistribution::stable_gf(gamma);
    std::vector<double> xs, ys;
    for (int e = 6; e <= 12; ++e) {
        const std::uint64_t k = 1ull << e;
        xs.push_back(std::log(double(k)));
        ys.push_back(std::log(st.pmf(k)));
    }
    const auto fit = linear_fit(xs, ys);
    CHECK(fit.slope == Catch::Approx(-(1.0 + gamma)).margin(0.1));
}

TEST_CASE("single-atom pmf yields the single-node tree") {
    const auto off = OffspringDistribution::explicit_pmf({1.0});
    Rng rng(5);
    const auto res = sample_tree(off, rng);
    CHECK(res.tree.size() == 1);
    CHECK(res.tree.height == 0);
    CHECK_FALSE(res.truncated);
}

TEST_CASE("sampling is deterministic given the seed") {
    const auto off = OffspringDistribution::geometric_critical();
    Rng a(99), b(99);
    const auto ta = sample_tree(off, a);
    const auto tb = sample_tree(off, b);
    REQUIRE(ta.tree.size() == tb.tree.size());
    for (std::size_t v = 0; v < ta.tree.size(); ++v) {
        CHECK(ta.tree.nodes[v].parent == tb.tree.nodes[v].parent);
        CHECK(ta.tree.nodes[v].first_child == tb.tree.nodes[v].first_child);
        CHECK(ta.tree.nodes[v].next_sibling == tb.tree.nodes[v].next_sibling);
    }
}

TEST_CASE("empirical offspring frequencies match the pmf") {
    Rng rng(0xfeed);
    const int n = 1'000'000;
    for (const auto& off : {OffspringDistribution::geometric_critical(),
                            OffspringDistribution::poisson_critical(),
                            OffspringDistribution::stable_gf(1.5)}) {
        std::vector<std::uint64_t> counts(16, 0);
        for (int i = 0; i < n; ++i) {
            const auto k = off.sample(rng);
            if (k < counts.size()) ++counts[k];
        }
        for (std::size_t k = 0; k < counts.size(); ++k) {
            const double p = off.pmf(k);
            if (p * n < 25) continue;
            const double se = std::sqrt(p * (1 - p) * n);
            CHECK(std::fabs(double(counts[k]) - p * n) < 4.0 * se);
        }
    }
}

TEST_CASE("conditioned sampling respects the height floor") {
    const auto off = OffspringDistribution::geometric_critical();
    Rng rng(17);
    for (int i = 0; i < 20; ++i) {
        const auto t = sample_conditioned_height(off, 12, rng);
        CHECK(t.height >= 12);
    }
}

TEST_CASE("conditioned-height acceptance rate near the Kolmogorov asymptotic") {
    const auto off = OffspringDistribution::geometric_critical();
    Rng rng(314159);
    const int n = 50;
    const int attempts = 100000;
    int accepted = 0;
    for (int i = 0; i < attempts; ++i) {
        const auto res = sample_tree(off, rng);
        if (!res.truncated && res.tree.height >= n) ++accepted;
    }
    // 2/(sigma^2 n) = 1/50 for sigma^2 = 2
    const double rate = double(accepted) / attempts;
    CHECK(rate > 0.5 / n);
    CHECK(rate < 2.0 / n);
}

TEST_CASE("contour of the reference eight-node tree") {
    // root with children 1, 2; node 1 with children 11, 12, 13; node 12 with
    // children 121, 122; preorder counts: root=2, 1=3, 11=0, 12=2, 121=0,
    // 122=0, 13=0, 2=0
    const auto t = tree_from_preorder({2, 3, 0, 2, 0, 0, 0, 0});
    const std::vector<int> expect{0, 1, 2, 1, 2, 3, 2, 3, 2, 1, 2, 1, 0, 1, 0};
    CHECK(contour(t) == expect);
}

TEST_CASE("contour of tiny trees") {
    CHECK(contour(tree_from_preorder({0})) == std::vector<int>{0});
    CHECK(contour(tree_from_preorder({2, 0, 0})) == std::vector<int>{0, 1, 0, 1, 0});
}

TEST_CASE("contour shape invariants on random trees") {
    const auto off = OffspringDistribution::poisson_critical();
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        const auto res = sample_tree(off, rng);
        const auto c = contour(res.tree);
        CHECK(c.size() == 2 * (res.tree.size() - 1) + 1);
        CHECK(c.front() == 0);
        CHECK(c.back() == 0);
        for (std::size_t j = 1; j < c.size(); ++j)
            CHECK(std::abs(c[j] - c[j - 1]) == 1);
    }
}

TEST_CASE("contour-coded tree is isometric to the graph metric, exhaustively") {
    for (int edges = 1; edges <= 6; ++edges) {
        std::vector<std::vector<int>> trees;
        enumerate_trees(edges, trees);
        // Catalan numbers 1, 2, 5, 14, 42, 132
        const int expected[] = {0, 1, 2, 5, 14, 42, 132};
        CHECK(static_cast<int>(trees.size()) == expected[edges]);
        for (const auto& counts : trees) {
            const auto t = tree_from_preorder(counts);
            const auto [c, first] = contour_with_first_visit(t);
            const auto exc = contour_to_excursion(c, 1.0, 1.0);
            const auto gd = graph_distances(t);
            for (std::size_t u = 0; u < t.size(); ++u)
                for (std::size_t v = 0; v < t.size(); ++v) {
                    const double de =
                        exc.dist(double(first[u]), double(first[v]));
                    CHECK(de == Catch::Approx(double(gd[u][v])).margin(1e-9));
                }
        }
    }
}

TEST_CASE("to_excursion scaling") {
    const auto t = tree_from_preorder({2, 3, 0, 2, 0, 0, 0, 0});
    const auto e = to_excursion(t, 0.25, 0.5);
    CHECK(e.height() == Catch::Approx(0.25 * t.height));
    CHECK(e.zeta() == Catch::Approx(0.5 * 14.0));
    // node 11 first visited at contour index 2, node 122 at index 7:
    // graph distance 3 edges -> 3 * height_scale
    const auto [c, first] = contour_with_first_visit(t);
    CHECK(e.dist(0.5 * double(first[2]), 0.5 * double(first[5])) ==
          Catch::Approx(0.25 * 3.0));
}

TEST_CASE("spine sampling") {
    const auto off = OffspringDistribution::geometric_critical();
    Rng rng(112233);

    const auto trivial = spine_sample(off, 0, rng);
    CHECK(trivial.spine.size() == 1);

    // size-biased offspring mean = E[k^2] = sigma^2 + 1 = 3 for the critical
    // geometric; measure it on raw draws (off-spine subtrees of a critical
    // tree have infinite expected size, so long spines routinely hit caps)
    double total = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) total += double(off.sample_size_biased(rng));
    CHECK(total / draws == Catch::Approx(3.0).epsilon(0.01));

    int structural_checks = 0;
    while (structural_checks < 20) {
        const auto s = spine_sample(off, 20, rng, 1'000'000);
        if (s.truncated) continue;
        ++structural_checks;
        REQUIRE(s.spine.size() == 21);
        for (std::size_t i = 1; i < s.spine.size(); ++i)
            CHECK(s.tree.nodes[s.spine[i]].parent == s.spine[i - 1]);
        for (std::size_t i = 0; i + 1 < s.spine.size(); ++i)
            CHECK(s.tree.offspring_count(s.spine[i]) >= 1);
    }
}

TEST_CASE("streamed contour agrees with the arena sampler in law") {
    const auto off = OffspringDistribution::geometric_critical();
    Rng a(4242), b(4242);
    // identical rng draws: arena DFS and stream DFS consume offspring counts
    // in the same preorder
    const auto res = sample_tree(off, a);
    std::vector<int> streamed;
    const auto st = sample_contour_stream(off, b, 10'000'000, -1,
                                          [&](int d) { streamed.push_back(d); });
    CHECK_FALSE(st.truncated);
    CHECK(st.nodes == res.tree.size());
    CHECK(st.height == res.tree.height);
    CHECK(streamed == contour(res.tree));
}

TEST_CASE("pruned stream never exceeds the prune depth") {
    const auto off = OffspringDistribution::geometric_critical();
    Rng rng(777);
    for (int i = 0; i < 50; ++i) {
        int maxd = 0;
        sample_contour_stream(off, rng, 1'000'000, 5,
                              [&](int d) { maxd = std::max(maxd, d); });
        CHECK(maxd <= 5);
    }
}

TEST_CASE("survival probabilities by generating-function iteration") {
    const auto geo = OffspringDistribution::geometric_critical();
    // exact for geometric(1/2): q_m = 1/(m+1)
    CHECK(geo.survival_to_generation(1) == Catch::Approx(0.5).margin(1e-12));
    CHECK(geo.survival_to_generation(9) == Catch::Approx(0.1).margin(1e-12));
    CHECK(geo.survival_to_generation(199) == Catch::Approx(1.0 / 200).margin(1e-12));

    const auto st = OffspringDistribution::stable_gf(1.5);
    // asymptotic q_m ~ (gamma/((gamma-1) m))^{1/(gamma-1)} with an
    // O(log m / m) relative correction
    const double q = st.survival_to_generation(2000);
    CHECK(q == Catch::Approx(std::pow(1.5 / (0.5 * 2000), 2.0)).epsilon(0.03));
}
