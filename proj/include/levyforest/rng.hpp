#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <levyforest/common.hpp>

namespace levyforest {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes a base seed with stream indices so that per-task generators are
/// decorrelated and independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t task = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = splitmix64(s);
    s ^= task * 0x9e6c63d0876a9a47ULL + 1;
    return a ^ (b << 1) ^ splitmix64(s);
}

/**
 * xoshiro256++ generator with explicit seeding and hand-rolled variate
 * samplers. All simulation code draws through this class only, which keeps
 * every result bit-reproducible for a given (seed, stream) pair regardless
 * of platform or standard-library version.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t task = 0)
        : Rng(derive_seed(seed, stream, task)) {}

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in (0,1); never returns 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire-style bounded draw with rejection on the biased strip.
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            auto lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    double exponential(double mean = 1.0) { return -mean * std::log(uniform()); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    /// Marsaglia-Tsang for shape >= 1, boosted for shape < 1. Scale 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 12.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform();
            while (prod > limit) {
                ++k;
                prod *= uniform();
            }
            return k;
        }
        return poisson_ptrd(mean);
    }

    /// Geometric on {0,1,2,...} with P(k) = 2^{-k-1}.
    std::uint64_t geometric_half() {
        std::uint64_t k = 0;
        while (true) {
            std::uint64_t bits = next_u64();
            if (bits != 0) return k + static_cast<std::uint64_t>(__builtin_ctzll(bits));
            k += 64;
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    // Hoermann's PTRD transformed-rejection sampler.
    std::uint64_t poisson_ptrd(double mu) {
        const double smu = std::sqrt(mu);
        const double b = 0.931 + 2.53 * smu;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        while (true) {
            double u;
            double v = uniform();
            if (v <= 0.86 * v_r) {
                u = v / v_r - 0.43;
                return static_cast<std::uint64_t>(
                    std::floor((2.0 * a / (0.5 - std::fabs(u)) + b) * u + mu + 0.445));
            }
            if (v >= v_r) {
                u = uniform() - 0.5;
            } else {
                u = v / v_r - 0.93;
                u = (u < 0 ? -0.5 : 0.5) - u;
                v = uniform() * v_r;
            }
            const double us = 0.5 - std::fabs(u);
            if (us < 0.013 && v > us) continue;
            const double k = std::floor((2.0 * a / us + b) * u + mu + 0.445);
            v = v * inv_alpha / (a / (us * us) + b);
            if (k >= 10.0) {
                const double lk = std::log(k);
                if (std::log(v * smu) <=
                    (k + 0.5) * std::log(mu / k) - mu - 0.5 * std::log(2 * M_PI) + k -
                        (1.0 / 12.0 - 1.0 / (360.0 * k * k)) / k)
                    return static_cast<std::uint64_t>(k);
                (void)lk;
            } else if (k >= 0.0) {
                if (std::log(v) <= k * std::log(mu) - mu - std::lgamma(k + 1.0))
                    return static_cast<std::uint64_t>(k);
            }
        }
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Walker alias table for O(1) draws from a fixed finite pmf.
class DiscreteAlias {
public:
    DiscreteAlias() = default;

    explicit DiscreteAlias(const std::vector<double>& weights) {
        const std::size_t n = weights.size();
        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        double total = 0.0;
        for (double w : weights) total += w;
        std::vector<double> scaled(n);
        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = weights[i] * n / total;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            const auto s = small.back();
            small.pop_back();
            const auto l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                small.push_back(l);
                large.pop_back();
            }
        }
        for (auto i : large) prob_[i] = 1.0;
        for (auto i : small) prob_[i] = 1.0;
    }

    std::size_t size() const { return prob_.size(); }

    std::uint64_t sample(Rng& rng) const {
        const std::uint64_t i = rng.uniform_index(prob_.size());
        return rng.uniform() < prob_[i] ? i : alias_[i];
    }

private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

} // namespace levyforest
