#pragma once

#include <stdexcept>
#include <string>

namespace levyforest {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// mechanism
struct NonExtinct : Error { using Error::Error; };
struct NoBracket : Error { using Error::Error; };
struct IndexTooLow : Error { using Error::Error; };

// metric
struct TooLarge : Error { using Error::Error; };

// samplers
struct AttemptsExhausted : Error {
    double acceptance_rate;
    AttemptsExhausted(const std::string& msg, double rate)
        : Error(msg), acceptance_rate(rate) {}
};

struct ConfigError : Error { using Error::Error; };

constexpr int kInfiniteMultiplicity = -1;

} // namespace levyforest
