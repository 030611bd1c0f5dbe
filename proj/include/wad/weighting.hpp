#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "wad/error.hpp"

namespace wad {

enum class MonotoneFn { Identity, Exp };

struct WeightFunctionSpec {
    MonotoneFn g1 = MonotoneFn::Identity;
    MonotoneFn g2 = MonotoneFn::Identity;
};

inline constexpr double kWeightPTildeEpsilon = 1e-6;
inline constexpr double kWeightPairTolerance = 1e-9;

inline double apply(MonotoneFn fn, double x) {
    switch (fn) {
        case MonotoneFn::Identity: return x;
        case MonotoneFn::Exp: return std::exp(x);
    }
    return x;
}

inline MonotoneFn parse_monotone_fn(std::string_view tag) {
    if (tag == "identity") return MonotoneFn::Identity;
    if (tag == "exp") return MonotoneFn::Exp;
    throw Error(ErrorCode::InvalidConfig, "unknown weight function '" + std::string(tag) + "'");
}

inline std::string_view to_string(MonotoneFn fn) {
    return fn == MonotoneFn::Exp ? "exp" : "identity";
}

/// Confidence of a pseudo label: g1(p) * g2(1 - q/p). Instances whose best
/// similarity is not positive get zero weight.
inline double compute_weight(double p_tilde, double q_tilde, const WeightFunctionSpec& spec = {}) {
    if (q_tilde > p_tilde + kWeightPairTolerance) {
        throw Error(ErrorCode::InvalidPair,
                    "q_tilde " + std::to_string(q_tilde) + " exceeds p_tilde " + std::to_string(p_tilde));
    }
    if (p_tilde <= kWeightPTildeEpsilon) return 0.0;
    // q may exceed p by the pair tolerance; keep the margin non-negative.
    const double margin = std::max(0.0, 1.0 - q_tilde / p_tilde);
    return apply(spec.g1, p_tilde) * apply(spec.g2, margin);
}

}  // namespace wad
