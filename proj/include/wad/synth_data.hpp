#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "wad/dataset.hpp"
#include "wad/error.hpp"
#include "wad/repr_core.hpp"

namespace wad {

/// A class-distribution-mismatch scenario living directly on the unit sphere.
/// Classes [0, k_target) are target classes; the next k_unknown classes only
/// ever appear in the unlabeled pool.
struct ScenarioConfig {
    int k_target = 2;
    int k_unknown = 8;
    std::size_t dim = 16;
    std::size_t labeled_per_class = 40;
    std::size_t n_unlabeled = 2000;
    double mismatch_proportion = 0.6;
    std::size_t n_test_per_class = 250;
    double angular_noise_std = 0.3;         ///< RMS angle (radians) between an instance and its center
    double min_center_separation = 1.45;    ///< radians
    bool near_miss_unknowns = false;
    double near_miss_angle = 0.8;           ///< unknown-to-target-center angle when near_miss_unknowns
    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& field, const std::string& why) {
            throw Error(ErrorCode::InvalidConfig, "scenario." + field + ": " + why);
        };
        if (k_target < 2) fail("k_target", "must be >= 2");
        if (k_unknown < 0) fail("k_unknown", "must be >= 0");
        if (dim < 2) fail("dim", "must be >= 2");
        if (labeled_per_class < 1) fail("labeled_per_class", "must be >= 1");
        if (!(mismatch_proportion >= 0.0 && mismatch_proportion <= 1.0)) fail("mismatch_proportion", "must lie in [0, 1]");
        if (!(angular_noise_std >= 0.0)) fail("angular_noise_std", "must be >= 0");
        if (!(min_center_separation >= 0.0 && min_center_separation <= std::numbers::pi)) {
            fail("min_center_separation", "must lie in [0, pi]");
        }
        if (near_miss_unknowns && !(near_miss_angle > 0.0 && near_miss_angle < std::numbers::pi)) {
            fail("near_miss_angle", "must lie in (0, pi)");
        }
        if (unknown_count() > 0 && k_unknown == 0) fail("k_unknown", "must be >= 1 when mismatch_proportion > 0");
    }

    /// round(mismatch_proportion * n_unlabeled); the rest are target instances.
    std::size_t unknown_count() const {
        return static_cast<std::size_t>(std::llround(mismatch_proportion * static_cast<double>(n_unlabeled)));
    }
    std::size_t unlabeled_target_count() const { return n_unlabeled - unknown_count(); }
};

inline constexpr int kCenterSamplingAttempts = 10000;

namespace detail {

inline std::vector<double> gaussian_vector(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = n01(rng);
    return v;
}

inline UnitEmbedding random_direction(std::size_t dim, std::mt19937_64& rng) {
    for (;;) {
        auto v = gaussian_vector(dim, rng);
        if (euclidean_norm(v) >= 1e-6) return normalize(v);
    }
}

inline double angle_between(const UnitEmbedding& a, const UnitEmbedding& b) { return std::acos(cosine(a, b)); }

/// Unit vector at exactly `angle` from `center` in a random tangent direction.
inline UnitEmbedding rotate_away(const UnitEmbedding& center, double angle, std::mt19937_64& rng) {
    for (;;) {
        auto t = gaussian_vector(center.dim(), rng);
        const double along = dot(t, center.values());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] -= along * center[i];
        const double norm = euclidean_norm(t);
        if (norm < 1e-6) continue;
        std::vector<double> v(center.dim());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::cos(angle) * center[i] + std::sin(angle) * t[i] / norm;
        return normalize(v);
    }
}

/// Center plus isotropic tangent-plane noise with per-axis std
/// angular_noise_std / sqrt(dim - 1), renormalized.
inline UnitEmbedding perturb(const UnitEmbedding& center, double angular_noise_std, std::mt19937_64& rng) {
    const std::size_t d = center.dim();
    const double scale = angular_noise_std / std::sqrt(static_cast<double>(d - 1));
    auto t = gaussian_vector(d, rng);
    const double along = dot(t, center.values());
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = center[i] + scale * (t[i] - along * center[i]);
    return normalize(v);
}

}  // namespace detail

/// Rejection-samples class centers pairwise at least min_center_separation
/// apart. Near-miss unknown centers are instead placed near_miss_angle from a
/// target center and only kept clear of each other and the other targets.
inline std::vector<UnitEmbedding> sample_centers(const ScenarioConfig& config, std::mt19937_64& rng) {
    const int total = config.k_target + config.k_unknown;
    std::vector<UnitEmbedding> centers;
    int attempts = 0;
    while (static_cast<int>(centers.size()) < total) {
        if (++attempts > kCenterSamplingAttempts) {
            throw Error(ErrorCode::CenterSamplingFailed,
                        "could not place " + std::to_string(total) + " centers " +
                            std::to_string(config.min_center_separation) + " rad apart in dimension " +
                            std::to_string(config.dim));
        }
        const bool unknown = static_cast<int>(centers.size()) >= config.k_target;
        UnitEmbedding candidate;
        std::size_t anchor = centers.size();
        if (unknown && config.near_miss_unknowns) {
            std::uniform_int_distribution<int> pick(0, config.k_target - 1);
            anchor = static_cast<std::size_t>(pick(rng));
            candidate = detail::rotate_away(centers[anchor], config.near_miss_angle, rng);
        } else {
            candidate = detail::random_direction(config.dim, rng);
        }
        bool ok = true;
        for (std::size_t c = 0; c < centers.size() && ok; ++c) {
            if (c == anchor) continue;
            ok = detail::angle_between(candidate, centers[c]) >= config.min_center_separation;
        }
        if (ok) centers.push_back(std::move(candidate));
    }
    return centers;
}

/// Builds labeled (target classes only), unlabeled (target/unknown mix) and
/// test (target classes only) splits. Deterministic in config.seed.
inline DatasetState generate(const ScenarioConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const auto centers = sample_centers(config, rng);

    std::vector<UnitEmbedding> embeddings;
    std::vector<Role> roles;
    std::vector<ClassId> labels;
    HiddenTruth truth;
    auto emit = [&](int cls, Role role) {
        embeddings.push_back(detail::perturb(centers[static_cast<std::size_t>(cls)], config.angular_noise_std, rng));
        roles.push_back(role);
        const bool target = cls < config.k_target;
        labels.push_back(role == Role::Unlabeled ? -1 : cls);
        truth.label.push_back(cls);
        truth.is_target.push_back(target ? 1 : 0);
    };

    for (int k = 0; k < config.k_target; ++k) {
        for (std::size_t n = 0; n < config.labeled_per_class; ++n) emit(k, Role::Labeled);
    }

    // Unlabeled classes are dealt round-robin, then shuffled so that unknown
    // instances do not cluster at one end of the universe.
    std::vector<int> unlabeled_classes;
    const std::size_t n_target = config.unlabeled_target_count();
    const std::size_t n_unknown = config.unknown_count();
    for (std::size_t n = 0; n < n_target; ++n) unlabeled_classes.push_back(static_cast<int>(n % config.k_target));
    for (std::size_t n = 0; n < n_unknown; ++n) {
        unlabeled_classes.push_back(config.k_target + static_cast<int>(n % static_cast<std::size_t>(config.k_unknown)));
    }
    std::shuffle(unlabeled_classes.begin(), unlabeled_classes.end(), rng);
    for (int cls : unlabeled_classes) emit(cls, Role::Unlabeled);

    for (int k = 0; k < config.k_target; ++k) {
        for (std::size_t n = 0; n < config.n_test_per_class; ++n) emit(k, Role::Test);
    }
    return DatasetState(std::move(embeddings), std::move(roles), std::move(labels), config.k_target, std::move(truth));
}

}  // namespace wad
