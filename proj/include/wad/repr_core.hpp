#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wad/error.hpp"

namespace wad {

inline constexpr double kZeroNormThreshold = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-6;

inline double euclidean_norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

/// A point in the teacher's representation space. Always unit length; the
/// only ways to build one are `normalize` and the checked `from_unit`.
class UnitEmbedding {
public:
    UnitEmbedding() = default;

    /// Wraps values that are already unit norm. Throws NonUnitEmbedding when
    /// the norm deviates from 1 by more than `tolerance`.
    static UnitEmbedding from_unit(std::vector<double> values, double tolerance = kUnitNormTolerance) {
        if (values.empty()) throw Error(ErrorCode::DimensionMismatch, "embedding dimension must be >= 1");
        const double norm = euclidean_norm(values);
        if (std::abs(norm - 1.0) > tolerance) {
            throw Error(ErrorCode::NonUnitEmbedding, "norm " + std::to_string(norm) + " is not 1");
        }
        return UnitEmbedding(std::move(values));
    }

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const UnitEmbedding&, const UnitEmbedding&) = default;

private:
    explicit UnitEmbedding(std::vector<double> values) : values_(std::move(values)) {}
    friend UnitEmbedding normalize(std::span<const double> v);

    std::vector<double> values_;
};

inline UnitEmbedding normalize(std::span<const double> v) {
    if (v.empty()) throw Error(ErrorCode::DimensionMismatch, "embedding dimension must be >= 1");
    const double norm = euclidean_norm(v);
    if (!(norm >= kZeroNormThreshold)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return UnitEmbedding(std::move(out));
}

inline UnitEmbedding normalize(std::initializer_list<double> v) {
    return normalize(std::span<const double>(v.begin(), v.size()));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

/// Inner product of two unit vectors, clamped to [-1, 1].
inline double cosine(const UnitEmbedding& a, const UnitEmbedding& b) {
    return std::clamp(dot(a.values(), b.values()), -1.0, 1.0);
}

/// Throws DimensionMismatch unless every embedding shares one dimension.
inline std::size_t common_dimension(std::span<const UnitEmbedding> embeddings) {
    if (embeddings.empty()) return 0;
    const std::size_t d = embeddings.front().dim();
    for (std::size_t i = 1; i < embeddings.size(); ++i) {
        if (embeddings[i].dim() != d) {
            throw Error(ErrorCode::DimensionMismatch, "embedding " + std::to_string(i) + " has dimension " +
                                                          std::to_string(embeddings[i].dim()) + ", expected " +
                                                          std::to_string(d));
        }
    }
    return d;
}

}  // namespace wad
