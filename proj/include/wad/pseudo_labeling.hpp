#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "wad/error.hpp"
#include "wad/repr_core.hpp"

namespace wad {

using ClassId = int;

/// Labeled anchors in representation space. Every class in [0, num_classes)
/// must be represented so that the competing-class maximum is defined.
class LabeledPool {
public:
    LabeledPool(std::vector<UnitEmbedding> embeddings, std::vector<ClassId> labels, int num_classes)
        : embeddings_(std::move(embeddings)), labels_(std::move(labels)), num_classes_(num_classes) {
        if (embeddings_.empty()) throw Error(ErrorCode::EmptyPool, "labeled pool is empty");
        if (embeddings_.size() != labels_.size()) {
            throw Error(ErrorCode::InvariantViolation, "pool has " + std::to_string(embeddings_.size()) +
                                                           " embeddings but " + std::to_string(labels_.size()) +
                                                           " labels");
        }
        if (num_classes_ < 2) throw Error(ErrorCode::SingleClassPool, "pool needs at least two classes");
        common_dimension(embeddings_);
        std::vector<bool> seen(static_cast<std::size_t>(num_classes_), false);
        for (ClassId y : labels_) {
            if (y < 0 || y >= num_classes_) {
                throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y) + " outside [0, " +
                                                            std::to_string(num_classes_) + ")");
            }
            seen[static_cast<std::size_t>(y)] = true;
        }
        for (int k = 0; k < num_classes_; ++k) {
            if (!seen[static_cast<std::size_t>(k)]) {
                throw Error(ErrorCode::InvariantViolation, "class " + std::to_string(k) + " has no labeled member");
            }
        }
    }

    std::size_t size() const noexcept { return embeddings_.size(); }
    std::size_t dim() const noexcept { return embeddings_.front().dim(); }
    int num_classes() const noexcept { return num_classes_; }
    const std::vector<UnitEmbedding>& embeddings() const noexcept { return embeddings_; }
    const std::vector<ClassId>& labels() const noexcept { return labels_; }

private:
    std::vector<UnitEmbedding> embeddings_;
    std::vector<ClassId> labels_;
    int num_classes_;
};

struct PmiAssignment {
    ClassId pseudo_label = -1;
    double p_tilde = 0.0;  ///< best similarity over the whole pool
    double q_tilde = 0.0;  ///< best similarity over pool members of any other class
    std::size_t argmax_index = 0;
};

inline std::vector<double> similarity_profile(const UnitEmbedding& z, const LabeledPool& pool) {
    std::vector<double> out;
    out.reserve(pool.size());
    for (const auto& anchor : pool.embeddings()) out.push_back(cosine(z, anchor));
    return out;
}

/// Nearest labeled anchor by cosine (lowest pool index on ties) donates its
/// label; q_tilde is the runner-up restricted to the other classes.
inline PmiAssignment assign_pseudo_label(const UnitEmbedding& z, const LabeledPool& pool) {
    if (z.dim() != pool.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(z.dim()) +
                                                      " vs pool dimension " + std::to_string(pool.dim()));
    }
    const auto sims = similarity_profile(z, pool);
    const auto& labels = pool.labels();

    PmiAssignment out;
    out.argmax_index = 0;
    out.p_tilde = sims[0];
    for (std::size_t j = 1; j < sims.size(); ++j) {
        if (sims[j] > out.p_tilde) {
            out.p_tilde = sims[j];
            out.argmax_index = j;
        }
    }
    out.pseudo_label = labels[out.argmax_index];

    out.q_tilde = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sims.size(); ++j) {
        if (labels[j] != out.pseudo_label && sims[j] > out.q_tilde) out.q_tilde = sims[j];
    }
    return out;
}

inline std::vector<PmiAssignment> assign_pseudo_labels(const std::vector<UnitEmbedding>& queries,
                                                       const LabeledPool& pool) {
    std::vector<PmiAssignment> out;
    out.reserve(queries.size());
    for (const auto& z : queries) out.push_back(assign_pseudo_label(z, pool));
    return out;
}

}  // namespace wad
