#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wad/error.hpp"
#include "wad/pseudo_labeling.hpp"
#include "wad/repr_core.hpp"

namespace wad {

enum class Role : std::uint8_t { Labeled, Unlabeled, Test };

inline std::string_view to_string(Role role) {
    switch (role) {
        case Role::Labeled: return "labeled";
        case Role::Unlabeled: return "unlabeled";
        case Role::Test: return "test";
    }
    return "?";
}

/// Evaluation-only annotations: true class id (ids >= num_classes are unknown
/// categories) and target flag. -1 marks "unavailable" in both columns.
struct HiddenTruth {
    std::vector<ClassId> label;
    std::vector<std::int8_t> is_target;
};

/// The evolving labeled/unlabeled/test partition over a fixed universe of
/// embeddings. Training code sees roles, visible labels and embeddings; the
/// hidden truth is reachable only through `hidden_truth()`.
class DatasetState {
public:
    DatasetState() = default;

    DatasetState(std::vector<UnitEmbedding> embeddings, std::vector<Role> roles, std::vector<ClassId> labels,
                 int num_classes, std::optional<HiddenTruth> truth = std::nullopt)
        : embeddings_(std::move(embeddings)),
          roles_(std::move(roles)),
          labels_(std::move(labels)),
          promoted_(embeddings_.size(), false),
          num_classes_(num_classes),
          truth_(std::move(truth)) {
        const std::size_t n = embeddings_.size();
        if (roles_.size() != n || labels_.size() != n) {
            throw Error(ErrorCode::InvariantViolation, "embeddings, roles and labels differ in length");
        }
        if (truth_ && (truth_->label.size() != n || truth_->is_target.size() != n)) {
            throw Error(ErrorCode::InvariantViolation, "hidden truth length differs from universe size");
        }
        if (num_classes_ < 2) throw Error(ErrorCode::InvalidConfig, "need at least two target classes");
        dim_ = common_dimension(embeddings_);
        for (std::size_t i = 0; i < n; ++i) {
            switch (roles_[i]) {
                case Role::Labeled: labeled_.push_back(i); break;
                case Role::Unlabeled: unlabeled_.push_back(i); break;
                case Role::Test: test_.push_back(i); break;
            }
            if (roles_[i] == Role::Unlabeled) {
                labels_[i] = -1;
            } else if (labels_[i] < 0 || labels_[i] >= num_classes_) {
                throw Error(ErrorCode::LabelOutOfRange, "instance " + std::to_string(i) + " has label " +
                                                            std::to_string(labels_[i]));
            }
        }
        std::vector<bool> seen(static_cast<std::size_t>(num_classes_), false);
        for (std::size_t i : labeled_) seen[static_cast<std::size_t>(labels_[i])] = true;
        if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
            throw Error(ErrorCode::InvariantViolation, "labeled pool does not cover every class");
        }
    }

    std::size_t size() const noexcept { return embeddings_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    int num_classes() const noexcept { return num_classes_; }

    const UnitEmbedding& embedding(std::size_t i) const { return embeddings_.at(i); }
    const std::vector<UnitEmbedding>& embeddings() const noexcept { return embeddings_; }
    Role role(std::size_t i) const { return roles_.at(i); }
    /// Visible label: the annotation for labeled/test rows, the pseudo label for
    /// promoted rows, -1 for unlabeled rows.
    ClassId label(std::size_t i) const { return labels_.at(i); }
    bool promoted(std::size_t i) const { return promoted_.at(i); }

    const std::vector<std::size_t>& labeled() const noexcept { return labeled_; }
    const std::vector<std::size_t>& unlabeled() const noexcept { return unlabeled_; }
    const std::vector<std::size_t>& test() const noexcept { return test_; }

    LabeledPool labeled_pool() const {
        std::vector<UnitEmbedding> anchors;
        std::vector<ClassId> labels;
        anchors.reserve(labeled_.size());
        labels.reserve(labeled_.size());
        for (std::size_t i : labeled_) {
            anchors.push_back(embeddings_[i]);
            labels.push_back(labels_[i]);
        }
        return LabeledPool(std::move(anchors), std::move(labels), num_classes_);
    }

    /// Moves `instances` from the unlabeled to the labeled partition with the
    /// given labels. Throws StaleSelection if any instance is not unlabeled.
    void promote(std::span<const std::size_t> instances, std::span<const ClassId> new_labels) {
        if (instances.size() != new_labels.size()) {
            throw Error(ErrorCode::InvariantViolation, "promotion labels do not match selection");
        }
        for (std::size_t k = 0; k < instances.size(); ++k) {
            const std::size_t i = instances[k];
            if (i >= size() || roles_[i] != Role::Unlabeled) {
                throw Error(ErrorCode::StaleSelection, "instance " + std::to_string(i) + " is not unlabeled");
            }
            if (new_labels[k] < 0 || new_labels[k] >= num_classes_) {
                throw Error(ErrorCode::LabelOutOfRange, "promotion label " + std::to_string(new_labels[k]));
            }
            if (std::find(instances.begin(), instances.begin() + static_cast<std::ptrdiff_t>(k), i) !=
                instances.begin() + static_cast<std::ptrdiff_t>(k)) {
                throw Error(ErrorCode::StaleSelection, "instance " + std::to_string(i) + " selected twice");
            }
        }
        for (std::size_t k = 0; k < instances.size(); ++k) {
            const std::size_t i = instances[k];
            roles_[i] = Role::Labeled;
            labels_[i] = new_labels[k];
            promoted_[i] = true;
            labeled_.push_back(i);
        }
        std::erase_if(unlabeled_, [&](std::size_t i) { return roles_[i] != Role::Unlabeled; });
    }

    /// True when every training instance carries a ground-truth target flag,
    /// and every target instance its true class.
    bool has_ground_truth() const noexcept {
        if (!truth_) return false;
        for (std::size_t i = 0; i < size(); ++i) {
            if (roles_[i] == Role::Test) continue;
            if (truth_->is_target[i] < 0) return false;
            if (truth_->is_target[i] == 1 && truth_->label[i] < 0) return false;
        }
        return true;
    }

    const HiddenTruth& hidden_truth() const {
        if (!has_ground_truth()) throw Error(ErrorCode::MissingGroundTruth, "dataset carries no ground truth");
        return *truth_;
    }

    /// Raw truth columns, possibly partial; used only for serialization.
    const std::optional<HiddenTruth>& truth_columns() const noexcept { return truth_; }

private:
    std::vector<UnitEmbedding> embeddings_;
    std::vector<Role> roles_;
    std::vector<ClassId> labels_;
    std::vector<bool> promoted_;
    std::vector<std::size_t> labeled_;
    std::vector<std::size_t> unlabeled_;
    std::vector<std::size_t> test_;
    std::size_t dim_ = 0;
    int num_classes_ = 0;
    std::optional<HiddenTruth> truth_;
};

}  // namespace wad
