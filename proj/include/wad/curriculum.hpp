#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wad/annotation.hpp"
#include "wad/dataset.hpp"
#include "wad/error.hpp"
#include "wad/student.hpp"
#include "wad/weighting.hpp"

namespace wad {

struct CurriculumConfig {
    double alpha0 = 0.1;
    std::size_t total_updates = 5;
    double decay_power = 1.0;
    /// Epochs at which knowledge-update happens; empty means evenly spaced.
    std::vector<std::size_t> update_steps;
    std::size_t refresh_period = 1;

    void validate(std::size_t epochs) const {
        if (!(alpha0 >= 0.0 && alpha0 <= 1.0)) throw Error(ErrorCode::InvalidConfig, "curriculum.alpha0 must lie in [0, 1]");
        if (!(decay_power >= 0.0)) throw Error(ErrorCode::InvalidConfig, "curriculum.decay_power must be >= 0");
        if (refresh_period < 1) throw Error(ErrorCode::InvalidConfig, "curriculum.refresh_period must be >= 1");
        if (update_steps.empty() && epochs < total_updates) {
            throw Error(ErrorCode::InvalidConfig, "curriculum.total_updates: the default schedule needs train.epochs >= " +
                                                      std::to_string(total_updates) +
                                                      "; lower total_updates or set curriculum.update_steps");
        }
        const auto steps = resolved_update_steps(epochs);
        if (steps.size() != total_updates) {
            throw Error(ErrorCode::InvalidConfig, "curriculum.update_steps must contain total_updates entries");
        }
        for (std::size_t k = 0; k < steps.size(); ++k) {
            if (steps[k] >= epochs || (k > 0 && steps[k] <= steps[k - 1])) {
                throw Error(ErrorCode::InvalidConfig,
                            "curriculum.update_steps must be strictly increasing within [0, epochs)");
            }
        }
    }

    /// floor(k * epochs / (S + 1)) for k = 1..S unless set explicitly.
    std::vector<std::size_t> resolved_update_steps(std::size_t epochs) const {
        if (!update_steps.empty()) return update_steps;
        std::vector<std::size_t> out;
        for (std::size_t k = 1; k <= total_updates; ++k) out.push_back(k * epochs / (total_updates + 1));
        return out;
    }
};

inline double reliability(const StudentParams& params, std::span<const double> x, ClassId pseudo_label) {
    return cross_entropy(forward(params, x), pseudo_label);
}

/// alpha0 * (1 - s/S)^p, reaching exactly zero at s = S.
inline double decay_alpha(double alpha0, std::size_t update_index, std::size_t total, double power) {
    if (update_index > total) {
        throw Error(ErrorCode::InvalidIndex,
                    "update index " + std::to_string(update_index) + " exceeds " + std::to_string(total));
    }
    if (update_index == total) return 0.0;
    // alpha0 / S^p * (S - s)^p: for p = 1 this lands on the decimal grid
    // (0.08, 0.06, ...) exactly, unlike alpha0 * (1 - s/S).
    const double scale = alpha0 / std::pow(static_cast<double>(total), power);
    return scale * std::pow(static_cast<double>(total - update_index), power);
}

/// The floor(alpha * n) most reliable (lowest c) instances; ties go to the
/// lower position. Returns universe indices.
inline std::vector<std::size_t> select_reliable(std::span<const PseudoAnnotation> annotations, double alpha) {
    const auto n = annotations.size();
    const auto count = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return annotations[a].reliability < annotations[b].reliability;
    });
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < std::min(count, n); ++k) out.push_back(annotations[order[k]].instance);
    return out;
}

/// Returns a copy of `state` with `selection` moved into the labeled pool,
/// each carrying its pseudo label.
inline DatasetState promote(DatasetState state, std::span<const std::size_t> selection,
                            std::span<const PseudoAnnotation> annotations) {
    std::vector<ClassId> labels;
    labels.reserve(selection.size());
    for (std::size_t i : selection) {
        auto it = std::find_if(annotations.begin(), annotations.end(),
                               [&](const PseudoAnnotation& a) { return a.instance == i; });
        if (it == annotations.end()) {
            throw Error(ErrorCode::StaleSelection, "instance " + std::to_string(i) + " has no annotation");
        }
        labels.push_back(it->pmi.pseudo_label);
    }
    state.promote(selection, labels);
    return state;
}

enum class RunMode { Wad, Baseline, PseudoOnly, PseudoAndFixedWeight };

inline RunMode parse_run_mode(std::string_view tag) {
    if (tag == "wad") return RunMode::Wad;
    if (tag == "baseline") return RunMode::Baseline;
    if (tag == "pseudo_only") return RunMode::PseudoOnly;
    if (tag == "pseudo_and_fixed_weight") return RunMode::PseudoAndFixedWeight;
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + std::string(tag) + "'");
}

inline std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Wad: return "wad";
        case RunMode::Baseline: return "baseline";
        case RunMode::PseudoOnly: return "pseudo_only";
        case RunMode::PseudoAndFixedWeight: return "pseudo_and_fixed_weight";
    }
    return "?";
}

/// How the unlabeled term is weighted and whether knowledge-update runs.
struct RunOptions {
    enum class Weighting { Distilled, Constant };
    Weighting weighting = Weighting::Distilled;
    double constant_weight = 1.0;
    bool promotions = true;

    static RunOptions for_mode(RunMode mode, double fixed_weight = 1.0) {
        switch (mode) {
            case RunMode::Wad: return {Weighting::Distilled, 1.0, true};
            case RunMode::Baseline: return {Weighting::Constant, 0.0, false};
            case RunMode::PseudoOnly: return {Weighting::Constant, 1.0, false};
            case RunMode::PseudoAndFixedWeight: return {Weighting::Constant, fixed_weight, false};
        }
        return {};
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;  ///< mean training loss over the epoch's steps
    std::optional<double> accuracy;
    std::size_t labeled_size = 0;
    std::size_t unlabeled_size = 0;
    std::size_t promoted = 0;
    std::optional<double> alpha;  ///< set on knowledge-update epochs
    std::optional<double> mean_weight_target;
    std::optional<double> mean_weight_unknown;
};

struct PromotionRecord {
    std::size_t epoch = 0;
    std::size_t update_index = 0;
    double alpha = 0.0;
    std::vector<std::size_t> instances;
    std::vector<ClassId> labels;
    std::vector<double> reliabilities;
};

struct RunHistory {
    std::vector<EpochRecord> epochs;
    std::vector<PromotionRecord> promotions;
    std::vector<double> step_losses;
};

struct RunResult {
    StudentParams params;
    RunHistory history;
    DatasetState final_state;
};

namespace detail {

/// Cycles through a shuffled copy of the labeled pool, reshuffling on wrap.
class LabeledSampler {
public:
    std::vector<std::size_t> draw(const std::vector<std::size_t>& labeled, std::size_t count, std::mt19937_64& rng) {
        if (labeled.size() != order_.size()) {
            order_ = labeled;
            std::shuffle(order_.begin(), order_.end(), rng);
            cursor_ = 0;
        }
        std::vector<std::size_t> out;
        out.reserve(count);
        while (out.size() < count) {
            if (cursor_ == order_.size()) {
                std::shuffle(order_.begin(), order_.end(), rng);
                cursor_ = 0;
            }
            out.push_back(order_[cursor_++]);
        }
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

inline std::vector<double> to_vector(const UnitEmbedding& z) { return {z.values().begin(), z.values().end()}; }

inline std::vector<LabeledExample> labeled_examples(const DatasetState& state, std::span<const std::size_t> ids) {
    std::vector<LabeledExample> out;
    out.reserve(ids.size());
    for (std::size_t i : ids) out.push_back({to_vector(state.embedding(i)), state.label(i)});
    return out;
}

inline std::optional<double> test_accuracy(const StudentParams& params, const DatasetState& state) {
    if (state.test().empty()) return std::nullopt;
    return evaluate(params, labeled_examples(state, state.test()));
}

inline std::size_t steps_for(std::size_t n, std::size_t batch) { return std::max<std::size_t>(1, (n + batch - 1) / batch); }

inline Architecture architecture_for(const DatasetState& data, const TrainConfig& train) {
    return Architecture{data.dim(), train.hidden, static_cast<std::size_t>(data.num_classes()), train.activation};
}

}  // namespace detail

/// Supervised training on the labeled pool only, with a fixed number of
/// optimizer steps per epoch. Reference path for the reduction-to-baseline
/// property of `run_wad`.
inline RunResult train_supervised(const DatasetState& data, const TrainConfig& train, std::size_t steps_per_epoch) {
    train.validate();
    RunResult result{StudentParams::initialized(detail::architecture_for(data, train), train.seed), {}, data};
    TrainingStreams streams(train.seed);
    detail::LabeledSampler sampler;
    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        double total = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            const auto batch =
                detail::labeled_examples(data, sampler.draw(data.labeled(), train.batch_size, streams.labeled));
            const double loss = train_step(result.params, batch, {}, train, streams);
            result.history.step_losses.push_back(loss);
            total += loss;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = total / static_cast<double>(steps_per_epoch);
        rec.accuracy = detail::test_accuracy(result.params, data);
        rec.labeled_size = data.labeled().size();
        rec.unlabeled_size = data.unlabeled().size();
        result.history.epochs.push_back(rec);
    }
    return result;
}

/// The full distillation loop: refresh pseudo labels and weights from the
/// current labeled pool, train one epoch on the weight-aware loss, and at
/// each update epoch promote the most reliable pseudo-labeled instances.
inline RunResult run_wad(const DatasetState& data, const CurriculumConfig& curriculum, const TrainConfig& train,
                         const WeightFunctionSpec& weights, const RunOptions& options = {}) {
    train.validate();
    curriculum.validate(train.epochs);
    const auto update_steps = curriculum.resolved_update_steps(train.epochs);
    const bool track_groups = data.has_ground_truth();

    RunResult result{StudentParams::initialized(detail::architecture_for(data, train), train.seed), {}, data};
    DatasetState& state = result.final_state;
    TrainingStreams streams(train.seed);
    detail::LabeledSampler sampler;

    std::vector<PseudoAnnotation> annotations;
    bool stale = true;
    std::size_t update_index = 0;

    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        if (stale || epoch % curriculum.refresh_period == 0) {
            annotations = annotate_unlabeled(state, weights);
            stale = false;
        }

        std::vector<WeightedExample> unlabeled_pool;
        unlabeled_pool.reserve(annotations.size());
        for (const auto& a : annotations) {
            const double w = options.weighting == RunOptions::Weighting::Distilled ? a.weight : options.constant_weight;
            unlabeled_pool.push_back({detail::to_vector(state.embedding(a.instance)), a.pmi.pseudo_label, w});
        }
        std::vector<std::size_t> order(unlabeled_pool.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), streams.unlabeled);

        const std::size_t steps = detail::steps_for(
            unlabeled_pool.empty() ? state.labeled().size() : unlabeled_pool.size(), train.batch_size);
        double total = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const auto batch =
                detail::labeled_examples(state, sampler.draw(state.labeled(), train.batch_size, streams.labeled));
            std::vector<WeightedExample> ubatch;
            for (std::size_t k = s * train.batch_size; k < std::min(order.size(), (s + 1) * train.batch_size); ++k) {
                ubatch.push_back(unlabeled_pool[order[k]]);
            }
            const double loss = train_step(result.params, batch, ubatch, train, streams);
            result.history.step_losses.push_back(loss);
            total += loss;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = total / static_cast<double>(steps);
        rec.accuracy = detail::test_accuracy(result.params, state);
        if (track_groups) {
            const auto& truth = state.hidden_truth();
            double sum[2] = {0.0, 0.0};
            std::size_t count[2] = {0, 0};
            for (const auto& a : annotations) {
                const int g = truth.is_target[a.instance] == 1 ? 0 : 1;
                sum[g] += a.weight;
                ++count[g];
            }
            if (count[0]) rec.mean_weight_target = sum[0] / static_cast<double>(count[0]);
            if (count[1]) rec.mean_weight_unknown = sum[1] / static_cast<double>(count[1]);
        }

        if (update_index < update_steps.size() && epoch == update_steps[update_index]) {
            ++update_index;
            const double alpha =
                decay_alpha(curriculum.alpha0, update_index, curriculum.total_updates, curriculum.decay_power);
            rec.alpha = alpha;
            if (options.promotions && !annotations.empty()) {
                for (auto& a : annotations) {
                    a.reliability = reliability(result.params, state.embedding(a.instance).values(), a.pmi.pseudo_label);
                }
                const auto selection = select_reliable(annotations, alpha);
                if (!selection.empty()) {
                    PromotionRecord promo;
                    promo.epoch = epoch;
                    promo.update_index = update_index;
                    promo.alpha = alpha;
                    for (std::size_t i : selection) {
                        const auto& a = *std::find_if(annotations.begin(), annotations.end(),
                                                      [&](const PseudoAnnotation& x) { return x.instance == i; });
                        promo.instances.push_back(i);
                        promo.labels.push_back(a.pmi.pseudo_label);
                        promo.reliabilities.push_back(a.reliability);
                    }
                    state = promote(std::move(state), selection, annotations);
                    rec.promoted = selection.size();
                    result.history.promotions.push_back(std::move(promo));
                    stale = true;
                }
            }
        }
        rec.labeled_size = state.labeled().size();
        rec.unlabeled_size = state.unlabeled().size();
        if (state.labeled().size() + state.unlabeled().size() + state.test().size() != state.size()) {
            throw Error(ErrorCode::InvariantViolation, "partition no longer covers the universe");
        }
        result.history.epochs.push_back(rec);
    }
    return result;
}

}  // namespace wad
