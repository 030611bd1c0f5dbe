#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wad/annotation.hpp"
#include "wad/dataset.hpp"
#include "wad/error.hpp"
#include "wad/student.hpp"

namespace wad {

/// Loss bound implied by the probability floor, -ln(1e-12).
inline const double kDefaultLossBound = -std::log(kProbabilityFloor);

struct ErrorDecomposition {
    double pseudo_labeling_error = 0.0;
    double invasion_error = 0.0;
    double ssl_error_bound = 0.0;  ///< pseudo_labeling_error + invasion_error
    double training_error = 0.0;
    double test_risk = 0.0;
    /// Invasion term with each unknown instance's loss scaled by its weight.
    double weighted_invasion_error = 0.0;
    std::size_t target_size = 0;      ///< |T|
    std::size_t unknown_size = 0;     ///< |U|
    std::size_t training_size = 0;    ///< |T-hat|
};

/// Per-instance losses feeding the decomposition. `target_true` holds losses
/// of target instances under their true labels; `target_assigned` and
/// `unknown_assigned` hold losses under the labels the student trained on.
struct DecompositionLosses {
    std::vector<double> target_true;
    std::vector<double> target_assigned;
    std::vector<double> unknown_assigned;
    std::vector<double> unknown_weights;
    std::vector<double> test;
};

inline ErrorDecomposition decompose_losses(DecompositionLosses losses, double loss_bound) {
    if (!(loss_bound > 0.0)) throw Error(ErrorCode::InvalidInputs, "loss bound must be positive");
    auto clamp_all = [&](std::vector<double>& v) {
        for (double& x : v) x = std::min(x, loss_bound);
    };
    clamp_all(losses.target_true);
    clamp_all(losses.target_assigned);
    clamp_all(losses.unknown_assigned);
    clamp_all(losses.test);
    auto sum = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    };

    ErrorDecomposition out;
    out.target_size = losses.target_true.size();
    out.unknown_size = losses.unknown_assigned.size();
    out.training_size = losses.target_assigned.size() + losses.unknown_assigned.size();
    if (out.training_size == 0) throw Error(ErrorCode::InvalidInputs, "no training instances");
    const double that = static_cast<double>(out.training_size);
    const double mean_t = out.target_size ? sum(losses.target_true) / static_cast<double>(out.target_size) : 0.0;

    out.pseudo_labeling_error = std::abs(mean_t - sum(losses.target_assigned) / that);
    out.invasion_error = sum(losses.unknown_assigned) / that;
    out.ssl_error_bound = out.pseudo_labeling_error + out.invasion_error;
    out.training_error = (sum(losses.target_assigned) + sum(losses.unknown_assigned)) / that;
    out.test_risk = losses.test.empty() ? 0.0 : sum(losses.test) / static_cast<double>(losses.test.size());

    double weighted = 0.0;
    for (std::size_t k = 0; k < losses.unknown_assigned.size(); ++k) {
        const double w = k < losses.unknown_weights.size() ? losses.unknown_weights[k] : 1.0;
        weighted += w * losses.unknown_assigned[k];
    }
    out.weighted_invasion_error = weighted / that;
    return out;
}

/// Measures both SSL-error terms of a trained student against the hidden
/// truth. Labeled rows count with their visible label, unlabeled rows with
/// their current pseudo label; unknown-category rows form U.
inline ErrorDecomposition decompose_ssl_error(const StudentParams& model, const DatasetState& state,
                                              std::span<const PseudoAnnotation> annotations,
                                              double loss_bound = kDefaultLossBound) {
    const auto& truth = state.hidden_truth();
    DecompositionLosses losses;
    auto loss_of = [&](std::size_t i, ClassId y) { return cross_entropy(forward(model, state.embedding(i).values()), y); };

    for (std::size_t i : state.labeled()) {
        const bool target = truth.is_target[i] == 1;
        const double assigned = loss_of(i, state.label(i));
        if (target) {
            losses.target_true.push_back(loss_of(i, truth.label[i]));
            losses.target_assigned.push_back(assigned);
        } else {
            losses.unknown_assigned.push_back(assigned);
            losses.unknown_weights.push_back(1.0);
        }
    }
    for (const auto& a : annotations) {
        const std::size_t i = a.instance;
        if (state.role(i) != Role::Unlabeled) {
            throw Error(ErrorCode::StaleSelection, "annotation for instance " + std::to_string(i) + " is stale");
        }
        const double assigned = loss_of(i, a.pmi.pseudo_label);
        if (truth.is_target[i] == 1) {
            losses.target_true.push_back(loss_of(i, truth.label[i]));
            losses.target_assigned.push_back(assigned);
        } else {
            losses.unknown_assigned.push_back(assigned);
            losses.unknown_weights.push_back(a.weight);
        }
    }
    for (std::size_t i : state.test()) losses.test.push_back(loss_of(i, state.label(i)));
    return decompose_losses(std::move(losses), loss_bound);
}

struct BoundInputs {
    double xi = 1.0;
    double lambda_l = 1.0;
    double lambda_mu = 1.0;
    double loss_bound = kDefaultLossBound;  ///< H
    int num_classes = 2;                    ///< K
    double mean_weight = 0.0;               ///< w-bar
    std::size_t unknown_size = 0;           ///< |U|
    std::size_t training_size = 1;          ///< |T-hat|
    std::size_t target_size = 1;            ///< |T|
    double gamma = 0.05;

    void validate() const {
        if (!(xi > 0.0 && xi <= 1.0)) throw Error(ErrorCode::InvalidInputs, "xi must lie in (0, 1]");
        if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidInputs, "gamma must lie in (0, 1)");
        if (!(lambda_l > 0.0) || !(lambda_mu > 0.0)) throw Error(ErrorCode::InvalidInputs, "Lipschitz constants must be positive");
        if (!(loss_bound > 0.0)) throw Error(ErrorCode::InvalidInputs, "H must be positive");
        if (num_classes < 1) throw Error(ErrorCode::InvalidInputs, "K must be >= 1");
        if (!(mean_weight >= 0.0)) throw Error(ErrorCode::InvalidInputs, "mean weight must be >= 0");
        if (training_size < 1 || target_size < 1) throw Error(ErrorCode::InvalidInputs, "set sizes must be >= 1");
        if (unknown_size > training_size) throw Error(ErrorCode::InvalidInputs, "|U| exceeds |T-hat|");
    }
};

/// sqrt(4 - 4 xi) (lambda_l + lambda_mu H K) + w |U| H / |T-hat|
///   + sqrt(2 H^2 ln(1/gamma) / |T|)
inline double generalization_bound(const BoundInputs& b) {
    b.validate();
    const double h = b.loss_bound;
    const double confidence_term =
        std::sqrt(4.0 - 4.0 * b.xi) * (b.lambda_l + b.lambda_mu * h * static_cast<double>(b.num_classes));
    const double invasion_term =
        b.mean_weight * static_cast<double>(b.unknown_size) * h / static_cast<double>(b.training_size);
    const double sampling_term =
        std::sqrt(2.0 * h * h * std::log(1.0 / b.gamma) / static_cast<double>(b.target_size));
    return confidence_term + invasion_term + sampling_term;
}

struct XiEstimate {
    double min = 1.0;   ///< used as xi
    double mean = 1.0;
};

inline constexpr double kXiFloor = 1e-12;

inline XiEstimate empirical_xi(std::span<const PmiAssignment> assignments) {
    if (assignments.empty()) throw Error(ErrorCode::EmptyAnnotations, "no assignments to estimate xi from");
    double lo = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const auto& a : assignments) {
        lo = std::min(lo, a.p_tilde);
        total += a.p_tilde;
    }
    return {std::clamp(lo, kXiFloor, 1.0), total / static_cast<double>(assignments.size())};
}

inline XiEstimate empirical_xi(std::span<const PseudoAnnotation> annotations) {
    std::vector<PmiAssignment> pmis;
    pmis.reserve(annotations.size());
    for (const auto& a : annotations) pmis.push_back(a.pmi);
    return empirical_xi(std::span<const PmiAssignment>(pmis));
}

inline constexpr std::size_t kHistogramBins = 20;

struct GroupStats {
    std::size_t count = 0;
    bool empty = true;
    double mean = 0.0;
    double median = 0.0;
    std::vector<std::size_t> histogram;
};

struct WeightGroupStats {
    GroupStats target;
    GroupStats unknown;
    std::vector<double> bin_edges;  ///< kHistogramBins + 1 shared edges
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Bins are equal-width on [0, max weight] (or [0, 1] when all weights are
/// zero); the last bin is closed on the right.
inline WeightGroupStats weight_group_stats(std::span<const double> weights, std::span<const std::int8_t> is_target) {
    if (weights.size() != is_target.size()) {
        throw Error(ErrorCode::InvalidInputs, "weights and flags differ in length");
    }
    std::vector<double> groups[2];
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (is_target[k] < 0) throw Error(ErrorCode::MissingGroundTruth, "instance " + std::to_string(k) + " has no flag");
        groups[is_target[k] == 1 ? 0 : 1].push_back(weights[k]);
    }
    double hi = 0.0;
    for (double w : weights) hi = std::max(hi, w);
    if (hi <= 0.0) hi = 1.0;

    WeightGroupStats out;
    for (std::size_t b = 0; b <= kHistogramBins; ++b) {
        out.bin_edges.push_back(hi * static_cast<double>(b) / static_cast<double>(kHistogramBins));
    }
    auto summarize = [&](const std::vector<double>& g) {
        GroupStats s;
        s.count = g.size();
        s.empty = g.empty();
        s.histogram.assign(kHistogramBins, 0);
        if (g.empty()) return s;
        double total = 0.0;
        for (double w : g) {
            total += w;
            auto bin = static_cast<std::size_t>(std::floor(std::max(w, 0.0) / hi * static_cast<double>(kHistogramBins)));
            ++s.histogram[std::min(bin, kHistogramBins - 1)];
        }
        s.mean = total / static_cast<double>(g.size());
        s.median = detail::median_of(g);
        return s;
    };
    out.target = summarize(groups[0]);
    out.unknown = summarize(groups[1]);
    return out;
}

inline WeightGroupStats weight_group_stats(std::span<const PseudoAnnotation> annotations, const DatasetState& state) {
    const auto& truth = state.hidden_truth();
    std::vector<double> weights;
    std::vector<std::int8_t> flags;
    for (const auto& a : annotations) {
        weights.push_back(a.weight);
        flags.push_back(truth.is_target[a.instance]);
    }
    return weight_group_stats(weights, flags);
}

struct DiagnosticsReport {
    ErrorDecomposition decomposition;
    BoundInputs bound_inputs;
    double bound = 0.0;
    XiEstimate xi;
    WeightGroupStats weights;
    std::optional<double> test_accuracy;
};

struct DiagnosticsConfig {
    double lambda_l = 1.0;
    double lambda_mu = 1.0;
    double loss_bound = kDefaultLossBound;
    double gamma = 0.05;
    WeightFunctionSpec weights;
};

/// Everything the diag command reports for one trained student and the
/// partition it ended with.
inline DiagnosticsReport diagnose(const StudentParams& model, const DatasetState& state,
                                  const DiagnosticsConfig& config = {}) {
    const auto annotations = annotate_unlabeled(state, config.weights);
    DiagnosticsReport r;
    r.decomposition = decompose_ssl_error(model, state, annotations, config.loss_bound);
    if (!annotations.empty()) r.xi = empirical_xi(std::span<const PseudoAnnotation>(annotations));
    r.weights = weight_group_stats(annotations, state);

    double weight_sum = 0.0;
    for (const auto& a : annotations) weight_sum += a.weight;
    auto& b = r.bound_inputs;
    b.xi = r.xi.min;
    b.lambda_l = config.lambda_l;
    b.lambda_mu = config.lambda_mu;
    b.loss_bound = config.loss_bound;
    b.num_classes = state.num_classes();
    b.mean_weight = annotations.empty() ? 0.0 : weight_sum / static_cast<double>(annotations.size());
    b.unknown_size = r.decomposition.unknown_size;
    b.training_size = r.decomposition.training_size;
    b.target_size = std::max<std::size_t>(1, r.decomposition.target_size);
    b.gamma = config.gamma;
    r.bound = generalization_bound(b);
    if (!state.test().empty()) {
        std::vector<LabeledExample> test_set;
        for (std::size_t i : state.test()) {
            test_set.push_back({{state.embedding(i).values().begin(), state.embedding(i).values().end()}, state.label(i)});
        }
        r.test_accuracy = evaluate(model, test_set);
    }
    return r;
}

}  // namespace wad
