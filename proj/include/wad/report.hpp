#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "wad/curriculum.hpp"
#include "wad/diagnostics.hpp"

namespace wad {

namespace detail {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json to_json(const EpochRecord& e) {
    return {{"epoch", e.epoch},
            {"loss", e.loss},
            {"accuracy", detail::optional_json(e.accuracy)},
            {"labeled_size", e.labeled_size},
            {"unlabeled_size", e.unlabeled_size},
            {"promoted", e.promoted},
            {"alpha", detail::optional_json(e.alpha)},
            {"mean_weight_target", detail::optional_json(e.mean_weight_target)},
            {"mean_weight_unknown", detail::optional_json(e.mean_weight_unknown)}};
}

inline nlohmann::json to_json(const PromotionRecord& p) {
    return {{"epoch", p.epoch},
            {"update_index", p.update_index},
            {"alpha", p.alpha},
            {"instances", p.instances},
            {"labels", p.labels},
            {"reliabilities", p.reliabilities}};
}

/// One compact JSON object per epoch, newline-terminated.
inline std::string history_lines(const RunHistory& h) {
    std::string out;
    for (const auto& e : h.epochs) out += to_json(e).dump() + "\n";
    return out;
}

inline nlohmann::json to_json(const GroupStats& g) {
    return {{"count", g.count}, {"empty", g.empty}, {"mean", g.mean}, {"median", g.median}, {"histogram", g.histogram}};
}

inline nlohmann::json to_json(const DiagnosticsReport& r) {
    const auto& d = r.decomposition;
    const auto& b = r.bound_inputs;
    return {
        {"decomposition",
         {{"pseudo_labeling_error", d.pseudo_labeling_error},
          {"invasion_error", d.invasion_error},
          {"ssl_error_bound", d.ssl_error_bound},
          {"training_error", d.training_error},
          {"test_risk", d.test_risk},
          {"weighted_invasion_error", d.weighted_invasion_error},
          {"target_size", d.target_size},
          {"unknown_size", d.unknown_size},
          {"training_size", d.training_size}}},
        {"bound_inputs",
         {{"xi", b.xi},
          {"lambda_l", b.lambda_l},
          {"lambda_mu", b.lambda_mu},
          {"H", b.loss_bound},
          {"K", b.num_classes},
          {"w_bar", b.mean_weight},
          {"U_size", b.unknown_size},
          {"That_size", b.training_size},
          {"T_size", b.target_size},
          {"gamma", b.gamma}}},
        {"bound", r.bound},
        {"ssl_error_within_bound", d.ssl_error_bound <= r.bound},
        {"xi", {{"min", r.xi.min}, {"mean", r.xi.mean}}},
        {"weights",
         {{"bin_edges", r.weights.bin_edges}, {"target", to_json(r.weights.target)}, {"unknown", to_json(r.weights.unknown)}}},
        {"test_accuracy", detail::optional_json(r.test_accuracy)},
    };
}

struct AccuracySummary {
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation; 0 for a single seed
};

inline AccuracySummary summarize(const std::vector<double>& values) {
    AccuracySummary s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

}  // namespace wad
