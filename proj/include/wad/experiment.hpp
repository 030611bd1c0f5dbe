#pragma once

// JSON experiment configuration: parsing with field-path validation, data
// loading, and the resolved snapshot written next to every run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "wad/curriculum.hpp"
#include "wad/diagnostics.hpp"
#include "wad/io.hpp"
#include "wad/synth_data.hpp"

namespace wad {

struct DataSource {
    std::optional<ScenarioConfig> synthetic;
    bool synthetic_seed_fixed = false;  ///< scenario.synthetic.seed given explicitly
    std::string embeddings_path;
    std::string labels_path;
};

struct ExperimentConfig {
    DataSource scenario;
    TrainConfig train;
    CurriculumConfig curriculum;
    WeightFunctionSpec weights;
    double fixed_weight = 1.0;
    RunMode mode = RunMode::Wad;
    std::vector<RunMode> compare;
    DiagnosticsConfig diagnostics;
    std::string output_dir = "runs";
    std::vector<std::uint64_t> seeds{0};
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_error(const std::string& path, const std::string& why) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + why);
}

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) config_error(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) config_error(path.empty() ? key : path + "." + key, "unknown field");
    }
}

template <typename T>
void read_field(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string where = path.empty() ? key : path + "." + key;
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) config_error(where, "expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) config_error(where, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.get<long long>() < 0) config_error(where, "must be non-negative");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) config_error(where, "expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) config_error(where, "expected a string");
        }
        out = v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        config_error(where, e.what());
    }
}

template <typename Parse>
auto read_tag(const json& obj, const std::string& path, const char* key, Parse parse, decltype(parse("")) fallback) {
    std::string tag;
    read_field(obj, path, key, tag);
    if (tag.empty()) return fallback;
    try {
        return parse(tag);
    } catch (const Error& e) {
        config_error(path + "." + key, "unknown value '" + tag + "'");
    }
}

inline std::string with_field_path(const Error& e, const std::string& prefix) {
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    return prefix + (colon == std::string::npos ? msg : msg.substr(colon + 2));
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const nlohmann::json& doc) {
    using detail::config_error;
    using detail::read_field;
    ExperimentConfig cfg;
    detail::reject_unknown(doc, "", {"scenario", "train", "curriculum", "weights", "mode", "compare", "diagnostics",
                                     "output_dir", "seeds"});

    if (!doc.contains("scenario")) config_error("scenario", "required");
    const auto& sc = doc.at("scenario");
    detail::reject_unknown(sc, "scenario", {"synthetic", "paths"});
    if (sc.contains("synthetic") == sc.contains("paths")) {
        config_error("scenario", "exactly one of scenario.synthetic / scenario.paths is required");
    }
    if (sc.contains("synthetic")) {
        const auto& s = sc.at("synthetic");
        const std::string p = "scenario.synthetic";
        detail::reject_unknown(s, p, {"k_target", "k_unknown", "dim", "labeled_per_class", "n_unlabeled",
                                      "mismatch_proportion", "n_test_per_class", "angular_noise_std",
                                      "min_center_separation", "near_miss_unknowns", "near_miss_angle", "seed"});
        ScenarioConfig c;
        read_field(s, p, "k_target", c.k_target);
        read_field(s, p, "k_unknown", c.k_unknown);
        read_field(s, p, "dim", c.dim);
        read_field(s, p, "labeled_per_class", c.labeled_per_class);
        read_field(s, p, "n_unlabeled", c.n_unlabeled);
        read_field(s, p, "mismatch_proportion", c.mismatch_proportion);
        read_field(s, p, "n_test_per_class", c.n_test_per_class);
        read_field(s, p, "angular_noise_std", c.angular_noise_std);
        read_field(s, p, "min_center_separation", c.min_center_separation);
        read_field(s, p, "near_miss_unknowns", c.near_miss_unknowns);
        read_field(s, p, "near_miss_angle", c.near_miss_angle);
        cfg.scenario.synthetic_seed_fixed = s.contains("seed");
        read_field(s, p, "seed", c.seed);
        try {
            c.validate();
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidConfig, detail::with_field_path(e, ""));
        }
        cfg.scenario.synthetic = c;
    } else {
        const auto& paths = sc.at("paths");
        detail::reject_unknown(paths, "scenario.paths", {"embeddings", "labels"});
        read_field(paths, "scenario.paths", "embeddings", cfg.scenario.embeddings_path);
        read_field(paths, "scenario.paths", "labels", cfg.scenario.labels_path);
        if (cfg.scenario.embeddings_path.empty()) config_error("scenario.paths.embeddings", "required");
        if (cfg.scenario.labels_path.empty()) config_error("scenario.paths.labels", "required");
    }

    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        detail::reject_unknown(t, "train", {"learning_rate", "batch_size", "epochs", "input_noise_std", "hidden",
                                            "activation", "beta1", "beta2", "adam_epsilon"});
        read_field(t, "train", "learning_rate", cfg.train.learning_rate);
        read_field(t, "train", "batch_size", cfg.train.batch_size);
        read_field(t, "train", "epochs", cfg.train.epochs);
        read_field(t, "train", "input_noise_std", cfg.train.input_noise_std);
        read_field(t, "train", "beta1", cfg.train.beta1);
        read_field(t, "train", "beta2", cfg.train.beta2);
        read_field(t, "train", "adam_epsilon", cfg.train.adam_epsilon);
        if (t.contains("hidden")) {
            const auto& h = t.at("hidden");
            if (!h.is_array()) config_error("train.hidden", "expected an array of widths");
            cfg.train.hidden.clear();
            for (std::size_t k = 0; k < h.size(); ++k) {
                if (!h[k].is_number_integer() || h[k].get<long long>() < 1) {
                    config_error("train.hidden[" + std::to_string(k) + "]", "expected a positive integer");
                }
                cfg.train.hidden.push_back(h[k].get<std::size_t>());
            }
        }
        cfg.train.activation = detail::read_tag(t, "train", "activation", parse_activation, cfg.train.activation);
    }
    try {
        cfg.train.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, detail::with_field_path(e, ""));
    }

    if (doc.contains("curriculum")) {
        const auto& c = doc.at("curriculum");
        detail::reject_unknown(c, "curriculum", {"alpha0", "total_updates", "decay_power", "update_steps", "refresh_period"});
        read_field(c, "curriculum", "alpha0", cfg.curriculum.alpha0);
        read_field(c, "curriculum", "total_updates", cfg.curriculum.total_updates);
        read_field(c, "curriculum", "decay_power", cfg.curriculum.decay_power);
        read_field(c, "curriculum", "refresh_period", cfg.curriculum.refresh_period);
        if (c.contains("update_steps")) {
            const auto& g = c.at("update_steps");
            if (!g.is_array()) config_error("curriculum.update_steps", "expected an array of epochs");
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (!g[k].is_number_integer() || g[k].get<long long>() < 0) {
                    config_error("curriculum.update_steps[" + std::to_string(k) + "]", "expected a non-negative integer");
                }
                cfg.curriculum.update_steps.push_back(g[k].get<std::size_t>());
            }
        }
    }
    try {
        cfg.curriculum.validate(cfg.train.epochs);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidConfig, detail::with_field_path(e, ""));
    }

    if (doc.contains("weights")) {
        const auto& w = doc.at("weights");
        detail::reject_unknown(w, "weights", {"g1", "g2", "fixed_weight"});
        cfg.weights.g1 = detail::read_tag(w, "weights", "g1", parse_monotone_fn, cfg.weights.g1);
        cfg.weights.g2 = detail::read_tag(w, "weights", "g2", parse_monotone_fn, cfg.weights.g2);
        read_field(w, "weights", "fixed_weight", cfg.fixed_weight);
        if (!(cfg.fixed_weight >= 0.0)) config_error("weights.fixed_weight", "must be >= 0");
    }
    cfg.diagnostics.weights = cfg.weights;

    cfg.mode = detail::read_tag(doc, "", "mode", parse_run_mode, cfg.mode);
    if (doc.contains("compare")) {
        const auto& c = doc.at("compare");
        if (!c.is_array()) config_error("compare", "expected an array of modes");
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (!c[k].is_string()) config_error("compare[" + std::to_string(k) + "]", "expected a mode name");
            try {
                cfg.compare.push_back(parse_run_mode(c[k].get<std::string>()));
            } catch (const Error&) {
                config_error("compare[" + std::to_string(k) + "]", "unknown mode '" + c[k].get<std::string>() + "'");
            }
        }
    }

    if (doc.contains("diagnostics")) {
        const auto& d = doc.at("diagnostics");
        detail::reject_unknown(d, "diagnostics", {"lambda_l", "lambda_mu", "loss_bound", "gamma"});
        read_field(d, "diagnostics", "lambda_l", cfg.diagnostics.lambda_l);
        read_field(d, "diagnostics", "lambda_mu", cfg.diagnostics.lambda_mu);
        read_field(d, "diagnostics", "loss_bound", cfg.diagnostics.loss_bound);
        read_field(d, "diagnostics", "gamma", cfg.diagnostics.gamma);
        if (!(cfg.diagnostics.lambda_l > 0.0)) config_error("diagnostics.lambda_l", "must be > 0");
        if (!(cfg.diagnostics.lambda_mu > 0.0)) config_error("diagnostics.lambda_mu", "must be > 0");
        if (!(cfg.diagnostics.loss_bound > 0.0)) config_error("diagnostics.loss_bound", "must be > 0");
        if (!(cfg.diagnostics.gamma > 0.0 && cfg.diagnostics.gamma < 1.0)) config_error("diagnostics.gamma", "must lie in (0, 1)");
    }

    read_field(doc, "", "output_dir", cfg.output_dir);
    if (doc.contains("seeds")) {
        const auto& s = doc.at("seeds");
        if (!s.is_array() || s.empty()) config_error("seeds", "expected a non-empty array");
        cfg.seeds.clear();
        std::set<std::uint64_t> unique;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (!s[k].is_number_integer() || s[k].get<long long>() < 0) {
                config_error("seeds[" + std::to_string(k) + "]", "expected a non-negative integer");
            }
            cfg.seeds.push_back(s[k].get<std::uint64_t>());
            if (!unique.insert(cfg.seeds.back()).second) config_error("seeds[" + std::to_string(k) + "]", "duplicate seed");
        }
    }
    return cfg;
}

/// Throws InvalidConfig naming the field whose path does not exist.
inline void check_paths_exist(const ExperimentConfig& cfg) {
    if (cfg.scenario.synthetic) return;
    if (!std::filesystem::exists(cfg.scenario.embeddings_path)) {
        detail::config_error("scenario.paths.embeddings", "'" + cfg.scenario.embeddings_path + "' does not exist");
    }
    if (!std::filesystem::exists(cfg.scenario.labels_path)) {
        detail::config_error("scenario.paths.labels", "'" + cfg.scenario.labels_path + "' does not exist");
    }
}

/// The scenario used for run seed `seed`: the run seed drives generation
/// unless the config pins scenario.synthetic.seed.
inline ScenarioConfig scenario_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    ScenarioConfig s = *cfg.scenario.synthetic;
    if (!cfg.scenario.synthetic_seed_fixed) s.seed = seed;
    return s;
}

inline DatasetState load_experiment_data(const ExperimentConfig& cfg, std::uint64_t seed,
                                         std::vector<std::string>* warnings = nullptr) {
    if (cfg.scenario.synthetic) return generate(scenario_for_seed(cfg, seed));
    return load_dataset(cfg.scenario.embeddings_path, cfg.scenario.labels_path, warnings);
}

inline nlohmann::json resolved_config(const ExperimentConfig& cfg) {
    using nlohmann::json;
    json doc;
    if (cfg.scenario.synthetic) {
        const auto& s = *cfg.scenario.synthetic;
        json syn{{"k_target", s.k_target},
                 {"k_unknown", s.k_unknown},
                 {"dim", s.dim},
                 {"labeled_per_class", s.labeled_per_class},
                 {"n_unlabeled", s.n_unlabeled},
                 {"mismatch_proportion", s.mismatch_proportion},
                 {"n_test_per_class", s.n_test_per_class},
                 {"angular_noise_std", s.angular_noise_std},
                 {"min_center_separation", s.min_center_separation},
                 {"near_miss_unknowns", s.near_miss_unknowns},
                 {"near_miss_angle", s.near_miss_angle}};
        if (cfg.scenario.synthetic_seed_fixed) syn["seed"] = s.seed;
        doc["scenario"] = {{"synthetic", syn}};
    } else {
        doc["scenario"] = {{"paths", {{"embeddings", cfg.scenario.embeddings_path}, {"labels", cfg.scenario.labels_path}}}};
    }
    doc["train"] = {{"learning_rate", cfg.train.learning_rate}, {"batch_size", cfg.train.batch_size},
                    {"epochs", cfg.train.epochs},               {"input_noise_std", cfg.train.input_noise_std},
                    {"hidden", cfg.train.hidden},               {"activation", std::string(to_string(cfg.train.activation))},
                    {"beta1", cfg.train.beta1},                 {"beta2", cfg.train.beta2},
                    {"adam_epsilon", cfg.train.adam_epsilon}};
    doc["curriculum"] = {{"alpha0", cfg.curriculum.alpha0},
                         {"total_updates", cfg.curriculum.total_updates},
                         {"decay_power", cfg.curriculum.decay_power},
                         {"update_steps", cfg.curriculum.resolved_update_steps(cfg.train.epochs)},
                         {"refresh_period", cfg.curriculum.refresh_period}};
    doc["weights"] = {{"g1", std::string(to_string(cfg.weights.g1))},
                      {"g2", std::string(to_string(cfg.weights.g2))},
                      {"fixed_weight", cfg.fixed_weight}};
    doc["mode"] = std::string(to_string(cfg.mode));
    json compare = json::array();
    for (auto m : cfg.compare) compare.push_back(std::string(to_string(m)));
    doc["compare"] = compare;
    doc["diagnostics"] = {{"lambda_l", cfg.diagnostics.lambda_l}, {"lambda_mu", cfg.diagnostics.lambda_mu},
                          {"loss_bound", cfg.diagnostics.loss_bound}, {"gamma", cfg.diagnostics.gamma}};
    doc["output_dir"] = cfg.output_dir;
    doc["seeds"] = cfg.seeds;
    return doc;
}

}  // namespace wad
