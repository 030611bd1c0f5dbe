// Command-line driver: gen / train / eval / diag.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime abort.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wad/experiment.hpp"
#include "wad/report.hpp"
#include "wad/wad.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel g_log_level = LogLevel::Info;

void log(LogLevel level, const std::string& msg) {
    if (level > g_log_level) return;
    static const char* names[] = {"error", "info", "debug"};
    std::cerr << "[wad " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

struct ConfigFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void init_logging() {
    const char* env = std::getenv("WAD_LOG");
    if (!env) return;
    const std::string v = env;
    if (v == "error") g_log_level = LogLevel::Error;
    else if (v == "info") g_log_level = LogLevel::Info;
    else if (v == "debug") g_log_level = LogLevel::Debug;
    else throw ConfigFailure("WAD_LOG: expected one of error, info, debug; got '" + v + "'");
}

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

wad::ExperimentConfig load_config(const CommonOptions& opts) {
    std::ifstream in(opts.config_path);
    if (!in) throw ConfigFailure("--config: cannot open '" + opts.config_path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigFailure("--config: " + std::string(e.what()));
    }
    wad::ExperimentConfig cfg;
    try {
        cfg = wad::parse_experiment(doc);
        wad::check_paths_exist(cfg);
    } catch (const wad::Error& e) {
        throw ConfigFailure(e.what());
    }
    if (opts.seed) cfg.seeds = {*opts.seed};
    if (!opts.out.empty()) cfg.output_dir = opts.out;
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw wad::Error(wad::ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << text;
}

void write_snapshot(const wad::ExperimentConfig& cfg) {
    write_text(fs::path(cfg.output_dir) / "config.resolved.json", wad::resolved_config(cfg).dump(2) + "\n");
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

wad::DatasetState load_data(const wad::ExperimentConfig& cfg, std::uint64_t seed) {
    std::vector<std::string> warnings;
    auto data = wad::load_experiment_data(cfg, seed, &warnings);
    for (const auto& w : warnings) log(LogLevel::Info, "load: " + w);
    return data;
}

int cmd_gen(const CommonOptions& opts) {
    const auto cfg = load_config(opts);
    if (!cfg.scenario.synthetic) throw ConfigFailure("scenario.synthetic: gen needs a synthetic scenario");
    write_snapshot(cfg);
    for (std::uint64_t seed : cfg.seeds) {
        const auto data = wad::generate(wad::scenario_for_seed(cfg, seed));
        const fs::path dir = fs::path(cfg.output_dir) / seed_dir(seed);
        fs::create_directories(dir);
        wad::save_dataset(data, (dir / "embeddings.wade").string(), (dir / "labels.csv").string());
        log(LogLevel::Info, "wrote " + std::to_string(data.size()) + " instances to " + dir.string());
    }
    return 0;
}

std::string format_pct(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
}

int cmd_train(const CommonOptions& opts) {
    const auto cfg = load_config(opts);
    write_snapshot(cfg);
    std::vector<wad::RunMode> modes{cfg.mode};
    for (auto m : cfg.compare) {
        if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
    }

    std::map<wad::RunMode, std::vector<double>> accuracy;
    for (std::uint64_t seed : cfg.seeds) {
        const auto data = load_data(cfg, seed);
        auto train = cfg.train;
        train.seed = seed;
        for (auto mode : modes) {
            const auto options = wad::RunOptions::for_mode(mode, cfg.fixed_weight);
            log(LogLevel::Info, "training mode=" + std::string(wad::to_string(mode)) + " seed=" + std::to_string(seed));
            const auto run = wad::run_wad(data, cfg.curriculum, train, cfg.weights, options);
            const fs::path dir = fs::path(cfg.output_dir) / std::string(wad::to_string(mode)) / seed_dir(seed);
            fs::create_directories(dir);
            wad::write_checkpoint((dir / "checkpoint.wadc").string(), run.params);
            write_text(dir / "history.jsonl", wad::history_lines(run.history));
            json promos = json::array();
            for (const auto& p : run.history.promotions) promos.push_back(wad::to_json(p));
            write_text(dir / "promotions.json", promos.dump(2) + "\n");
            wad::write_labels((dir / "final_labels.csv").string(), run.final_state);
            const auto& last = run.history.epochs.back();
            if (last.accuracy) {
                accuracy[mode].push_back(*last.accuracy);
                log(LogLevel::Info, "  accuracy " + format_pct(*last.accuracy) + "%");
            }
            if (g_log_level >= LogLevel::Debug) {
                for (const auto& e : run.history.epochs) log(LogLevel::Debug, wad::to_json(e).dump());
            }
        }
    }

    json report;
    report["seeds"] = cfg.seeds;
    std::ostringstream table;
    table << std::left << std::setw(26) << "mode" << "accuracy (mean +- std, %)\n";
    for (auto mode : modes) {
        const auto& acc = accuracy[mode];
        const auto s = wad::summarize(acc);
        report["modes"][std::string(wad::to_string(mode))] = {{"accuracy", acc}, {"mean", s.mean}, {"std", s.stddev}};
        table << std::left << std::setw(26) << wad::to_string(mode) << format_pct(s.mean) << " +- " << format_pct(s.stddev)
              << '\n';
    }
    const auto& primary = accuracy[cfg.mode];
    for (auto other : modes) {
        if (other == cfg.mode) continue;
        const auto& acc = accuracy[other];
        std::vector<double> deltas;
        for (std::size_t k = 0; k < std::min(acc.size(), primary.size()); ++k) deltas.push_back(primary[k] - acc[k]);
        const auto s = wad::summarize(deltas);
        const std::string key = std::string(wad::to_string(cfg.mode)) + "_minus_" + std::string(wad::to_string(other));
        report["paired"][key] = {{"per_seed", deltas}, {"mean", s.mean}, {"std", s.stddev}};
        table << std::left << std::setw(26) << key << format_pct(s.mean) << " +- " << format_pct(s.stddev) << '\n';
    }
    write_text(fs::path(cfg.output_dir) / "report.json", report.dump(2) + "\n");
    write_text(fs::path(cfg.output_dir) / "report.txt", table.str());
    std::cout << table.str();
    return 0;
}

fs::path run_dir_for(const wad::ExperimentConfig& cfg, std::uint64_t seed, const std::string& run_dir) {
    if (!run_dir.empty()) return run_dir;
    return fs::path(cfg.output_dir) / std::string(wad::to_string(cfg.mode)) / seed_dir(seed);
}

int cmd_eval(const CommonOptions& opts, const std::string& checkpoint) {
    const auto cfg = load_config(opts);
    json report;
    std::vector<double> accs;
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path ckpt = checkpoint.empty() ? run_dir_for(cfg, seed, "") / "checkpoint.wadc" : fs::path(checkpoint);
        const auto params = wad::read_checkpoint(ckpt.string());
        const auto data = load_data(cfg, seed);
        std::vector<wad::LabeledExample> test;
        for (std::size_t i : data.test()) {
            const auto v = data.embedding(i).values();
            test.push_back({{v.begin(), v.end()}, data.label(i)});
        }
        const double acc = wad::evaluate(params, test);
        accs.push_back(acc);
        report["per_seed"][std::to_string(seed)] = {{"checkpoint", ckpt.string()}, {"accuracy", acc}};
        std::cout << "seed " << seed << ": accuracy " << format_pct(acc) << "%\n";
    }
    const auto s = wad::summarize(accs);
    report["mean"] = s.mean;
    report["std"] = s.stddev;
    write_text(fs::path(cfg.output_dir) / "eval.json", report.dump(2) + "\n");
    return 0;
}

int cmd_diag(const CommonOptions& opts, const std::string& run_dir) {
    const auto cfg = load_config(opts);
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path dir = run_dir_for(cfg, seed, run_dir);
        const auto params = wad::read_checkpoint((dir / "checkpoint.wadc").string());
        const auto base = load_data(cfg, seed);
        // Overlay the partition the run ended with onto the same embeddings.
        const auto table = wad::read_labels((dir / "final_labels.csv").string(), base.size());
        const wad::DatasetState final_state(base.embeddings(), table.roles, table.labels, base.num_classes(),
                                            base.truth_columns());
        const auto report = wad::diagnose(params, final_state, cfg.diagnostics);
        write_text(dir / "diagnostics.json", wad::to_json(report).dump(2) + "\n");
        std::cout << "seed " << seed << ": ssl error " << report.decomposition.ssl_error_bound << " (pseudo-labeling "
                  << report.decomposition.pseudo_labeling_error << ", invasion " << report.decomposition.invasion_error
                  << "), bound " << report.bound << ", mean weight target/unknown " << report.weights.target.mean << " / "
                  << report.weights.unknown.mean << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weight-aware distillation for semi-supervised learning with unknown categories"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string checkpoint;
    std::string run_dir;
    std::uint64_t seed_value = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--seed", seed_value, "run only this seed");
        sub->add_option("--out", opts.out, "output directory (overrides output_dir)");
    };
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    auto* train = app.add_subcommand("train", "train the student (and comparison modes)");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    auto* diag = app.add_subcommand("diag", "error decomposition, bound and weight statistics");
    for (auto* sub : {gen, train, eval, diag}) add_common(sub);
    eval->add_option("--checkpoint", checkpoint, "checkpoint file (default: <out>/<mode>/seed_<s>/checkpoint.wadc)");
    diag->add_option("--run", run_dir, "run directory (default: <out>/<mode>/seed_<s>)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        init_logging();
        for (auto* sub : {gen, train, eval, diag}) {
            if (sub->parsed() && sub->count("--seed")) opts.seed = seed_value;
        }
        if (gen->parsed()) return cmd_gen(opts);
        if (train->parsed()) return cmd_train(opts);
        if (eval->parsed()) return cmd_eval(opts, checkpoint);
        if (diag->parsed()) return cmd_diag(opts, run_dir);
    } catch (const ConfigFailure& e) {
        log(LogLevel::Error, std::string("config error: ") + e.what());
        return 2;
    } catch (const wad::Error& e) {
        log(LogLevel::Error, std::string("aborted: ") + e.what());
        return 3;
    } catch (const std::exception& e) {
        log(LogLevel::Error, std::string("aborted: ") + e.what());
        return 3;
    }
    return 0;
}
