// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_support.hpp"
#include "wad/wad.hpp"

namespace {

using namespace wad;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double time_limit_s;  ///< <= 0: no limit
    std::function<Outcome()> run;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
    std::ostringstream s;
    s << std::scientific << std::setprecision(2) << v;
    return s.str();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << v;
    return s.str();
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> d_dist(2, 12);
    std::uniform_int_distribution<int> k_dist(2, 6);
    int mismatches = 0;
    int ties = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = d_dist(rng);
        const int k = k_dist(rng);
        std::uniform_int_distribution<std::size_t> m_dist(static_cast<std::size_t>(k), 60);
        const bool lattice = trial % 2 == 1;
        const auto pool = testing::random_pool(m_dist(rng), d, k, rng, lattice);
        const auto z = lattice ? testing::lattice_unit(d, rng) : testing::random_unit(d, rng);
        const auto got = assign_pseudo_label(z, pool);
        const auto want = testing::scan_oracle(z, pool);
        const auto prof = similarity_profile(z, pool);
        if (std::count(prof.begin(), prof.end(), want.p_tilde) > 1) ++ties;
        if (got.pseudo_label != want.pseudo_label || got.argmax_index != want.argmax_index ||
            got.p_tilde != want.p_tilde || got.q_tilde != want.q_tilde) {
            ++mismatches;
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + "/1000 mismatches, " + std::to_string(ties) + " tied maxima"};
}

Outcome weight_identity() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double p = 1e-6 + (1.0 - 1e-6) * u(rng);
        const double q = -1.0 + (p + 1.0) * u(rng);
        worst = std::max(worst, std::abs(compute_weight(p, q, {}) - std::max(0.0, p - q)));
    }
    return {worst <= 1e-9, "max |w - (p - q)| = " + sci(worst)};
}

Outcome gradient_check() {
    std::mt19937_64 rng(11);
    const Architecture arch{4, {4}, 3, Activation::Relu};
    double worst = 0.0;
    for (int batch = 0; batch < 5; ++batch) {
        const auto params = StudentParams::initialized(arch, 100 + static_cast<std::uint64_t>(batch));
        const auto b = testing::random_batch(4, 3, 6, 8, rng);
        std::vector<double> analytic;
        wad_loss(params, b.labeled, b.unlabeled, &analytic);
        const auto numeric = testing::finite_difference_gradient(params, b.labeled, b.unlabeled, 1e-4);
        worst = std::max(worst, testing::max_relative_error(analytic, numeric));
    }
    return {worst < 1e-4, "max relative error " + sci(worst)};
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
}

Outcome reduction_to_baseline() {
    ScenarioConfig sc;
    sc.n_unlabeled = 600;
    sc.seed = 3;
    const auto data = generate(sc);
    TrainConfig train;
    train.epochs = 20;
    train.seed = 3;
    CurriculumConfig cur;
    cur.alpha0 = 0.0;
    const RunOptions zeroed{RunOptions::Weighting::Constant, 0.0, true};
    const auto wad_run = run_wad(data, cur, train, {}, zeroed);
    const auto mode_run = run_wad(data, CurriculumConfig{}, train, {}, RunOptions::for_mode(RunMode::Baseline));
    const std::size_t steps = (data.unlabeled().size() + train.batch_size - 1) / train.batch_size;
    const auto reference = train_supervised(data, train, steps);
    const bool same = bitwise_equal(wad_run.history.step_losses, reference.history.step_losses) &&
                      bitwise_equal(mode_run.history.step_losses, reference.history.step_losses) &&
                      bitwise_equal(wad_run.params.values, reference.params.values);
    return {same, std::to_string(reference.history.step_losses.size()) + " step losses compared bitwise"};
}

struct SweepCell {
    std::vector<double> wad, baseline, pseudo_only;
    std::vector<double> weight_ratio;  ///< unknown mean / target mean, per seed
    std::vector<double> purity;        ///< target fraction of promoted instances, per seed
};

constexpr double kMismatches[] = {0.2, 0.4, 0.6, 0.8};
constexpr std::uint64_t kSeeds[] = {0, 1, 2, 3, 4};

std::vector<SweepCell> g_sweep;
double g_sweep_seconds = 0.0;

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

const std::vector<SweepCell>& sweep() {
    if (!g_sweep.empty()) return g_sweep;
    const auto t0 = Clock::now();
    for (double mp : kMismatches) {
        SweepCell cell;
        for (std::uint64_t seed : kSeeds) {
            ScenarioConfig sc;
            sc.mismatch_proportion = mp;
            sc.seed = seed;
            const auto data = generate(sc);
            TrainConfig train;
            train.seed = seed;
            const CurriculumConfig cur;
            const WeightFunctionSpec weights;
            const auto w = run_wad(data, cur, train, weights, RunOptions::for_mode(RunMode::Wad));
            const auto b = run_wad(data, cur, train, weights, RunOptions::for_mode(RunMode::Baseline));
            const auto p = run_wad(data, cur, train, weights, RunOptions::for_mode(RunMode::PseudoOnly));
            cell.wad.push_back(*w.history.epochs.back().accuracy);
            cell.baseline.push_back(*b.history.epochs.back().accuracy);
            cell.pseudo_only.push_back(*p.history.epochs.back().accuracy);

            DiagnosticsConfig dc;
            dc.weights = weights;
            const auto diag = diagnose(w.params, w.final_state, dc);
            cell.weight_ratio.push_back(diag.weights.unknown.mean / diag.weights.target.mean);

            const auto& truth = data.hidden_truth();
            std::size_t promoted = 0, target = 0;
            for (const auto& promo : w.history.promotions) {
                for (std::size_t i : promo.instances) {
                    ++promoted;
                    target += truth.is_target[i] == 1 ? 1 : 0;
                }
            }
            cell.purity.push_back(promoted ? static_cast<double>(target) / static_cast<double>(promoted) : 1.0);
            std::printf("  sweep mismatch=%.1f seed=%llu  wad=%.4f baseline=%.4f pseudo_only=%.4f  "
                        "w_unknown/w_target=%.3f purity=%.3f (%zu promoted)\n",
                        mp, static_cast<unsigned long long>(seed), cell.wad.back(), cell.baseline.back(),
                        cell.pseudo_only.back(), cell.weight_ratio.back(), cell.purity.back(), promoted);
            std::fflush(stdout);
        }
        g_sweep.push_back(std::move(cell));
    }
    g_sweep_seconds = seconds_since(t0);
    return g_sweep;
}

Outcome trend_reproduction() {
    const auto& cells = sweep();
    bool ok = true;
    std::ostringstream s;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const double w = mean(cells[k].wad), b = mean(cells[k].baseline), p = mean(cells[k].pseudo_only);
        ok = ok && w >= b + 0.03;
        if (kMismatches[k] >= 0.6) ok = ok && w >= p;
        s << (k ? "; " : "") << "mp " << fmt(kMismatches[k], 1) << ": wad " << fmt(100 * w, 2) << " base "
          << fmt(100 * b, 2) << " pseudo " << fmt(100 * p, 2);
    }
    s << "; sweep " << fmt(g_sweep_seconds, 1) << " s";
    return {ok && g_sweep_seconds < 300.0, s.str()};
}

Outcome weight_separation() {
    const auto& cell = sweep()[2];
    const auto held = std::count_if(cell.weight_ratio.begin(), cell.weight_ratio.end(), [](double r) { return r < 0.5; });
    std::ostringstream s;
    s << held << "/5 seeds with w_unknown < 0.5 w_target (ratios";
    for (double r : cell.weight_ratio) s << ' ' << fmt(r, 3);
    s << ')';
    return {held == 5, s.str()};
}

Outcome promotion_purity() {
    const auto& cell = sweep()[2];
    const auto held = std::count_if(cell.purity.begin(), cell.purity.end(), [](double p) { return p >= 0.9; });
    std::ostringstream s;
    s << held << "/5 seeds with purity >= 90% (";
    for (std::size_t k = 0; k < cell.purity.size(); ++k) s << (k ? " " : "") << fmt(100 * cell.purity[k], 1) << '%';
    s << ')';
    return {held >= 4, s.str()};
}

Outcome bound_formula() {
    BoundInputs b;
    b.xi = 0.75;
    b.lambda_l = 1.0;
    b.lambda_mu = 1.0;
    b.loss_bound = 1.0;
    b.num_classes = 2;
    b.mean_weight = 0.2;
    b.unknown_size = 60;
    b.training_size = 100;
    b.target_size = 40;
    b.gamma = 0.05;
    const double got = generalization_bound(b);
    const double want = 1.0 * (1.0 + 1.0 * 1.0 * 2.0) + 0.2 * 60.0 * 1.0 / 100.0 + std::sqrt(2.0 * std::log(20.0) / 40.0);
    bool ok = std::abs(got - 3.50703) <= 1e-4 && std::abs(got - want) <= 1e-12;

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        BoundInputs r;
        r.xi = 0.01 + 0.99 * u(rng);
        r.lambda_l = 0.1 + 3 * u(rng);
        r.lambda_mu = 0.1 + 3 * u(rng);
        r.loss_bound = 0.1 + 30 * u(rng);
        r.num_classes = 2 + trial % 8;
        r.mean_weight = 2 * u(rng);
        r.training_size = 10 + static_cast<std::size_t>(1000 * u(rng));
        r.unknown_size = static_cast<std::size_t>(static_cast<double>(r.training_size - 1) * u(rng));
        r.target_size = 1 + static_cast<std::size_t>(1000 * u(rng));
        r.gamma = 0.001 + 0.998 * u(rng);
        const double base = generalization_bound(r);
        auto x = r;
        x.xi = std::min(1.0, r.xi + 0.1 * u(rng));
        violations += generalization_bound(x) > base;
        x = r;
        x.mean_weight += u(rng);
        violations += generalization_bound(x) < base;
        x = r;
        x.unknown_size += 1;
        violations += generalization_bound(x) < base;
        x = r;
        x.target_size += 1 + static_cast<std::size_t>(100 * u(rng));
        violations += generalization_bound(x) > base;
    }
    ok = ok && violations == 0;
    return {ok, "bound " + fmt(got, 6) + ", " + std::to_string(violations) + " monotonicity violations"};
}

Outcome decay_schedule() {
    const double want[] = {0.1, 0.08, 0.06, 0.04, 0.02, 0.0};
    bool ok = true;
    std::ostringstream s;
    for (std::size_t k = 0; k <= 5; ++k) {
        const double a = decay_alpha(0.1, k, 5, 1.0);
        ok = ok && a == want[k];
        s << (k ? ", " : "(") << a;
    }
    s << ')';
    return {ok, s.str()};
}

Outcome format_round_trip() {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "wad_acceptance_roundtrip";
    fs::create_directories(dir);
    const auto path = (dir / "data.wade").string();
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> n_dist(1, 64), d_dist(1, 32);
    int failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = n_dist(rng), d = d_dist(rng);
        std::vector<UnitEmbedding> rows;
        while (rows.size() < n) {
            // rows exactly representable in the f32 payload
            const auto z = testing::random_unit(d, rng);
            std::vector<double> v;
            for (double x : z.values()) v.push_back(static_cast<double>(static_cast<float>(x)));
            rows.push_back(UnitEmbedding::from_unit(v, 1e-5));
        }
        write_embeddings(path, rows);
        const auto first = detail::read_file_bytes(path);
        std::vector<std::string> warnings;
        const auto back = read_embeddings(path, &warnings);
        write_embeddings(path, back);
        const auto second = detail::read_file_bytes(path);
        failures += !(back == rows && first == second && warnings.empty());
    }
    fs::remove_all(dir);
    return {failures == 0, std::to_string(failures) + "/1000 datasets differ"};
}

}  // namespace

int main(int argc, char** argv) {
    // optional argument: run only criteria whose name contains it
    const std::string filter = argc > 1 ? argv[1] : "";
    const std::vector<Criterion> criteria{
        {"oracle equivalence", 5.0, oracle_equivalence},
        {"weight identity", 1.0, weight_identity},
        {"gradient check", 10.0, gradient_check},
        {"reduction to baseline", 30.0, reduction_to_baseline},
        {"trend reproduction", 0.0, trend_reproduction},
        {"weight separation", 0.0, weight_separation},
        {"promotion purity", 0.0, promotion_purity},
        {"bound formula", 5.0, bound_formula},
        {"decay schedule", 0.0, decay_schedule},
        {"format round-trip", 10.0, format_round_trip},
    };
    int failed = 0;
    int ran = 0;
    for (const auto& c : criteria) {
        if (c.name.find(filter) == std::string::npos) continue;
        ++ran;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        const double elapsed = seconds_since(t0);
        if (c.time_limit_s > 0.0 && elapsed >= c.time_limit_s) {
            out.pass = false;
            out.detail += " (over time limit " + fmt(c.time_limit_s, 0) + " s)";
        }
        failed += !out.pass;
        std::printf("%s  %-22s %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", c.name.c_str(), out.detail.c_str(), elapsed);
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
