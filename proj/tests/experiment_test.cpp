#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "json.hpp"
#include "wad/experiment.hpp"
#include "wad/report.hpp"

using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({"scenario": {"synthetic": {"n_unlabeled": 100, "n_test_per_class": 10}}})");
}

std::string config_error_message(const json& doc) {
    try {
        wad::parse_experiment(doc);
    } catch (const wad::Error& e) {
        EXPECT_EQ(e.code(), wad::ErrorCode::InvalidConfig);
        return e.what();
    }
    ADD_FAILURE() << "expected InvalidConfig for " << doc.dump();
    return {};
}

}  // namespace

TEST(Experiment, MinimalConfigUsesDefaults) {
    const auto cfg = wad::parse_experiment(minimal());
    ASSERT_TRUE(cfg.scenario.synthetic.has_value());
    EXPECT_FALSE(cfg.scenario.synthetic_seed_fixed);
    EXPECT_EQ(cfg.scenario.synthetic->n_unlabeled, 100u);
    EXPECT_EQ(cfg.mode, wad::RunMode::Wad);
    EXPECT_EQ(cfg.train.batch_size, 32u);
    EXPECT_EQ(cfg.train.epochs, 100u);
    EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 5e-4);
    EXPECT_DOUBLE_EQ(cfg.curriculum.alpha0, 0.1);
    EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
}

TEST(Experiment, MismatchOutOfRangeNamesTheField) {
    auto doc = minimal();
    doc["scenario"]["synthetic"]["mismatch_proportion"] = 1.5;
    const auto msg = config_error_message(doc);
    EXPECT_NE(msg.find("mismatch_proportion"), std::string::npos) << msg;
}

TEST(Experiment, UnknownFieldIsRejectedWithPath) {
    auto doc = minimal();
    doc["train"]["learnign_rate"] = 0.1;
    const auto msg = config_error_message(doc);
    EXPECT_NE(msg.find("train.learnign_rate"), std::string::npos) << msg;
}

TEST(Experiment, WrongTypeNamesTheField) {
    auto doc = minimal();
    doc["train"]["epochs"] = "many";
    EXPECT_NE(config_error_message(doc).find("train.epochs"), std::string::npos);
    doc = minimal();
    doc["curriculum"]["update_steps"] = json::array({3, -1});
    EXPECT_NE(config_error_message(doc).find("curriculum.update_steps[1]"), std::string::npos);
}

TEST(Experiment, ScenarioNeedsExactlyOneSource) {
    json neither = {{"scenario", json::object()}};
    EXPECT_NE(config_error_message(neither).find("scenario"), std::string::npos);
    auto both = minimal();
    both["scenario"]["paths"] = {{"embeddings", "a.wade"}, {"labels", "a.csv"}};
    EXPECT_NE(config_error_message(both).find("exactly one"), std::string::npos);
    EXPECT_NE(config_error_message(json::object()).find("scenario"), std::string::npos);
}

TEST(Experiment, SeedsMustBeNonEmptyAndUnique) {
    auto doc = minimal();
    doc["seeds"] = json::array();
    EXPECT_NE(config_error_message(doc).find("seeds"), std::string::npos);
    doc["seeds"] = {1, 2, 1};
    EXPECT_NE(config_error_message(doc).find("seeds[2]"), std::string::npos);
}

TEST(Experiment, UnknownModeAndTagsAreRejected) {
    auto doc = minimal();
    doc["mode"] = "fancy";
    EXPECT_NE(config_error_message(doc).find("mode"), std::string::npos);
    doc = minimal();
    doc["weights"]["g1"] = "sqrt";
    EXPECT_NE(config_error_message(doc).find("weights.g1"), std::string::npos);
    doc = minimal();
    doc["compare"] = {"baseline", "nope"};
    EXPECT_NE(config_error_message(doc).find("compare[1]"), std::string::npos);
}

TEST(Experiment, MissingPathsAreReportedByField) {
    json doc = {{"scenario", {{"paths", {{"embeddings", "/nonexistent/x.wade"}, {"labels", "/nonexistent/x.csv"}}}}}};
    const auto cfg = wad::parse_experiment(doc);
    try {
        wad::check_paths_exist(cfg);
        FAIL() << "expected InvalidConfig";
    } catch (const wad::Error& e) {
        EXPECT_NE(std::string(e.what()).find("scenario.paths.embeddings"), std::string::npos);
    }
}

TEST(Experiment, RunSeedDrivesGenerationUnlessPinned) {
    auto cfg = wad::parse_experiment(minimal());
    EXPECT_EQ(wad::scenario_for_seed(cfg, 7).seed, 7u);
    auto doc = minimal();
    doc["scenario"]["synthetic"]["seed"] = 3;
    cfg = wad::parse_experiment(doc);
    EXPECT_TRUE(cfg.scenario.synthetic_seed_fixed);
    EXPECT_EQ(wad::scenario_for_seed(cfg, 7).seed, 3u);
}

TEST(Experiment, ResolvedSnapshotReparsesToSameConfig) {
    auto doc = minimal();
    doc["mode"] = "pseudo_and_fixed_weight";
    doc["compare"] = {"baseline"};
    doc["weights"] = {{"g1", "exp"}, {"fixed_weight", 0.5}};
    doc["train"] = {{"epochs", 12}, {"hidden", {8, 4}}, {"activation", "tanh"}};
    doc["seeds"] = {4, 5};
    const auto cfg = wad::parse_experiment(doc);
    const auto snapshot = wad::resolved_config(cfg);
    const auto again = wad::parse_experiment(snapshot);
    EXPECT_EQ(wad::resolved_config(again), snapshot);
    EXPECT_EQ(again.mode, wad::RunMode::PseudoAndFixedWeight);
    EXPECT_DOUBLE_EQ(again.fixed_weight, 0.5);
    EXPECT_EQ(again.train.hidden, (std::vector<std::size_t>{8, 4}));
    EXPECT_EQ(snapshot["curriculum"]["update_steps"], json({2, 4, 6, 8, 10}));
}

TEST(Experiment, ModesMapToRunOptions) {
    using W = wad::RunOptions::Weighting;
    const auto wad_opts = wad::RunOptions::for_mode(wad::RunMode::Wad);
    EXPECT_EQ(wad_opts.weighting, W::Distilled);
    EXPECT_TRUE(wad_opts.promotions);
    const auto base = wad::RunOptions::for_mode(wad::RunMode::Baseline);
    EXPECT_EQ(base.weighting, W::Constant);
    EXPECT_EQ(base.constant_weight, 0.0);
    EXPECT_FALSE(base.promotions);
    const auto pseudo = wad::RunOptions::for_mode(wad::RunMode::PseudoOnly);
    EXPECT_EQ(pseudo.constant_weight, 1.0);
    EXPECT_FALSE(pseudo.promotions);
    const auto fixed = wad::RunOptions::for_mode(wad::RunMode::PseudoAndFixedWeight, 0.3);
    EXPECT_EQ(fixed.weighting, W::Constant);
    EXPECT_EQ(fixed.constant_weight, 0.3);
    EXPECT_FALSE(fixed.promotions);
}

TEST(Experiment, FixedWeightModeCoincidesWithNeighbouringModes) {
    auto doc = minimal();
    doc["scenario"]["synthetic"]["n_unlabeled"] = 60;
    doc["train"] = {{"epochs", 6}};
    const auto cfg = wad::parse_experiment(doc);
    const auto data = wad::load_experiment_data(cfg, 1);
    auto run = [&](wad::RunMode mode, double w) {
        return wad::run_wad(data, cfg.curriculum, cfg.train, cfg.weights, wad::RunOptions::for_mode(mode, w))
            .history.step_losses;
    };
    EXPECT_EQ(run(wad::RunMode::PseudoAndFixedWeight, 1.0), run(wad::RunMode::PseudoOnly, 1.0));
    EXPECT_EQ(run(wad::RunMode::PseudoAndFixedWeight, 0.0), run(wad::RunMode::Baseline, 0.0));
    EXPECT_NE(run(wad::RunMode::PseudoAndFixedWeight, 0.25), run(wad::RunMode::PseudoOnly, 1.0));
}

TEST(Report, SummaryUsesSampleStandardDeviation) {
    const auto s = wad::summarize(std::vector<double>{0.5, 0.7, 0.9});
    EXPECT_NEAR(s.mean, 0.7, 1e-15);
    EXPECT_NEAR(s.stddev, 0.2, 1e-15);
    const auto one = wad::summarize(std::vector<double>{0.4});
    EXPECT_EQ(one.stddev, 0.0);
}
