#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "test_support.hpp"
#include "wad/curriculum.hpp"
#include "wad/synth_data.hpp"

namespace wad {
namespace {

ScenarioConfig small_scenario(std::uint64_t seed, double mismatch = 0.5) {
    ScenarioConfig c;
    c.k_target = 2;
    c.k_unknown = 3;
    c.dim = 8;
    c.labeled_per_class = 10;
    c.n_unlabeled = 200;
    c.mismatch_proportion = mismatch;
    c.n_test_per_class = 50;
    c.angular_noise_std = 0.5;
    c.min_center_separation = 1.2;
    c.seed = seed;
    return c;
}

TrainConfig quick_train(std::uint64_t seed, std::size_t epochs = 12) {
    TrainConfig t;
    t.epochs = epochs;
    t.seed = seed;
    t.hidden = {16};
    t.learning_rate = 5e-3;
    return t;
}

TEST(DecayAlpha, Examples) {
    EXPECT_DOUBLE_EQ(decay_alpha(0.1, 0, 5, 1.0), 0.1);
    EXPECT_DOUBLE_EQ(decay_alpha(0.1, 5, 5, 1.0), 0.0);
    EXPECT_NEAR(decay_alpha(0.1, 1, 5, 1.0), 0.08, 1e-15);
    try {
        decay_alpha(0.1, 6, 5, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidIndex);
    }
}

TEST(DecayAlpha, NonIncreasingForAnyPower) {
    for (double power : {0.0, 0.5, 1.0, 2.0, 3.5}) {
        double prev = decay_alpha(0.3, 0, 7, power);
        for (std::size_t s = 1; s <= 7; ++s) {
            const double a = decay_alpha(0.3, s, 7, power);
            EXPECT_LE(a, prev);
            prev = a;
        }
        EXPECT_EQ(prev, 0.0);
    }
}

std::vector<PseudoAnnotation> with_reliabilities(const std::vector<double>& c) {
    std::vector<PseudoAnnotation> out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        PseudoAnnotation a;
        a.instance = 100 + i;
        a.reliability = c[i];
        out.push_back(a);
    }
    return out;
}

TEST(SelectReliable, CountArithmetic) {
    std::vector<double> c(20);
    for (std::size_t i = 0; i < 20; ++i) c[i] = static_cast<double>((i * 7) % 20);
    const auto ann = with_reliabilities(c);
    const auto sel = select_reliable(ann, 0.10);
    ASSERT_EQ(sel.size(), 2u);
    EXPECT_EQ(sel[0], 100u);      // c = 0
    EXPECT_EQ(sel[1], 100u + 3);  // c = 1
    EXPECT_TRUE(select_reliable(ann, 0.0).empty());
    EXPECT_TRUE(select_reliable(ann, 0.04).empty());  // 0.8 instances rounds down
}

TEST(SelectReliable, TiesGoToLowerPosition) {
    const auto ann = with_reliabilities({0.5, 0.1, 0.1, 0.1, 0.9});
    const auto sel = select_reliable(ann, 0.4);
    EXPECT_EQ(sel, (std::vector<std::size_t>{101, 102}));
}

TEST(SelectReliable, MatchesSortOracle) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<int> n_dist(0, 60), levels(0, 9);
        std::vector<double> c(static_cast<std::size_t>(n_dist(rng)));
        for (double& v : c) v = 0.25 * levels(rng);
        const auto ann = with_reliabilities(c);
        const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        // oracle: sort (c, position) pairs lexicographically, take the prefix
        std::vector<std::pair<double, std::size_t>> keyed;
        for (std::size_t i = 0; i < c.size(); ++i) keyed.emplace_back(c[i], i);
        std::sort(keyed.begin(), keyed.end());
        const auto count = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(c.size()) + 1e-9));
        std::vector<std::size_t> want;
        for (std::size_t k = 0; k < count; ++k) want.push_back(100 + keyed[k].second);
        EXPECT_EQ(select_reliable(ann, alpha), want);
    }
}

TEST(Reliability, MatchesComposition) {
    const auto zero = StudentParams::zeros({2, {}, 2, Activation::Relu});
    EXPECT_NEAR(reliability(zero, std::vector<double>{0.3, 0.4}, 1), std::log(2.0), 1e-15);

    auto confident = StudentParams::zeros({2, {}, 2, Activation::Relu});
    confident.values[0] = 100.0;  // class-0 logit 100 * x0
    EXPECT_DOUBLE_EQ(reliability(confident, std::vector<double>{1.0, 0.0}, 0), 0.0);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = StudentParams::initialized({3, {5}, 3, Activation::Tanh}, static_cast<std::uint64_t>(trial));
        const auto z = testing::random_unit(3, rng);
        const ClassId y = trial % 3;
        EXPECT_EQ(reliability(p, z.values(), y), cross_entropy(forward(p, z.values()), y));
    }
}

TEST(Promote, EmptySelectionIsNoOp) {
    const auto state = generate(small_scenario(1));
    const auto ann = annotate_unlabeled(state);
    const auto after = promote(state, {}, ann);
    EXPECT_EQ(after.labeled(), state.labeled());
    EXPECT_EQ(after.unlabeled(), state.unlabeled());
}

TEST(Promote, ConservesPartition) {
    auto cfg = small_scenario(2);
    cfg.n_unlabeled = 20;
    const auto state = generate(cfg);
    const auto ann = annotate_unlabeled(state);
    const std::vector<std::size_t> sel{ann[3].instance, ann[11].instance};
    const auto after = promote(state, sel, ann);
    EXPECT_EQ(after.labeled().size(), state.labeled().size() + 2);
    EXPECT_EQ(after.unlabeled().size(), state.unlabeled().size() - 2);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(after.role(sel[k]), Role::Labeled);
        EXPECT_TRUE(after.promoted(sel[k]));
    }
    EXPECT_EQ(after.label(sel[0]), ann[3].pmi.pseudo_label);
    // truth travels with the instance
    EXPECT_EQ(after.hidden_truth().is_target[sel[0]], state.hidden_truth().is_target[sel[0]]);
    try {
        promote(after, sel, ann);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StaleSelection);
    }
}

TEST(Promote, PromotedInstanceBecomesAnchor) {
    // Round 1: x is labeled by the class-0 anchor. Once promoted, x is the
    // nearest anchor for y, which the original pool would have given class 1.
    const auto a0 = normalize({1.0, 0.0});
    const auto a1 = normalize({0.0, 1.0});
    const auto x = normalize({0.8, 0.6});
    const auto y = normalize({0.62, 0.78});
    DatasetState state({a0, a1, x, y}, {Role::Labeled, Role::Labeled, Role::Unlabeled, Role::Unlabeled}, {0, 1, -1, -1}, 2);
    auto ann = annotate_unlabeled(state);
    ASSERT_EQ(ann[0].instance, 2u);
    EXPECT_EQ(ann[0].pmi.pseudo_label, 0);
    EXPECT_EQ(ann[1].pmi.pseudo_label, 1);
    state = promote(state, std::vector<std::size_t>{2}, ann);
    ann = annotate_unlabeled(state);
    ASSERT_EQ(ann.size(), 1u);
    EXPECT_EQ(ann[0].instance, 3u);
    EXPECT_EQ(ann[0].pmi.pseudo_label, 0);
    EXPECT_EQ(ann[0].pmi.argmax_index, 2u);  // x is the third anchor
}

TEST(CurriculumConfig, DefaultUpdateSteps) {
    CurriculumConfig c;
    EXPECT_EQ(c.resolved_update_steps(100), (std::vector<std::size_t>{16, 33, 50, 66, 83}));
    EXPECT_NO_THROW(c.validate(100));
    c.update_steps = {10, 10, 20, 30, 40};
    EXPECT_THROW(c.validate(100), Error);
    c.update_steps = {10, 20, 30};
    EXPECT_THROW(c.validate(100), Error);
    c.update_steps = {};
    c.alpha0 = 1.5;
    EXPECT_THROW(c.validate(100), Error);
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
}

TEST(RunWad, BaselineModeReducesToSupervisedTraining) {
    const auto data = generate(small_scenario(3));
    const auto train = quick_train(4);
    CurriculumConfig cur;
    const auto baseline = run_wad(data, cur, train, {}, RunOptions::for_mode(RunMode::Baseline));
    const auto reference = train_supervised(data, train, (data.unlabeled().size() + train.batch_size - 1) / train.batch_size);
    EXPECT_TRUE(bitwise_equal(baseline.history.step_losses, reference.history.step_losses));
    EXPECT_TRUE(bitwise_equal(baseline.params.values, reference.params.values));
    EXPECT_TRUE(baseline.history.promotions.empty());

    // alpha0 = 0 with every weight forced to zero takes the same path
    cur.alpha0 = 0.0;
    RunOptions zeroed{RunOptions::Weighting::Constant, 0.0, true};
    const auto forced = run_wad(data, cur, train, {}, zeroed);
    EXPECT_TRUE(bitwise_equal(forced.history.step_losses, reference.history.step_losses));
}

TEST(RunWad, DeterministicAndConservesUniverse) {
    const auto data = generate(small_scenario(5));
    const auto train = quick_train(6);
    CurriculumConfig cur;
    cur.alpha0 = 0.2;
    const auto a = run_wad(data, cur, train, {});
    const auto b = run_wad(data, cur, train, {});
    EXPECT_TRUE(bitwise_equal(a.history.step_losses, b.history.step_losses));
    EXPECT_TRUE(bitwise_equal(a.params.values, b.params.values));

    const auto& st = a.final_state;
    std::set<std::size_t> labeled(st.labeled().begin(), st.labeled().end());
    std::set<std::size_t> unlabeled(st.unlabeled().begin(), st.unlabeled().end());
    for (std::size_t i : labeled) EXPECT_FALSE(unlabeled.count(i));
    EXPECT_EQ(labeled.size() + unlabeled.size(), data.labeled().size() + data.unlabeled().size());

    // promotions reference instances unlabeled at the time, schedule from the decay
    ASSERT_EQ(a.history.promotions.size(), 4u);  // the fifth update has alpha = 0
    std::set<std::size_t> seen;
    std::size_t pool = data.unlabeled().size();
    for (const auto& p : a.history.promotions) {
        EXPECT_NEAR(p.alpha, decay_alpha(0.2, p.update_index, 5, 1.0), 1e-15);
        EXPECT_EQ(p.instances.size(), static_cast<std::size_t>(std::floor(p.alpha * static_cast<double>(pool) + 1e-9)));
        for (std::size_t i : p.instances) {
            EXPECT_EQ(data.role(i), Role::Unlabeled);
            EXPECT_TRUE(seen.insert(i).second);
        }
        EXPECT_TRUE(std::is_sorted(p.reliabilities.begin(), p.reliabilities.end()));
        pool -= p.instances.size();
    }
    EXPECT_EQ(st.unlabeled().size(), pool);
    double prev = 1.0;
    for (const auto& e : a.history.epochs) {
        if (e.alpha) {
            EXPECT_LE(*e.alpha, prev);
            prev = *e.alpha;
        }
    }
    EXPECT_EQ(prev, 0.0);
}

TEST(RunWad, SeparableDataReachesHighAccuracy) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = small_scenario(seed, 0.4);
        cfg.angular_noise_std = 0.2;
        const auto result = run_wad(generate(cfg), {}, quick_train(seed, 30), {});
        ASSERT_TRUE(result.history.epochs.back().accuracy.has_value());
        EXPECT_GE(*result.history.epochs.back().accuracy, 0.95) << "seed " << seed;
    }
}

TEST(RunWad, NoMismatchIsAtLeastBaseline) {
    double wad_total = 0.0, base_total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = small_scenario(seed, 0.0);
        cfg.angular_noise_std = 0.3;
        const auto data = generate(cfg);
        const auto train = quick_train(seed, 20);
        wad_total += *run_wad(data, {}, train, {}).history.epochs.back().accuracy;
        base_total += *run_wad(data, {}, train, {}, RunOptions::for_mode(RunMode::Baseline)).history.epochs.back().accuracy;
    }
    EXPECT_GE(wad_total, base_total);
}

TEST(RunWad, TracksGroupWeights) {
    const auto result = run_wad(generate(small_scenario(7, 0.5)), {}, quick_train(7, 6), {});
    for (const auto& e : result.history.epochs) {
        ASSERT_TRUE(e.mean_weight_target && e.mean_weight_unknown);
        EXPECT_LT(*e.mean_weight_unknown, *e.mean_weight_target);
    }
}

}  // namespace
}  // namespace wad
