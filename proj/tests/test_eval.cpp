#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "iotgem/eval/attribution.hpp"
#include "iotgem/eval/evaluate.hpp"
#include "iotgem/eval/probe.hpp"
#include "support/attribution_fixtures.hpp"
#include "support/leak_fixture.hpp"
#include "support/selection_fixtures.hpp"
#include "support/synthetic.hpp"

using namespace iotgem;
using namespace iotgem::eval;
using namespace iotgem::fixtures;

namespace {

template <class F>
void expect_code(errc code, F&& f) {
    try {
        f();
        ADD_FAILURE() << "expected " << to_string(code);
    } catch (const error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

TablePtr share(FeatureTable t) { return std::make_shared<const FeatureTable>(std::move(t)); }

/// Attack rows sit in [10, 11] on x0, benign rows in [0, 1]; x1 is noise.
FeatureTable separable(std::uint64_t seed, DataRole role, std::size_t rows = 400) {
    rng g(seed);
    return make_table({"x0", "x1"}, rows, [&](auto, std::size_t c, int y) { return c == 0 ? (y ? 10.0 : 0.0) + g.uniform() : g.uniform(); },
                      [&](std::size_t) { return g.bernoulli(0.35) ? 1 : 0; }, role);
}

/// `signal` carries a 2 sd class shift; `session_id` is the host number,
/// with the attacker as host 5, unless `scrambled` draws it at random.
FeatureTable session_table(std::uint64_t seed, DataRole role, bool scrambled, std::size_t rows = 1500) {
    rng g(seed);
    return make_table(
        {"signal", "session_id"}, rows,
        [&](auto, std::size_t c, int y) {
            if (c == 0) return 2.0 * y + g.normal();
            if (scrambled) return static_cast<double>(g.index(8));
            if (y) return 5.0;
            auto h = g.index(7);
            return static_cast<double>(h >= 5 ? h + 1 : h);
        },
        [&](std::size_t) { return g.bernoulli(0.4) ? 1 : 0; }, role);
}

struct ConstantScorer {
    double v;
    double score(std::span<const double>) const { return v; }
};

struct AdditiveScorer {
    double score(std::span<const double> x) const { return x[0] + x[1]; }
};

}  // namespace

// ---- evaluate ---------------------------------------------------------------

TEST(Evaluate, SeparableAttackIsPerfectInEveryScenario) {
    const std::vector<TaggedTable> tables{{DataRole::train_cv, "train", share(separable(1, DataRole::train_cv))},
                                          {DataRole::session_test, "session", share(separable(2, DataRole::session_test))},
                                          {DataRole::dataset_test, "dataset", share(separable(3, DataRole::dataset_test))}};
    const auto reports = evaluate("synthetic", {ml::ClassifierSpec::decision_tree(0, 0)}, std::nullopt, tables);
    ASSERT_EQ(reports.size(), 1u);
    const auto& r = reports[0];
    EXPECT_EQ(r.cv.folds, 10);
    EXPECT_EQ(r.cv.per_fold.size(), 10u);
    EXPECT_EQ(r.cv.mean.f1, 1.0);
    EXPECT_EQ(r.cv.std.f1, 0.0);
    ASSERT_TRUE(r.session_test && r.dataset_test);
    EXPECT_EQ(r.session_test->f1, 1.0);
    EXPECT_EQ(r.dataset_test->f1, 1.0);
}

TEST(Evaluate, ScenarioEntriesOnlyForSuppliedRoles) {
    const std::vector<TaggedTable> tables{{DataRole::train_cv, "train", share(separable(1, DataRole::train_cv))},
                                          {DataRole::hpo, "hpo", share(separable(4, DataRole::hpo))}};
    EvalConfig cfg;
    cfg.folds = 5;
    const auto r = evaluate("a", {ml::ClassifierSpec::gaussian_nb()}, std::nullopt, tables, cfg).at(0);
    EXPECT_EQ(r.cv.folds, 5);
    EXPECT_FALSE(r.session_test);
    EXPECT_FALSE(r.dataset_test);
    const auto j = to_json(r);
    EXPECT_FALSE(j.contains("session_test"));
    EXPECT_FALSE(j.contains("dataset_test"));
}

TEST(Evaluate, CvSummaryRecomputesFromFoldLog) {
    const std::vector<TaggedTable> tables{{DataRole::train_cv, "train", share(session_table(3, DataRole::train_cv, true))}};
    const auto reports = evaluate("a", {ml::ClassifierSpec::decision_tree(3, 0), ml::ClassifierSpec::knn(5)}, std::nullopt, tables);
    for (const auto& r : reports) {
        ASSERT_EQ(r.cv.per_fold.size(), 10u);
        double sum = 0.0;
        std::uint64_t total = 0;
        for (const auto& b : r.cv.per_fold) {
            sum += b.f1;
            total += b.cm.total();
            EXPECT_EQ(b.f1, metric_bundle(b.cm).f1);
        }
        const double mean = sum / 10.0;
        double sq = 0.0;
        for (const auto& b : r.cv.per_fold) sq += (b.f1 - mean) * (b.f1 - mean);
        EXPECT_EQ(r.cv.mean.f1, mean);
        EXPECT_EQ(r.cv.std.f1, std::sqrt(sq / 10.0));
        EXPECT_EQ(total, 1500u);
        EXPECT_GT(r.cv.std.f1, 0.0);
    }
}

TEST(Evaluate, DeterministicAcrossRunsAndJobCounts) {
    const std::vector<TaggedTable> tables{{DataRole::train_cv, "train", share(session_table(5, DataRole::train_cv, false))},
                                          {DataRole::dataset_test, "d", share(session_table(6, DataRole::dataset_test, true))}};
    const std::vector<ml::ClassifierSpec> specs{ml::ClassifierSpec::random_forest(10, 3), ml::ClassifierSpec::extra_tree(2),
                                                ml::ClassifierSpec::logistic_regression()};
    EvalConfig a;
    a.seed = 11;
    EvalConfig b = a;
    b.jobs = 3;
    const auto ja = to_json(evaluate("x", specs, std::nullopt, tables, a)).dump();
    EXPECT_EQ(ja, to_json(evaluate("x", specs, std::nullopt, tables, a)).dump());
    EXPECT_EQ(ja, to_json(evaluate("x", specs, std::nullopt, tables, b)).dump());
    EvalConfig c = a;
    c.seed = 12;
    EXPECT_NE(ja, to_json(evaluate("x", specs, std::nullopt, tables, c)).dump());
}

TEST(Evaluate, UnseededStochasticSpecGetsDerivedSeed) {
    ml::ClassifierSpec rf = ml::ClassifierSpec::random_forest(5, 0);
    rf.seed.reset();
    const auto s = seeded_spec(rf, 9);
    ASSERT_TRUE(s.seed);
    EXPECT_EQ(*s.seed, seeded_spec(rf, 9).seed.value());
    EXPECT_NE(*s.seed, seeded_spec(rf, 10).seed.value());
    EXPECT_EQ(seeded_spec(ml::ClassifierSpec::random_forest(5, 4), 9).seed.value(), 4u);
}

TEST(Evaluate, PlantedSessionIdentifierDegradesDatasetTest) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const std::vector<TaggedTable> tables{
            {DataRole::train_cv, "train", share(session_table(seed * 3 + 1, DataRole::train_cv, false))},
            {DataRole::dataset_test, "other", share(session_table(seed * 3 + 2, DataRole::dataset_test, true))}};
        const std::vector<ml::ClassifierSpec> specs{ml::ClassifierSpec::decision_tree(0, 0)};
        const auto with = evaluate("s", specs, std::nullopt, tables).at(0);
        const auto without = evaluate("s", specs, std::vector<std::string>{"signal"}, tables).at(0);
        EXPECT_EQ(with.cv.mean.f1, 1.0);
        EXPECT_LT(with.dataset_test->f1, without.dataset_test->f1 - 0.3) << "seed " << seed;
        EXPECT_LT(without.dataset_test->f1, without.cv.mean.f1 + 0.1);
        EXPECT_EQ(without.features, std::vector<std::string>{"signal"});
    }
}

TEST(Evaluate, RejectsBadRoleSets) {
    const auto train = share(separable(1, DataRole::train_cv));
    const std::vector<ml::ClassifierSpec> dt{ml::ClassifierSpec::decision_tree(2, 0)};
    expect_code(errc::invalid_argument, [&] { evaluate("a", dt, std::nullopt, {{DataRole::hpo, "h", share(separable(1, DataRole::hpo))}}); });
    expect_code(errc::invalid_argument, [&] {
        evaluate("a", dt, std::nullopt, {{DataRole::train_cv, "t", train}, {DataRole::train_cv, "u", share(separable(2, DataRole::train_cv))}});
    });
    expect_code(errc::role_violation, [&] { evaluate("a", dt, std::nullopt, {{DataRole::session_test, "t", train}}); });
    expect_code(errc::role_violation, [&] {
        evaluate("a", dt, std::nullopt, {{DataRole::train_cv, "t", train}, {DataRole::dataset_test, "d", share([&] {
                                              auto copy = *train;
                                              copy.role = DataRole::dataset_test;
                                              return copy;
                                          }())}});
    });
    expect_code(errc::schema_mismatch, [&] { evaluate("a", dt, std::vector<std::string>{"nope"}, {{DataRole::train_cv, "t", train}}); });
    auto few = separable(3, DataRole::train_cv, 30);
    expect_code(errc::class_too_small, [&] {
        EvalConfig cfg;
        cfg.folds = 20;
        evaluate("a", dt, std::nullopt, {{DataRole::train_cv, "t", share(few)}}, cfg);
    });
}

TEST(Evaluate, RendersTableShapedReports) {
    const std::vector<TaggedTable> tables{{DataRole::train_cv, "train", share(separable(1, DataRole::train_cv))},
                                          {DataRole::dataset_test, "dataset", share(separable(3, DataRole::dataset_test))}};
    const auto reports = evaluate("UDP", {ml::ClassifierSpec::decision_tree(0, 0), ml::ClassifierSpec::gaussian_nb()}, std::nullopt, tables);
    std::ostringstream csv, md;
    write_table_csv(reports, csv);
    EXPECT_EQ(csv.str(),
              "attack,model,cv_folds,cv_f1_mean,cv_f1_std,session_f1,dataset_f1\n"
              "UDP,dt,10,1,0,,1\n"
              "UDP,nb,10,1,0,,1\n");
    write_table_markdown(reports, md);
    EXPECT_NE(md.str().find(std::string(cv_convention)), std::string::npos);
    EXPECT_NE(md.str().find("| UDP | dt | 1.000 ± 0.000 | - | 1.000 |"), std::string::npos);
    const auto j = to_json(reports);
    EXPECT_EQ(j["reports"].size(), 2u);
    EXPECT_EQ(j["cv_convention"], std::string(cv_convention));
}

// ---- permutation importance ------------------------------------------------

TEST(PermutationImportance, IgnoredFeatureScoresExactlyZero) {
    const auto train = separable(1, DataRole::train_cv);
    const auto model = ml::fit(ml::ClassifierSpec::decision_tree(1, 0), train);
    const auto rep = permutation_importance(model, separable(2, DataRole::validation), 5, 3);
    EXPECT_EQ(rep.features[1].feature, "x1");
    EXPECT_EQ(rep.features[1].importance, 0.0);
    EXPECT_EQ(rep.features[1].importance_std, 0.0);
    EXPECT_EQ(rep.baseline_f1, 1.0);
    EXPECT_GT(rep.features[0].importance, 0.5);
    EXPECT_EQ(ranking(rep).front(), 0u);
}

TEST(PermutationImportance, SingleFeatureModelDropsToChance) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        rng g(seed);
        auto gen = [&](auto, auto, int y) { return y ? 0.6 + 0.4 * g.uniform() : 0.5 * g.uniform(); };
        auto lab = [&](std::size_t) { return g.bernoulli(0.3) ? 1 : 0; };
        const auto train = make_table({"x"}, 1000, gen, lab, DataRole::train_cv);
        const auto test = make_table({"x"}, 2000, gen, lab, DataRole::session_test);
        const auto model = ml::fit(ml::ClassifierSpec::decision_tree(0, 0), train);
        const auto rep = permutation_importance(model, test, 10, seed);
        const double chance = chance_f1(test.positive_rate());
        EXPECT_EQ(rep.baseline_f1, 1.0);
        EXPECT_NEAR(rep.features[0].importance, rep.baseline_f1 - chance, 0.03) << "seed " << seed;
    }
}

TEST(PermutationImportance, PlantedSubsetRanksFirst) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto fx = planted_iid(seed);
        const auto model = ml::fit(ml::ClassifierSpec::decision_tree(8, 0), fx.train);
        const auto rep = permutation_importance(model, fx.held_out, 3, seed);
        const auto order = ranking(rep);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& name = rep.features[order[i]].feature;
            EXPECT_NE(std::find(fx.informative.begin(), fx.informative.end(), name), fx.informative.end())
                << "seed " << seed << " rank " << i + 1 << ": " << name;
        }
    }
}

TEST(PermutationImportance, DominantFeatureRanksFirst) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto fx = dominant_feature(seed);
        const auto model = ml::fit(ml::ClassifierSpec::random_forest(20, seed), fx.train);
        const auto rep = permutation_importance(model, fx.held_out, 3, seed);
        hits += rep.features[ranking(rep).front()].feature == "dominant";
    }
    EXPECT_EQ(hits, 20);
}

TEST(PermutationImportance, Preconditions) {
    const auto train = separable(1, DataRole::train_cv);
    const auto model = ml::fit(ml::ClassifierSpec::decision_tree(1, 0), train);
    expect_code(errc::table_too_small, [&] { permutation_importance(model, separable(2, DataRole::validation, 49)); });
    expect_code(errc::invalid_argument, [&] { permutation_importance(model, separable(2, DataRole::validation), 2); });
    expect_code(errc::role_violation, [&] { permutation_importance(model, train); });
    auto other = project(separable(2, DataRole::validation), {"x1", "x0"});
    expect_code(errc::schema_hash_mismatch, [&] { permutation_importance(model, other); });
}

TEST(PermutationImportance, DeterministicAndJobIndependent) {
    const auto fx = planted_subset(4, 600);
    const auto model = ml::fit(ml::ClassifierSpec::random_forest(5, 1), fx.train);
    const auto a = to_json(permutation_importance(model, fx.validation, 3, 8, 1)).dump();
    EXPECT_EQ(a, to_json(permutation_importance(model, fx.validation, 3, 8, 4)).dump());
    EXPECT_NE(a, to_json(permutation_importance(model, fx.validation, 3, 9, 1)).dump());
}

// ---- Monte-Carlo Shapley ---------------------------------------------------

TEST(Shapley, ConstantModelHasZeroAttributions) {
    rng g(1);
    const auto t = make_table({"a", "b", "c"}, 80, [&](auto, auto, int) { return g.normal(); }, [](std::size_t r) { return int(r % 2); });
    ShapleyConfig cfg;
    cfg.background_size = 20;
    cfg.samples = 100;
    cfg.max_rows = 30;
    const auto rep = shapley_mc(ConstantScorer{0.7}, t, cfg);
    ASSERT_EQ(rep.rows.size(), 30u);
    for (const auto& r : rep.rows) {
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(r.phi[j], 0.0);
            EXPECT_EQ(r.se[j], 0.0);
        }
        EXPECT_TRUE(r.efficient());
    }
}

TEST(Shapley, AdditiveModelRecoversMarginalTerms) {
    rng g(2);
    // Background rows come in (v, -v) pairs, so its mean is zero.
    std::vector<double> half;
    for (int i = 0; i < 20; ++i) half.push_back(g.normal());
    const auto bg = make_table({"x1", "x2"}, 40, [&](std::size_t r, std::size_t c, int) {
        const double v = half[(r / 2) * 2 % 20 + c];
        return r % 2 ? -v : v;
    }, [](std::size_t) { return 0; });
    const auto ex = make_table({"x1", "x2"}, 25, [&](auto, auto, int) { return g.uniform(-3.0, 3.0); }, [](std::size_t) { return 0; });
    ShapleyConfig cfg;
    cfg.samples = 200;
    cfg.seed = 5;
    const auto rep = shapley_mc(AdditiveScorer{}, ex, bg, cfg);
    for (const auto& r : rep.rows) {
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_GT(r.se[j], 0.0);
            EXPECT_LE(std::abs(r.phi[j] - ex.at(r.row, j)), 3.0 * r.se[j] + 1e-12);
        }
        EXPECT_NEAR(r.expected, 0.0, 1e-12);
        EXPECT_TRUE(r.efficient());
    }
}

TEST(Shapley, EfficiencyOnRandomDepthThreeTree) {
    for (std::size_t samples : {std::size_t{200}, std::size_t{130}}) {
        rng g(3);
        const auto t = make_table({"a", "b", "c", "d", "e"}, 600, [&](auto, auto, int) { return g.uniform(); },
                                  [&](std::size_t) { return g.bernoulli(0.5) ? 1 : 0; });
        const auto model = ml::fit(ml::ClassifierSpec::decision_tree(3, 0), t);
        ShapleyConfig cfg;
        cfg.samples = samples;
        cfg.background_size = 50;
        cfg.max_rows = 100;
        cfg.seed = 17;
        const auto rep = shapley_mc(model, t, cfg);
        EXPECT_EQ(rep.rows.size(), 100u);
        EXPECT_GE(rep.efficient_fraction(), 0.95) << samples << " samples";
    }
}

TEST(Shapley, PreconditionsAndDeterminism) {
    rng g(4);
    const auto t = make_table({"a", "b"}, 40, [&](auto, auto, int) { return g.uniform(); }, [](std::size_t r) { return int(r % 2); });
    ShapleyConfig cfg;
    cfg.background_size = 9;
    expect_code(errc::invalid_argument, [&] { shapley_mc(ConstantScorer{1}, t, cfg); });
    cfg.background_size = 10;
    cfg.samples = 99;
    expect_code(errc::invalid_argument, [&] { shapley_mc(ConstantScorer{1}, t, cfg); });
    cfg.samples = 100;
    cfg.background_size = 41;
    expect_code(errc::table_too_small, [&] { shapley_mc(ConstantScorer{1}, t, cfg); });
    cfg.background_size = 10;
    const auto a = shapley_mc(AdditiveScorer{}, t, cfg);
    cfg.jobs = 3;
    const auto b = shapley_mc(AdditiveScorer{}, t, cfg);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].row, b.rows[i].row);
        EXPECT_EQ(a.rows[i].phi, b.rows[i].phi);
    }
}

TEST(Attribution, CsvIsRankedAndCarriesShapley) {
    const auto fx = planted_subset(1, 600);
    const auto model = ml::fit(ml::ClassifierSpec::decision_tree(8, 0), fx.train);
    auto rep = permutation_importance(model, fx.validation, 3, 0);
    ShapleyConfig cfg;
    cfg.max_rows = 10;
    attach_shapley(rep, shapley_mc(model, fx.validation, cfg));
    std::ostringstream out;
    write_attribution_csv(rep, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "rank,feature,importance,importance_std,shapley_mean_abs,shapley_mean_se");
    double prev = std::numeric_limits<double>::infinity();
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        ASSERT_EQ(cells.size(), 6u) << line;
        EXPECT_EQ(cells[0], std::to_string(rows));
        const double imp = std::stod(cells[2]);
        EXPECT_LE(imp, prev);
        prev = imp;
    }
    EXPECT_EQ(rows, 20);
    EXPECT_EQ(to_json(rep)["shapley"]["rows"], 10);
}

// ---- probe -----------------------------------------------------------------

TEST(Probe, ConstantAttackSizeIsNearPerfect) {
    const auto train = capture_table(1, true);
    const auto test = capture_table(2, true);
    const auto r = probe_single_feature("pck_size", train, test);
    EXPECT_GE(r.bundle.f1, 0.99);
    EXPECT_GE(r.bundle.kappa, 0.99);
    EXPECT_EQ(r.test_rows, test.rows());
    EXPECT_GT(r.bundle.f1, r.chance_f1);
}

TEST(Probe, ScrambledAttackSizeCarriesNoSignal) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = probe_single_feature("pck_size", capture_table(10 + 2 * seed, false), capture_table(11 + 2 * seed, false));
        EXPECT_LE(r.bundle.kappa, 0.05) << "seed " << seed;
    }
}

TEST(Probe, NoiseFeatureKappaSmallAtTwoThousandRows) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        rng g(seed);
        auto gen = [&](auto, auto, int) { return g.uniform(); };
        auto lab = [&](std::size_t) { return g.bernoulli(0.4) ? 1 : 0; };
        const auto train = make_table({"noise"}, 2000, gen, lab);
        const auto test = make_table({"noise"}, 2000, gen, lab);
        EXPECT_LE(probe_single_feature("noise", train, test, seed).bundle.kappa, 0.05) << "seed " << seed;
    }
}

TEST(Probe, ConstantFeatureHasZeroKappa) {
    rng g(3);
    auto lab = [&](std::size_t) { return g.bernoulli(0.4) ? 1 : 0; };
    const auto train = make_table({"c"}, 500, [](auto, auto, int) { return 7.0; }, lab);
    const auto test = make_table({"c"}, 500, [](auto, auto, int) { return 7.0; }, lab);
    EXPECT_EQ(probe_single_feature("c", train, test).bundle.kappa, 0.0);
}

TEST(Probe, UnknownFeatureAndReport) {
    const auto t = separable(1, DataRole::train_cv);
    expect_code(errc::unknown_feature, [&] { probe_single_feature("nope", t, t); });
    auto u = project(t, {"x1"});
    expect_code(errc::unknown_feature, [&] { probe_single_feature("x0", t, u); });
    const auto r = probe_single_feature("x0", t, separable(2, DataRole::validation));
    EXPECT_EQ(r.prevalence, separable(2, DataRole::validation).positive_rate());
    EXPECT_EQ(r.chance_f1, r.prevalence);
    const auto j = to_json(r);
    EXPECT_EQ(j["chance_note"], std::string(chance_f1_note));
    EXPECT_EQ(j["metrics"]["f1"], 1.0);
}
