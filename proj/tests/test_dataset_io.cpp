#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "iotgem/roles.hpp"
#include "iotgem/split.hpp"
#include "iotgem/table.hpp"
#include "support/synthetic.hpp"

using namespace iotgem;
using namespace iotgem::fixtures;

namespace {

errc read_error(const std::string& text, std::optional<std::string> expected = std::nullopt) {
    std::istringstream in(text);
    try {
        (void)read_csv(in, "t.csv", expected);
    } catch (const error& e) {
        return e.code();
    }
    return errc::invariant_failure;
}

FeatureTable read_text(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in, "t.csv");
}

TablePtr tagged(DataRole role, std::uint64_t seed) {
    rng g(seed);
    auto t = make_table({"a", "b"}, 20, [&](auto, auto, int) { return g.uniform(); }, [](std::size_t r) { return static_cast<int>(r % 2); }, role);
    return std::make_shared<const FeatureTable>(std::move(t));
}

}  // namespace

TEST(LoadCsv, ThreeRows) {
    const auto t = read_text("a,b,label\n1,2,0\n3,4,1\n5,6,1\n");
    EXPECT_EQ(t.rows(), 3u);
    EXPECT_EQ(t.cols(), 2u);
    EXPECT_DOUBLE_EQ(t.positive_rate(), 2.0 / 3.0);
    EXPECT_EQ(t.at(2, 1), 6.0);
    EXPECT_EQ(t.schema_hash, schema_hash({"a", "b"}));
}

TEST(LoadCsv, SchemaHashMismatch) {
    EXPECT_EQ(read_error("# schema_hash=0000000000000000\na,b,label\n1,2,0\n"), errc::schema_hash_mismatch);
    EXPECT_EQ(read_error("a,b,label\n1,2,0\n", schema_hash({"a", "c"})), errc::schema_hash_mismatch);
    EXPECT_NO_THROW(read_text("# schema_hash=" + schema_hash({"a", "b"}) + "\na,b,label\n1,2,0\n"));
}

TEST(LoadCsv, NonFiniteRowsDropped) {
    const auto t = read_text("a,b,label\n1,2,0\ninf,4,1\n5,6,1\n7,nan,0\n8,x,1\n");
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(t.dropped_rows, 3u);
    EXPECT_EQ(t.at(1, 0), 5.0);
}

TEST(LoadCsv, Errors) {
    EXPECT_EQ(read_error("a,b\n1,2\n"), errc::missing_label_column);
    EXPECT_EQ(read_error(""), errc::missing_label_column);
    EXPECT_EQ(read_error("a,label\n"), errc::empty_table);
    EXPECT_EQ(read_error("a,label\ninf,1\n"), errc::empty_table);
    EXPECT_EQ(read_error("a,label\n1,2\n"), errc::invalid_argument);
    EXPECT_EQ(read_error("a,label\n1\n"), errc::schema_mismatch);
}

TEST(LoadCsv, ExternalFlowCsvWithTextLabels) {
    const auto t = read_text("Flow Duration, Label\r\n10,BENIGN\r\n20,ATTACK\r\n");
    EXPECT_EQ(t.columns, std::vector<std::string>{"Flow Duration"});
    EXPECT_EQ(t.labels, (std::vector<int>{0, 1}));
}

TEST(LoadCsv, RoundTripIsExact) {
    rng g(4);
    auto t = make_table({"x", "y", "z"}, 200, [&](auto, std::size_t c, int) {
        return c == 0 ? g.normal() * 1e-7 : c == 1 ? g.uniform(-1e12, 1e12) : std::floor(g.uniform(0, 100));
    }, [&](std::size_t) { return static_cast<int>(g.index(2)); });
    t.sources = {"capture.pcap"};
    const auto path = std::filesystem::temp_directory_path() / "iotgem_roundtrip.csv";
    write_csv(t, path);
    const auto back = load_csv(path, t.schema_hash);
    EXPECT_EQ(back.columns, t.columns);
    EXPECT_EQ(back.values, t.values);
    EXPECT_EQ(back.labels, t.labels);
    EXPECT_EQ(back.sources, t.sources);
    std::ostringstream a, b;
    write_csv(t, a);
    write_csv(back, b);
    EXPECT_EQ(a.str(), b.str());
    std::filesystem::remove(path);
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(0.1), "0.1");
}

TEST(TableOps, ProjectAndTakeRows) {
    const auto t = read_text("a,b,c,label\n1,2,3,0\n4,5,6,1\n");
    const auto p = project(t, {"c", "a"});
    EXPECT_EQ(p.values, (std::vector<double>{3, 1, 6, 4}));
    EXPECT_EQ(p.schema_hash, schema_hash({"c", "a"}));
    EXPECT_THROW(project(t, {"d"}), error);
    std::vector<std::size_t> idx{1, 1};
    const auto r = take_rows(t, idx);
    EXPECT_EQ(r.labels, (std::vector<int>{1, 1}));
    EXPECT_EQ(r.values, (std::vector<double>{4, 5, 6, 4, 5, 6}));
}

TEST(StratifiedKFold, ExactStratification) {
    std::vector<int> labels(100);
    for (std::size_t i = 0; i < 100; ++i) labels[i] = i < 50;
    const auto folds = stratified_kfold(labels, 10, 0);
    ASSERT_EQ(folds.size(), 10u);
    for (const auto& f : folds) {
        std::size_t pos = 0;
        for (auto i : f.test) pos += static_cast<std::size_t>(labels[i]);
        EXPECT_EQ(pos, 5u);
        EXPECT_EQ(f.test.size(), 10u);
        EXPECT_EQ(f.train.size(), 90u);
    }
}

TEST(StratifiedKFold, DeterministicAndSeedSensitive) {
    std::vector<int> labels(100);
    for (std::size_t i = 0; i < 100; ++i) labels[i] = i % 3 == 0;
    const auto a = stratified_kfold(labels, 10, 7);
    const auto b = stratified_kfold(labels, 10, 7);
    const auto c = stratified_kfold(labels, 10, 8);
    for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(a[f].test, b[f].test);
    bool differs = false;
    for (std::size_t f = 0; f < 10; ++f) differs |= a[f].test != c[f].test;
    EXPECT_TRUE(differs);
}

TEST(StratifiedKFold, ClassTooSmall) {
    std::vector<int> labels(10, 0);
    labels[3] = 1;
    try {
        (void)stratified_kfold(labels, 10, 0);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::class_too_small);
    }
    EXPECT_THROW(stratified_kfold(labels, 1, 0), error);
}

TEST(StratifiedKFold, PartitionProperty) {
    rng g(1);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(g.index(9));
        const std::size_t n = static_cast<std::size_t>(2 * k) + g.index(300);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = i < static_cast<std::size_t>(k) ? 1 : i < static_cast<std::size_t>(2 * k) ? 0 : static_cast<int>(g.index(2));
        const auto folds = stratified_kfold(labels, k, g.next());
        std::vector<int> seen(n, 0);
        std::size_t pos_total = 0;
        for (auto y : labels) pos_total += static_cast<std::size_t>(y);
        for (const auto& f : folds) {
            ASSERT_EQ(f.train.size() + f.test.size(), n);
            std::set<std::size_t> tr(f.train.begin(), f.train.end());
            std::size_t pos = 0;
            for (auto i : f.test) {
                ++seen[i];
                ASSERT_FALSE(tr.count(i));
                pos += static_cast<std::size_t>(labels[i]);
            }
            const double expected = static_cast<double>(pos_total) * static_cast<double>(f.test.size()) / static_cast<double>(n);
            ASSERT_LE(std::abs(static_cast<double>(pos) - expected), 1.0 + 1e-9);
        }
        for (auto s : seen) ASSERT_EQ(s, 1);
    }
}

TEST(EnforceRoles, SpecExamples) {
    std::vector<TaggedTable> ga{{DataRole::train_cv, "a", tagged(DataRole::train_cv, 1)},
                                {DataRole::dataset_test, "c", tagged(DataRole::dataset_test, 2)}};
    try {
        (void)enforce_roles(Stage::ga_fitness, ga);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::role_violation);
        EXPECT_NE(std::string(e.what()).find("ga-fitness"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos);
        EXPECT_EQ(exit_code_for(e.code()), 3);
    }
    std::vector<TaggedTable> all;
    for (auto r : all_roles) all.push_back({r, std::string(to_string(r)), tagged(r, static_cast<std::uint64_t>(r) + 10)});
    EXPECT_EQ(enforce_roles(Stage::evaluation, all).size(), 5u);
    std::vector<TaggedTable> elim(all.begin(), all.begin() + 3);
    EXPECT_EQ(enforce_roles(Stage::elimination, elim).size(), 3u);
}

TEST(EnforceRoles, IdenticalContentUnderTwoRolesIsRejected) {
    auto a = tagged(DataRole::train_cv, 1);
    auto copy = std::make_shared<FeatureTable>(*a);
    copy->role = DataRole::validation;
    std::vector<TaggedTable> v{{DataRole::train_cv, "a", a}, {DataRole::validation, "b", copy}};
    EXPECT_THROW(enforce_roles(Stage::ga_fitness, v), error);
}

TEST(EnforceRoles, MismatchedTagIsRejected) {
    std::vector<TaggedTable> v{{DataRole::validation, "a", tagged(DataRole::session_test, 1)}};
    EXPECT_THROW(enforce_roles(Stage::elimination, v), error);
    EXPECT_THROW(require_role(Stage::ga_fitness, *tagged(DataRole::hpo, 1), DataRole::validation, "scoring"), error);
    EXPECT_NO_THROW(require_role(Stage::ga_fitness, *tagged(DataRole::validation, 1), DataRole::validation, "scoring"));
}

TEST(EnforceRoles, FuzzedStageRoleAssignmentsNeverLeak) {
    rng g(123);
    const Stage stages[]{Stage::elimination, Stage::ga_fitness, Stage::evaluation};
    for (int trial = 0; trial < 1000; ++trial) {
        const Stage stage = stages[g.index(3)];
        std::vector<TaggedTable> v;
        bool has_forbidden = false;
        const auto n = 1 + g.index(5);
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto role = all_roles[g.index(5)];
            v.push_back({role, "t" + std::to_string(i), tagged(role, static_cast<std::uint64_t>(trial) * 10 + i)});
            const bool test_role = role == DataRole::session_test || role == DataRole::dataset_test;
            if (stage != Stage::evaluation && test_role) has_forbidden = true;
            if (stage == Stage::ga_fitness && role == DataRole::hpo) has_forbidden = true;
        }
        if (has_forbidden) {
            EXPECT_THROW(enforce_roles(stage, v), error);
        } else {
            EXPECT_EQ(enforce_roles(stage, v).size(), v.size());
        }
    }
}
