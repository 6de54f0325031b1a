#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../metrics.hpp"
#include "../ml/model.hpp"
#include "../select/eliminate.hpp"
#include "../table.hpp"
#include "evaluate.hpp"

namespace iotgem::eval {

struct ProbeResult {
    std::string feature;
    MetricBundle bundle;
    double prevalence = 0.0;  // positive share of the test table
    double chance_f1 = 0.0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::string_view chance_f1_note =
    "chance F1 = positive prevalence of the test table, the expected F1 of a classifier that ignores its input "
    "and flags rows positive at the prevalence rate";

/// Expected F1 of label-independent guessing at the prevalence rate p:
/// precision and recall are both p.
constexpr double chance_f1(double prevalence) noexcept { return prevalence; }

/// Fits the single-feature ExtraTree on one column of `train` and scores it
/// on the same column of `test`.
inline ProbeResult probe_single_feature(const std::string& feature, const FeatureTable& train, const FeatureTable& test,
                                        std::uint64_t seed = 0) {
    for (const auto* t : {&train, &test})
        if (!t->column_index(feature))
            fail(errc::unknown_feature, "feature '" + feature + "' is not a column of both tables");
    const auto tr = project(train, {feature});
    const auto te = project(test, {feature});
    const auto model = ml::fit(select::single_feature_model(seed), tr);
    ProbeResult r;
    r.feature = feature;
    r.bundle = metric_bundle(te.labels, ml::predict(model, te));
    r.prevalence = te.positive_rate();
    r.chance_f1 = chance_f1(r.prevalence);
    r.train_rows = tr.rows();
    r.test_rows = te.rows();
    r.seed = seed;
    return r;
}

inline nlohmann::json to_json(const ProbeResult& r) {
    return {{"format", "iotgem-probe"},
            {"version", 1},
            {"feature", r.feature},
            {"model", select::single_feature_model(r.seed).to_json()},
            {"metrics", to_json(r.bundle)},
            {"prevalence", r.prevalence},
            {"chance_f1", r.chance_f1},
            {"chance_note", chance_f1_note},
            {"train_rows", r.train_rows},
            {"test_rows", r.test_rows},
            {"seed", r.seed}};
}

}  // namespace iotgem::eval
