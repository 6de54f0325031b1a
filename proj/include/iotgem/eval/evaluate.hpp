#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../hash.hpp"
#include "../metrics.hpp"
#include "../ml/model.hpp"
#include "../parallel.hpp"
#include "../rng.hpp"
#include "../roles.hpp"
#include "../split.hpp"
#include "../table.hpp"

namespace iotgem::eval {

/// Plain per-metric values, used for fold means and standard deviations.
struct MetricSummary {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double kappa = 0.0;
};

/// Cross-validation result: every fold's bundle plus their mean and
/// population standard deviation (fold order, divisor k).
struct CvSummary {
    int folds = 0;
    std::vector<MetricBundle> per_fold;
    MetricSummary mean;
    MetricSummary std;
};

inline CvSummary summarise_folds(std::vector<MetricBundle> per_fold) {
    CvSummary s;
    s.folds = static_cast<int>(per_fold.size());
    s.per_fold = std::move(per_fold);
    if (s.per_fold.empty()) return s;
    const double k = static_cast<double>(s.per_fold.size());
    auto fields = [](auto& m) { return std::array<std::remove_reference_t<decltype(m.f1)>*, 5>{&m.accuracy, &m.precision, &m.recall, &m.f1, &m.kappa}; };
    auto mean = fields(s.mean);
    auto sd = fields(s.std);
    for (std::size_t f = 0; f < 5; ++f) {
        double sum = 0.0;
        for (auto& b : s.per_fold) sum += *fields(b)[f];
        *mean[f] = sum / k;
        double sq = 0.0;
        for (auto& b : s.per_fold) {
            const double d = *fields(b)[f] - *mean[f];
            sq += d * d;
        }
        *sd[f] = std::sqrt(sq / k);
    }
    return s;
}

struct StageTimings {
    double cv_seconds = 0.0;
    double full_fit_seconds = 0.0;
    double session_test_seconds = 0.0;
    double dataset_test_seconds = 0.0;
};

struct EvalReport {
    std::string attack;
    ml::ClassifierSpec spec;
    std::vector<std::string> features;
    std::string schema_hash;
    std::uint64_t seed = 0;
    CvSummary cv;
    std::optional<MetricBundle> session_test;
    std::optional<MetricBundle> dataset_test;
    std::string manifest;  // path of the run manifest, when one is written
    StageTimings timings;
};

struct EvalConfig {
    int folds = 10;
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    void validate() const {
        if (folds < 2) fail(errc::invalid_argument, "evaluation needs at least 2 folds");
    }
};

inline constexpr std::string_view cv_convention =
    "CV = mean and population std of per-fold scores over k stratified folds of TRAIN_CV; "
    "Session and Dataset = one model fitted on all TRAIN_CV rows and scored on SESSION_TEST / DATASET_TEST";

/// Seed used for a stochastic spec that does not carry one.
inline ml::ClassifierSpec seeded_spec(ml::ClassifierSpec spec, std::uint64_t seed) {
    if (ml::is_stochastic(spec.kind) && !spec.seed) spec.seed = derive_seed(seed, fnv1a64(ml::to_string(spec.kind)));
    return spec;
}

namespace detail {

inline const TaggedTable* find_role(const std::vector<TaggedTable>& tables, DataRole role) {
    const TaggedTable* hit = nullptr;
    for (const auto& t : tables) {
        if (t.role != role) continue;
        if (hit) fail(errc::invalid_argument, "more than one " + std::string(to_string(role)) + " table supplied");
        hit = &t;
    }
    return hit;
}

inline FeatureTable prepare(const TaggedTable& t, const std::optional<std::vector<std::string>>& features) {
    if (!t.table) fail(errc::invalid_argument, "table '" + t.name + "' is null");
    FeatureTable out = features ? project(*t.table, *features) : *t.table;
    out.role = t.role;
    return out;
}

inline MetricBundle score_on(const ml::TrainedModel& m, const FeatureTable& t) {
    return metric_bundle(t.labels, ml::predict(m, t));
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// Runs every spec through k-fold CV on TRAIN_CV and, when supplied, the
/// SESSION_TEST and DATASET_TEST scenarios. `features` (a selection mask's
/// names) projects every table first. Reports come back in spec order.
inline std::vector<EvalReport> evaluate(const std::string& attack, const std::vector<ml::ClassifierSpec>& specs,
                                        const std::optional<std::vector<std::string>>& features,
                                        const std::vector<TaggedTable>& tables, const EvalConfig& cfg = {}) {
    cfg.validate();
    if (specs.empty()) fail(errc::invalid_argument, "no classifier specs to evaluate");
    enforce_roles(Stage::evaluation, tables);
    const TaggedTable* train_tag = detail::find_role(tables, DataRole::train_cv);
    if (!train_tag) fail(errc::invalid_argument, "evaluation needs a TRAIN_CV table");
    const TaggedTable* session_tag = detail::find_role(tables, DataRole::session_test);
    const TaggedTable* dataset_tag = detail::find_role(tables, DataRole::dataset_test);

    const FeatureTable train = detail::prepare(*train_tag, features);
    require_role(Stage::evaluation, train, DataRole::train_cv, "training");
    std::optional<FeatureTable> session, dataset;
    if (session_tag) session = detail::prepare(*session_tag, features);
    if (dataset_tag) dataset = detail::prepare(*dataset_tag, features);
    for (const auto* t : {&session, &dataset})
        if (*t && (*t)->schema_hash != train.schema_hash)
            fail(errc::schema_hash_mismatch, "test table schema " + (*t)->schema_hash + " differs from TRAIN_CV " +
                                                 train.schema_hash);

    const auto folds = stratified_kfold(train, cfg.folds, cfg.seed);
    std::vector<FeatureTable> fold_train, fold_test;
    for (const auto& f : folds) {
        fold_train.push_back(take_rows(train, f.train));
        fold_test.push_back(take_rows(train, f.test));
    }

    std::vector<ml::ClassifierSpec> seeded;
    for (const auto& s : specs) seeded.push_back(seeded_spec(s, cfg.seed));

    const std::size_t per_spec = folds.size() + 1;
    std::vector<MetricBundle> fold_out(specs.size() * folds.size());
    std::vector<double> fold_seconds(fold_out.size(), 0.0);
    std::vector<std::optional<MetricBundle>> session_out(specs.size()), dataset_out(specs.size());
    std::vector<StageTimings> timings(specs.size());

    parallel_for(specs.size() * per_spec, cfg.jobs, [&](std::size_t task) {
        const std::size_t s = task / per_spec;
        const std::size_t f = task % per_spec;
        const auto start = std::chrono::steady_clock::now();
        if (f < folds.size()) {
            const auto model = ml::fit(seeded[s], fold_train[f]);
            fold_out[s * folds.size() + f] = detail::score_on(model, fold_test[f]);
            fold_seconds[s * folds.size() + f] = detail::seconds_since(start);
            return;
        }
        const auto model = ml::fit(seeded[s], train);
        timings[s].full_fit_seconds = detail::seconds_since(start);
        if (session) {
            const auto t0 = std::chrono::steady_clock::now();
            session_out[s] = detail::score_on(model, *session);
            timings[s].session_test_seconds = detail::seconds_since(t0);
        }
        if (dataset) {
            const auto t0 = std::chrono::steady_clock::now();
            dataset_out[s] = detail::score_on(model, *dataset);
            timings[s].dataset_test_seconds = detail::seconds_since(t0);
        }
    });

    std::vector<EvalReport> out;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        EvalReport r;
        r.attack = attack;
        r.spec = seeded[s];
        r.features = train.columns;
        r.schema_hash = train.schema_hash;
        r.seed = cfg.seed;
        const auto first = fold_out.begin() + static_cast<std::ptrdiff_t>(s * folds.size());
        r.cv = summarise_folds({first, first + static_cast<std::ptrdiff_t>(folds.size())});
        if (r.cv.folds != cfg.folds) fail(errc::invariant_failure, "CV summary does not aggregate every fold");
        for (std::size_t f = 0; f < folds.size(); ++f) timings[s].cv_seconds += fold_seconds[s * folds.size() + f];
        r.session_test = session_out[s];
        r.dataset_test = dataset_out[s];
        r.timings = timings[s];
        out.push_back(std::move(r));
    }
    return out;
}

// ---- serialisation ---------------------------------------------------------

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

inline nlohmann::json to_json(const MetricBundle& b) {
    return {{"accuracy", b.accuracy}, {"precision", b.precision}, {"recall", b.recall},
            {"f1", b.f1},             {"kappa", b.kappa},         {"confusion", to_json(b.cm)}};
}

inline nlohmann::json to_json(const MetricSummary& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"kappa", m.kappa}};
}

inline nlohmann::json to_json(const StageTimings& t) {
    return {{"cv_seconds", t.cv_seconds},
            {"full_fit_seconds", t.full_fit_seconds},
            {"session_test_seconds", t.session_test_seconds},
            {"dataset_test_seconds", t.dataset_test_seconds}};
}

/// Report body without wall-clock timings, so equal inputs give equal bytes.
inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (std::size_t i = 0; i < r.cv.per_fold.size(); ++i) {
        auto j = to_json(r.cv.per_fold[i]);
        j["fold"] = i;
        folds.push_back(std::move(j));
    }
    nlohmann::json j{{"attack", r.attack},
                     {"model", ml::short_name(r.spec.kind)},
                     {"spec", r.spec.to_json()},
                     {"features", r.features},
                     {"schema_hash", r.schema_hash},
                     {"seed", r.seed},
                     {"cv", {{"folds", r.cv.folds}, {"mean", to_json(r.cv.mean)}, {"std", to_json(r.cv.std)}, {"per_fold", folds}}}};
    if (r.session_test) j["session_test"] = to_json(*r.session_test);
    if (r.dataset_test) j["dataset_test"] = to_json(*r.dataset_test);
    if (!r.manifest.empty()) j["manifest"] = r.manifest;
    return j;
}

inline nlohmann::json to_json(const std::vector<EvalReport>& reports) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : reports) list.push_back(to_json(r));
    return {{"format", "iotgem-eval"}, {"version", 1}, {"cv_convention", cv_convention}, {"reports", list}};
}

namespace detail {

inline MetricBundle bundle_from_json(const nlohmann::json& j) {
    MetricBundle b;
    const auto& cm = j.at("confusion");
    b.cm = {cm.at("tp").get<std::uint64_t>(), cm.at("fp").get<std::uint64_t>(), cm.at("tn").get<std::uint64_t>(),
            cm.at("fn").get<std::uint64_t>()};
    b.accuracy = j.at("accuracy").get<double>();
    b.precision = j.at("precision").get<double>();
    b.recall = j.at("recall").get<double>();
    b.f1 = j.at("f1").get<double>();
    b.kappa = j.at("kappa").get<double>();
    return b;
}

}  // namespace detail

/// Reads reports written by to_json(std::vector<EvalReport>). CV means and
/// standard deviations are recomputed from the fold log. Timings are not
/// stored there and come back as zero.
inline std::vector<EvalReport> reports_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != "iotgem-eval")
        fail(errc::invalid_argument, "not an iotgem evaluation report");
    std::vector<EvalReport> out;
    for (const auto& rj : j.at("reports")) {
        EvalReport r;
        r.attack = rj.at("attack").get<std::string>();
        r.spec = ml::ClassifierSpec::from_json(rj.at("spec"));
        r.features = rj.at("features").get<std::vector<std::string>>();
        r.schema_hash = rj.at("schema_hash").get<std::string>();
        r.seed = rj.at("seed").get<std::uint64_t>();
        const auto& cv = rj.at("cv");
        std::vector<MetricBundle> folds;
        for (const auto& f : cv.at("per_fold")) folds.push_back(detail::bundle_from_json(f));
        r.cv = summarise_folds(std::move(folds));
        if (r.cv.folds != cv.at("folds").get<int>())
            fail(errc::invalid_argument, "report for " + r.attack + " lists a fold count that differs from its fold log");
        if (rj.contains("session_test")) r.session_test = detail::bundle_from_json(rj.at("session_test"));
        if (rj.contains("dataset_test")) r.dataset_test = detail::bundle_from_json(rj.at("dataset_test"));
        r.manifest = rj.value("manifest", std::string());
        out.push_back(std::move(r));
    }
    return out;
}

namespace detail {

inline std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace detail

/// One row per (attack, model); empty cells for scenarios that were not run.
inline void write_table_csv(const std::vector<EvalReport>& reports, std::ostream& out) {
    out << "attack,model,cv_folds,cv_f1_mean,cv_f1_std,session_f1,dataset_f1\n";
    for (const auto& r : reports) {
        out << r.attack << ',' << ml::short_name(r.spec.kind) << ',' << r.cv.folds << ',' << format_number(r.cv.mean.f1)
            << ',' << format_number(r.cv.std.f1) << ',';
        if (r.session_test) out << format_number(r.session_test->f1);
        out << ',';
        if (r.dataset_test) out << format_number(r.dataset_test->f1);
        out << '\n';
    }
}

inline void write_table_markdown(const std::vector<EvalReport>& reports, std::ostream& out) {
    out << "<!-- " << cv_convention << " -->\n\n";
    out << "| Attack | Model | CV F1 | Session F1 | Dataset F1 |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& r : reports) {
        out << "| " << r.attack << " | " << ml::short_name(r.spec.kind) << " | " << detail::fixed3(r.cv.mean.f1)
            << " ± " << detail::fixed3(r.cv.std.f1) << " | "
            << (r.session_test ? detail::fixed3(r.session_test->f1) : std::string("-")) << " | "
            << (r.dataset_test ? detail::fixed3(r.dataset_test->f1) : std::string("-")) << " |\n";
    }
}

}  // namespace iotgem::eval
