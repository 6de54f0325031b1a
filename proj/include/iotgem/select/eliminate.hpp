#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../metrics.hpp"
#include "../ml/model.hpp"
#include "../parallel.hpp"
#include "../roles.hpp"
#include "../schema.hpp"
#include "../split.hpp"
#include "../table.hpp"

namespace iotgem::select {

/// Outcome of the three-scenario vote for one feature.
struct VoteRecord {
    std::string feature;
    double kappa_cv = 0.0;        // mean over folds within TRAIN_CV
    double kappa_session = 0.0;   // fit TRAIN_CV, score HPO
    double kappa_external = 0.0;  // fit TRAIN_CV, score VALIDATION
    int votes = 0;
    bool kept = false;
};

/// A vote is granted for kappa strictly above zero. A feature survives with
/// at least two votes, one of which must come from the external scenario.
constexpr bool vote_keeps(double kappa_cv, double kappa_session, double kappa_external) noexcept {
    const int votes = (kappa_cv > 0) + (kappa_session > 0) + (kappa_external > 0);
    return votes >= 2 && kappa_external > 0;
}

inline VoteRecord make_vote(std::string feature, double k_cv, double k_session, double k_external) {
    VoteRecord v{std::move(feature), k_cv, k_session, k_external, 0, false};
    v.votes = (k_cv > 0) + (k_session > 0) + (k_external > 0);
    v.kept = vote_keeps(k_cv, k_session, k_external);
    return v;
}

/// Single-feature model used for voting and for the leakage probe. A split
/// is kept only when its class-by-side chi-square reaches 15.14 (p = 1e-4 at
/// one degree of freedom), so a column without signal collapses to a
/// constant prediction whose kappa is exactly 0. The best of 25 random
/// thresholds is considered at each node so one poor draw does not end a
/// branch early.
inline ml::ClassifierSpec single_feature_model(std::uint64_t seed = 0) {
    auto spec = ml::ClassifierSpec::extra_tree(seed);
    spec.threshold_candidates = 25;
    spec.min_split_chi2 = 15.14;
    return spec;
}

struct EliminationConfig {
    int cv_folds = 5;
    ml::ClassifierSpec model = single_feature_model();
    /// Step-1 removals. Unset means the identifier columns that are present;
    /// an explicit list must name existing features.
    std::optional<std::vector<std::string>> manual_drop;
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    void validate() const {
        if (cv_folds < 2) fail(errc::invalid_argument, "elimination needs at least 2 CV folds");
        model.validate();
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"cv_folds", cv_folds}, {"model", model.to_json()}, {"seed", seed}};
        j["manual_drop"] = manual_drop ? nlohmann::json(*manual_drop) : nlohmann::json("default-identifiers");
        return j;
    }
};

struct EliminationResult {
    std::vector<std::string> manually_dropped;
    std::vector<VoteRecord> votes;       // one per feature that reached the vote, in schema order
    std::vector<std::string> survivors;  // in schema order
    std::string source_schema_hash;
    std::string survivor_schema_hash;
};

/// Thrown when no feature survives. Carries the full result for reporting.
class EmptySurvivorSet : public error {
public:
    explicit EmptySurvivorSet(EliminationResult r)
        : error(errc::empty_survivor_set, "no feature survived elimination (" + std::to_string(r.votes.size()) +
                                              " voted)"),
          result_(std::move(r)) {}
    const EliminationResult& result() const noexcept { return result_; }

private:
    EliminationResult result_;
};

namespace detail {

inline FeatureTable column_table(const FeatureTable& t, std::size_t col) {
    FeatureTable out;
    out.columns = {t.columns[col]};
    out.schema_hash = schema_hash(out.columns);
    out.labels = t.labels;
    out.values.resize(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) out.values[r] = t.at(r, col);
    return out;
}

inline double holdout_kappa(const ml::TrainedModel& m, const FeatureTable& test) {
    return cohen_kappa(test.labels, ml::predict(m, test));
}

}  // namespace detail

/// Per-feature seed, independent of which other features are present.
inline std::uint64_t feature_seed(std::uint64_t seed, std::string_view feature) {
    return derive_seed(seed, fnv1a64(feature));
}

/// Three-scenario kappa for one column, fitted with `model` reseeded per feature.
inline VoteRecord vote_feature(const FeatureTable& train, const FeatureTable& hpo, const FeatureTable& external,
                               std::size_t col, const EliminationConfig& cfg, const std::vector<FoldSplit>& folds) {
    const auto& name = train.columns[col];
    auto spec = cfg.model;
    spec.seed = feature_seed(cfg.seed, name);
    const auto tr = detail::column_table(train, col);

    double cv = 0.0;
    for (const auto& f : folds) {
        const auto fold_train = take_rows(tr, f.train);
        const auto fold_test = take_rows(tr, f.test);
        cv += detail::holdout_kappa(ml::fit(spec, fold_train), fold_test);
    }
    cv /= static_cast<double>(folds.size());

    const auto model = ml::fit(spec, tr);
    const double ks = detail::holdout_kappa(model, detail::column_table(hpo, col));
    const double ke = detail::holdout_kappa(model, detail::column_table(external, col));
    return make_vote(name, cv, ks, ke);
}

/// Step 1 removes `manual_drop`; steps 2 and 3 vote on every remaining feature.
inline EliminationResult eliminate(const FeatureTable& train, const FeatureTable& hpo, const FeatureTable& external,
                                   const EliminationConfig& cfg = {}) {
    cfg.validate();
    require_role(Stage::elimination, train, DataRole::train_cv, "training");
    require_role(Stage::elimination, hpo, DataRole::hpo, "session scoring");
    require_role(Stage::elimination, external, DataRole::validation, "external scoring");
    const std::vector<TaggedTable> tagged{
        {DataRole::train_cv, "train", std::shared_ptr<const FeatureTable>(&train, [](const FeatureTable*) {})},
        {DataRole::hpo, "hpo", std::shared_ptr<const FeatureTable>(&hpo, [](const FeatureTable*) {})},
        {DataRole::validation, "validation", std::shared_ptr<const FeatureTable>(&external, [](const FeatureTable*) {})}};
    enforce_roles(Stage::elimination, tagged);
    if (hpo.schema_hash != train.schema_hash || external.schema_hash != train.schema_hash)
        fail(errc::schema_hash_mismatch, "elimination tables must share one schema (train " + train.schema_hash +
                                             ", hpo " + hpo.schema_hash + ", validation " + external.schema_hash + ")");

    const FeatureSchema schema(train.columns);
    EliminationResult res;
    res.source_schema_hash = train.schema_hash;
    std::vector<bool> dropped(schema.size(), false);
    if (cfg.manual_drop) {
        for (auto p : schema.positions(*cfg.manual_drop)) dropped[p] = true;
    } else {
        for (const auto& n : identifier_features())
            if (auto p = schema.index_of(n)) dropped[*p] = true;
    }
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (dropped[c]) res.manually_dropped.push_back(schema.names()[c]);
        else candidates.push_back(c);
    }

    const auto folds = stratified_kfold(train, cfg.cv_folds, cfg.seed);
    res.votes.resize(candidates.size());
    parallel_for(candidates.size(), cfg.jobs, [&](std::size_t i) {
        res.votes[i] = vote_feature(train, hpo, external, candidates[i], cfg, folds);
    });
    for (const auto& v : res.votes)
        if (v.kept) res.survivors.push_back(v.feature);
    res.survivor_schema_hash = schema_hash(res.survivors);
    if (res.survivors.empty()) throw EmptySurvivorSet(std::move(res));
    return res;
}

/// Vote report: feature, elimination step, three kappas, votes, kept.
/// Step-1 removals have empty kappa cells.
inline void write_votes_csv(const EliminationResult& r, std::ostream& out) {
    out << "feature,step,kappa_cv,kappa_session,kappa_external,votes,kept\n";
    for (const auto& name : r.manually_dropped) out << name << ",1,,,,0,0\n";
    for (const auto& v : r.votes)
        out << v.feature << ",2," << format_number(v.kappa_cv) << ',' << format_number(v.kappa_session) << ','
            << format_number(v.kappa_external) << ',' << v.votes << ',' << (v.kept ? "1" : "0") << '\n';
}

inline nlohmann::json to_json(const EliminationResult& r) {
    nlohmann::json votes = nlohmann::json::array();
    for (const auto& v : r.votes)
        votes.push_back({{"feature", v.feature},
                         {"kappa_cv", v.kappa_cv},
                         {"kappa_session", v.kappa_session},
                         {"kappa_external", v.kappa_external},
                         {"votes", v.votes},
                         {"kept", v.kept}});
    return {{"source_schema_hash", r.source_schema_hash},
            {"manually_dropped", r.manually_dropped},
            {"survivors", r.survivors},
            {"survivor_schema_hash", r.survivor_schema_hash},
            {"votes", votes}};
}

}  // namespace iotgem::select
