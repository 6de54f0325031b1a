#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../table.hpp"
#include "classifier.hpp"
#include "forest.hpp"
#include "knn.hpp"
#include "logistic.hpp"
#include "naive_bayes.hpp"
#include "tree.hpp"

namespace iotgem::ml {

enum class ModelKind : std::uint8_t { decision_tree, extra_tree, random_forest, gaussian_nb, knn, logistic_regression };

constexpr std::string_view to_string(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::decision_tree: return "DECISION_TREE";
        case ModelKind::extra_tree: return "EXTRA_TREE";
        case ModelKind::random_forest: return "RANDOM_FOREST";
        case ModelKind::gaussian_nb: return "GAUSSIAN_NB";
        case ModelKind::knn: return "KNN";
        case ModelKind::logistic_regression: return "LOGISTIC_REGRESSION";
    }
    return "UNKNOWN";
}

/// Short CLI name: dt, et, rf, nb, knn, lr.
constexpr std::string_view short_name(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::decision_tree: return "dt";
        case ModelKind::extra_tree: return "et";
        case ModelKind::random_forest: return "rf";
        case ModelKind::gaussian_nb: return "nb";
        case ModelKind::knn: return "knn";
        case ModelKind::logistic_regression: return "lr";
    }
    return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
    for (auto k : {ModelKind::decision_tree, ModelKind::extra_tree, ModelKind::random_forest, ModelKind::gaussian_nb,
                   ModelKind::knn, ModelKind::logistic_regression})
        if (s == to_string(k) || s == short_name(k)) return k;
    return std::nullopt;
}

constexpr bool is_stochastic(ModelKind k) noexcept {
    return k == ModelKind::extra_tree || k == ModelKind::random_forest;
}

struct ClassifierSpec {
    ModelKind kind = ModelKind::decision_tree;
    // trees
    int max_depth = 0;
    int min_samples_leaf = 1;
    double min_impurity_decrease = 0.0;
    int max_features = 0;  // 0 all, -1 sqrt
    int threshold_candidates = 1;  // extra tree only
    double min_split_chi2 = 0.0;
    // forest
    int trees = 100;
    bool bootstrap = true;
    // kNN
    int k = 5;
    // logistic regression
    double learning_rate = 0.5;
    int iterations = 300;
    double l2 = 1e-4;
    // naive Bayes
    double var_smoothing = 1e-9;
    std::optional<std::uint64_t> seed;

    static ClassifierSpec decision_tree(int max_depth = 0, std::uint64_t seed = 0) {
        ClassifierSpec s;
        s.kind = ModelKind::decision_tree;
        s.max_depth = max_depth;
        s.seed = seed;
        return s;
    }
    static ClassifierSpec extra_tree(std::uint64_t seed = 0) {
        ClassifierSpec s;
        s.kind = ModelKind::extra_tree;
        s.max_features = -1;
        s.seed = seed;
        return s;
    }
    static ClassifierSpec random_forest(int trees = 100, std::uint64_t seed = 0) {
        ClassifierSpec s;
        s.kind = ModelKind::random_forest;
        s.trees = trees;
        s.max_features = -1;
        s.seed = seed;
        return s;
    }
    static ClassifierSpec gaussian_nb() {
        ClassifierSpec s;
        s.kind = ModelKind::gaussian_nb;
        return s;
    }
    static ClassifierSpec knn(int k = 5) {
        ClassifierSpec s;
        s.kind = ModelKind::knn;
        s.k = k;
        return s;
    }
    static ClassifierSpec logistic_regression() {
        ClassifierSpec s;
        s.kind = ModelKind::logistic_regression;
        return s;
    }

    /// Documented defaults for a kind, seeded.
    static ClassifierSpec defaults(ModelKind kind, std::uint64_t seed = 0) {
        switch (kind) {
            case ModelKind::decision_tree: return decision_tree(0, seed);
            case ModelKind::extra_tree: return extra_tree(seed);
            case ModelKind::random_forest: return random_forest(100, seed);
            case ModelKind::gaussian_nb: return gaussian_nb();
            case ModelKind::knn: return knn();
            case ModelKind::logistic_regression: return logistic_regression();
        }
        return {};
    }

    void validate() const {
        auto bad = [](const std::string& what) { fail(errc::invalid_argument, "classifier spec: " + what); };
        if (max_depth < 0) bad("max_depth must be >= 0");
        if (min_samples_leaf < 1) bad("min_samples_leaf must be >= 1");
        if (!(min_impurity_decrease >= 0.0)) bad("min_impurity_decrease must be >= 0");
        if (max_features < -1) bad("max_features must be -1, 0 or positive");
        if (threshold_candidates < 1) bad("threshold_candidates must be >= 1");
        if (!(min_split_chi2 >= 0.0)) bad("min_split_chi2 must be >= 0");
        if (trees < 1 || trees > 10000) bad("trees must lie in [1, 10000]");
        if (k < 1) bad("k must be >= 1");
        if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
        if (iterations < 1) bad("iterations must be >= 1");
        if (!(l2 >= 0.0)) bad("l2 must be >= 0");
        if (!(var_smoothing >= 0.0)) bad("var_smoothing must be >= 0");
        if (is_stochastic(kind) && !seed) bad(std::string(to_string(kind)) + " requires a seed");
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"kind", to_string(kind)}};
        switch (kind) {
            case ModelKind::decision_tree:
            case ModelKind::extra_tree:
                j["max_depth"] = max_depth;
                j["min_samples_leaf"] = min_samples_leaf;
                j["min_impurity_decrease"] = min_impurity_decrease;
                j["max_features"] = max_features;
                if (kind == ModelKind::extra_tree) j["threshold_candidates"] = threshold_candidates;
                j["min_split_chi2"] = min_split_chi2;
                break;
            case ModelKind::random_forest:
                j["trees"] = trees;
                j["bootstrap"] = bootstrap;
                j["max_depth"] = max_depth;
                j["min_samples_leaf"] = min_samples_leaf;
                j["max_features"] = max_features;
                break;
            case ModelKind::gaussian_nb: j["var_smoothing"] = var_smoothing; break;
            case ModelKind::knn: j["k"] = k; break;
            case ModelKind::logistic_regression:
                j["learning_rate"] = learning_rate;
                j["iterations"] = iterations;
                j["l2"] = l2;
                break;
        }
        if (seed) j["seed"] = *seed;
        return j;
    }

    static ClassifierSpec from_json(const nlohmann::json& j) {
        auto kind = parse_model_kind(j.at("kind").get<std::string>());
        if (!kind) fail(errc::invalid_argument, "unknown model kind " + j.at("kind").dump());
        ClassifierSpec s = defaults(*kind);
        s.seed.reset();
        s.max_depth = j.value("max_depth", s.max_depth);
        s.min_samples_leaf = j.value("min_samples_leaf", s.min_samples_leaf);
        s.min_impurity_decrease = j.value("min_impurity_decrease", s.min_impurity_decrease);
        s.max_features = j.value("max_features", s.max_features);
        s.threshold_candidates = j.value("threshold_candidates", s.threshold_candidates);
        s.min_split_chi2 = j.value("min_split_chi2", s.min_split_chi2);
        s.trees = j.value("trees", s.trees);
        s.bootstrap = j.value("bootstrap", s.bootstrap);
        s.k = j.value("k", s.k);
        s.learning_rate = j.value("learning_rate", s.learning_rate);
        s.iterations = j.value("iterations", s.iterations);
        s.l2 = j.value("l2", s.l2);
        s.var_smoothing = j.value("var_smoothing", s.var_smoothing);
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        s.validate();
        return s;
    }
};

inline std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
    spec.validate();
    const std::uint64_t seed = spec.seed.value_or(0);
    switch (spec.kind) {
        case ModelKind::decision_tree:
        case ModelKind::extra_tree: {
            TreeParams p;
            p.max_depth = spec.max_depth;
            p.min_samples_leaf = spec.min_samples_leaf;
            p.min_impurity_decrease = spec.min_impurity_decrease;
            p.max_features = spec.max_features;
            p.random_thresholds = spec.kind == ModelKind::extra_tree;
            p.threshold_candidates = spec.threshold_candidates;
            p.min_split_chi2 = spec.min_split_chi2;
            p.seed = seed;
            return std::make_unique<DecisionTree>(p);
        }
        case ModelKind::random_forest: {
            ForestParams p;
            p.trees = spec.trees;
            p.bootstrap = spec.bootstrap;
            p.tree.max_depth = spec.max_depth;
            p.tree.min_samples_leaf = spec.min_samples_leaf;
            p.tree.max_features = spec.max_features;
            p.seed = seed;
            return std::make_unique<RandomForest>(p);
        }
        case ModelKind::gaussian_nb: return std::make_unique<GaussianNB>(spec.var_smoothing);
        case ModelKind::knn: return std::make_unique<KNearest>(spec.k);
        case ModelKind::logistic_regression:
            return std::make_unique<LogisticRegression>(LogisticParams{spec.learning_rate, spec.iterations, spec.l2});
    }
    fail(errc::invalid_argument, "unknown model kind");
}

/// A fitted model bound to the column schema it was trained on.
struct TrainedModel {
    std::optional<ClassifierSpec> spec;  // empty for plugged-in classifiers
    std::string schema_hash;
    std::vector<std::string> columns;
    std::shared_ptr<const Classifier> impl;

    double score(std::span<const double> row) const { return impl->score(row); }
    int predict(std::span<const double> row) const { return impl->predict(row); }
};

namespace detail {

inline MatrixView view(const FeatureTable& t) { return {t.values.data(), t.rows(), t.cols()}; }

inline void check_trainable(const FeatureTable& t, const Classifier& c) {
    if (t.schema_hash.empty()) fail(errc::schema_hash_missing, "training table carries no schema hash");
    if (t.rows() == 0) fail(errc::empty_table, "training table is empty");
    if (t.cols() == 0) fail(errc::schema_mismatch, "training table has no feature columns");
    const auto pos = t.positives();
    if ((pos == 0 || pos == t.rows()) && !c.tolerates_single_class())
        fail(errc::single_class_training, std::string(c.kind_name()) + " needs both classes in the training table");
}

}  // namespace detail

/// Fits any classifier implementation (the plug-in path).
inline TrainedModel fit(std::unique_ptr<Classifier> impl, const FeatureTable& table) {
    detail::check_trainable(table, *impl);
    impl->fit(detail::view(table), table.labels);
    return {std::nullopt, table.schema_hash, table.columns, std::shared_ptr<const Classifier>(std::move(impl))};
}

inline TrainedModel fit(const ClassifierSpec& spec, const FeatureTable& table) {
    auto m = fit(make_classifier(spec), table);
    m.spec = spec;
    return m;
}

inline void check_compatible(const TrainedModel& m, const FeatureTable& t) {
    if (t.schema_hash != m.schema_hash)
        fail(errc::schema_hash_mismatch, "model trained on schema " + m.schema_hash + ", table has " + t.schema_hash);
}

inline std::vector<int> predict(const TrainedModel& m, const FeatureTable& t) {
    check_compatible(m, t);
    std::vector<int> out(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) out[r] = m.predict(t.row(r));
    return out;
}

inline std::vector<double> predict_scores(const TrainedModel& m, const FeatureTable& t) {
    check_compatible(m, t);
    std::vector<double> out(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) out[r] = m.score(t.row(r));
    return out;
}

inline constexpr std::string_view model_format = "iotgem-model";
inline constexpr int model_format_version = 1;

inline nlohmann::json to_json(const TrainedModel& m) {
    if (!m.spec) fail(errc::invalid_argument, "only built-in model kinds can be serialised");
    return {{"format", model_format},
            {"version", model_format_version},
            {"kind", to_string(m.spec->kind)},
            {"hyperparameters", m.spec->to_json()},
            {"schema_hash", m.schema_hash},
            {"columns", m.columns},
            {"parameters", m.impl->parameters()}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != model_format || j.value("version", 0) != model_format_version)
        fail(errc::invalid_argument, "not an iotgem model container (version " + std::to_string(model_format_version) + ")");
    TrainedModel m;
    m.spec = ClassifierSpec::from_json(j.at("hyperparameters"));
    m.schema_hash = j.at("schema_hash").get<std::string>();
    m.columns = j.at("columns").get<std::vector<std::string>>();
    auto impl = make_classifier(*m.spec);
    impl->load_parameters(j.at("parameters"));
    m.impl = std::move(impl);
    return m;
}

}  // namespace iotgem::ml
