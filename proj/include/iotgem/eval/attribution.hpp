#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../metrics.hpp"
#include "../ml/model.hpp"
#include "../parallel.hpp"
#include "../rng.hpp"
#include "../table.hpp"

namespace iotgem::eval {

/// Anything that maps a feature row to a real-valued score.
template <class M>
concept RowScorer = requires(const M& m, std::span<const double> row) {
    { m.score(row) } -> std::convertible_to<double>;
};

struct FeatureAttribution {
    std::string feature;
    double importance = 0.0;      // baseline F1 minus mean permuted F1
    double importance_std = 0.0;  // population std over repetitions
    std::optional<double> shapley_mean_abs;
    std::optional<double> shapley_mean_se;
};

struct AttributionReport {
    std::string schema_hash;
    std::optional<DataRole> role;
    std::size_t rows = 0;
    double baseline_f1 = 0.0;
    int repetitions = 0;
    std::uint64_t seed = 0;
    std::size_t shapley_samples = 0;
    std::size_t shapley_background = 0;
    std::size_t shapley_rows = 0;
    std::vector<FeatureAttribution> features;  // schema order
};

inline constexpr std::size_t min_importance_rows = 50;

/// Mean F1 drop when one column is shuffled, per column. The table must be a
/// held-out role; TRAIN_CV rows are refused.
inline AttributionReport permutation_importance(const ml::TrainedModel& model, const FeatureTable& table, int repetitions = 5,
                                                std::uint64_t seed = 0, unsigned jobs = 1) {
    if (repetitions < 3) fail(errc::invalid_argument, "permutation importance needs at least 3 repetitions");
    if (table.rows() < min_importance_rows)
        fail(errc::table_too_small, "permutation importance needs at least " + std::to_string(min_importance_rows) +
                                        " rows, table has " + std::to_string(table.rows()));
    if (table.role == DataRole::train_cv)
        fail(errc::role_violation, "permutation importance must be computed on held-out rows, not TRAIN_CV");
    ml::check_compatible(model, table);

    AttributionReport rep;
    rep.schema_hash = table.schema_hash;
    rep.role = table.role;
    rep.rows = table.rows();
    rep.repetitions = repetitions;
    rep.seed = seed;
    rep.baseline_f1 = f1_score(table.labels, ml::predict(model, table));
    rep.features.resize(table.cols());

    parallel_for(table.cols(), jobs, [&](std::size_t c) {
        std::vector<double> row(table.cols());
        std::vector<std::size_t> perm(table.rows());
        std::vector<int> pred(table.rows());
        std::vector<double> drops;
        for (int r = 0; r < repetitions; ++r) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng gen(derive_seed(derive_seed(seed, c), static_cast<std::uint64_t>(r)));
            gen.shuffle(std::span(perm));
            for (std::size_t i = 0; i < table.rows(); ++i) {
                auto src = table.row(i);
                std::copy(src.begin(), src.end(), row.begin());
                row[c] = table.at(perm[i], c);
                pred[i] = model.predict(row);
            }
            drops.push_back(rep.baseline_f1 - f1_score(table.labels, pred));
        }
        const double mean = std::accumulate(drops.begin(), drops.end(), 0.0) / static_cast<double>(drops.size());
        double sq = 0.0;
        for (double d : drops) sq += (d - mean) * (d - mean);
        rep.features[c] = {table.columns[c], mean, std::sqrt(sq / static_cast<double>(drops.size())), {}, {}};
    });
    return rep;
}

// ---- Monte-Carlo Shapley ---------------------------------------------------

struct ShapleyConfig {
    std::size_t background_size = 50;
    std::size_t samples = 200;  // per explained row
    std::size_t max_rows = 100;
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    void validate() const {
        if (background_size < 10) fail(errc::invalid_argument, "Shapley background needs at least 10 rows");
        if (samples < 100) fail(errc::invalid_argument, "Shapley estimation needs at least 100 samples per row");
        if (max_rows == 0) fail(errc::invalid_argument, "max_rows must be positive");
    }
};

struct ShapleyRow {
    std::size_t row = 0;  // index into the explained table
    double score = 0.0;
    double expected = 0.0;  // mean score over the background
    std::vector<double> phi;
    std::vector<double> se;
    double sum_se = 0.0;  // standard error of the summed attributions

    double sum_phi() const { return std::accumulate(phi.begin(), phi.end(), 0.0); }
    double efficiency_gap() const { return sum_phi() - (score - expected); }
    bool efficient(double k = 3.0) const { return std::abs(efficiency_gap()) <= k * sum_se + 1e-9; }
};

struct ShapleyReport {
    std::vector<std::string> columns;
    std::size_t samples = 0;
    std::size_t background_size = 0;
    std::uint64_t seed = 0;
    std::vector<ShapleyRow> rows;

    double efficient_fraction(double k = 3.0) const {
        if (rows.empty()) return 0.0;
        const auto ok = std::count_if(rows.begin(), rows.end(), [&](const ShapleyRow& r) { return r.efficient(k); });
        return static_cast<double>(ok) / static_cast<double>(rows.size());
    }

    std::vector<double> mean_abs_phi() const {
        std::vector<double> out(columns.size(), 0.0);
        for (const auto& r : rows)
            for (std::size_t c = 0; c < out.size(); ++c) out[c] += std::abs(r.phi[c]);
        for (auto& v : out) v /= rows.empty() ? 1.0 : static_cast<double>(rows.size());
        return out;
    }

    std::vector<double> mean_se() const {
        std::vector<double> out(columns.size(), 0.0);
        for (const auto& r : rows)
            for (std::size_t c = 0; c < out.size(); ++c) out[c] += r.se[c];
        for (auto& v : out) v /= rows.empty() ? 1.0 : static_cast<double>(rows.size());
        return out;
    }
};

/// Permutation-sampling Shapley estimate for each row of `explain` against
/// the rows of `background`. Each sample pairs a random feature order with a
/// background row; background rows are visited in reshuffled rounds, so every
/// row is used equally often.
template <RowScorer M>
ShapleyReport shapley_mc(const M& model, const FeatureTable& explain, const FeatureTable& background, const ShapleyConfig& cfg) {
    cfg.validate();
    if (background.rows() < 10) fail(errc::table_too_small, "Shapley background needs at least 10 rows");
    if (explain.columns != background.columns)
        fail(errc::schema_mismatch, "explained rows and background must share columns");
    const std::size_t p = explain.cols();
    const std::size_t b = background.rows();

    double expected = 0.0;
    for (std::size_t i = 0; i < b; ++i) expected += model.score(background.row(i));
    expected /= static_cast<double>(b);

    ShapleyReport rep;
    rep.columns = explain.columns;
    rep.samples = cfg.samples;
    rep.background_size = b;
    rep.seed = cfg.seed;
    rep.rows.resize(explain.rows());

    parallel_for(explain.rows(), cfg.jobs, [&](std::size_t r) {
        rng gen(derive_seed(cfg.seed, r));
        const auto x = explain.row(r);
        std::vector<std::size_t> order(p), bg(b);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::iota(bg.begin(), bg.end(), std::size_t{0});
        std::vector<double> v(p), sum(p, 0.0), sq(p, 0.0);
        double total_sum = 0.0, total_sq = 0.0;
        for (std::size_t s = 0; s < cfg.samples; ++s) {
            if (s % b == 0) gen.shuffle(std::span(bg));
            gen.shuffle(std::span(order));
            const auto z = background.row(bg[s % b]);
            std::copy(z.begin(), z.end(), v.begin());
            const double start = model.score(std::span<const double>(v));
            double prev = start;
            for (auto j : order) {
                v[j] = x[j];
                const double cur = model.score(std::span<const double>(v));
                const double d = cur - prev;
                sum[j] += d;
                sq[j] += d * d;
                prev = cur;
            }
            const double total = prev - start;
            total_sum += total;
            total_sq += total * total;
        }
        const double n = static_cast<double>(cfg.samples);
        auto se_of = [n](double s1, double s2) {
            const double mean = s1 / n;
            const double var = std::max(0.0, s2 / n - mean * mean) * n / (n - 1.0);
            return std::sqrt(var / n);
        };
        ShapleyRow row;
        row.row = r;
        row.score = model.score(x);
        row.expected = expected;
        row.phi.resize(p);
        row.se.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            row.phi[j] = sum[j] / n;
            row.se[j] = se_of(sum[j], sq[j]);
        }
        row.sum_se = se_of(total_sum, total_sq);
        rep.rows[r] = std::move(row);
    });
    return rep;
}

/// Draws the background and up to cfg.max_rows explained rows from `table`
/// with the config seed.
template <RowScorer M>
ShapleyReport shapley_mc(const M& model, const FeatureTable& table, const ShapleyConfig& cfg) {
    cfg.validate();
    if (table.rows() < cfg.background_size)
        fail(errc::table_too_small, "Shapley background of " + std::to_string(cfg.background_size) + " rows requested, table has " +
                                        std::to_string(table.rows()));
    std::vector<std::size_t> idx(table.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng gen(derive_seed(cfg.seed, 0x5348));
    gen.shuffle(std::span(idx));
    std::vector<std::size_t> bg(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.background_size));
    std::vector<std::size_t> ex(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.max_rows, idx.size())));
    std::sort(bg.begin(), bg.end());
    std::sort(ex.begin(), ex.end());
    auto rep = shapley_mc(model, take_rows(table, ex), take_rows(table, bg), cfg);
    for (auto& r : rep.rows) r.row = ex[r.row];
    return rep;
}

/// Attaches mean |phi| and mean standard error to an importance report.
inline void attach_shapley(AttributionReport& rep, const ShapleyReport& sh) {
    if (sh.columns.size() != rep.features.size()) fail(errc::schema_mismatch, "Shapley report columns differ");
    const auto abs_phi = sh.mean_abs_phi();
    const auto se = sh.mean_se();
    for (std::size_t c = 0; c < rep.features.size(); ++c) {
        if (sh.columns[c] != rep.features[c].feature) fail(errc::schema_mismatch, "Shapley report columns differ");
        rep.features[c].shapley_mean_abs = abs_phi[c];
        rep.features[c].shapley_mean_se = se[c];
    }
    rep.shapley_samples = sh.samples;
    rep.shapley_background = sh.background_size;
    rep.shapley_rows = sh.rows.size();
}

/// Feature indices ordered by importance, highest first; ties keep schema order.
inline std::vector<std::size_t> ranking(const AttributionReport& rep) {
    std::vector<std::size_t> idx(rep.features.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return rep.features[a].importance > rep.features[b].importance; });
    return idx;
}

inline void write_attribution_csv(const AttributionReport& rep, std::ostream& out) {
    out << "rank,feature,importance,importance_std,shapley_mean_abs,shapley_mean_se\n";
    const auto order = ranking(rep);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& f = rep.features[order[i]];
        out << (i + 1) << ',' << f.feature << ',' << format_number(f.importance) << ',' << format_number(f.importance_std) << ',';
        if (f.shapley_mean_abs) out << format_number(*f.shapley_mean_abs);
        out << ',';
        if (f.shapley_mean_se) out << format_number(*f.shapley_mean_se);
        out << '\n';
    }
}

inline nlohmann::json to_json(const AttributionReport& rep) {
    nlohmann::json feats = nlohmann::json::array();
    for (auto i : ranking(rep)) {
        const auto& f = rep.features[i];
        nlohmann::json j{{"feature", f.feature}, {"importance", f.importance}, {"importance_std", f.importance_std}};
        if (f.shapley_mean_abs) j["shapley_mean_abs"] = *f.shapley_mean_abs;
        if (f.shapley_mean_se) j["shapley_mean_se"] = *f.shapley_mean_se;
        feats.push_back(std::move(j));
    }
    nlohmann::json j{{"format", "iotgem-attribution"},
                     {"version", 1},
                     {"schema_hash", rep.schema_hash},
                     {"rows", rep.rows},
                     {"baseline_f1", rep.baseline_f1},
                     {"repetitions", rep.repetitions},
                     {"seed", rep.seed},
                     {"features", feats}};
    if (rep.role) j["role"] = to_string(*rep.role);
    if (rep.shapley_samples) {
        j["shapley"] = {{"samples", rep.shapley_samples}, {"background", rep.shapley_background}, {"rows", rep.shapley_rows}};
    }
    return j;
}

}  // namespace iotgem::eval
