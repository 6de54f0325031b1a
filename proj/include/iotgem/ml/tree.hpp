#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "../rng.hpp"
#include "classifier.hpp"

namespace iotgem::ml {

struct TreeParams {
    int max_depth = 0;  // 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    double min_impurity_decrease = 0.0;  // weighted by the node's share of training rows
    double min_split_chi2 = 0.0;         // 2x2 chi-square of a split (class by side) must reach this
    int max_features = 0;                // 0 = all, -1 = floor(sqrt(cols))
    bool random_thresholds = false;      // extremely randomized splits
    int threshold_candidates = 1;        // random thresholds drawn per feature; the best one is kept
    std::uint64_t seed = 0;
};

/// CART binary tree with Gini impurity. Best-split mode uses midpoints
/// between consecutive distinct values; randomized mode draws
/// threshold_candidates thresholds per candidate feature uniformly between the
/// node's min and max and keeps the best.
class DecisionTree final : public Classifier {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;  // fraction of positive training rows
        std::uint32_t samples = 0;
    };

    explicit DecisionTree(TreeParams params = {}) : params_(params) {}

    std::string_view kind_name() const override { return params_.random_thresholds ? "EXTRA_TREE" : "DECISION_TREE"; }

    void fit(MatrixView x, std::span<const int> y) override {
        std::vector<std::size_t> idx(x.rows);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        fit_rows(x, y, idx);
    }

    /// Fits on the listed rows; duplicates act as weights (bootstrap samples).
    void fit_rows(MatrixView x, std::span<const int> y, std::vector<std::size_t> idx) {
        nodes_.clear();
        cols_ = x.cols;
        rng gen(params_.seed);
        const double total = static_cast<double>(idx.size());
        struct Task {
            int node;
            std::size_t begin, end;
            int depth;
        };
        std::vector<Task> stack;
        nodes_.push_back({});
        stack.push_back({0, 0, idx.size(), 0});
        std::vector<std::pair<double, int>> buf;
        std::vector<std::size_t> order(cols_);

        while (!stack.empty()) {
            const Task t = stack.back();
            stack.pop_back();
            const std::size_t n = t.end - t.begin;
            std::size_t pos = 0;
            for (std::size_t i = t.begin; i < t.end; ++i) pos += y[idx[i]] ? 1 : 0;
            nodes_[static_cast<std::size_t>(t.node)].value = n ? static_cast<double>(pos) / static_cast<double>(n) : 0.0;
            nodes_[static_cast<std::size_t>(t.node)].samples = static_cast<std::uint32_t>(n);

            const bool pure = pos == 0 || pos == n;
            if (pure || n < static_cast<std::size_t>(std::max(2, params_.min_samples_split)) ||
                n < 2 * static_cast<std::size_t>(params_.min_samples_leaf) ||
                (params_.max_depth > 0 && t.depth >= params_.max_depth))
                continue;

            const Split best = find_split(x, y, std::span(idx).subspan(t.begin, n), pos, gen, buf, order);
            if (best.feature < 0) continue;
            const double parent_gini = gini(static_cast<double>(pos), static_cast<double>(n));
            const double decrease = static_cast<double>(n) / total * (parent_gini - best.child_impurity);
            if (decrease + 1e-15 < params_.min_impurity_decrease) continue;
            if (params_.min_split_chi2 > 0.0 && split_chi2(n, pos, best.left_n, best.left_pos) < params_.min_split_chi2) continue;

            auto mid = std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                             idx.begin() + static_cast<std::ptrdiff_t>(t.end), [&](std::size_t r) {
                                                 return x.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold;
                                             });
            const auto split_at = static_cast<std::size_t>(mid - idx.begin());
            const int left = static_cast<int>(nodes_.size());
            nodes_.push_back({});
            const int right = static_cast<int>(nodes_.size());
            nodes_.push_back({});
            auto& node = nodes_[static_cast<std::size_t>(t.node)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left = left;
            node.right = right;
            stack.push_back({right, split_at, t.end, t.depth + 1});
            stack.push_back({left, t.begin, split_at, t.depth + 1});
        }
    }

    double score(std::span<const double> row) const override { return nodes_[leaf_index(row)].value; }

    std::size_t leaf_index(std::span<const double> row) const {
        std::size_t i = 0;
        while (nodes_[i].feature >= 0) {
            const auto& n = nodes_[i];
            i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return i;
    }

    bool uses_feature(std::size_t f) const {
        return std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.feature == static_cast<int>(f); });
    }

    int depth() const {
        std::vector<int> d(nodes_.size(), 0);
        int best = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            best = std::max(best, d[i]);
            if (nodes_[i].feature >= 0) {
                d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
                d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
            }
        }
        return best;
    }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const TreeParams& params() const noexcept { return params_; }

    nlohmann::json parameters() const override {
        nlohmann::json j;
        std::vector<int> feature, left, right;
        std::vector<double> threshold, value;
        std::vector<std::uint32_t> samples;
        for (const auto& n : nodes_) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
            samples.push_back(n.samples);
        }
        j["cols"] = cols_;
        j["feature"] = feature;
        j["threshold"] = threshold;
        j["left"] = left;
        j["right"] = right;
        j["value"] = value;
        j["samples"] = samples;
        return j;
    }

    void load_parameters(const nlohmann::json& j) override {
        cols_ = j.at("cols").get<std::size_t>();
        const auto feature = j.at("feature").get<std::vector<int>>();
        const auto threshold = j.at("threshold").get<std::vector<double>>();
        const auto left = j.at("left").get<std::vector<int>>();
        const auto right = j.at("right").get<std::vector<int>>();
        const auto value = j.at("value").get<std::vector<double>>();
        const auto samples = j.at("samples").get<std::vector<std::uint32_t>>();
        const std::size_t n = feature.size();
        if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || samples.size() != n)
            fail(errc::invalid_argument, "tree parameter arrays are inconsistent");
        nodes_.assign(n, {});
        for (std::size_t i = 0; i < n; ++i) {
            const bool leaf = feature[i] < 0;
            if (!leaf && (feature[i] >= static_cast<int>(cols_) || left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                          left[i] >= static_cast<int>(n) || right[i] >= static_cast<int>(n)))
                fail(errc::invalid_argument, "tree node " + std::to_string(i) + " is malformed");
            nodes_[i] = {feature[i], threshold[i], left[i], right[i], value[i], samples[i]};
        }
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double child_impurity = 0.0;  // size-weighted mean child Gini
        std::size_t left_n = 0;
        std::size_t left_pos = 0;
    };

    /// Pearson chi-square of the side-by-class contingency table.
    static double split_chi2(std::size_t n, std::size_t pos, std::size_t nl, std::size_t pl) {
        const long double a = static_cast<long double>(pl);
        const long double b = static_cast<long double>(nl - pl);
        const long double c = static_cast<long double>(pos - pl);
        const long double d = static_cast<long double>((n - nl) - (pos - pl));
        const long double den = (a + b) * (c + d) * (a + c) * (b + d);
        if (den == 0) return 0.0;
        const long double cross = a * d - b * c;
        return static_cast<double>(static_cast<long double>(n) * cross * cross / den);
    }

    static double gini(double pos, double n) {
        if (n <= 0.0) return 0.0;
        const double p = pos / n;
        return 2.0 * p * (1.0 - p);
    }

    Split find_split(MatrixView x, std::span<const int> y, std::span<const std::size_t> rows, std::size_t pos, rng& gen,
                     std::vector<std::pair<double, int>>& buf, std::vector<std::size_t>& order) const {
        const std::size_t n = rows.size();
        const double dn = static_cast<double>(n);
        const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
        std::size_t budget = cols_;
        if (params_.max_features == -1) budget = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(cols_))));
        else if (params_.max_features > 0) budget = std::min<std::size_t>(cols_, static_cast<std::size_t>(params_.max_features));

        std::iota(order.begin(), order.end(), std::size_t{0});
        if (budget < cols_ || params_.random_thresholds) gen.shuffle(std::span(order));

        Split best;
        double best_impurity = std::numeric_limits<double>::infinity();
        std::size_t visited = 0;
        for (std::size_t oi = 0; oi < cols_ && visited < budget; ++oi) {
            const std::size_t f = order[oi];
            if (params_.random_thresholds) {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (auto r : rows) {
                    lo = std::min(lo, x.at(r, f));
                    hi = std::max(hi, x.at(r, f));
                }
                if (!(hi > lo)) continue;  // constant here; does not count against the budget
                ++visited;
                const int draws = std::max(1, params_.threshold_candidates);
                for (int d = 0; d < draws; ++d) {
                    double thr = gen.uniform(lo, hi);
                    if (thr >= hi) thr = lo;
                    std::size_t nl = 0, pl = 0;
                    for (auto r : rows) {
                        if (x.at(r, f) <= thr) {
                            ++nl;
                            pl += y[r] ? 1 : 0;
                        }
                    }
                    const std::size_t nr = n - nl;
                    if (nl < min_leaf || nr < min_leaf) continue;
                    const double imp = (static_cast<double>(nl) * gini(static_cast<double>(pl), static_cast<double>(nl)) +
                                        static_cast<double>(nr) * gini(static_cast<double>(pos - pl), static_cast<double>(nr))) / dn;
                    if (imp < best_impurity) {
                        best_impurity = imp;
                        best = {static_cast<int>(f), thr, imp, nl, pl};
                    }
                }
                continue;
            }

            buf.clear();
            for (auto r : rows) buf.emplace_back(x.at(r, f), y[r] ? 1 : 0);
            std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            if (!(buf.back().first > buf.front().first)) continue;
            ++visited;
            std::size_t pl = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                pl += static_cast<std::size_t>(buf[i].second);
                if (!(buf[i + 1].first > buf[i].first)) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double imp = (static_cast<double>(nl) * gini(static_cast<double>(pl), static_cast<double>(nl)) +
                                    static_cast<double>(nr) * gini(static_cast<double>(pos - pl), static_cast<double>(nr))) / dn;
                if (imp < best_impurity) {
                    best_impurity = imp;
                    const double a = buf[i].first;
                    const double b = buf[i + 1].first;
                    double thr = a + (b - a) / 2.0;
                    if (thr >= b) thr = a;
                    best = {static_cast<int>(f), thr, imp, nl, pl};
                }
            }
        }
        return best;
    }

    TreeParams params_;
    std::size_t cols_ = 0;
    std::vector<Node> nodes_;
};

}  // namespace iotgem::ml
