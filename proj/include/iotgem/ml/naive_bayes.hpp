#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "classifier.hpp"

namespace iotgem::ml {

/// Gaussian naive Bayes. Variances are floored at var_smoothing times the
/// largest per-feature variance. A single-class training set makes the model
/// predict that class everywhere.
class GaussianNB final : public Classifier {
public:
    explicit GaussianNB(double var_smoothing = 1e-9) : var_smoothing_(var_smoothing) {}

    std::string_view kind_name() const override { return "GAUSSIAN_NB"; }
    bool tolerates_single_class() const override { return true; }

    void fit(MatrixView x, std::span<const int> y) override {
        const std::size_t d = x.cols;
        std::array<double, 2> count{};
        for (int c = 0; c < 2; ++c) {
            mean_[c].assign(d, 0.0);
            var_[c].assign(d, 0.0);
        }
        for (std::size_t r = 0; r < x.rows; ++r) {
            const int c = y[r] ? 1 : 0;
            count[c] += 1.0;
            for (std::size_t j = 0; j < d; ++j) mean_[c][j] += x.at(r, j);
        }
        for (int c = 0; c < 2; ++c)
            if (count[c] > 0)
                for (auto& m : mean_[c]) m /= count[c];
        for (std::size_t r = 0; r < x.rows; ++r) {
            const int c = y[r] ? 1 : 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x.at(r, j) - mean_[c][j];
                var_[c][j] += diff * diff;
            }
        }
        // Smoothing scale from the overall per-feature variance.
        double max_var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double m = 0.0;
            for (std::size_t r = 0; r < x.rows; ++r) m += x.at(r, j);
            m /= static_cast<double>(x.rows);
            double v = 0.0;
            for (std::size_t r = 0; r < x.rows; ++r) v += (x.at(r, j) - m) * (x.at(r, j) - m);
            max_var = std::max(max_var, v / static_cast<double>(x.rows));
        }
        const double eps = std::max(var_smoothing_ * max_var, 1e-12);
        for (int c = 0; c < 2; ++c)
            for (auto& v : var_[c]) v = (count[c] > 0 ? v / count[c] : 0.0) + eps;
        const double n = static_cast<double>(x.rows);
        prior_ = {count[0] / n, count[1] / n};
    }

    double score(std::span<const double> row) const override {
        if (prior_[1] <= 0.0) return 0.0;
        if (prior_[0] <= 0.0) return 1.0;
        std::array<double, 2> ll{};
        for (int c = 0; c < 2; ++c) {
            double s = std::log(prior_[c]);
            for (std::size_t j = 0; j < row.size(); ++j) {
                const double diff = row[j] - mean_[c][j];
                s -= 0.5 * (std::log(6.283185307179586 * var_[c][j]) + diff * diff / var_[c][j]);
            }
            ll[c] = s;
        }
        // P(1|x) = 1 / (1 + exp(ll0 - ll1))
        const double z = ll[0] - ll[1];
        if (z > 0) {
            const double e = std::exp(-z);
            return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(z));
    }

    nlohmann::json parameters() const override {
        return {{"prior", prior_}, {"mean0", mean_[0]}, {"mean1", mean_[1]}, {"var0", var_[0]}, {"var1", var_[1]}};
    }

    void load_parameters(const nlohmann::json& j) override {
        prior_ = j.at("prior").get<std::array<double, 2>>();
        mean_[0] = j.at("mean0").get<std::vector<double>>();
        mean_[1] = j.at("mean1").get<std::vector<double>>();
        var_[0] = j.at("var0").get<std::vector<double>>();
        var_[1] = j.at("var1").get<std::vector<double>>();
    }

private:
    double var_smoothing_;
    std::array<double, 2> prior_{};
    std::array<std::vector<double>, 2> mean_;
    std::array<std::vector<double>, 2> var_;
};

}  // namespace iotgem::ml
