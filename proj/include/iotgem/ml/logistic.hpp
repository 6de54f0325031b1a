#pragma once

#include <cmath>
#include <vector>

#include "classifier.hpp"

namespace iotgem::ml {

struct LogisticParams {
    double learning_rate = 0.5;
    int iterations = 300;
    double l2 = 1e-4;
};

/// L2-regularised logistic regression fitted by full-batch gradient descent
/// on features standardised with training statistics.
class LogisticRegression final : public Classifier {
public:
    explicit LogisticRegression(LogisticParams params = {}) : params_(params) {}

    std::string_view kind_name() const override { return "LOGISTIC_REGRESSION"; }

    void fit(MatrixView x, std::span<const int> y) override {
        scaler_.fit(x);
        const std::size_t d = x.cols;
        const double n = static_cast<double>(x.rows);
        weights_.assign(d, 0.0);
        bias_ = 0.0;
        std::vector<double> z(x.rows * d);
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t c = 0; c < d; ++c) z[r * d + c] = scaler_.apply(c, x.at(r, c));
        std::vector<double> grad(d);
        for (int it = 0; it < params_.iterations; ++it) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double gb = 0.0;
            for (std::size_t r = 0; r < x.rows; ++r) {
                double s = bias_;
                for (std::size_t c = 0; c < d; ++c) s += weights_[c] * z[r * d + c];
                const double err = sigmoid(s) - (y[r] ? 1.0 : 0.0);
                for (std::size_t c = 0; c < d; ++c) grad[c] += err * z[r * d + c];
                gb += err;
            }
            for (std::size_t c = 0; c < d; ++c) weights_[c] -= params_.learning_rate * (grad[c] / n + params_.l2 * weights_[c]);
            bias_ -= params_.learning_rate * gb / n;
        }
    }

    double score(std::span<const double> row) const override {
        double s = bias_;
        for (std::size_t c = 0; c < weights_.size(); ++c) s += weights_[c] * scaler_.apply(c, row[c]);
        return sigmoid(s);
    }

    nlohmann::json parameters() const override {
        return {{"weights", weights_}, {"bias", bias_}, {"scaler", scaler_.to_json()}};
    }

    void load_parameters(const nlohmann::json& j) override {
        weights_ = j.at("weights").get<std::vector<double>>();
        bias_ = j.at("bias").get<double>();
        scaler_.from_json(j.at("scaler"));
    }

private:
    static double sigmoid(double s) {
        if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
        const double e = std::exp(s);
        return e / (1.0 + e);
    }

    LogisticParams params_;
    detail::Standardizer scaler_;
    std::vector<double> weights_;
    double bias_ = 0.0;
};

}  // namespace iotgem::ml
