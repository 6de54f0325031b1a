#pragma once

#include <algorithm>
#include <vector>

#include "classifier.hpp"

namespace iotgem::ml {

/// k-nearest neighbours, Euclidean distance on training-standardised
/// features. Equal distances are resolved by training-row order.
class KNearest final : public Classifier {
public:
    explicit KNearest(int k = 5) : k_(k) {}

    std::string_view kind_name() const override { return "KNN"; }
    bool tolerates_single_class() const override { return true; }

    void fit(MatrixView x, std::span<const int> y) override {
        cols_ = x.cols;
        scaler_.fit(x);
        points_.resize(x.rows * x.cols);
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t c = 0; c < x.cols; ++c) points_[r * cols_ + c] = scaler_.apply(c, x.at(r, c));
        labels_.assign(y.begin(), y.end());
    }

    double score(std::span<const double> row) const override {
        const std::size_t n = labels_.size();
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), n);
        std::vector<double> q(cols_);
        for (std::size_t c = 0; c < cols_; ++c) q[c] = scaler_.apply(c, row[c]);
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            const double* p = points_.data() + i * cols_;
            for (std::size_t c = 0; c < cols_; ++c) {
                const double d = p[c] - q[c];
                s += d * d;
            }
            dist[i] = {s, i};
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < k; ++i) pos += labels_[dist[i].second] ? 1 : 0;
        return static_cast<double>(pos) / static_cast<double>(k);
    }

    nlohmann::json parameters() const override {
        return {{"k", k_}, {"cols", cols_}, {"scaler", scaler_.to_json()}, {"points", points_}, {"labels", labels_}};
    }

    void load_parameters(const nlohmann::json& j) override {
        k_ = j.at("k").get<int>();
        cols_ = j.at("cols").get<std::size_t>();
        scaler_.from_json(j.at("scaler"));
        points_ = j.at("points").get<std::vector<double>>();
        labels_ = j.at("labels").get<std::vector<int>>();
        if (labels_.empty() || points_.size() != labels_.size() * cols_) fail(errc::invalid_argument, "kNN parameters are inconsistent");
    }

private:
    int k_;
    std::size_t cols_ = 0;
    detail::Standardizer scaler_;
    std::vector<double> points_;
    std::vector<int> labels_;
};

}  // namespace iotgem::ml
