#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "../rng.hpp"
#include "tree.hpp"

namespace iotgem::ml {

struct ForestParams {
    int trees = 100;
    bool bootstrap = true;
    TreeParams tree{.max_features = -1};
    std::uint64_t seed = 0;
};

/// Bagged CART trees; the score is the mean of the trees' leaf fractions.
class RandomForest final : public Classifier {
public:
    explicit RandomForest(ForestParams params = {}) : params_(params) {}

    std::string_view kind_name() const override { return "RANDOM_FOREST"; }

    void fit(MatrixView x, std::span<const int> y) override {
        trees_.clear();
        trees_.reserve(static_cast<std::size_t>(params_.trees));
        for (int t = 0; t < params_.trees; ++t) {
            const std::uint64_t s = params_.trees == 1 && !params_.bootstrap ? params_.seed
                                                                              : derive_seed(params_.seed, static_cast<std::uint64_t>(t));
            std::vector<std::size_t> idx(x.rows);
            if (params_.bootstrap) {
                rng gen(derive_seed(s, 0xB007));
                for (auto& i : idx) i = static_cast<std::size_t>(gen.index(x.rows));
            } else {
                std::iota(idx.begin(), idx.end(), std::size_t{0});
            }
            TreeParams tp = params_.tree;
            tp.seed = s;
            DecisionTree tree(tp);
            tree.fit_rows(x, y, std::move(idx));
            trees_.push_back(std::move(tree));
        }
    }

    double score(std::span<const double> row) const override {
        double s = 0.0;
        for (const auto& t : trees_) s += t.score(row);
        return trees_.empty() ? 0.0 : s / static_cast<double>(trees_.size());
    }

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

    nlohmann::json parameters() const override {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : trees_) arr.push_back(t.parameters());
        return {{"trees", arr}};
    }

    void load_parameters(const nlohmann::json& j) override {
        trees_.clear();
        for (const auto& t : j.at("trees")) {
            DecisionTree tree(params_.tree);
            tree.load_parameters(t);
            trees_.push_back(std::move(tree));
        }
        if (trees_.empty()) fail(errc::invalid_argument, "forest has no trees");
    }

private:
    ForestParams params_;
    std::vector<DecisionTree> trees_;
};

}  // namespace iotgem::ml
