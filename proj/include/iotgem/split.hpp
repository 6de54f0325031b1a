#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "table.hpp"

namespace iotgem {

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// k disjoint test folds covering every row; each class is spread over the
/// folds round-robin after a seeded shuffle, so every fold holds floor or
/// ceil(n_c / k) rows of class c.
inline std::vector<FoldSplit> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) fail(errc::invalid_argument, "k must be at least 2");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] ? 1 : 0].push_back(i);
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < static_cast<std::size_t>(k))
            fail(errc::class_too_small, "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                                            " rows, fewer than k=" + std::to_string(k));
    }
    rng gen(derive_seed(seed, 0x6B666F6C64ULL));
    std::vector<int> fold_of(labels.size());
    std::size_t cursor = 0;
    for (auto& members : by_class) {
        gen.shuffle(std::span(members));
        for (auto idx : members) fold_of[idx] = static_cast<int>(cursor++ % static_cast<std::size_t>(k));
    }
    std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (int f = 0; f < k; ++f) {
            auto& split = folds[static_cast<std::size_t>(f)];
            (fold_of[i] == f ? split.test : split.train).push_back(i);
        }
    }
    return folds;
}

inline std::vector<FoldSplit> stratified_kfold(const FeatureTable& table, int k, std::uint64_t seed) {
    return stratified_kfold(table.labels, k, seed);
}

}  // namespace iotgem
