#pragma once

// Tables with a known attribution structure. Train and held-out rows come
// from the same distribution.

#include <cstdint>
#include <string>
#include <vector>

#include "synthetic.hpp"

namespace iotgem::fixtures {

struct AttributionFixture {
    FeatureTable train, held_out;
    std::vector<std::string> informative;
};

/// inf_0..2 decide the label (y = inf_0 > .5 ? inf_1 > .4 : inf_2 > .6);
/// noise_0..16 are independent uniforms.
inline AttributionFixture planted_iid(std::uint64_t seed, std::size_t rows = 1000) {
    std::vector<std::string> names{"inf_0", "inf_1", "inf_2"};
    for (int i = 0; i < 17; ++i) names.push_back("noise_" + std::to_string(i));
    auto build = [&](std::uint64_t s, DataRole role) {
        rng g(s);
        FeatureTable t;
        t.columns = names;
        t.schema_hash = schema_hash(names);
        t.role = role;
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> x(names.size());
            for (auto& v : x) v = g.uniform();
            t.values.insert(t.values.end(), x.begin(), x.end());
            t.labels.push_back(x[0] > 0.5 ? x[1] > 0.4 : x[2] > 0.6);
        }
        return t;
    };
    return {build(seed * 2 + 1, DataRole::train_cv), build(seed * 2 + 2, DataRole::session_test), {"inf_0", "inf_1", "inf_2"}};
}

/// `dominant` sets the label with a small contribution from two weak
/// features and label noise: y = 1[dominant + 0.2 (weak_0 + weak_1) + 0.05 N > 0.7].
inline AttributionFixture dominant_feature(std::uint64_t seed, std::size_t rows = 600) {
    const std::vector<std::string> names{"weak_0", "noise_0", "dominant", "weak_1", "noise_1"};
    auto build = [&](std::uint64_t s, DataRole role) {
        rng g(s);
        FeatureTable t;
        t.columns = names;
        t.schema_hash = schema_hash(names);
        t.role = role;
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> x(names.size());
            for (auto& v : x) v = g.uniform();
            t.values.insert(t.values.end(), x.begin(), x.end());
            t.labels.push_back(x[2] + 0.2 * (x[0] + x[3]) + 0.05 * g.normal() > 0.7);
        }
        return t;
    };
    return {build(seed * 2 + 1, DataRole::train_cv), build(seed * 2 + 2, DataRole::session_test), {"dominant"}};
}

}  // namespace iotgem::fixtures
