#pragma once

// Constructed datasets for the elimination and GA behaviour checks.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "support/synthetic.hpp"

namespace iotgem::fixtures {

struct EliminationFixture {
    FeatureTable train, hpo, validation;
};

/// Three columns: `label_copy` equals the label; `noise` is i.i.d. uniform;
/// `session_id` is a host number that identifies the attacker (host 5) in
/// the training and HPO sessions. The validation session uses a different
/// host numbering (a seeded permutation that moves the attacker), so the
/// identifier no longer carries over.
inline EliminationFixture elimination_fixture(std::uint64_t seed, std::size_t rows = 2000) {
    const std::vector<std::string> cols{"label_copy", "noise", "session_id"};
    rng perm_gen(derive_seed(seed, 99));
    std::array<int, 6> sigma{0, 1, 2, 3, 4, 5};
    do {
        perm_gen.shuffle(std::span(sigma.data() + 1, 5));
    } while (sigma[5] == 5);

    auto build = [&](std::uint64_t stream, DataRole role, bool renumber) {
        rng g(derive_seed(seed, stream));
        return make_table(cols, rows, [&](std::size_t, std::size_t c, int y) {
            if (c == 0) return static_cast<double>(y);
            if (c == 1) return g.uniform();
            const int host = y ? 5 : 1 + static_cast<int>(g.index(4));
            return static_cast<double>(renumber ? sigma[static_cast<std::size_t>(host)] : host);
        }, [&](std::size_t) { return g.bernoulli(0.4) ? 1 : 0; }, role);
    };
    return {build(1, DataRole::train_cv, false), build(2, DataRole::hpo, false), build(3, DataRole::validation, true)};
}

struct PlantedSubset {
    FeatureTable train, validation;
    std::vector<std::string> informative;
    std::vector<std::string> all;
};

/// 3 informative features following an axis-aligned rule and 17 features
/// that track the label in the training table only (shifted by 1.5 for
/// positives) and are label-independent in the validation table.
inline PlantedSubset planted_subset(std::uint64_t seed, std::size_t rows = 2000) {
    PlantedSubset p;
    for (int j = 0; j < 3; ++j) p.informative.push_back("inf_" + std::to_string(j));
    p.all = p.informative;
    for (int j = 0; j < 17; ++j) p.all.push_back("spur_" + std::to_string(j));
    auto build = [&](std::uint64_t s, bool train, DataRole role) {
        rng g(s);
        std::array<double, 3> x{};
        return make_table(p.all, rows, [&](std::size_t, std::size_t c, int y) {
            if (c < 3) return x[c];
            const double shift = train ? 1.5 * y : (g.bernoulli(0.5) ? 1.5 : 0.0);
            return shift + g.normal();
        }, [&](std::size_t) {
            for (auto& v : x) v = g.uniform();
            return x[0] > 0.5 ? (x[1] > 0.4 ? 1 : 0) : (x[2] > 0.6 ? 1 : 0);
        }, role);
    };
    p.train = build(seed * 2 + 1, true, DataRole::train_cv);
    p.validation = build(seed * 2 + 2, false, DataRole::validation);
    return p;
}

}  // namespace iotgem::fixtures
