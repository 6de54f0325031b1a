#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "table.hpp"

namespace iotgem {

enum class Stage : std::uint8_t { elimination, ga_fitness, evaluation };

constexpr std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::elimination: return "elimination";
        case Stage::ga_fitness: return "ga-fitness";
        case Stage::evaluation: return "evaluation";
    }
    return "unknown";
}

/// Roles a stage may read. Test roles are reachable from evaluation only.
constexpr bool role_permitted(Stage stage, DataRole role) noexcept {
    switch (stage) {
        case Stage::elimination:
            return role == DataRole::train_cv || role == DataRole::hpo || role == DataRole::validation;
        case Stage::ga_fitness:
            return role == DataRole::train_cv || role == DataRole::validation;
        case Stage::evaluation:
            return true;
    }
    return false;
}

struct TaggedTable {
    DataRole role;
    std::string name;
    TablePtr table;
};

inline std::string role_rule_text(Stage stage) {
    switch (stage) {
        case Stage::elimination: return "feature elimination may read only TRAIN_CV, HPO and VALIDATION tables";
        case Stage::ga_fitness: return "GA fitness may fit on TRAIN_CV and score on VALIDATION only";
        case Stage::evaluation: return "final evaluation may read every role";
    }
    return {};
}

/// Returns `tables` when every one may feed `stage`; otherwise RoleViolation
/// naming the stage and the offending table. The same content under two
/// different roles is also a violation.
inline std::vector<TaggedTable> enforce_roles(Stage stage, std::span<const TaggedTable> tables) {
    for (const auto& t : tables) {
        if (!role_permitted(stage, t.role))
            fail(errc::role_violation, "stage '" + std::string(to_string(stage)) + "' was given " +
                                           std::string(to_string(t.role)) + " table '" + t.name + "': " +
                                           role_rule_text(stage) + "; test data must not influence training, "
                                           "feature selection or tuning");
        if (t.table && t.table->role && *t.table->role != t.role)
            fail(errc::role_violation, "table '" + t.name + "' is tagged " + std::string(to_string(*t.table->role)) +
                                           " but was supplied as " + std::string(to_string(t.role)));
    }
    for (std::size_t i = 0; i < tables.size(); ++i) {
        for (std::size_t j = i + 1; j < tables.size(); ++j) {
            const auto& a = tables[i];
            const auto& b = tables[j];
            if (a.role == b.role || !a.table || !b.table) continue;
            if (a.table.get() == b.table.get() || a.table->fingerprint() == b.table->fingerprint())
                fail(errc::role_violation, "tables '" + a.name + "' (" + std::string(to_string(a.role)) + ") and '" +
                                               b.name + "' (" + std::string(to_string(b.role)) +
                                               ") have identical content; roles must be disjoint");
        }
    }
    return {tables.begin(), tables.end()};
}

/// Single-table check used inside stages: `table` must carry `expected` and
/// be readable by `stage`.
inline void require_role(Stage stage, const FeatureTable& table, DataRole expected, std::string_view what) {
    if (!table.role)
        fail(errc::role_violation, std::string(what) + " table carries no role tag");
    if (*table.role != expected || !role_permitted(stage, *table.role))
        fail(errc::role_violation, "stage '" + std::string(to_string(stage)) + "' expected a " +
                                       std::string(to_string(expected)) + " table for " + std::string(what) +
                                       ", got " + std::string(to_string(*table.role)) + ": " + role_rule_text(stage));
}

}  // namespace iotgem
