#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iotgem {

enum class errc {
    io_error,
    bad_magic,
    truncated_header,
    unsupported_link_type,
    invalid_rule,
    schema_mismatch,
    schema_hash_mismatch,
    schema_hash_missing,
    missing_label_column,
    empty_table,
    class_too_small,
    role_violation,
    single_class_training,
    empty_survivor_set,
    degenerate_fitness,
    table_too_small,
    unknown_feature,
    invalid_argument,
    invariant_failure,
};

constexpr std::string_view to_string(errc code) noexcept {
    switch (code) {
        case errc::io_error: return "IoError";
        case errc::bad_magic: return "BadMagic";
        case errc::truncated_header: return "TruncatedHeader";
        case errc::unsupported_link_type: return "UnsupportedLinkType";
        case errc::invalid_rule: return "InvalidRule";
        case errc::schema_mismatch: return "SchemaMismatch";
        case errc::schema_hash_mismatch: return "SchemaHashMismatch";
        case errc::schema_hash_missing: return "SchemaHashMissing";
        case errc::missing_label_column: return "MissingLabelColumn";
        case errc::empty_table: return "EmptyTable";
        case errc::class_too_small: return "ClassTooSmall";
        case errc::role_violation: return "RoleViolation";
        case errc::single_class_training: return "SingleClassTraining";
        case errc::empty_survivor_set: return "EmptySurvivorSet";
        case errc::degenerate_fitness: return "DegenerateFitness";
        case errc::table_too_small: return "TableTooSmall";
        case errc::unknown_feature: return "UnknownFeature";
        case errc::invalid_argument: return "InvalidArgument";
        case errc::invariant_failure: return "InvariantFailure";
    }
    return "Unknown";
}

/// Every library failure is reported through this type; `code()` says which.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

/// Process exit code for a failure: 2 input error, 3 role violation, 4 internal invariant.
constexpr int exit_code_for(errc code) noexcept {
    switch (code) {
        case errc::role_violation: return 3;
        case errc::invariant_failure: return 4;
        default: return 2;
    }
}

[[noreturn]] inline void fail(errc code, const std::string& message) { throw error(code, message); }

}  // namespace iotgem
