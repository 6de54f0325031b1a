#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "hash.hpp"
#include "schema.hpp"

namespace iotgem {

/// Leakage-control tag; restricts which pipeline stage may read a table.
enum class DataRole : std::uint8_t { train_cv, hpo, validation, session_test, dataset_test };

inline constexpr std::array<DataRole, 5> all_roles{DataRole::train_cv, DataRole::hpo, DataRole::validation,
                                                   DataRole::session_test, DataRole::dataset_test};

constexpr std::string_view to_string(DataRole role) noexcept {
    switch (role) {
        case DataRole::train_cv: return "TRAIN_CV";
        case DataRole::hpo: return "HPO";
        case DataRole::validation: return "VALIDATION";
        case DataRole::session_test: return "SESSION_TEST";
        case DataRole::dataset_test: return "DATASET_TEST";
    }
    return "UNKNOWN";
}

inline std::optional<DataRole> parse_role(std::string_view text) {
    for (auto r : all_roles)
        if (text == to_string(r)) return r;
    return std::nullopt;
}

/// Row-major numeric table with a binary label per row.
struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<double> values;
    std::vector<int> labels;
    std::string schema_hash;
    std::vector<std::string> sources;
    std::optional<DataRole> role;
    std::size_t dropped_rows = 0;

    std::size_t rows() const noexcept { return labels.size(); }
    std::size_t cols() const noexcept { return columns.size(); }

    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    std::optional<std::size_t> column_index(std::string_view name) const {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) return std::nullopt;
        return static_cast<std::size_t>(it - columns.begin());
    }

    std::size_t positives() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    }

    double positive_rate() const { return rows() == 0 ? 0.0 : static_cast<double>(positives()) / static_cast<double>(rows()); }

    /// Content fingerprint over columns, values and labels.
    std::string fingerprint() const {
        std::uint64_t h = fnv1a64(schema_hash);
        for (const auto& c : columns) h = fnv1a64(c, fnv1a64(",", h));
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double)), h);
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(labels.data()), labels.size() * sizeof(int)), h);
        return to_hex(h);
    }
};

using TablePtr = std::shared_ptr<const FeatureTable>;

/// Copy restricted to `names` (in that order); the copy's schema hash is
/// recomputed for its columns.
inline FeatureTable project(const FeatureTable& t, const std::vector<std::string>& names) {
    std::vector<std::size_t> pos;
    pos.reserve(names.size());
    for (const auto& n : names) {
        auto i = t.column_index(n);
        if (!i) fail(errc::schema_mismatch, "table has no column '" + n + "'");
        pos.push_back(*i);
    }
    FeatureTable out;
    out.columns = names;
    out.labels = t.labels;
    out.schema_hash = schema_hash(names);
    out.sources = t.sources;
    out.role = t.role;
    out.values.resize(t.rows() * names.size());
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < pos.size(); ++c) out.values[r * names.size() + c] = t.at(r, pos[c]);
    return out;
}

/// Rows `idx` of `t`, same columns and hash.
inline FeatureTable take_rows(const FeatureTable& t, std::span<const std::size_t> idx) {
    FeatureTable out;
    out.columns = t.columns;
    out.schema_hash = t.schema_hash;
    out.sources = t.sources;
    out.role = t.role;
    out.values.reserve(idx.size() * t.cols());
    out.labels.reserve(idx.size());
    for (auto r : idx) {
        auto row = t.row(r);
        out.values.insert(out.values.end(), row.begin(), row.end());
        out.labels.push_back(t.labels[r]);
    }
    return out;
}

// ---- CSV -------------------------------------------------------------------

/// Shortest round-trip decimal form.
inline std::string format_number(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void write_csv(const FeatureTable& t, std::ostream& out) {
    out << "# iotgem feature table\n";
    out << "# schema_hash=" << t.schema_hash << "\n";
    for (const auto& s : t.sources) out << "# source=" << s << "\n";
    for (std::size_t c = 0; c < t.cols(); ++c) out << t.columns[c] << ',';
    out << "label\n";
    std::string line;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        line.clear();
        for (auto v : t.row(r)) {
            line += format_number(v);
            line += ',';
        }
        line += t.labels[r] ? '1' : '0';
        line += '\n';
        out << line;
    }
}

inline void write_csv(const FeatureTable& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_error, "cannot write " + path.string());
    write_csv(t, out);
    if (!out) fail(errc::io_error, "write failed for " + path.string());
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

inline double parse_cell(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::numeric_limits<double>::quiet_NaN();
    return v;
}

inline std::optional<int> parse_label_cell(std::string_view s) {
    s = trim(s);
    if (s == "0" || s == "BENIGN" || s == "Benign" || s == "benign" || s == "Normal" || s == "normal") return 0;
    if (s == "1" || s == "ATTACK" || s == "Attack" || s == "attack" || s == "Anomaly" || s == "anomaly") return 1;
    return std::nullopt;
}

}  // namespace detail

/// Reads a feature table. A `# schema_hash=` comment, when present, must
/// agree with the header; `expected_schema_hash`, when given, must agree too.
/// Rows with non-finite cells are dropped and counted.
inline FeatureTable read_csv(std::istream& in, const std::string& name,
                             const std::optional<std::string>& expected_schema_hash = std::nullopt) {
    FeatureTable t;
    std::optional<std::string> embedded_hash;
    std::string line;
    std::optional<std::size_t> label_col;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string_view body = detail::trim(std::string_view(line).substr(1));
            if (body.starts_with("schema_hash=")) embedded_hash = std::string(body.substr(12));
            else if (body.starts_with("source=")) t.sources.emplace_back(body.substr(7));
            continue;
        }
        auto fields = detail::split_fields(line);
        if (header.empty()) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                auto f = detail::trim(fields[i]);
                if (f == "label" || f == "Label") label_col = i;
                header.emplace_back(f);
            }
            if (!label_col) fail(errc::missing_label_column, name + " has no 'label' column");
            for (std::size_t i = 0; i < header.size(); ++i)
                if (i != *label_col) t.columns.push_back(header[i]);
            continue;
        }
        if (fields.size() != header.size())
            fail(errc::schema_mismatch, name + ":" + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                            " fields, header has " + std::to_string(header.size()));
        auto label = detail::parse_label_cell(fields[*label_col]);
        if (!label) fail(errc::invalid_argument, name + ":" + std::to_string(line_no) + " label must be binary");
        bool finite = true;
        const std::size_t base = t.values.size();
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == *label_col) continue;
            const double v = detail::parse_cell(fields[i]);
            if (!std::isfinite(v)) finite = false;
            t.values.push_back(v);
        }
        if (!finite) {
            t.values.resize(base);
            ++t.dropped_rows;
            continue;
        }
        t.labels.push_back(*label);
    }
    if (header.empty()) fail(errc::missing_label_column, name + " has no header row");
    const std::string computed = schema_hash(t.columns);
    if (embedded_hash && *embedded_hash != computed)
        fail(errc::schema_hash_mismatch, name + " header does not match its embedded schema hash " + *embedded_hash);
    t.schema_hash = computed;
    if (expected_schema_hash && *expected_schema_hash != t.schema_hash)
        fail(errc::schema_hash_mismatch,
             name + " has schema " + t.schema_hash + ", expected " + *expected_schema_hash);
    if (t.rows() == 0) fail(errc::empty_table, name + " has no valid rows");
    return t;
}

inline FeatureTable load_csv(const std::filesystem::path& path,
                             const std::optional<std::string>& expected_schema_hash = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path.string());
    return read_csv(in, path.string(), expected_schema_hash);
}

}  // namespace iotgem
