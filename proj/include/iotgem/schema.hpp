#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "hash.hpp"

namespace iotgem {

inline constexpr std::string_view schema_version_tag = "iotgem-features/1";
inline constexpr int max_rolling_window = 10;

/// Hash identifying an ordered column list; embedded in every table and model.
inline std::string schema_hash(const std::vector<std::string>& names) {
    std::uint64_t h = fnv1a64(schema_version_tag);
    for (const auto& n : names) {
        h = fnv1a64("\n", h);
        h = fnv1a64(n, h);
    }
    return to_hex(h);
}

struct WindowConfig {
    std::vector<int> sizes{2, 6, 9};

    void validate() const {
        if (sizes.empty()) fail(errc::invalid_argument, "at least one rolling window size is required");
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            if (sizes[i] < 2 || sizes[i] > max_rolling_window)
                fail(errc::invalid_argument, "rolling window sizes must lie in [2, 10]");
            if (i > 0 && sizes[i] <= sizes[i - 1])
                fail(errc::invalid_argument, "rolling window sizes must be strictly increasing");
        }
    }

    int capacity() const { return sizes.empty() ? 1 : sizes.back(); }
};

/// Names of the windowed base signals, in emission order. "ts" is the
/// per-pair inter-arrival time.
inline constexpr std::array<std::string_view, 5> window_signals{"pck_size", "ts", "tcp_window", "payload_bytes", "entropy"};

/// Flags with aggregate features, in emission order.
inline constexpr std::array<std::string_view, 6> aggregate_flags{"SYN", "ACK", "FIN", "RST", "PSH", "URG"};

/// Session- and device-identifying columns; emitted for probing and removed
/// by the first elimination step by default.
inline const std::vector<std::string>& identifier_features() {
    static const std::vector<std::string> names{"timestamp", "src_mac", "dst_mac", "src_ip", "dst_ip", "sport",
                                                "dport", "IP_id", "IP_chksum", "TCP_seq", "TCP_ackn"};
    return names;
}

class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) { reindex(); }

    /// Every feature the window engine can emit for `config`.
    static FeatureSchema full(const WindowConfig& config = {}) {
        config.validate();
        std::vector<std::string> n = identifier_features();
        for (const char* f : {"pck_size", "payload_bytes", "entropy", "IP_ttl", "IP_flag", "IP_proto", "tcp_window",
                              "proto_TCP", "proto_UDP", "proto_ICMP", "proto_ARP", "proto_OTHER", "TCP_FIN",
                              "TCP_SYN", "TCP_RST", "TCP_PSH", "TCP_ACK", "TCP_URG"})
            n.emplace_back(f);
        for (auto sig : window_signals) {
            const std::string s(sig);
            for (int w : config.sizes) {
                n.push_back(s + "_mean_" + std::to_string(w));
                n.push_back(s + "_std_" + std::to_string(w));
            }
            n.push_back(s + "_mean_WE");
            n.push_back(s + "_std_WE");
            n.push_back(s + "_sum_of_EW");
        }
        for (auto flag : aggregate_flags) {
            const std::string f(flag);
            n.push_back("TCP_" + f + "_sum");
            n.push_back("TCP_" + f + "_ratio");
            n.push_back("TCP_" + f + "_SR");
        }
        for (const char* f : {"sport_sum", "dport_sum", "dst_IP_diversity", "sport_class", "dest_port_class"})
            n.emplace_back(f);
        return FeatureSchema(std::move(n));
    }

    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }
    std::string hash() const { return schema_hash(names_); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(std::string_view name) const { return index_of(name).has_value(); }

    /// Positions of `subset` in this schema; SchemaMismatch names the first unknown feature.
    std::vector<std::size_t> positions(const std::vector<std::string>& subset) const {
        std::vector<std::size_t> pos;
        pos.reserve(subset.size());
        for (const auto& name : subset) {
            auto i = index_of(name);
            if (!i) fail(errc::schema_mismatch, "unknown feature '" + name + "'");
            pos.push_back(*i);
        }
        return pos;
    }

private:
    void reindex() {
        index_.clear();
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (!index_.emplace(names_[i], i).second) fail(errc::schema_mismatch, "duplicate feature '" + names_[i] + "'");
        }
    }

    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace iotgem
