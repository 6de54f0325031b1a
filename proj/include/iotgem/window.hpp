#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "packet.hpp"
#include "schema.hpp"
#include "table.hpp"

namespace iotgem {

/// (MAC, IP-if-present). ARP and other non-IP frames are identified by MAC alone.
struct EndpointId {
    MacAddress mac{};
    std::optional<Ipv4Address> ip;

    friend bool operator==(const EndpointId&, const EndpointId&) = default;
    friend auto operator<=>(const EndpointId&, const EndpointId&) = default;
};

inline EndpointId source_endpoint(const DecodedPacket& p) {
    return {p.src_mac, p.ip_present ? std::optional(p.src_ip) : std::nullopt};
}

inline EndpointId destination_endpoint(const DecodedPacket& p) {
    return {p.dst_mac, p.ip_present ? std::optional(p.dst_ip) : std::nullopt};
}

/// Unordered pair of endpoints: key(A, B) == key(B, A).
struct EndpointPairKey {
    EndpointId low;
    EndpointId high;

    static EndpointPairKey of(const EndpointId& a, const EndpointId& b) { return a <= b ? EndpointPairKey{a, b} : EndpointPairKey{b, a}; }
    static EndpointPairKey of(const DecodedPacket& p) { return of(source_endpoint(p), destination_endpoint(p)); }

    friend bool operator==(const EndpointPairKey&, const EndpointPairKey&) = default;
};

struct EndpointIdHash {
    std::size_t operator()(const EndpointId& e) const noexcept {
        std::uint64_t h = mac_to_u64(e.mac) * 0x9E3779B97F4A7C15ULL;
        h ^= e.ip ? (std::uint64_t{*e.ip} | (std::uint64_t{1} << 40)) : 0;
        h ^= h >> 29;
        return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ULL);
    }
};

struct EndpointPairKeyHash {
    std::size_t operator()(const EndpointPairKey& k) const noexcept {
        const EndpointIdHash h;
        return h(k.low) ^ (h(k.high) * 0x94D049BB133111EBULL + 0x632BE59BD9B4E019ULL);
    }
};

/// Last `capacity` observations, capacity ≤ 10.
class RingBuffer {
public:
    explicit RingBuffer(int capacity = max_rolling_window) : capacity_(static_cast<std::size_t>(capacity)) {}

    void push(double v) noexcept {
        data_[head_] = v;
        head_ = (head_ + 1) % capacity_;
        if (size_ < capacity_) ++size_;
    }

    std::size_t size() const noexcept { return size_; }

    /// i-th most recent value (0 = newest).
    double recent(std::size_t i) const noexcept { return data_[(head_ + capacity_ - 1 - i) % capacity_]; }

    /// Population mean and std over the newest min(w, size) values.
    std::pair<double, double> mean_std(std::size_t w) const noexcept {
        const std::size_t m = std::min(w, size_);
        if (m == 0) return {0.0, 0.0};
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) sum += recent(i);
        const double mean = sum / static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = recent(i) - mean;
            ss += d * d;
        }
        return {mean, std::sqrt(ss / static_cast<double>(m))};
    }

private:
    std::array<double, max_rolling_window> data_{};
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

/// Welford accumulator for expanding-window statistics.
struct RunningMoments {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double sum = 0.0;

    void push(double x) noexcept {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
        if (m2 < 0.0) m2 = 0.0;
        sum += x;
    }

    double variance() const noexcept { return n == 0 ? 0.0 : m2 / static_cast<double>(n); }
    double stddev() const noexcept { return std::sqrt(variance()); }
};

inline constexpr std::size_t signal_count = window_signals.size();
inline constexpr std::size_t flag_count = aggregate_flags.size();
inline constexpr std::array<std::uint8_t, flag_count> aggregate_flag_bits{tcp_flag::syn, tcp_flag::ack, tcp_flag::fin,
                                                                          tcp_flag::rst, tcp_flag::psh, tcp_flag::urg};

/// Streaming state for one endpoint pair. "Sent" is the direction of the
/// pair's first-seen packet, "received" the reverse.
struct EndpointPairState {
    explicit EndpointPairState(int capacity) {
        for (auto& r : rolling) r = RingBuffer(capacity);
    }

    std::array<RingBuffer, signal_count> rolling;
    std::array<RunningMoments, signal_count> expanding;

    EndpointId first_source;
    std::uint64_t packets = 0;
    std::uint64_t sent_packets = 0;
    std::uint64_t recv_packets = 0;
    std::array<std::uint64_t, flag_count> sent_flags{};
    std::array<std::uint64_t, flag_count> recv_flags{};

    std::unordered_set<std::uint16_t> sports;
    std::unordered_set<std::uint16_t> dports;

    std::optional<std::int64_t> last_ts;
    std::optional<std::int64_t> last_sent_ts;
    std::optional<std::int64_t> last_recv_ts;
};

/// 0 well-known (< 1024), 1 registered (< 49152), 2 dynamic, -1 when the
/// packet carries no port.
inline int port_class(std::optional<std::uint16_t> port) noexcept {
    if (!port) return -1;
    if (*port < 1024) return 0;
    if (*port < 49152) return 1;
    return 2;
}

/// Destination protocol address used for diversity: IPv4 destination, or the
/// ARP target address.
inline std::optional<Ipv4Address> diversity_target(const DecodedPacket& p) {
    if (p.ip_present) return p.dst_ip;
    if (p.arp) return p.arp->target_ip;
    return std::nullopt;
}

/// Full-schema feature values for one packet.
struct FeatureRow {
    std::vector<double> values;
    std::optional<Label> label;
    std::size_t packet_index = 0;  // position in the engine's input stream
};

struct EngineStats {
    std::size_t packets = 0;
    std::size_t pairs = 0;
    std::size_t negative_iat = 0;  // out-of-order timestamps clamped to 0
};

/// Emits one full-schema feature vector per packet. Row i depends only on
/// packets 0..i.
class WindowEngine {
public:
    explicit WindowEngine(WindowConfig config = {}) : config_(std::move(config)), schema_(FeatureSchema::full(config_)) {}

    const FeatureSchema& schema() const noexcept { return schema_; }
    const WindowConfig& config() const noexcept { return config_; }
    const EngineStats& stats() const noexcept { return stats_; }

    FeatureRow update_and_emit(const DecodedPacket& pkt) {
        FeatureRow row;
        row.values.reserve(schema_.size());
        row.packet_index = stats_.packets;
        update_and_emit(pkt, row.values);
        row.label = pkt.label;
        return row;
    }

    /// Appends the row for `pkt` to `out`.
    void update_and_emit(const DecodedPacket& pkt, std::vector<double>& out) {
        ++stats_.packets;
        const auto key = EndpointPairKey::of(pkt);
        auto it = pairs_.find(key);
        if (it == pairs_.end()) {
            it = pairs_.emplace(key, EndpointPairState(config_.capacity())).first;
            it->second.first_source = source_endpoint(pkt);
            ++stats_.pairs;
        }
        EndpointPairState& st = it->second;
        const bool forward = source_endpoint(pkt) == st.first_source;

        double iat = 0.0;
        if (st.last_ts) {
            const std::int64_t delta = pkt.capture_ns - *st.last_ts;
            if (delta < 0) ++stats_.negative_iat;
            else iat = static_cast<double>(delta) * 1e-9;
        }
        st.last_ts = pkt.capture_ns;
        (forward ? st.last_sent_ts : st.last_recv_ts) = pkt.capture_ns;

        const double tcp_window = pkt.tcp ? pkt.tcp->window : 0.0;
        const std::array<double, signal_count> signal{static_cast<double>(pkt.frame_len), iat, tcp_window,
                                                      static_cast<double>(pkt.payload_len), pkt.payload_entropy};
        for (std::size_t s = 0; s < signal_count; ++s) {
            st.rolling[s].push(signal[s]);
            st.expanding[s].push(signal[s]);
        }

        ++st.packets;
        ++(forward ? st.sent_packets : st.recv_packets);
        const std::uint8_t flags = pkt.tcp ? pkt.tcp->flags : 0;
        for (std::size_t f = 0; f < flag_count; ++f) {
            if (flags & aggregate_flag_bits[f]) ++(forward ? st.sent_flags[f] : st.recv_flags[f]);
        }
        if (pkt.sport) st.sports.insert(*pkt.sport);
        if (pkt.dport) st.dports.insert(*pkt.dport);

        auto& targets = destinations_[source_endpoint(pkt)];
        if (auto t = diversity_target(pkt)) targets.insert(*t);

        // Identifiers.
        out.push_back(pkt.capture_seconds());
        out.push_back(static_cast<double>(mac_to_u64(pkt.src_mac)));
        out.push_back(static_cast<double>(mac_to_u64(pkt.dst_mac)));
        out.push_back(static_cast<double>(pkt.src_ip));
        out.push_back(static_cast<double>(pkt.dst_ip));
        out.push_back(pkt.sport.value_or(0));
        out.push_back(pkt.dport.value_or(0));
        out.push_back(pkt.ip_id);
        out.push_back(pkt.ip_checksum);
        out.push_back(pkt.tcp ? pkt.tcp->seq : 0.0);
        out.push_back(pkt.tcp ? pkt.tcp->ack : 0.0);

        // Per-packet fields.
        out.push_back(pkt.frame_len);
        out.push_back(pkt.payload_len);
        out.push_back(pkt.payload_entropy);
        out.push_back(pkt.ip_ttl);
        out.push_back(pkt.ip_flags);
        out.push_back(pkt.ip_proto);
        out.push_back(tcp_window);
        for (auto k : {L4Kind::tcp, L4Kind::udp, L4Kind::icmp, L4Kind::arp, L4Kind::other})
            out.push_back(pkt.l4_kind == k ? 1.0 : 0.0);
        for (auto bit : {tcp_flag::fin, tcp_flag::syn, tcp_flag::rst, tcp_flag::psh, tcp_flag::ack, tcp_flag::urg})
            out.push_back((flags & bit) ? 1.0 : 0.0);

        // Rolling and expanding windows.
        for (std::size_t s = 0; s < signal_count; ++s) {
            for (int w : config_.sizes) {
                auto [mean, sd] = st.rolling[s].mean_std(static_cast<std::size_t>(w));
                out.push_back(mean);
                out.push_back(sd);
            }
            out.push_back(st.expanding[s].mean);
            out.push_back(st.expanding[s].stddev());
            out.push_back(st.expanding[s].sum);
        }

        // Flag aggregates.
        for (std::size_t f = 0; f < flag_count; ++f) {
            const auto total = st.sent_flags[f] + st.recv_flags[f];
            out.push_back(static_cast<double>(total));
            out.push_back(static_cast<double>(total) / static_cast<double>(st.packets));
            out.push_back(static_cast<double>(st.sent_flags[f]) / static_cast<double>(std::max<std::uint64_t>(1, st.recv_flags[f])));
        }

        // Destination-source.
        out.push_back(static_cast<double>(st.sports.size()));
        out.push_back(static_cast<double>(st.dports.size()));
        out.push_back(static_cast<double>(targets.size()));
        out.push_back(port_class(pkt.sport));
        out.push_back(port_class(pkt.dport));
    }

    /// State of the pair `pkt` belongs to, if seen.
    const EndpointPairState* state_for(const EndpointPairKey& key) const {
        auto it = pairs_.find(key);
        return it == pairs_.end() ? nullptr : &it->second;
    }

private:
    WindowConfig config_;
    FeatureSchema schema_;
    std::unordered_map<EndpointPairKey, EndpointPairState, EndpointPairKeyHash> pairs_;
    std::unordered_map<EndpointId, std::unordered_set<Ipv4Address>, EndpointIdHash> destinations_;
    EngineStats stats_;
};

struct ExtractResult {
    FeatureTable table;
    EngineStats stats;
};

/// One row per labelled packet, in capture order, restricted to `features`
/// (empty = the full schema for `config`).
inline ExtractResult extract_table(std::span<const DecodedPacket> packets, const std::vector<std::string>& features = {},
                                   const WindowConfig& config = {}) {
    WindowEngine engine(config);
    const FeatureSchema& full = engine.schema();
    const std::vector<std::string>& names = features.empty() ? full.names() : features;
    const auto pos = full.positions(names);
    const bool identity = features.empty();

    ExtractResult res;
    FeatureTable& t = res.table;
    t.columns = names;
    t.schema_hash = schema_hash(names);
    t.values.reserve(packets.size() * names.size());
    t.labels.reserve(packets.size());
    std::vector<double> row;
    row.reserve(full.size());
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto& p = packets[i];
        if (!p.label) fail(errc::invalid_argument, "packet " + std::to_string(i) + " is unlabelled");
        row.clear();
        engine.update_and_emit(p, row);
        if (identity) t.values.insert(t.values.end(), row.begin(), row.end());
        else for (auto j : pos) t.values.push_back(row[j]);
        t.labels.push_back(*p.label == Label::attack ? 1 : 0);
    }
    res.stats = engine.stats();
    return res;
}

}  // namespace iotgem
