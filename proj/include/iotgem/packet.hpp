#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace iotgem {

enum class L4Kind : std::uint8_t { tcp, udp, icmp, arp, other };

enum class Label : std::uint8_t { benign = 0, attack = 1 };

constexpr std::string_view to_string(L4Kind kind) noexcept {
    switch (kind) {
        case L4Kind::tcp: return "TCP";
        case L4Kind::udp: return "UDP";
        case L4Kind::icmp: return "ICMP";
        case L4Kind::arp: return "ARP";
        case L4Kind::other: return "OTHER";
    }
    return "OTHER";
}

constexpr std::string_view to_string(Label label) noexcept {
    return label == Label::attack ? "ATTACK" : "BENIGN";
}

namespace tcp_flag {
inline constexpr std::uint8_t fin = 0x01;
inline constexpr std::uint8_t syn = 0x02;
inline constexpr std::uint8_t rst = 0x04;
inline constexpr std::uint8_t psh = 0x08;
inline constexpr std::uint8_t ack = 0x10;
inline constexpr std::uint8_t urg = 0x20;
inline constexpr std::uint8_t ece = 0x40;
inline constexpr std::uint8_t cwr = 0x80;
}  // namespace tcp_flag

using MacAddress = std::array<std::uint8_t, 6>;

/// IPv4 address in host byte order.
using Ipv4Address = std::uint32_t;

struct TcpFields {
    std::uint8_t flags = 0;
    std::uint16_t window = 0;
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;

    bool has(std::uint8_t flag) const noexcept { return (flags & flag) != 0; }

    friend bool operator==(const TcpFields&, const TcpFields&) = default;
};

struct ArpFields {
    std::uint16_t opcode = 0;
    Ipv4Address sender_ip = 0;
    Ipv4Address target_ip = 0;

    friend bool operator==(const ArpFields&, const ArpFields&) = default;
};

/// One decoded Ethernet frame. Immutable once produced by the decoder
/// (the labeler returns labelled copies).
struct DecodedPacket {
    std::int64_t capture_ns = 0;  // nanoseconds since the epoch, exact for both pcap resolutions
    std::uint32_t frame_len = 0;  // on-wire length
    std::uint32_t captured_len = 0;

    MacAddress src_mac{};
    MacAddress dst_mac{};
    std::uint16_t eth_type = 0;

    bool ip_present = false;
    Ipv4Address src_ip = 0;
    Ipv4Address dst_ip = 0;
    std::uint8_t ip_proto = 0;
    std::uint8_t ip_ttl = 0;
    std::uint8_t ip_flags = 0;  // 3 bits: reserved, DF, MF
    std::uint16_t ip_id = 0;
    std::uint16_t ip_checksum = 0;

    L4Kind l4_kind = L4Kind::other;
    std::optional<std::uint16_t> sport;
    std::optional<std::uint16_t> dport;
    std::optional<TcpFields> tcp;  // present iff l4_kind == tcp
    std::optional<ArpFields> arp;  // present iff l4_kind == arp

    std::uint32_t payload_len = 0;
    double payload_entropy = 0.0;

    std::optional<Label> label;

    double capture_seconds() const noexcept { return static_cast<double>(capture_ns) * 1e-9; }

    friend bool operator==(const DecodedPacket&, const DecodedPacket&) = default;
};

inline std::string format_ipv4(Ipv4Address ip) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (ip >> 24) & 0xFF, (ip >> 16) & 0xFF, (ip >> 8) & 0xFF, ip & 0xFF);
    return buf;
}

inline std::string format_mac(const MacAddress& mac) {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2], mac[3], mac[4], mac[5]);
    return buf;
}

namespace detail {

constexpr int hex_value(char c) noexcept {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace detail

inline std::optional<Ipv4Address> parse_ipv4(std::string_view text) {
    Ipv4Address out = 0;
    int octets = 0;
    std::size_t i = 0;
    while (octets < 4) {
        if (i >= text.size() || text[i] < '0' || text[i] > '9') return std::nullopt;
        unsigned value = 0;
        std::size_t digits = 0;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            value = value * 10 + static_cast<unsigned>(text[i] - '0');
            if (++digits > 3 || value > 255) return std::nullopt;
            ++i;
        }
        out = (out << 8) | value;
        ++octets;
        if (octets < 4) {
            if (i >= text.size() || text[i] != '.') return std::nullopt;
            ++i;
        }
    }
    if (i != text.size()) return std::nullopt;
    return out;
}

inline std::optional<MacAddress> parse_mac(std::string_view text) {
    if (text.size() != 17) return std::nullopt;
    MacAddress mac{};
    for (std::size_t b = 0; b < 6; ++b) {
        const int hi = detail::hex_value(text[b * 3]);
        const int lo = detail::hex_value(text[b * 3 + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        if (b < 5 && text[b * 3 + 2] != ':' && text[b * 3 + 2] != '-') return std::nullopt;
        mac[b] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return mac;
}

inline std::uint64_t mac_to_u64(const MacAddress& mac) noexcept {
    std::uint64_t v = 0;
    for (auto b : mac) v = (v << 8) | b;
    return v;
}

}  // namespace iotgem
