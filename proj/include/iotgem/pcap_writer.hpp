#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "error.hpp"
#include "packet.hpp"
#include "pcap.hpp"

namespace iotgem {

/// Fields for synthesising an Ethernet frame; used by fixtures and the
/// `synth` command.
struct FrameSpec {
    MacAddress src_mac{0x02, 0, 0, 0, 0, 1};
    MacAddress dst_mac{0x02, 0, 0, 0, 0, 2};
    L4Kind kind = L4Kind::tcp;
    Ipv4Address src_ip = 0x0A000001;
    Ipv4Address dst_ip = 0x0A000002;
    std::uint8_t ttl = 64;
    std::uint8_t ip_flags = 0x2;  // DF
    std::uint16_t ip_id = 0;
    std::uint16_t sport = 40000;
    std::uint16_t dport = 80;
    std::uint8_t tcp_flags = tcp_flag::syn;
    std::uint16_t tcp_window = 64240;
    std::uint32_t tcp_seq = 0;
    std::uint32_t tcp_ack = 0;
    std::uint16_t arp_opcode = 1;
    std::vector<std::uint8_t> payload;
};

namespace detail {

inline void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

inline void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    put16(b, static_cast<std::uint16_t>(v >> 16));
    put16(b, static_cast<std::uint16_t>(v));
}

inline void put32le(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < header.size(); i += 2) sum += static_cast<std::uint32_t>((header[i] << 8) | header[i + 1]);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

}  // namespace detail

/// Serialises `spec` to frame bytes (no FCS, no padding).
inline std::vector<std::uint8_t> build_frame(const FrameSpec& spec) {
    using detail::put16;
    using detail::put32;
    std::vector<std::uint8_t> b;
    b.insert(b.end(), spec.dst_mac.begin(), spec.dst_mac.end());
    b.insert(b.end(), spec.src_mac.begin(), spec.src_mac.end());

    if (spec.kind == L4Kind::arp) {
        put16(b, ethertype::arp);
        put16(b, 1);
        put16(b, ethertype::ipv4);
        b.push_back(6);
        b.push_back(4);
        put16(b, spec.arp_opcode);
        b.insert(b.end(), spec.src_mac.begin(), spec.src_mac.end());
        put32(b, spec.src_ip);
        for (int i = 0; i < 6; ++i) b.push_back(spec.arp_opcode == 1 ? 0 : spec.dst_mac[static_cast<std::size_t>(i)]);
        put32(b, spec.dst_ip);
        return b;
    }

    put16(b, ethertype::ipv4);
    const std::size_t ip_start = b.size();
    std::uint8_t proto = 0;
    std::size_t l4_len = 0;
    switch (spec.kind) {
        case L4Kind::tcp: proto = 6; l4_len = 20; break;
        case L4Kind::udp: proto = 17; l4_len = 8; break;
        case L4Kind::icmp: proto = 1; l4_len = 8; break;
        default: proto = 47; l4_len = 0; break;
    }
    const auto total = static_cast<std::uint16_t>(20 + l4_len + spec.payload.size());
    b.push_back(0x45);
    b.push_back(0);
    put16(b, total);
    put16(b, spec.ip_id);
    put16(b, static_cast<std::uint16_t>(spec.ip_flags << 13));
    b.push_back(spec.ttl);
    b.push_back(proto);
    put16(b, 0);
    put32(b, spec.src_ip);
    put32(b, spec.dst_ip);
    const auto csum = detail::ipv4_checksum({b.data() + ip_start, 20});
    b[ip_start + 10] = static_cast<std::uint8_t>(csum >> 8);
    b[ip_start + 11] = static_cast<std::uint8_t>(csum);

    switch (spec.kind) {
        case L4Kind::tcp:
            put16(b, spec.sport);
            put16(b, spec.dport);
            put32(b, spec.tcp_seq);
            put32(b, spec.tcp_ack);
            b.push_back(0x50);
            b.push_back(spec.tcp_flags);
            put16(b, spec.tcp_window);
            put16(b, 0);  // checksum left zero
            put16(b, 0);
            break;
        case L4Kind::udp:
            put16(b, spec.sport);
            put16(b, spec.dport);
            put16(b, static_cast<std::uint16_t>(8 + spec.payload.size()));
            put16(b, 0);
            break;
        case L4Kind::icmp:
            b.push_back(8);
            b.push_back(0);
            put16(b, 0);
            put32(b, 0);
            break;
        default:
            break;
    }
    b.insert(b.end(), spec.payload.begin(), spec.payload.end());
    return b;
}

/// Classic little-endian pcap writer, Ethernet link type.
class PcapWriter {
public:
    explicit PcapWriter(bool nanosecond = false) : nanosecond_(nanosecond) {
        using detail::put32le;
        put32le(bytes_, nanosecond ? pcap_magic::nano : pcap_magic::micro);
        bytes_.push_back(2);
        bytes_.push_back(0);
        bytes_.push_back(4);
        bytes_.push_back(0);
        put32le(bytes_, 0);
        put32le(bytes_, 0);
        put32le(bytes_, 262144);
        put32le(bytes_, linktype_ethernet);
    }

    /// Appends a record; `wire_len` of 0 means "same as captured".
    void add(std::int64_t capture_ns, std::span<const std::uint8_t> frame, std::uint32_t wire_len = 0) {
        using detail::put32le;
        const auto sec = static_cast<std::uint32_t>(capture_ns / 1'000'000'000);
        const auto rem = static_cast<std::uint32_t>(capture_ns % 1'000'000'000);
        put32le(bytes_, sec);
        put32le(bytes_, nanosecond_ ? rem : rem / 1000);
        put32le(bytes_, static_cast<std::uint32_t>(frame.size()));
        put32le(bytes_, wire_len == 0 ? static_cast<std::uint32_t>(frame.size()) : wire_len);
        bytes_.insert(bytes_.end(), frame.begin(), frame.end());
    }

    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) fail(errc::io_error, "cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    }

private:
    bool nanosecond_;
    std::vector<std::uint8_t> bytes_;
};

}  // namespace iotgem
