#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "entropy.hpp"
#include "error.hpp"
#include "packet.hpp"

namespace iotgem {

namespace pcap_magic {
inline constexpr std::uint32_t micro = 0xA1B2C3D4;
inline constexpr std::uint32_t micro_swapped = 0xD4C3B2A1;
inline constexpr std::uint32_t nano = 0xA1B23C4D;
inline constexpr std::uint32_t nano_swapped = 0x4D3CB2A1;
}  // namespace pcap_magic

inline constexpr std::uint32_t linktype_ethernet = 1;
inline constexpr std::size_t pcap_global_header_size = 24;
inline constexpr std::size_t pcap_record_header_size = 16;

namespace ethertype {
inline constexpr std::uint16_t ipv4 = 0x0800;
inline constexpr std::uint16_t arp = 0x0806;
inline constexpr std::uint16_t vlan = 0x8100;
inline constexpr std::uint16_t qinq = 0x88A8;
inline constexpr std::uint16_t ipv6 = 0x86DD;
}  // namespace ethertype

enum class SkipReason : std::uint8_t { none, unsupported_network, malformed };

/// Counters for everything the reader did not turn into a packet.
struct PcapStats {
    std::size_t records = 0;
    std::size_t decoded = 0;
    std::size_t truncated_records = 0;  // incomplete trailing record, dropped
    std::size_t skipped_unsupported = 0;  // IPv6, VLAN-tagged, tunnelled
    std::size_t skipped_malformed = 0;

    std::size_t warnings() const noexcept { return truncated_records; }
};

struct PcapCapture {
    std::vector<DecodedPacket> packets;
    PcapStats stats;
    bool nanosecond = false;
    bool big_endian = false;
};

namespace detail {

inline std::uint16_t be16(const std::uint8_t* p) noexcept {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline std::uint32_t be32(const std::uint8_t* p) noexcept {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline std::uint32_t le32(const std::uint8_t* p) noexcept {
    return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) | p[0];
}

}  // namespace detail

struct DecodeResult {
    std::optional<DecodedPacket> packet;
    SkipReason skip = SkipReason::none;
};

/// Decodes one Ethernet frame. `frame` holds the captured bytes; `wire_len`
/// is the original length from the record header.
inline DecodeResult decode_frame(std::span<const std::uint8_t> frame, std::int64_t capture_ns, std::uint32_t wire_len) {
    using detail::be16;
    using detail::be32;

    if (frame.size() < 14) return {std::nullopt, SkipReason::malformed};

    DecodedPacket pkt;
    pkt.capture_ns = capture_ns;
    pkt.captured_len = static_cast<std::uint32_t>(frame.size());
    pkt.frame_len = std::max<std::uint32_t>(wire_len, pkt.captured_len);
    std::copy_n(frame.data(), 6, pkt.dst_mac.begin());
    std::copy_n(frame.data() + 6, 6, pkt.src_mac.begin());
    pkt.eth_type = be16(frame.data() + 12);

    const std::uint8_t* l3 = frame.data() + 14;
    const std::size_t l3_cap = frame.size() - 14;

    switch (pkt.eth_type) {
        case ethertype::vlan:
        case ethertype::qinq:
        case ethertype::ipv6:
            return {std::nullopt, SkipReason::unsupported_network};
        case ethertype::arp: {
            // Ethernet/IPv4 ARP only: htype 1, ptype 0x0800, hlen 6, plen 4.
            if (l3_cap < 28 || be16(l3) != 1 || be16(l3 + 2) != ethertype::ipv4 || l3[4] != 6 || l3[5] != 4)
                return {std::nullopt, SkipReason::malformed};
            pkt.l4_kind = L4Kind::arp;
            pkt.arp = ArpFields{be16(l3 + 6), be32(l3 + 14), be32(l3 + 24)};
            return {std::move(pkt), SkipReason::none};
        }
        case ethertype::ipv4:
            break;
        default:
            pkt.l4_kind = L4Kind::other;
            return {std::move(pkt), SkipReason::none};
    }

    if (l3_cap < 20) return {std::nullopt, SkipReason::malformed};
    const unsigned version = l3[0] >> 4;
    const std::size_t ihl = std::size_t{l3[0] & 0x0Fu} * 4;
    if (version != 4 || ihl < 20 || l3_cap < ihl) return {std::nullopt, SkipReason::malformed};
    std::size_t total_len = be16(l3 + 2);
    if (total_len == 0) total_len = l3_cap;  // segmentation offload leaves it unset
    if (total_len < ihl) return {std::nullopt, SkipReason::malformed};

    pkt.ip_present = true;
    pkt.ip_id = be16(l3 + 4);
    const std::uint16_t frag = be16(l3 + 6);
    pkt.ip_flags = static_cast<std::uint8_t>(frag >> 13);
    const std::uint16_t frag_offset = frag & 0x1FFF;
    pkt.ip_ttl = l3[8];
    pkt.ip_proto = l3[9];
    pkt.ip_checksum = be16(l3 + 10);
    pkt.src_ip = be32(l3 + 12);
    pkt.dst_ip = be32(l3 + 16);

    const std::uint8_t* l4 = l3 + ihl;
    const std::size_t l4_cap = std::min(l3_cap, total_len) - ihl;
    const std::size_t l4_wire = total_len - ihl;
    std::size_t l4_header = 0;

    if (frag_offset != 0) {
        pkt.l4_kind = L4Kind::other;
    } else if (pkt.ip_proto == 6) {
        if (l4_cap < 20) return {std::nullopt, SkipReason::malformed};
        const std::size_t doff = static_cast<std::size_t>(l4[12] >> 4) * 4;
        if (doff < 20 || l4_cap < doff) return {std::nullopt, SkipReason::malformed};
        pkt.l4_kind = L4Kind::tcp;
        pkt.sport = be16(l4);
        pkt.dport = be16(l4 + 2);
        pkt.tcp = TcpFields{l4[13], be16(l4 + 14), be32(l4 + 4), be32(l4 + 8)};
        l4_header = doff;
    } else if (pkt.ip_proto == 17) {
        if (l4_cap < 8) return {std::nullopt, SkipReason::malformed};
        pkt.l4_kind = L4Kind::udp;
        pkt.sport = be16(l4);
        pkt.dport = be16(l4 + 2);
        l4_header = 8;
    } else if (pkt.ip_proto == 1) {
        if (l4_cap < 8) return {std::nullopt, SkipReason::malformed};
        pkt.l4_kind = L4Kind::icmp;
        l4_header = 8;
    } else {
        pkt.l4_kind = L4Kind::other;
    }

    const std::size_t payload_wire = l4_wire > l4_header ? l4_wire - l4_header : 0;
    pkt.payload_len = static_cast<std::uint32_t>(std::min<std::size_t>(payload_wire, pkt.frame_len));
    const std::size_t payload_cap = l4_cap > l4_header ? l4_cap - l4_header : 0;
    pkt.payload_entropy = pkt.payload_len <= 1 ? 0.0 : shannon_entropy({l4 + l4_header, payload_cap});
    return {std::move(pkt), SkipReason::none};
}

/// Parses an in-memory classic libpcap image.
inline PcapCapture parse_pcap(std::span<const std::uint8_t> data) {
    if (data.size() < 4) fail(errc::truncated_header, "capture shorter than the pcap magic");
    const std::uint32_t magic = detail::le32(data.data());
    PcapCapture out;
    switch (magic) {
        case pcap_magic::micro: break;
        case pcap_magic::nano: out.nanosecond = true; break;
        case pcap_magic::micro_swapped: out.big_endian = true; break;
        case pcap_magic::nano_swapped: out.big_endian = out.nanosecond = true; break;
        default: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "unrecognised pcap magic 0x%08X", detail::be32(data.data()));
            fail(errc::bad_magic, buf);
        }
    }
    if (data.size() < pcap_global_header_size) fail(errc::truncated_header, "pcap global header is incomplete");

    const auto u32 = [&](std::size_t off) {
        return out.big_endian ? detail::be32(data.data() + off) : detail::le32(data.data() + off);
    };
    const std::uint32_t linktype = u32(20) & 0x0FFFFFFFu;  // upper bits may carry FCS info
    if (linktype != linktype_ethernet)
        fail(errc::unsupported_link_type, "link type " + std::to_string(linktype) + " (only Ethernet is supported)");

    const std::int64_t frac_scale = out.nanosecond ? 1 : 1000;
    std::size_t off = pcap_global_header_size;
    while (off < data.size()) {
        if (data.size() - off < pcap_record_header_size) {
            ++out.stats.truncated_records;
            break;
        }
        const std::uint32_t ts_sec = u32(off);
        const std::uint32_t ts_frac = u32(off + 4);
        const std::uint32_t incl_len = u32(off + 8);
        const std::uint32_t orig_len = u32(off + 12);
        off += pcap_record_header_size;
        if (incl_len > data.size() - off) {
            ++out.stats.truncated_records;
            break;
        }
        ++out.stats.records;
        const std::int64_t ts = static_cast<std::int64_t>(ts_sec) * 1'000'000'000 + static_cast<std::int64_t>(ts_frac) * frac_scale;
        auto decoded = decode_frame(data.subspan(off, incl_len), ts, orig_len);
        off += incl_len;
        if (decoded.packet) {
            out.packets.push_back(std::move(*decoded.packet));
            ++out.stats.decoded;
        } else if (decoded.skip == SkipReason::unsupported_network) {
            ++out.stats.skipped_unsupported;
        } else {
            ++out.stats.skipped_malformed;
        }
    }
    return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline PcapCapture read_pcap(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse_pcap(bytes);
    } catch (const error& e) {
        throw error(e.code(), path.string() + ": " + std::string(e.what()).substr(to_string(e.code()).size() + 2));
    }
}

}  // namespace iotgem
