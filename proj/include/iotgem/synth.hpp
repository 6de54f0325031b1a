#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "packet.hpp"
#include "pcap_writer.hpp"
#include "rng.hpp"

namespace iotgem::synth {

/// Seeded labelled capture: benign TCP/UDP chatter among a host pool plus a
/// UDP flood from one attacker host. Benign frame sizes are uniform over
/// [min_frame, max_frame] and never equal attack_frame_len.
struct CaptureConfig {
    std::uint64_t seed = 0;
    std::size_t packets = 3000;
    std::size_t benign_hosts = 6;
    double attack_share = 0.4;
    /// Constant attack frame size; unset draws attack sizes like benign ones.
    std::optional<std::uint32_t> attack_frame_len = 1078;
    std::uint32_t min_frame = 60;
    std::uint32_t max_frame = 1514;
    std::int64_t start_ns = 1'700'000'000LL * 1'000'000'000;
    bool nanosecond = false;

    void validate() const {
        if (packets == 0) fail(errc::invalid_argument, "synthetic capture needs at least one packet");
        if (benign_hosts < 2 || benign_hosts > 199) fail(errc::invalid_argument, "benign_hosts must lie in [2, 199]");
        if (!(attack_share >= 0.0 && attack_share <= 1.0)) fail(errc::invalid_argument, "attack_share must lie in [0, 1]");
        if (min_frame < 60 || max_frame > 1514 || min_frame >= max_frame)
            fail(errc::invalid_argument, "frame sizes must satisfy 60 <= min_frame < max_frame <= 1514");
        if (attack_frame_len && (*attack_frame_len < 60 || *attack_frame_len > 1514))
            fail(errc::invalid_argument, "attack_frame_len must lie in [60, 1514]");
    }
};

inline constexpr Ipv4Address attacker_ip = 0x0A0000C8;  // 10.0.0.200

inline MacAddress host_mac(std::uint32_t i) {
    return {0x02, 0x00, 0x00, 0x00, static_cast<std::uint8_t>(i >> 8), static_cast<std::uint8_t>(i)};
}

inline Ipv4Address host_ip(std::uint32_t i) { return 0x0A000000u | i; }

/// Rule document that labels every packet sent by the attacker.
inline nlohmann::json attack_rules() {
    return nlohmann::json::array({{{"comment", "synthetic attacker"},
                                   {"label", "ATTACK"},
                                   {"priority", 1},
                                   {"match", {{"src_ip", "10.0.0.200/32"}}}}});
}

inline std::vector<std::uint8_t> make_capture(const CaptureConfig& cfg) {
    cfg.validate();
    rng g(cfg.seed);
    PcapWriter w(cfg.nanosecond);
    std::int64_t ts = cfg.start_ns;
    auto draw_size = [&] {
        for (;;) {
            const auto s = static_cast<std::uint32_t>(cfg.min_frame + g.index(cfg.max_frame - cfg.min_frame + 1));
            if (!cfg.attack_frame_len || s != *cfg.attack_frame_len) return s;
        }
    };
    auto payload = [&](std::size_t n) {
        std::vector<std::uint8_t> p(n);
        for (auto& b : p) b = static_cast<std::uint8_t>(g.index(256));
        return p;
    };
    const auto victim = static_cast<std::uint32_t>(1 + g.index(cfg.benign_hosts));
    for (std::size_t n = 0; n < cfg.packets; ++n) {
        ts += static_cast<std::int64_t>(1'000 + g.index(20'000'000));
        FrameSpec f;
        f.ttl = static_cast<std::uint8_t>(48 + g.index(80));
        f.ip_id = static_cast<std::uint16_t>(g.index(65536));
        if (g.bernoulli(cfg.attack_share)) {
            const std::uint32_t size = cfg.attack_frame_len ? *cfg.attack_frame_len : draw_size();
            f.kind = L4Kind::udp;
            f.src_mac = host_mac(200);
            f.dst_mac = host_mac(victim);
            f.src_ip = attacker_ip;
            f.dst_ip = host_ip(victim);
            f.sport = static_cast<std::uint16_t>(1024 + g.index(64512));
            f.dport = static_cast<std::uint16_t>(g.bernoulli(0.5) ? 53 : 1 + g.index(1023));
            f.payload = payload(size - 42);
        } else {
            const auto a = static_cast<std::uint32_t>(1 + g.index(cfg.benign_hosts));
            auto b = static_cast<std::uint32_t>(1 + g.index(cfg.benign_hosts - 1));
            if (b >= a) ++b;
            const std::uint32_t size = draw_size();
            const bool tcp = g.bernoulli(0.7);
            f.kind = tcp ? L4Kind::tcp : L4Kind::udp;
            f.src_mac = host_mac(a);
            f.dst_mac = host_mac(b);
            f.src_ip = host_ip(a);
            f.dst_ip = host_ip(b);
            f.sport = static_cast<std::uint16_t>(1024 + g.index(64512));
            f.dport = static_cast<std::uint16_t>(g.bernoulli(0.6) ? (tcp ? 443 : 123) : 1024 + g.index(64512));
            if (tcp) {
                f.tcp_flags = g.bernoulli(0.8) ? static_cast<std::uint8_t>(tcp_flag::ack | (g.bernoulli(0.5) ? tcp_flag::psh : 0))
                                               : tcp_flag::syn;
                f.tcp_window = static_cast<std::uint16_t>(1024 + g.index(64000));
                f.tcp_seq = static_cast<std::uint32_t>(g.next());
                f.tcp_ack = static_cast<std::uint32_t>(g.next());
            }
            const std::uint32_t header = tcp ? 54 : 42;
            f.payload = payload(size - header);
        }
        w.add(ts, build_frame(f));
    }
    return w.bytes();
}

inline void write_capture(const CaptureConfig& cfg, const std::filesystem::path& path) {
    const auto bytes = make_capture(cfg);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_error, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(errc::io_error, "write failed for " + path.string());
}

}  // namespace iotgem::synth
