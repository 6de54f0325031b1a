#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "iotgem/entropy.hpp"
#include "iotgem/pcap.hpp"
#include "iotgem/pcap_writer.hpp"
#include "iotgem/rng.hpp"
#include "support/one_syn.hpp"

using namespace iotgem;

namespace {

std::vector<std::uint8_t> header_only(std::uint32_t magic = pcap_magic::micro, std::uint32_t linktype = 1) {
    PcapWriter w(magic == pcap_magic::nano);
    auto b = w.bytes();
    b[20] = static_cast<std::uint8_t>(linktype);
    return b;
}

errc code_of(const std::vector<std::uint8_t>& bytes) {
    try {
        (void)parse_pcap(bytes);
    } catch (const error& e) {
        return e.code();
    }
    return errc::invariant_failure;
}

/// Histogram entropy computed independently: counts in a map, then a
/// separate pass over the distinct symbols.
double entropy_oracle(const std::vector<std::uint8_t>& data) {
    if (data.empty()) return 0.0;
    std::map<int, long> counts;
    for (auto b : data) counts[b]++;
    long double h = 0.0L;
    for (const auto& [sym, c] : counts) {
        const long double p = static_cast<long double>(c) / static_cast<long double>(data.size());
        h += -p * std::log2(p);
    }
    return static_cast<double>(h);
}

}  // namespace

TEST(ReadPcap, HeaderOnlyCaptureIsEmpty) {
    const auto cap = parse_pcap(header_only());
    EXPECT_TRUE(cap.packets.empty());
    EXPECT_EQ(cap.stats.warnings(), 0u);
    EXPECT_EQ(cap.stats.records, 0u);
}

TEST(ReadPcap, OneSynFixture) {
    const auto bytes = fixtures::one_syn_pcap();
    ASSERT_EQ(bytes.size(), 24u + 16u + 54u);
    EXPECT_EQ(read_file_bytes(IOTGEM_FIXTURE_DIR "/one_syn.pcap"), bytes);

    const auto cap = read_pcap(IOTGEM_FIXTURE_DIR "/one_syn.pcap");
    ASSERT_EQ(cap.packets.size(), 1u);
    const auto& p = cap.packets[0];
    EXPECT_EQ(p.capture_ns, 1600000000LL * 1'000'000'000 + 250'000'000);
    EXPECT_EQ(p.frame_len, 54u);
    EXPECT_EQ(format_mac(p.src_mac), "02:00:00:00:00:01");
    EXPECT_EQ(format_mac(p.dst_mac), "02:00:00:00:00:02");
    EXPECT_EQ(p.eth_type, 0x0800);
    EXPECT_TRUE(p.ip_present);
    EXPECT_EQ(format_ipv4(p.src_ip), "192.168.1.10");
    EXPECT_EQ(format_ipv4(p.dst_ip), "192.168.1.20");
    EXPECT_EQ(p.ip_proto, 6);
    EXPECT_EQ(p.ip_ttl, 64);
    EXPECT_EQ(p.ip_flags, 0x2);
    EXPECT_EQ(p.ip_id, 0x1C46);
    EXPECT_EQ(p.ip_checksum, 0x9B1B);
    EXPECT_EQ(p.l4_kind, L4Kind::tcp);
    EXPECT_EQ(p.sport, 40000);
    EXPECT_EQ(p.dport, 80);
    ASSERT_TRUE(p.tcp);
    EXPECT_TRUE(p.tcp->has(tcp_flag::syn));
    EXPECT_EQ(p.tcp->flags, tcp_flag::syn);
    EXPECT_EQ(p.tcp->window, 64240);
    EXPECT_EQ(p.tcp->seq, 1u);
    EXPECT_EQ(p.payload_len, 0u);
    EXPECT_EQ(p.payload_entropy, 0.0);
    EXPECT_FALSE(p.arp);
}

TEST(ReadPcap, BuilderChecksumMatchesHandBuiltFrame) {
    FrameSpec f;
    f.src_ip = *parse_ipv4("192.168.1.10");
    f.dst_ip = *parse_ipv4("192.168.1.20");
    f.ip_id = 0x1C46;
    f.tcp_seq = 1;
    PcapWriter w;
    w.add(1600000000LL * 1'000'000'000 + 250'000'000, build_frame(f));
    auto expected = fixtures::one_syn_pcap();
    auto got = w.bytes();
    // the writer records snaplen 262144; the fixture uses 65535
    for (std::size_t i = 16; i < 20; ++i) got[i] = expected[i];
    EXPECT_EQ(got, expected);
}

TEST(ReadPcap, BadMagic) {
    auto b = header_only();
    b[0] = 0xEF;
    b[1] = 0xBE;
    b[2] = 0xAD;
    b[3] = 0xDE;
    EXPECT_EQ(code_of(b), errc::bad_magic);
}

TEST(ReadPcap, TruncatedGlobalHeader) {
    auto b = header_only();
    b.resize(10);
    EXPECT_EQ(code_of(b), errc::truncated_header);
    b.resize(2);
    EXPECT_EQ(code_of(b), errc::truncated_header);
}

TEST(ReadPcap, UnsupportedLinkType) {
    EXPECT_EQ(code_of(header_only(pcap_magic::micro, 113)), errc::unsupported_link_type);
}

TEST(ReadPcap, BigEndianAndNanosecondVariants) {
    const auto le = fixtures::one_syn_pcap();
    // byte-swap every 32-bit header field of the global and record headers
    auto be = le;
    auto swap32 = [&](std::size_t off) { std::reverse(be.begin() + static_cast<long>(off), be.begin() + static_cast<long>(off) + 4); };
    auto swap16 = [&](std::size_t off) { std::swap(be[off], be[off + 1]); };
    swap32(0);
    swap16(4);
    swap16(6);
    for (std::size_t off : {8u, 12u, 16u, 20u, 24u, 28u, 32u, 36u}) swap32(off);
    const auto a = parse_pcap(le);
    const auto b = parse_pcap(be);
    EXPECT_TRUE(b.big_endian);
    ASSERT_EQ(b.packets.size(), 1u);
    EXPECT_EQ(a.packets[0], b.packets[0]);

    PcapWriter nano(true);
    FrameSpec f;
    nano.add(1600000000LL * 1'000'000'000 + 123'456'789, build_frame(f));
    const auto n = parse_pcap(nano.bytes());
    EXPECT_TRUE(n.nanosecond);
    ASSERT_EQ(n.packets.size(), 1u);
    EXPECT_EQ(n.packets[0].capture_ns, 1600000000LL * 1'000'000'000 + 123'456'789);
}

TEST(ReadPcap, TruncatedFinalRecordIsDroppedWithWarning) {
    auto b = fixtures::one_syn_pcap();
    const auto record = std::vector<std::uint8_t>(b.begin() + 24, b.end());
    b.insert(b.end(), record.begin(), record.end() - 10);
    const auto cap = parse_pcap(b);
    EXPECT_EQ(cap.packets.size(), 1u);
    EXPECT_EQ(cap.stats.truncated_records, 1u);
    EXPECT_EQ(cap.stats.warnings(), 1u);
}

TEST(ReadPcap, Ipv6AndVlanAreSkippedAndCounted) {
    PcapWriter w;
    auto v4 = build_frame(FrameSpec{});
    auto v6 = v4;
    v6[12] = 0x86;
    v6[13] = 0xDD;
    auto vlan = v4;
    vlan[12] = 0x81;
    vlan[13] = 0x00;
    w.add(1, v4);
    w.add(2, v6);
    w.add(3, vlan);
    const auto cap = parse_pcap(w.bytes());
    EXPECT_EQ(cap.packets.size(), 1u);
    EXPECT_EQ(cap.stats.skipped_unsupported, 2u);
    EXPECT_EQ(cap.stats.records, 3u);
}

TEST(ReadPcap, ArpUdpIcmpAndSnaplen) {
    PcapWriter w;
    FrameSpec arp;
    arp.kind = L4Kind::arp;
    arp.src_ip = 0x0A000001;
    arp.dst_ip = 0x0A000009;
    w.add(1000, build_frame(arp));

    FrameSpec udp;
    udp.kind = L4Kind::udp;
    udp.sport = 5353;
    udp.dport = 53;
    udp.payload = {0, 0, 1, 1};
    w.add(2000, build_frame(udp));

    FrameSpec icmp;
    icmp.kind = L4Kind::icmp;
    icmp.payload.assign(32, 0x61);
    w.add(3000, build_frame(icmp));

    FrameSpec big;
    big.payload.assign(1000, 0);
    for (std::size_t i = 0; i < big.payload.size(); ++i) big.payload[i] = static_cast<std::uint8_t>(i);
    auto frame = build_frame(big);
    const auto wire = static_cast<std::uint32_t>(frame.size());
    frame.resize(100);  // snaplen truncation
    w.add(4000, frame, wire);

    const auto cap = parse_pcap(w.bytes());
    ASSERT_EQ(cap.packets.size(), 4u);
    const auto& a = cap.packets[0];
    EXPECT_EQ(a.l4_kind, L4Kind::arp);
    EXPECT_FALSE(a.ip_present);
    ASSERT_TRUE(a.arp);
    EXPECT_EQ(a.arp->sender_ip, 0x0A000001u);
    EXPECT_EQ(a.arp->target_ip, 0x0A000009u);
    EXPECT_FALSE(a.sport);
    EXPECT_FALSE(a.tcp);

    const auto& u = cap.packets[1];
    EXPECT_EQ(u.l4_kind, L4Kind::udp);
    EXPECT_EQ(u.dport, 53);
    EXPECT_EQ(u.payload_len, 4u);
    EXPECT_DOUBLE_EQ(u.payload_entropy, 1.0);
    EXPECT_FALSE(u.tcp);

    const auto& i = cap.packets[2];
    EXPECT_EQ(i.l4_kind, L4Kind::icmp);
    EXPECT_EQ(i.payload_len, 32u);
    EXPECT_EQ(i.payload_entropy, 0.0);

    const auto& t = cap.packets[3];
    EXPECT_EQ(t.frame_len, wire);
    EXPECT_EQ(t.captured_len, 100u);
    EXPECT_EQ(t.payload_len, 1000u);
    EXPECT_LE(t.payload_len, t.frame_len);
}

TEST(ReadPcap, FuzzedInputNeverCrashesAndCountsEveryRecord) {
    rng gen(7);
    PcapWriter base;
    for (int k = 0; k < 40; ++k) {
        FrameSpec f;
        f.kind = static_cast<L4Kind>(gen.index(4));
        f.payload.resize(gen.index(64));
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(gen.index(256));
        base.add(k * 1000, build_frame(f));
    }
    for (int trial = 0; trial < 300; ++trial) {
        auto bytes = base.bytes();
        const auto flips = 1 + gen.index(20);
        for (std::uint64_t f = 0; f < flips; ++f) {
            const auto pos = 24 + gen.index(bytes.size() - 24);
            bytes[pos] = static_cast<std::uint8_t>(gen.index(256));
        }
        if (gen.bernoulli(0.3)) bytes.resize(24 + gen.index(bytes.size() - 24));
        PcapCapture cap;
        ASSERT_NO_THROW(cap = parse_pcap(bytes));
        EXPECT_EQ(cap.stats.records, cap.stats.decoded + cap.stats.skipped_malformed + cap.stats.skipped_unsupported);
        for (const auto& p : cap.packets) {
            EXPECT_GE(p.payload_entropy, 0.0);
            EXPECT_LE(p.payload_entropy, 8.0);
            EXPECT_LE(p.payload_len, p.frame_len);
            if (p.payload_len <= 1) { EXPECT_EQ(p.payload_entropy, 0.0); }
            EXPECT_EQ(p.tcp.has_value(), p.l4_kind == L4Kind::tcp);
        }
    }
}

TEST(ReadPcap, DecodingIsDeterministic) {
    rng gen(11);
    PcapWriter w;
    for (int k = 0; k < 200; ++k) {
        FrameSpec f;
        f.kind = static_cast<L4Kind>(gen.index(4));
        f.payload.resize(gen.index(300));
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(gen.index(256));
        w.add(k * 1000 + static_cast<std::int64_t>(gen.index(999)) * 1000, build_frame(f));
    }
    EXPECT_EQ(parse_pcap(w.bytes()).packets, parse_pcap(w.bytes()).packets);
}

TEST(ShannonEntropy, Examples) {
    EXPECT_EQ(shannon_entropy(std::vector<std::uint8_t>(100, 0x41)), 0.0);
    std::vector<std::uint8_t> all(256);
    for (int i = 0; i < 256; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    EXPECT_EQ(shannon_entropy(all), 8.0);
    EXPECT_EQ(shannon_entropy(std::vector<std::uint8_t>{0, 0, 1, 1}), 1.0);
    EXPECT_EQ(shannon_entropy(std::vector<std::uint8_t>{}), 0.0);
    EXPECT_EQ(shannon_entropy(std::vector<std::uint8_t>{0x7F}), 0.0);
}

TEST(ShannonEntropy, MatchesHistogramOracle) {
    rng gen(3);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::uint8_t> data(gen.index(2000));
        const auto alphabet = 1 + gen.index(256);
        for (auto& b : data) b = static_cast<std::uint8_t>(gen.index(alphabet));
        EXPECT_NEAR(shannon_entropy(data), entropy_oracle(data), 1e-12);
    }
}
