#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "packet.hpp"

namespace iotgem {

/// IPv4 prefix; a bare address is a /32.
struct Ipv4Prefix {
    Ipv4Address network = 0;
    int length = 32;

    bool contains(Ipv4Address ip) const noexcept {
        if (length == 0) return true;
        const Ipv4Address mask = length == 32 ? ~Ipv4Address{0} : ~((Ipv4Address{1} << (32 - length)) - 1);
        return (ip & mask) == (network & mask);
    }
};

struct TimeRange {
    std::int64_t begin_ns = 0;  // inclusive
    std::int64_t end_ns = 0;    // exclusive
};

struct RuleMatch {
    std::optional<Ipv4Prefix> src_ip;
    std::optional<Ipv4Prefix> dst_ip;
    std::optional<MacAddress> src_mac;
    std::optional<MacAddress> dst_mac;
    std::optional<std::uint8_t> ip_proto;
    std::optional<L4Kind> l4_kind;
    std::optional<std::uint16_t> sport;
    std::optional<std::uint16_t> dport;
    std::optional<std::uint8_t> tcp_flags_required;  // every listed flag must be set
    std::optional<TimeRange> time_range;

    bool empty() const noexcept {
        return !src_ip && !dst_ip && !src_mac && !dst_mac && !ip_proto && !l4_kind && !sport && !dport &&
               !tcp_flags_required && !time_range;
    }
};

struct LabelRule {
    RuleMatch match;
    Label label = Label::attack;
    int priority = 0;
};

using RuleSet = std::vector<LabelRule>;

namespace detail {

// IP predicates also test the sender/target protocol addresses of ARP frames.
inline std::optional<std::pair<Ipv4Address, Ipv4Address>> rule_addresses(const DecodedPacket& p) {
    if (p.ip_present) return std::pair{p.src_ip, p.dst_ip};
    if (p.arp) return std::pair{p.arp->sender_ip, p.arp->target_ip};
    return std::nullopt;
}

}  // namespace detail

inline bool matches(const RuleMatch& m, const DecodedPacket& p) {
    if (m.src_ip || m.dst_ip) {
        const auto addrs = detail::rule_addresses(p);
        if (!addrs) return false;
        if (m.src_ip && !m.src_ip->contains(addrs->first)) return false;
        if (m.dst_ip && !m.dst_ip->contains(addrs->second)) return false;
    }
    if (m.src_mac && *m.src_mac != p.src_mac) return false;
    if (m.dst_mac && *m.dst_mac != p.dst_mac) return false;
    if (m.ip_proto && (!p.ip_present || *m.ip_proto != p.ip_proto)) return false;
    if (m.l4_kind && *m.l4_kind != p.l4_kind) return false;
    if (m.sport && (!p.sport || *m.sport != *p.sport)) return false;
    if (m.dport && (!p.dport || *m.dport != *p.dport)) return false;
    if (m.tcp_flags_required && (!p.tcp || (p.tcp->flags & *m.tcp_flags_required) != *m.tcp_flags_required))
        return false;
    if (m.time_range && (p.capture_ns < m.time_range->begin_ns || p.capture_ns >= m.time_range->end_ns)) return false;
    return true;
}

inline void validate_rule(const LabelRule& rule, std::size_t index) {
    if (rule.match.empty()) fail(errc::invalid_rule, "rule " + std::to_string(index) + " has no predicates");
    if (rule.match.time_range && rule.match.time_range->begin_ns >= rule.match.time_range->end_ns)
        fail(errc::invalid_rule, "rule " + std::to_string(index) + " time_range must satisfy t0 < t1");
}

/// Label for one packet: highest priority wins, earlier rule wins a tie.
inline Label resolve_label(const DecodedPacket& p, const RuleSet& rules, Label fallback) {
    const LabelRule* best = nullptr;
    for (const auto& r : rules) {
        if ((best == nullptr || r.priority > best->priority) && matches(r.match, p)) best = &r;
    }
    return best ? best->label : fallback;
}

inline std::vector<DecodedPacket> apply_rules(std::span<const DecodedPacket> packets, const RuleSet& rules,
                                              Label fallback) {
    for (std::size_t i = 0; i < rules.size(); ++i) validate_rule(rules[i], i);
    std::vector<DecodedPacket> out(packets.begin(), packets.end());
    for (auto& p : out) p.label = resolve_label(p, rules, fallback);
    return out;
}

// ---- JSON rule files -------------------------------------------------------

namespace detail {

inline Ipv4Prefix parse_prefix(const std::string& text, std::size_t index) {
    const auto slash = text.find('/');
    const auto addr = parse_ipv4(std::string_view(text).substr(0, slash));
    int length = 32;
    bool ok = addr.has_value();
    if (ok && slash != std::string::npos) {
        const auto tail = std::string_view(text).substr(slash + 1);
        auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), length);
        ok = ec == std::errc{} && ptr == tail.data() + tail.size() && length >= 0 && length <= 32;
    }
    if (!ok) fail(errc::invalid_rule, "rule " + std::to_string(index) + ": malformed IPv4 address '" + text + "'");
    return {*addr, length};
}

inline MacAddress parse_mac_or_fail(const std::string& text, std::size_t index) {
    auto mac = parse_mac(text);
    if (!mac) fail(errc::invalid_rule, "rule " + std::to_string(index) + ": malformed MAC address '" + text + "'");
    return *mac;
}

/// Seconds as a JSON number or an exact decimal string ("1600000000.123456789").
inline std::int64_t parse_seconds(const nlohmann::json& v, std::size_t index) {
    if (v.is_number_integer()) return v.get<std::int64_t>() * 1'000'000'000;
    if (v.is_number()) return static_cast<std::int64_t>(std::llround(v.get<double>() * 1e9));
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        const auto dot = s.find('.');
        std::int64_t whole = 0;
        auto [p1, e1] = std::from_chars(s.data(), s.data() + (dot == std::string::npos ? s.size() : dot), whole);
        if (e1 == std::errc{} && p1 == s.data() + (dot == std::string::npos ? s.size() : dot)) {
            std::int64_t frac = 0;
            std::size_t digits = 0;
            bool ok = true;
            if (dot != std::string::npos) {
                for (std::size_t i = dot + 1; i < s.size(); ++i) {
                    if (s[i] < '0' || s[i] > '9' || digits == 9) { ok = false; break; }
                    frac = frac * 10 + (s[i] - '0');
                    ++digits;
                }
                if (digits == 0) ok = false;
            }
            for (; digits < 9; ++digits) frac *= 10;
            if (ok) return whole * 1'000'000'000 + frac;
        }
    }
    fail(errc::invalid_rule, "rule " + std::to_string(index) + ": malformed time value " + v.dump());
}

inline std::uint8_t parse_flag_name(const std::string& name, std::size_t index) {
    if (name == "FIN") return tcp_flag::fin;
    if (name == "SYN") return tcp_flag::syn;
    if (name == "RST") return tcp_flag::rst;
    if (name == "PSH") return tcp_flag::psh;
    if (name == "ACK") return tcp_flag::ack;
    if (name == "URG") return tcp_flag::urg;
    if (name == "ECE") return tcp_flag::ece;
    if (name == "CWR") return tcp_flag::cwr;
    fail(errc::invalid_rule, "rule " + std::to_string(index) + ": unknown TCP flag '" + name + "'");
}

inline L4Kind parse_l4_kind(const std::string& name, std::size_t index) {
    for (auto k : {L4Kind::tcp, L4Kind::udp, L4Kind::icmp, L4Kind::arp, L4Kind::other})
        if (name == to_string(k)) return k;
    fail(errc::invalid_rule, "rule " + std::to_string(index) + ": unknown l4_kind '" + name + "'");
}

inline Label parse_label(const std::string& name) {
    if (name == "ATTACK" || name == "1") return Label::attack;
    if (name == "BENIGN" || name == "0") return Label::benign;
    fail(errc::invalid_rule, "unknown label '" + name + "'");
}

template <class T>
T bounded_int(const nlohmann::json& v, long long hi, const char* what, std::size_t index) {
    if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > hi)
        fail(errc::invalid_rule, "rule " + std::to_string(index) + ": " + what + " out of range");
    return static_cast<T>(v.get<long long>());
}

}  // namespace detail

/// Parses a rule array: `[{"label": "ATTACK", "priority": 1, "match": {...}}, ...]`.
inline RuleSet parse_rules(const nlohmann::json& doc) {
    using namespace detail;
    if (!doc.is_array()) fail(errc::invalid_rule, "rule file must be a JSON array");
    RuleSet rules;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& obj = doc[i];
        if (!obj.is_object() || !obj.contains("match") || !obj.contains("label") || !obj["match"].is_object() ||
            !obj["label"].is_string())
            fail(errc::invalid_rule, "rule " + std::to_string(i) + " needs an object 'match' and a string 'label'");
        for (const auto& [key, _] : obj.items())
            if (key != "match" && key != "label" && key != "priority" && key != "comment")
                fail(errc::invalid_rule, "rule " + std::to_string(i) + ": unknown key '" + key + "'");
        LabelRule rule;
        try {
            rule.label = parse_label(obj["label"].get<std::string>());
        } catch (const error&) {
            fail(errc::invalid_rule, "rule " + std::to_string(i) + ": label must be ATTACK or BENIGN");
        }
        if (obj.contains("priority")) {
            if (!obj["priority"].is_number_integer()) fail(errc::invalid_rule, "rule " + std::to_string(i) + ": priority must be an integer");
            rule.priority = obj["priority"].get<int>();
        }
        auto& m = rule.match;
        for (const auto& [key, v] : obj["match"].items()) {
            if (key == "src_ip" || key == "dst_ip") {
                if (!v.is_string()) fail(errc::invalid_rule, "rule " + std::to_string(i) + ": " + key + " must be a string");
                (key == "src_ip" ? m.src_ip : m.dst_ip) = parse_prefix(v.get<std::string>(), i);
            } else if (key == "src_mac" || key == "dst_mac") {
                if (!v.is_string()) fail(errc::invalid_rule, "rule " + std::to_string(i) + ": " + key + " must be a string");
                (key == "src_mac" ? m.src_mac : m.dst_mac) = parse_mac_or_fail(v.get<std::string>(), i);
            } else if (key == "ip_proto") {
                m.ip_proto = bounded_int<std::uint8_t>(v, 255, "ip_proto", i);
            } else if (key == "l4_kind") {
                if (!v.is_string()) fail(errc::invalid_rule, "rule " + std::to_string(i) + ": l4_kind must be a string");
                m.l4_kind = parse_l4_kind(v.get<std::string>(), i);
            } else if (key == "sport" || key == "dport") {
                (key == "sport" ? m.sport : m.dport) = bounded_int<std::uint16_t>(v, 65535, key.c_str(), i);
            } else if (key == "tcp_flags") {
                if (!v.is_array() || v.empty()) fail(errc::invalid_rule, "rule " + std::to_string(i) + ": tcp_flags must be a non-empty array");
                std::uint8_t flags = 0;
                for (const auto& f : v) {
                    if (!f.is_string()) fail(errc::invalid_rule, "rule " + std::to_string(i) + ": tcp flag names must be strings");
                    flags |= parse_flag_name(f.get<std::string>(), i);
                }
                m.tcp_flags_required = flags;
            } else if (key == "time_range") {
                if (!v.is_array() || v.size() != 2) fail(errc::invalid_rule, "rule " + std::to_string(i) + ": time_range must be [t0, t1]");
                m.time_range = TimeRange{parse_seconds(v[0], i), parse_seconds(v[1], i)};
            } else {
                fail(errc::invalid_rule, "rule " + std::to_string(i) + ": unknown predicate '" + key + "'");
            }
        }
        validate_rule(rule, i);
        rules.push_back(std::move(rule));
    }
    return rules;
}

inline RuleSet load_rules(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open rule file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::invalid_rule, path.string() + ": " + e.what());
    }
    return parse_rules(doc);
}

}  // namespace iotgem
