#pragma once

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotgem/error.hpp"

namespace iotgem::cli {

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path.string() + " for hashing");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        fail(errc::invariant_failure, "sha256 initialisation failed");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

/// Outputs are written to `<path>.partial` and renamed into place only when
/// the whole command succeeds. Uncommitted files are removed on destruction.
class OutputSet {
public:
    OutputSet() = default;
    OutputSet(const OutputSet&) = delete;
    OutputSet& operator=(const OutputSet&) = delete;

    ~OutputSet() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& o : outputs_) std::filesystem::remove(temp_for(o), ec);
    }

    /// Registers `final_path` and returns the temporary path to write.
    std::filesystem::path add(const std::filesystem::path& final_path) {
        for (const auto& o : outputs_)
            if (o == final_path) fail(errc::invalid_argument, "output " + final_path.string() + " is named twice");
        outputs_.push_back(final_path);
        return temp_for(final_path);
    }

    template <class Writer>
    void write(const std::filesystem::path& final_path, Writer&& writer, bool binary = true) {
        const auto tmp = add(final_path);
        std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!out) fail(errc::io_error, "cannot write " + final_path.string());
        writer(out);
        out.close();
        if (!out) fail(errc::io_error, "write failed for " + final_path.string());
    }

    const std::vector<std::filesystem::path>& paths() const noexcept { return outputs_; }

    std::string sha256(const std::filesystem::path& final_path) const { return sha256_file(temp_for(final_path)); }

    void commit() {
        for (const auto& o : outputs_) {
            std::error_code ec;
            std::filesystem::rename(temp_for(o), o, ec);
            if (ec) fail(errc::io_error, "cannot move output into place at " + o.string() + ": " + ec.message());
        }
        committed_ = true;
    }

private:
    static std::filesystem::path temp_for(const std::filesystem::path& p) { return p.string() + ".partial"; }

    std::vector<std::filesystem::path> outputs_;
    bool committed_ = false;
};

/// Wall-clock seconds per named stage, in insertion order.
class Stopwatch {
public:
    template <class Fn>
    auto time(const std::string& stage, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        struct Record {
            Stopwatch* self;
            std::string stage;
            std::chrono::steady_clock::time_point start;
            ~Record() { self->add(stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()); }
        } rec{this, stage, start};
        return fn();
    }

    void add(const std::string& stage, double seconds) { stages_.emplace_back(stage, seconds); }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : stages_) j[k] = v;
        return j;
    }

private:
    std::vector<std::pair<std::string, double>> stages_;
};

struct InputRecord {
    std::string path;
    std::optional<std::string> role;
};

/// Run manifest. Everything except "timings" is a function of the inputs and
/// flags.
struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 0;
    nlohmann::json config = nlohmann::json::object();
    std::vector<InputRecord> inputs;
    std::map<std::string, std::string> schema_hashes;  // label -> hash
    Stopwatch timings;

    nlohmann::json to_json(const OutputSet& outs, std::string_view tool_version) const {
        nlohmann::json in = nlohmann::json::array();
        for (const auto& i : inputs) {
            nlohmann::json r{{"path", i.path}, {"sha256", sha256_file(i.path)}};
            if (i.role) r["role"] = *i.role;
            in.push_back(std::move(r));
        }
        nlohmann::json out = nlohmann::json::array();
        for (const auto& o : outs.paths()) out.push_back({{"path", o.string()}, {"sha256", outs.sha256(o)}});
        nlohmann::json j{{"format", "iotgem-manifest"},
                         {"version", 1},
                         {"tool", "iotgem"},
                         {"tool_version", tool_version},
                         {"command", command},
                         {"argv", argv},
                         {"jobs", jobs},
                         {"config", config},
                         {"inputs", in},
                         {"outputs", out},
                         {"schema_hashes", schema_hashes},
                         {"timings", timings.to_json()}};
        if (seed) j["seed"] = *seed;
        return j;
    }
};

}  // namespace iotgem::cli
