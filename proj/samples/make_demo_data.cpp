// Writes a set of synthetic labelled captures and the matching rule file.
//
//   make_demo_data <out-dir> [--scrambled] [--packets N] [--seed S]
//
// Produces train.pcap, hpo.pcap, validation.pcap, session_test.pcap,
// dataset_test.pcap and rules.json. By default attack frames have a constant
// size of 1078 bytes; --scrambled draws them like benign frames.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "iotgem/synth.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <out-dir> [--scrambled] [--packets N] [--seed S]\n", argv[0]);
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    bool scrambled = false;
    std::size_t packets = 3000;
    std::uint64_t seed = 0;
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--scrambled") scrambled = true;
        else if (a == "--packets" && i + 1 < argc) packets = std::strtoull(argv[++i], nullptr, 10);
        else if (a == "--seed" && i + 1 < argc) seed = std::strtoull(argv[++i], nullptr, 10);
        else {
            std::fprintf(stderr, "unknown argument %s\n", a.c_str());
            return 2;
        }
    }
    try {
        std::filesystem::create_directories(dir);
        const char* names[] = {"train", "hpo", "validation", "session_test", "dataset_test"};
        for (std::uint64_t i = 0; i < 5; ++i) {
            iotgem::synth::CaptureConfig cfg;
            cfg.seed = seed * 16 + i;
            cfg.packets = packets;
            if (scrambled) cfg.attack_frame_len.reset();
            iotgem::synth::write_capture(cfg, dir / (std::string(names[i]) + ".pcap"));
        }
        std::ofstream(dir / "rules.json") << iotgem::synth::attack_rules().dump(2) << '\n';
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    std::printf("wrote 5 captures and rules.json to %s\n", dir.string().c_str());
    return 0;
}
