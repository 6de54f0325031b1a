#pragma once

// Umbrella header for the whole library.

#include "entropy.hpp"
#include "error.hpp"
#include "eval/attribution.hpp"
#include "eval/evaluate.hpp"
#include "eval/probe.hpp"
#include "hash.hpp"
#include "labeling.hpp"
#include "metrics.hpp"
#include "ml/model.hpp"
#include "packet.hpp"
#include "parallel.hpp"
#include "pcap.hpp"
#include "pcap_writer.hpp"
#include "rng.hpp"
#include "roles.hpp"
#include "schema.hpp"
#include "select/eliminate.hpp"
#include "select/ga.hpp"
#include "split.hpp"
#include "synth.hpp"
#include "table.hpp"
#include "window.hpp"

namespace iotgem {

inline constexpr std::string_view version = "1.0.0";

}  // namespace iotgem
