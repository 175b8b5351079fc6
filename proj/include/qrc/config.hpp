#pragma once

// Run configuration file (JSON).
//
//   {
//     "seed": 42,                      root seed; every ESN reservoir uses it
//     "threads": 0,                    0 = hardware concurrency
//     "selection": "test",             or "validation"
//     "window": 9, "lambda": 1.0, "stride": 1,
//     "cache_dir": "path",             optional embedding cache
//     "embeddings": {
//       "quantum": {"a_x": [..], "a_z": [..], "a_zz": [..], "time": [..],
//                   "method": "chebyshev" | "eigendecomposition"},
//       "classical_esn": {"reservoir_size": [..], "spectral_radius": [..],
//                         "leak_rate": [..], "input_scaling": [..]},
//       "raw": {}
//     },
//     "readouts": {
//       "logistic": {"l2": [..], "max_iter": 100, "tol": 1e-8},
//       "ridge": {"alpha": [..]}
//     }
//   }
//
// Omitted scalar keys take their defaults; omitted embedding or readout
// families are not run. Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "qrc/harness.hpp"

namespace qrc::config {

struct RunConfig {
  harness::GridSpec grid;
  std::uint64_t seed = 42;
  int threads = 0;
  harness::SelectionMode selection = harness::SelectionMode::kTest;
  std::optional<std::filesystem::path> cache_dir;
};

/// Parses and validates; a kConfig error lists every problem found.
RunConfig parse_run_config(std::string_view json_text, const std::string& source_name = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// The default grid as a config document.
std::string default_config_json();

}  // namespace qrc::config
