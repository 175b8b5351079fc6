#pragma once

// Batch commands behind the `qrc` executable. Each returns a process exit
// status (0 ok, 1 validation, 2 I/O, 3 internal) and writes diagnostics to
// `log`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qrc::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct SynthArgs {
  std::string regimes;
  std::uint64_t seed = 42;
  std::filesystem::path out;
  int tickers = 1;      // series SYN00, SYN01, ... with seeds seed, seed + 1, ...
  std::string prefix = "SYN";
};

struct PrepareArgs {
  std::filesystem::path prices;
  std::filesystem::path out;
  int window = 9;
  double lambda = 1.0;
  int stride = 1;
  std::string normalization = "full";  // or "train"
  std::vector<std::string> tickers;     // empty = all
};

struct RunArgs {
  std::filesystem::path data;
  std::filesystem::path config;
  std::filesystem::path out;
  std::vector<std::string> embeddings;  // empty = every family in the config
  std::optional<int> threads;
  bool quiet = false;
};

struct ReplayArgs {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> out;  // defaults to the recorded output
};

int cmd_synth(const SynthArgs& args, std::ostream& log);
int cmd_prepare(const PrepareArgs& args, std::ostream& log);
int cmd_run(const RunArgs& args, std::ostream& log);
/// Re-executes the command recorded in a manifest and compares artifact
/// hashes; exit 1 on any mismatch.
int cmd_replay(const ReplayArgs& args, std::ostream& log);

/// Parses argv and dispatches.
int run_main(int argc, char** argv);

}  // namespace qrc::cli
