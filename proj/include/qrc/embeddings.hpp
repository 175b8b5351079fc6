#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qrc/market_pipeline.hpp"
#include "qrc/quantum_sim.hpp"

namespace qrc::embed {

enum class EmbeddingKind { kQuantum, kClassicalEsn, kRaw };

std::string_view to_string(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(std::string_view text);

struct EsnParams {
  int reservoir_size = 50;
  double spectral_radius = 0.9;
  double leak_rate = 0.3;
  double input_scaling = 1.0;
  std::uint64_t seed = 42;

  friend bool operator==(const EsnParams&, const EsnParams&) = default;
};

struct RawParams {
  friend bool operator==(const RawParams&, const RawParams&) = default;
};

/// Exactly one backend is active: whichever alternative `backend` holds.
struct EmbeddingConfig {
  std::variant<quantum::QuantumReservoirParams, EsnParams, RawParams> backend;

  static EmbeddingConfig quantum(quantum::QuantumReservoirParams params = {}) { return {params}; }
  static EmbeddingConfig esn(EsnParams params = {}) { return {params}; }
  static EmbeddingConfig raw() { return {RawParams{}}; }

  EmbeddingKind kind() const noexcept;
  /// Throws ErrorKind::kConfig when a parameter is outside its domain.
  void validate(int window) const;
  /// Output length for windows of the given size.
  std::size_t output_dimension(int window) const;
  /// Canonical `key=value;...` hyperparameter text. Stable across runs and
  /// used for report sorting and cache keys.
  std::string describe() const;

  friend bool operator==(const EmbeddingConfig&, const EmbeddingConfig&) = default;
};

/// Leaky-tanh echo-state reservoir with a dense random recurrent matrix,
/// entries uniform in [-0.5, 0.5] rescaled to the requested spectral radius,
/// and input weights uniform in [-1, 1]. Fully determined by the seed.
class EchoStateReservoir {
 public:
  explicit EchoStateReservoir(const EsnParams& params);

  const EsnParams& params() const noexcept { return params_; }
  const Eigen::MatrixXd& recurrent() const noexcept { return recurrent_; }
  const Eigen::VectorXd& input_weights() const noexcept { return input_; }

  /// (1 - a) s + a tanh(W s + W_in u c), a = leak rate, c = input scaling.
  Eigen::VectorXd step(const Eigen::VectorXd& state, double input) const;

 private:
  EsnParams params_;
  Eigen::MatrixXd recurrent_;
  Eigen::VectorXd input_;
};

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Eigen::MatrixXd& m);

struct EmbeddedDataset {
  std::string ticker;
  Eigen::MatrixXd features;  // one row per window
  std::vector<std::uint8_t> labels;
  std::vector<std::size_t> times;
  std::size_t split_index = 0;
  EmbeddingConfig provenance;

  std::size_t rows() const noexcept { return labels.size(); }
};

/// Quantum and raw windows are mapped independently. The ESN backend streams
/// returns through one reservoir in chronological order starting from the
/// zero state, feeding each return once, and emits the state after each
/// window's last element.
EmbeddedDataset embed_dataset(const market::WindowedDataset& ds, const EmbeddingConfig& cfg);

/// Embeds one dataset under several configurations at once. Quantum configs
/// that differ only in evolution time share one evolution pass per window.
/// Results are in the order of `cfgs`.
std::vector<EmbeddedDataset> embed_dataset_group(const market::WindowedDataset& ds,
                                                 std::span<const EmbeddingConfig> cfgs);

/// Content fingerprint of a dataset (window values, labels, split).
std::string dataset_fingerprint(const market::WindowedDataset& ds);

/// Embedding cache rooted at a directory; files are keyed by ticker and a
/// hash of the configuration and store the dataset fingerprint they were
/// computed from.
///
/// File layout: `format qrc-embedding-1`, `ticker`, `config`, `dataset`,
/// `rows`, `cols`, `split_index` header lines, then one row per window:
/// t label e_0 .. e_{cols-1}.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path directory);

  std::filesystem::path path_for(const std::string& ticker, const EmbeddingConfig& cfg) const;
  std::optional<EmbeddedDataset> load(const market::WindowedDataset& ds,
                                      const EmbeddingConfig& cfg) const;
  void store(const market::WindowedDataset& ds, const EmbeddedDataset& embedded) const;

  /// load() or compute-and-store.
  EmbeddedDataset get_or_compute(const market::WindowedDataset& ds, const EmbeddingConfig& cfg) const;
  /// Group form: only the misses are computed, through embed_dataset_group.
  std::vector<EmbeddedDataset> get_or_compute(const market::WindowedDataset& ds,
                                              std::span<const EmbeddingConfig> cfgs) const;

 private:
  std::filesystem::path directory_;
};

}  // namespace qrc::embed
