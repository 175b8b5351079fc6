#pragma once

// Grid search over embeddings and readouts with per-ticker chronological
// evaluation, plus a seeded regime-switching price generator.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrc/embeddings.hpp"
#include "qrc/market_pipeline.hpp"
#include "qrc/quantum_sim.hpp"
#include "qrc/readout.hpp"

namespace qrc::harness {

struct QuantumGrid {
  std::vector<double> a_x;
  std::vector<double> a_z;
  std::vector<double> a_zz;
  std::vector<double> time;
  quantum::EvolutionMethod method = quantum::EvolutionMethod::kChebyshev;
};

struct EsnGrid {
  std::vector<int> reservoir_size;
  std::vector<double> spectral_radius;
  std::vector<double> leak_rate;
  std::vector<double> input_scaling;
  std::uint64_t seed = 42;
};

struct ReadoutGrid {
  readout::ReadoutKind kind = readout::ReadoutKind::kLogistic;
  std::vector<double> regularization;
  int max_iter = 100;
  double tol = 1e-8;
};

struct GridSpec {
  std::optional<QuantumGrid> quantum;
  std::optional<EsnGrid> esn;
  bool raw = false;
  std::vector<ReadoutGrid> readouts;
  int window = 9;
  double lambda = 1.0;
  int stride = 1;

  /// The desk-scale default grid: 81 quantum, 6 ESN and 1 raw embedding
  /// against 3 logistic and 3 ridge readouts.
  static GridSpec defaults();

  /// Every problem with the grid, empty when valid.
  std::vector<std::string> problems() const;
  void validate() const;

  /// Cartesian products in a fixed order (quantum, ESN, raw; parameters
  /// nested in declaration order, last one fastest).
  std::vector<embed::EmbeddingConfig> embedding_configs() const;
  std::vector<readout::ReadoutSpec> readout_specs() const;

  /// Keeps only the listed embedding families.
  GridSpec restricted_to(std::span<const embed::EmbeddingKind> kinds) const;
};

enum class SelectionMode {
  kTest,        // pick the cell with the best mean test accuracy
  kValidation,  // pick on a held-out tail of the training rows
};

std::string_view to_string(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view text);

struct RunOptions {
  int threads = 0;  // 0 = hardware concurrency
  SelectionMode selection = SelectionMode::kTest;
  std::optional<std::filesystem::path> cache_dir;
  std::ostream* progress = nullptr;
};

struct TickerResult {
  std::string ticker;
  readout::EvalResult test;
  std::optional<readout::EvalResult> validation;
  bool degenerate_fit = false;
};

struct CellResult {
  embed::EmbeddingConfig embedding;
  readout::ReadoutSpec readout;
  std::vector<TickerResult> per_ticker;  // in dataset order
  double mean_accuracy = 0.0;
  double mean_average_precision = 0.0;
  // Metrics used for selection: test means, or validation means.
  double selection_accuracy = 0.0;
  double selection_average_precision = 0.0;

  /// Text used for the lexicographic tie-break and report rows.
  std::string hyperparameters() const;
};

struct ExcludedTicker {
  std::string ticker;
  std::string reason;
};

struct Selection {
  embed::EmbeddingKind embedding;
  readout::ReadoutKind readout;
  std::size_t cell = 0;  // index into ExperimentReport::cells
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::vector<std::string> tickers;  // included tickers
  std::vector<ExcludedTicker> excluded;
  std::vector<Selection> best;  // one per (embedding kind, readout kind) present
  SelectionMode selection = SelectionMode::kTest;

  const CellResult* best_cell(embed::EmbeddingKind e, readout::ReadoutKind r) const;
};

/// Every (embedding, readout, ticker) combination: embed, fit on the train
/// rows only, evaluate on the test rows, then average over tickers.
ExperimentReport run_grid(std::span<const market::WindowedDataset> data, const GridSpec& grid,
                          const RunOptions& options = {});

/// Fills mean_* and selection_* from per_ticker and recomputes `best`.
void finalize_report(ExperimentReport& report);

/// CSV of all cells (fixed column order), one row per cell:
///   embedding,readout,embedding_params,regularization,tickers,
///   mean_accuracy,mean_average_precision,selected
void write_cells_csv(std::ostream& out, const ExperimentReport& r);
/// One row per (cell, ticker):
///   embedding,readout,embedding_params,regularization,ticker,accuracy,
///   average_precision,ap_defined,tp,fp,tn,fn
void write_ticker_csv(std::ostream& out, const ExperimentReport& r);
/// Table grouped by embedding (quantum, classical reservoir, raw); the best
/// cell per readout first, then every cell, each sorted by accuracy desc.
void write_table(std::ostream& out, const ExperimentReport& r);

struct ReportFiles {
  std::filesystem::path cells_csv;
  std::filesystem::path tickers_csv;
  std::filesystem::path table;
};

/// Writes report.csv, report_tickers.csv and report.txt into `dir`.
ReportFiles emit_report(const ExperimentReport& r, const std::filesystem::path& dir);

struct RegimeSegment {
  std::size_t length = 0;  // number of returns
  double sigma = 0.0;      // per-step log-return standard deviation
};

/// Parses `len:sigma[,len:sigma]*`. Errors name the character position.
std::vector<RegimeSegment> parse_regime_spec(std::string_view spec);

/// Geometric random walk with zero drift whose step volatility follows the
/// schedule. Produces sum(length) + 1 prices on consecutive calendar days
/// from 2015-01-02.
market::PriceSeries synth_regime_series(std::span<const RegimeSegment> regimes, std::uint64_t seed,
                                        std::string ticker = "SYN", double initial_price = 100.0);

}  // namespace qrc::harness
