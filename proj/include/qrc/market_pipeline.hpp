#pragma once

// CSV ingestion, log returns, rolling volatility, regime labels and
// windowed datasets with a chronological train/test split.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qrc::market {

struct PriceObservation {
  std::string date;  // opaque ordered key, ISO-8601 in practice
  double adj_close = 0.0;
};

struct PriceSeries {
  std::string ticker;
  std::vector<PriceObservation> observations;
};

struct Diagnostic {
  enum class Severity { kWarning, kRejected };
  Severity severity = Severity::kWarning;
  std::size_t line = 0;  // 1-based line in the input file, 0 if not row-specific
  std::string message;
};

struct LoadResult {
  std::vector<PriceSeries> series;  // sorted by ticker
  std::vector<Diagnostic> diagnostics;
};

/// Reads `date,ticker,adj_close` rows. Rows with a missing or non-positive
/// price are rejected with a diagnostic; structural problems throw.
/// An empty filter keeps every ticker.
LoadResult load_prices(const std::filesystem::path& path,
                       const std::set<std::string>& ticker_filter = {});
LoadResult parse_prices(std::istream& in, const std::string& source_name,
                        const std::set<std::string>& ticker_filter = {});

void write_prices(std::ostream& out, const std::vector<PriceSeries>& series);

struct ReturnSeries {
  std::string ticker;
  std::vector<double> returns;     // r_t = ln(p_t / p_{t-1})
  std::vector<std::string> dates;  // date of p_t for each r_t
};

ReturnSeries log_returns(const PriceSeries& prices);

struct VolatilityStats {
  double mean_raw = 0.0;         // mu_sigma
  double scale = 0.0;            // sample std of the raw volatilities
  double mean_normalized = 0.0;  // mu of sigma-tilde
  double std_normalized = 0.0;   // std of sigma-tilde
};

struct VolatilitySeries {
  int window = 0;
  /// raw[k] belongs to return index first_index + k, with first_index = window - 1.
  std::size_t first_index = 0;
  std::vector<double> raw;          // sample std over the trailing window
  std::vector<double> window_mean;  // mean over the same window
  std::vector<double> normalized;
  VolatilityStats stats;
};

/// Fills the raw part (raw and window_mean) of a VolatilitySeries.
VolatilitySeries rolling_volatility(const ReturnSeries& returns, int window);

enum class NormalizationMode {
  kFullSeries,  // statistics over every volatility value
  kTrainOnly,   // statistics over the training prefix only
};

struct RegimeLabels {
  std::size_t first_index = 0;  // return index of labels[0]
  std::vector<std::uint8_t> labels;
  double threshold = 0.0;  // tau
  double lambda = 1.0;
  bool degenerate = false;  // volatility scale below 1e-12
};

inline constexpr double kTrainFraction = 0.8;
inline constexpr double kDegenerateScale = 1e-12;

/// Normalizes v in place and labels c_t = 1 iff sigma-tilde_t > tau with
/// tau = mean(sigma-tilde) + lambda * std(sigma-tilde).
RegimeLabels normalize_and_label(VolatilitySeries& v, double lambda,
                                 NormalizationMode mode = NormalizationMode::kFullSeries);

struct Window {
  std::size_t t = 0;  // return index of the last element
  std::vector<double> values;
  std::uint8_t label = 0;
};

struct WindowedDataset {
  std::string ticker;
  int window_size = 0;
  int stride = 1;
  double lambda = 1.0;
  double threshold = 0.0;
  std::vector<Window> windows;
  std::size_t split_index = 0;  // first test position

  std::size_t train_size() const noexcept { return split_index; }
  std::size_t test_size() const noexcept { return windows.size() - split_index; }
};

/// Chronological split position for a sequence of `count` windows.
std::size_t split_position(std::size_t count);

/// Windows end at t = first_index, first_index + stride, ...; each carries the
/// label at its final index.
WindowedDataset windowize(const ReturnSeries& returns, const RegimeLabels& labels,
                          int window, int stride = 1);

struct PipelineOptions {
  int window = 9;
  double lambda = 1.0;
  int stride = 1;
  NormalizationMode normalization = NormalizationMode::kFullSeries;
};

WindowedDataset prepare_dataset(const PriceSeries& prices, const PipelineOptions& options);

// Dataset cache: `key value` header lines terminated by a `columns` line,
// then one whitespace-separated row per window: t r_0 .. r_{w-1} label split
// (split is 0 for train, 1 for test). Numbers use round-trip precision.
void write_dataset(std::ostream& out, const WindowedDataset& ds);
WindowedDataset read_dataset(std::istream& in, const std::string& source_name);
void save_dataset(const std::filesystem::path& path, const WindowedDataset& ds);
WindowedDataset load_dataset(const std::filesystem::path& path);

}  // namespace qrc::market
