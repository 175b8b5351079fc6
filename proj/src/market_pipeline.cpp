#include "qrc/market_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "qrc/error.hpp"

namespace qrc::market {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string location(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

double sample_mean(const std::vector<double>& v, std::size_t count) {
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += v[i];
  return sum / static_cast<double>(count);
}

double sample_std(const std::vector<double>& v, std::size_t count, double mean) {
  double ss = 0.0;
  for (std::size_t i = 0; i < count; ++i) ss += (v[i] - mean) * (v[i] - mean);
  return std::sqrt(ss / static_cast<double>(count - 1));
}

void write_double(std::ostream& out, double v) {
  out << std::setprecision(17) << v;
}

}  // namespace

LoadResult parse_prices(std::istream& in, const std::string& source_name,
                        const std::set<std::string>& ticker_filter) {
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view header = trim(line);
    if (line_no == 1 && header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
    if (header.empty()) continue;
    if (header != "date,ticker,adj_close") {
      throw Error(ErrorKind::kIngestion, location(source_name, line_no) +
                                             ": expected header 'date,ticker,adj_close'");
    }
    break;
  }
  if (line_no == 0 || in.bad())
    throw Error(ErrorKind::kIngestion, source_name + ": file is empty");

  struct Row {
    PriceObservation obs;
    std::size_t line;
  };
  std::map<std::string, std::vector<Row>> by_ticker;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    const auto fields = split_fields(text);
    if (fields.size() != 3) {
      throw Error(ErrorKind::kIngestion, location(source_name, line_no) + ": expected 3 fields, found " +
                                             std::to_string(fields.size()));
    }
    if (fields[0].empty())
      throw Error(ErrorKind::kIngestion, location(source_name, line_no) + ": empty date");
    if (fields[1].empty())
      throw Error(ErrorKind::kIngestion, location(source_name, line_no) + ": empty ticker");
    const std::string ticker(fields[1]);
    if (!ticker_filter.empty() && !ticker_filter.contains(ticker)) continue;

    if (fields[2].empty()) {
      result.diagnostics.push_back({Diagnostic::Severity::kRejected, line_no,
                                    location(source_name, line_no) + ": missing price, row rejected"});
      continue;
    }
    const auto price = parse_double(fields[2]);
    if (!price) {
      throw Error(ErrorKind::kIngestion, location(source_name, line_no) + ": malformed price '" +
                                             std::string(fields[2]) + "'");
    }
    if (!std::isfinite(*price) || *price <= 0.0) {
      result.diagnostics.push_back({Diagnostic::Severity::kRejected, line_no,
                                    location(source_name, line_no) + ": non-positive price " +
                                        std::string(fields[2]) + ", row rejected"});
      continue;
    }
    by_ticker[ticker].push_back({{std::string(fields[0]), *price}, line_no});
  }
  if (in.bad()) throw Error(ErrorKind::kIo, source_name + ": read failure");

  for (auto& [ticker, rows] : by_ticker) {
    const bool sorted = std::is_sorted(rows.begin(), rows.end(),
                                       [](const Row& a, const Row& b) { return a.obs.date < b.obs.date; });
    if (!sorted) {
      std::stable_sort(rows.begin(), rows.end(),
                       [](const Row& a, const Row& b) { return a.obs.date < b.obs.date; });
      result.diagnostics.push_back({Diagnostic::Severity::kWarning, 0,
                                    source_name + ": dates for ticker " + ticker +
                                        " were out of order and have been sorted"});
    }
    PriceSeries series{ticker, {}};
    series.observations.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].obs.date == series.observations.back().date) {
        throw Error(ErrorKind::kIngestion, location(source_name, rows[i].line) + ": duplicate date " +
                                               rows[i].obs.date + " for ticker " + ticker);
      }
      series.observations.push_back(std::move(rows[i].obs));
    }
    result.series.push_back(std::move(series));
  }
  return result;
}

LoadResult load_prices(const std::filesystem::path& path, const std::set<std::string>& ticker_filter) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open price file " + path.string());
  return parse_prices(in, path.string(), ticker_filter);
}

void write_prices(std::ostream& out, const std::vector<PriceSeries>& series) {
  out << "date,ticker,adj_close\n";
  for (const auto& s : series) {
    for (const auto& obs : s.observations) {
      out << obs.date << ',' << s.ticker << ',';
      write_double(out, obs.adj_close);
      out << '\n';
    }
  }
}

ReturnSeries log_returns(const PriceSeries& prices) {
  const auto& obs = prices.observations;
  if (obs.size() < 2) {
    throw Error(ErrorKind::kInsufficientData,
                "ticker " + prices.ticker + ": log returns need at least 2 prices");
  }
  ReturnSeries r{prices.ticker, {}, {}};
  r.returns.reserve(obs.size() - 1);
  r.dates.reserve(obs.size() - 1);
  for (std::size_t i = 1; i < obs.size(); ++i) {
    r.returns.push_back(std::log(obs[i].adj_close / obs[i - 1].adj_close));
    r.dates.push_back(obs[i].date);
  }
  return r;
}

VolatilitySeries rolling_volatility(const ReturnSeries& returns, int window) {
  if (window < 2) throw Error(ErrorKind::kInputShape, "rolling window must be at least 2");
  const auto w = static_cast<std::size_t>(window);
  const auto& r = returns.returns;
  if (r.size() < w) {
    throw Error(ErrorKind::kInsufficientData, "ticker " + returns.ticker + ": " +
                                                  std::to_string(r.size()) +
                                                  " returns is shorter than the window " +
                                                  std::to_string(window));
  }
  VolatilitySeries v;
  v.window = window;
  v.first_index = w - 1;
  const std::size_t count = r.size() - w + 1;
  v.raw.reserve(count);
  v.window_mean.reserve(count);
  for (std::size_t t = w - 1; t < r.size(); ++t) {
    const std::size_t begin = t + 1 - w;
    double mean = 0.0;
    for (std::size_t j = begin; j <= t; ++j) mean += r[j];
    mean /= static_cast<double>(w);
    double ss = 0.0;
    for (std::size_t j = begin; j <= t; ++j) ss += (r[j] - mean) * (r[j] - mean);
    v.window_mean.push_back(mean);
    v.raw.push_back(std::sqrt(ss / static_cast<double>(w - 1)));
  }
  return v;
}

std::size_t split_position(std::size_t count) {
  return static_cast<std::size_t>(std::floor(kTrainFraction * static_cast<double>(count)));
}

RegimeLabels normalize_and_label(VolatilitySeries& v, double lambda, NormalizationMode mode) {
  if (std::isnan(lambda)) throw Error(ErrorKind::kConfig, "lambda must not be NaN");
  const std::size_t count = v.raw.size();
  if (count == 0) throw Error(ErrorKind::kInsufficientData, "no volatility values to label");
  const std::size_t stats_count = mode == NormalizationMode::kTrainOnly ? split_position(count) : count;

  RegimeLabels out;
  out.first_index = v.first_index;
  out.lambda = lambda;
  out.labels.assign(count, 0);
  v.normalized.assign(count, 0.0);

  if (stats_count < 2) {
    out.degenerate = true;
    v.stats = {};
    return out;
  }
  VolatilityStats& s = v.stats;
  s.mean_raw = sample_mean(v.raw, stats_count);
  s.scale = sample_std(v.raw, stats_count, s.mean_raw);
  if (!(s.scale >= kDegenerateScale)) {
    out.degenerate = true;
    s.mean_normalized = 0.0;
    s.std_normalized = 0.0;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) v.normalized[i] = (v.raw[i] - s.mean_raw) / s.scale;
  s.mean_normalized = sample_mean(v.normalized, stats_count);
  s.std_normalized = sample_std(v.normalized, stats_count, s.mean_normalized);
  out.threshold = s.mean_normalized + lambda * s.std_normalized;
  for (std::size_t i = 0; i < count; ++i) out.labels[i] = v.normalized[i] > out.threshold ? 1 : 0;
  return out;
}

WindowedDataset windowize(const ReturnSeries& returns, const RegimeLabels& labels, int window,
                          int stride) {
  if (window < 1) throw Error(ErrorKind::kInputShape, "window must be positive");
  if (stride < 1) throw Error(ErrorKind::kInputShape, "stride must be positive");
  const auto w = static_cast<std::size_t>(window);
  const auto& r = returns.returns;
  if (labels.first_index + 1 < w)
    throw Error(ErrorKind::kInputShape, "labels start before the first complete window");
  if (labels.first_index + labels.labels.size() > r.size())
    throw Error(ErrorKind::kInputShape, "labels extend past the return series");

  WindowedDataset ds;
  ds.ticker = returns.ticker;
  ds.window_size = window;
  ds.stride = stride;
  ds.lambda = labels.lambda;
  ds.threshold = labels.threshold;
  for (std::size_t k = 0; k < labels.labels.size(); k += static_cast<std::size_t>(stride)) {
    const std::size_t t = labels.first_index + k;
    Window win;
    win.t = t;
    win.values.assign(r.begin() + static_cast<std::ptrdiff_t>(t + 1 - w),
                      r.begin() + static_cast<std::ptrdiff_t>(t + 1));
    win.label = labels.labels[k];
    ds.windows.push_back(std::move(win));
  }
  if (ds.windows.empty())
    throw Error(ErrorKind::kInsufficientData, "ticker " + returns.ticker + ": no windows produced");
  ds.split_index = split_position(ds.windows.size());
  return ds;
}

WindowedDataset prepare_dataset(const PriceSeries& prices, const PipelineOptions& options) {
  const ReturnSeries r = log_returns(prices);
  VolatilitySeries v = rolling_volatility(r, options.window);
  const RegimeLabels labels = normalize_and_label(v, options.lambda, options.normalization);
  return windowize(r, labels, options.window, options.stride);
}

void write_dataset(std::ostream& out, const WindowedDataset& ds) {
  out << "format qrc-dataset-1\n";
  out << "ticker " << ds.ticker << '\n';
  out << "window " << ds.window_size << '\n';
  out << "stride " << ds.stride << '\n';
  out << "lambda ";
  write_double(out, ds.lambda);
  out << "\nthreshold ";
  write_double(out, ds.threshold);
  out << "\nsplit_index " << ds.split_index << '\n';
  out << "count " << ds.windows.size() << '\n';
  out << "columns t";
  for (int j = 0; j < ds.window_size; ++j) out << " r" << j;
  out << " label split\n";
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    const auto& win = ds.windows[i];
    out << win.t;
    for (double x : win.values) {
      out << ' ';
      write_double(out, x);
    }
    out << ' ' << static_cast<int>(win.label) << ' ' << (i >= ds.split_index ? 1 : 0) << '\n';
  }
}

WindowedDataset read_dataset(std::istream& in, const std::string& source_name) {
  auto fail = [&](std::size_t line, const std::string& what) -> Error {
    return Error(ErrorKind::kIngestion, location(source_name, line) + ": " + what);
  };
  WindowedDataset ds;
  std::map<std::string, std::string> header;
  std::string line;
  std::size_t line_no = 0;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key.empty()) continue;
    if (key == "columns") {
      saw_columns = true;
      break;
    }
    std::string value;
    fields >> value;
    header[key] = value;
  }
  if (!saw_columns) throw fail(line_no, "missing columns line");
  if (header["format"] != "qrc-dataset-1") throw fail(1, "unsupported dataset format");
  try {
    ds.ticker = header.at("ticker");
    ds.window_size = std::stoi(header.at("window"));
    ds.stride = std::stoi(header.at("stride"));
    ds.lambda = std::stod(header.at("lambda"));
    ds.threshold = std::stod(header.at("threshold"));
    ds.split_index = std::stoul(header.at("split_index"));
  } catch (const std::exception&) {
    throw fail(line_no, "incomplete or malformed header");
  }
  const std::size_t count = std::stoul(header["count"].empty() ? "0" : header["count"]);
  ds.windows.reserve(count);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    Window win;
    int label = 0;
    int split = 0;
    fields >> win.t;
    win.values.resize(static_cast<std::size_t>(ds.window_size));
    for (auto& x : win.values) fields >> x;
    fields >> label >> split;
    if (!fields || (label != 0 && label != 1)) throw fail(line_no, "malformed window row");
    win.label = static_cast<std::uint8_t>(label);
    if ((split == 1) != (ds.windows.size() >= ds.split_index))
      throw fail(line_no, "split flag disagrees with split_index");
    ds.windows.push_back(std::move(win));
  }
  if (ds.windows.size() != count) throw fail(line_no, "row count does not match header");
  if (ds.split_index > ds.windows.size()) throw fail(line_no, "split_index out of range");
  return ds;
}

void save_dataset(const std::filesystem::path& path, const WindowedDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write dataset " + path.string());
  write_dataset(out, ds);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

WindowedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open dataset " + path.string());
  return read_dataset(in, path.string());
}

}  // namespace qrc::market
