#include "qrc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <variant>

#include "qrc/error.hpp"
#include "qrc/hashing.hpp"

namespace qrc::harness {
namespace {

using embed::EmbeddingConfig;
using embed::EmbeddingKind;
using readout::ReadoutKind;

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

readout::EvalResult fit_and_score(const readout::ReadoutSpec& spec, const Eigen::MatrixXd& features,
                                  std::span<const std::uint8_t> labels, std::size_t fit_end,
                                  std::size_t eval_begin, std::size_t eval_end, bool* degenerate) {
  const auto fit_rows = static_cast<Eigen::Index>(fit_end);
  const readout::LinearModel model =
      readout::fit_readout(spec, features.topRows(fit_rows), labels.first(fit_end));
  if (degenerate) *degenerate = model.diagnostics.degenerate;
  const auto begin = static_cast<Eigen::Index>(eval_begin);
  const auto rows = static_cast<Eigen::Index>(eval_end - eval_begin);
  const Eigen::VectorXd scores = model.scores(features.middleRows(begin, rows));
  return readout::evaluate(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                           labels.subspan(eval_begin, eval_end - eval_begin), model.decision_threshold());
}

int kind_rank(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::kQuantum: return 0;
    case EmbeddingKind::kClassicalEsn: return 1;
    case EmbeddingKind::kRaw: return 2;
  }
  return 3;
}

std::string_view kind_title(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::kQuantum: return "Quantum reservoir";
    case EmbeddingKind::kClassicalEsn: return "Classical reservoir";
    case EmbeddingKind::kRaw: return "Raw returns";
  }
  return "";
}

std::string_view readout_title(ReadoutKind kind) {
  return kind == ReadoutKind::kLogistic ? "Logistic Regression" : "Ridge Classifier";
}

// Accuracy desc, then AP desc, then hyperparameter text asc.
bool ranks_before(const CellResult& a, double acc_a, double ap_a, const CellResult& b, double acc_b,
                  double ap_b) {
  if (acc_a != acc_b) return acc_a > acc_b;
  if (ap_a != ap_b) return ap_a > ap_b;
  return a.hyperparameters() < b.hyperparameters();
}

std::string fixed6(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

// Days since 1970-01-01 to civil date.
std::string civil_date(long long days) {
  days += 719468;
  const long long era = (days >= 0 ? days : days - 146096) / 146097;
  const long long doe = days - era * 146097;
  const long long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long long mp = (5 * doy + 2) / 153;
  const long long d = doy - (153 * mp + 2) / 5 + 1;
  const long long m = mp < 10 ? mp + 3 : mp - 9;
  const long long y = yoe + era * 400 + (m <= 2 ? 1 : 0);
  std::ostringstream s;
  s << std::setfill('0') << std::setw(4) << y << '-' << std::setw(2) << m << '-' << std::setw(2) << d;
  return s.str();
}

}  // namespace

GridSpec GridSpec::defaults() {
  GridSpec g;
  g.quantum = QuantumGrid{{0.5, 1.0, 2.0}, {0.5, 1.0, 2.0}, {0.25, 0.5, 1.0}, {0.5, 1.0, 2.0},
                          quantum::EvolutionMethod::kChebyshev};
  g.esn = EsnGrid{{50}, {0.7, 0.9, 1.1}, {0.3, 1.0}, {1.0}, 42};
  g.raw = true;
  g.readouts = {{ReadoutKind::kLogistic, {1e-4, 1e-2, 1.0}, 100, 1e-8},
                {ReadoutKind::kRidge, {1e-2, 1.0, 100.0}, 100, 1e-8}};
  return g;
}

std::vector<std::string> GridSpec::problems() const {
  std::vector<std::string> out;
  if (window < 2) out.push_back("window must be at least 2");
  if (stride < 1) out.push_back("stride must be at least 1");
  if (std::isnan(lambda)) out.push_back("lambda must be a number");
  if (!quantum && !esn && !raw) out.push_back("grid has no embeddings");
  if (readouts.empty()) out.push_back("grid has no readouts");
  auto finite_list = [&](const std::vector<double>& v, const std::string& name) {
    if (v.empty()) out.push_back(name + " must list at least one value");
    for (double x : v)
      if (!std::isfinite(x)) out.push_back(name + " values must be finite");
  };
  if (quantum) {
    finite_list(quantum->a_x, "quantum.a_x");
    finite_list(quantum->a_z, "quantum.a_z");
    finite_list(quantum->a_zz, "quantum.a_zz");
    finite_list(quantum->time, "quantum.time");
    if (window > quantum::kMaxQubits)
      out.push_back("quantum embedding supports windows of at most " + std::to_string(quantum::kMaxQubits));
  }
  if (esn) {
    if (esn->reservoir_size.empty()) out.push_back("classical_esn.reservoir_size must list at least one value");
    for (int n : esn->reservoir_size)
      if (n < window) out.push_back("classical_esn.reservoir_size must be >= window");
    finite_list(esn->spectral_radius, "classical_esn.spectral_radius");
    for (double r : esn->spectral_radius)
      if (!(r > 0.0 && r < 1.5)) out.push_back("classical_esn.spectral_radius must lie in (0, 1.5)");
    finite_list(esn->leak_rate, "classical_esn.leak_rate");
    for (double a : esn->leak_rate)
      if (!(a > 0.0 && a <= 1.0)) out.push_back("classical_esn.leak_rate must lie in (0, 1]");
    finite_list(esn->input_scaling, "classical_esn.input_scaling");
  }
  for (const auto& r : readouts) {
    const std::string name(readout::to_string(r.kind));
    finite_list(r.regularization, name + " regularization");
    for (double v : r.regularization) {
      if (r.kind == ReadoutKind::kRidge && !(v > 0.0)) out.push_back("ridge alpha must be > 0");
      if (r.kind == ReadoutKind::kLogistic && !(v >= 0.0)) out.push_back("logistic l2 must be >= 0");
    }
    if (r.max_iter < 1) out.push_back(name + " max_iter must be >= 1");
    if (!(r.tol > 0.0)) out.push_back(name + " tol must be > 0");
  }
  return out;
}

void GridSpec::validate() const {
  const auto list = problems();
  if (list.empty()) return;
  std::string msg = "invalid grid:";
  for (const auto& p : list) msg += "\n  - " + p;
  throw Error(ErrorKind::kConfig, msg);
}

std::vector<EmbeddingConfig> GridSpec::embedding_configs() const {
  std::vector<EmbeddingConfig> out;
  if (quantum) {
    for (double ax : quantum->a_x)
      for (double az : quantum->a_z)
        for (double azz : quantum->a_zz)
          for (double t : quantum->time)
            out.push_back(EmbeddingConfig::quantum({{ax, az, azz}, t, quantum->method}));
  }
  if (esn) {
    for (int n : esn->reservoir_size)
      for (double rho : esn->spectral_radius)
        for (double leak : esn->leak_rate)
          for (double scale : esn->input_scaling)
            out.push_back(EmbeddingConfig::esn({n, rho, leak, scale, esn->seed}));
  }
  if (raw) out.push_back(EmbeddingConfig::raw());
  return out;
}

std::vector<readout::ReadoutSpec> GridSpec::readout_specs() const {
  std::vector<readout::ReadoutSpec> out;
  for (const auto& r : readouts)
    for (double reg : r.regularization) out.push_back({r.kind, reg, r.max_iter, r.tol});
  return out;
}

GridSpec GridSpec::restricted_to(std::span<const EmbeddingKind> kinds) const {
  auto wanted = [&](EmbeddingKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
  GridSpec g = *this;
  if (!wanted(EmbeddingKind::kQuantum)) g.quantum.reset();
  if (!wanted(EmbeddingKind::kClassicalEsn)) g.esn.reset();
  if (!wanted(EmbeddingKind::kRaw)) g.raw = false;
  return g;
}

std::string_view to_string(SelectionMode mode) {
  return mode == SelectionMode::kTest ? "test" : "validation";
}

SelectionMode parse_selection_mode(std::string_view text) {
  if (text == "test") return SelectionMode::kTest;
  if (text == "validation") return SelectionMode::kValidation;
  throw Error(ErrorKind::kConfig, "unknown selection mode '" + std::string(text) + "'");
}

std::string CellResult::hyperparameters() const {
  return std::string(embed::to_string(embedding.kind())) + "|" + embedding.describe() + "|" +
         std::string(readout::to_string(readout.kind)) + "=" + format_double(readout.regularization);
}

const CellResult* ExperimentReport::best_cell(EmbeddingKind e, ReadoutKind r) const {
  for (const auto& s : best)
    if (s.embedding == e && s.readout == r) return &cells[s.cell];
  return nullptr;
}

void finalize_report(ExperimentReport& report) {
  for (auto& cell : report.cells) {
    double acc = 0.0, ap = 0.0, vacc = 0.0, vap = 0.0;
    for (const auto& t : cell.per_ticker) {
      acc += t.test.accuracy;
      ap += t.test.average_precision;
      if (t.validation) {
        vacc += t.validation->accuracy;
        vap += t.validation->average_precision;
      }
    }
    const double n = static_cast<double>(cell.per_ticker.size());
    cell.mean_accuracy = n > 0 ? acc / n : 0.0;
    cell.mean_average_precision = n > 0 ? ap / n : 0.0;
    if (report.selection == SelectionMode::kValidation) {
      cell.selection_accuracy = n > 0 ? vacc / n : 0.0;
      cell.selection_average_precision = n > 0 ? vap / n : 0.0;
    } else {
      cell.selection_accuracy = cell.mean_accuracy;
      cell.selection_average_precision = cell.mean_average_precision;
    }
  }
  report.best.clear();
  std::map<std::pair<int, int>, std::size_t> best;
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const auto& c = report.cells[i];
    const std::pair key{kind_rank(c.embedding.kind()), static_cast<int>(c.readout.kind)};
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, i);
      continue;
    }
    const auto& incumbent = report.cells[it->second];
    if (ranks_before(c, c.selection_accuracy, c.selection_average_precision, incumbent,
                     incumbent.selection_accuracy, incumbent.selection_average_precision))
      it->second = i;
  }
  for (const auto& [key, index] : best)
    report.best.push_back({report.cells[index].embedding.kind(), report.cells[index].readout.kind, index});
}

ExperimentReport run_grid(std::span<const market::WindowedDataset> data, const GridSpec& grid,
                          const RunOptions& options) {
  grid.validate();
  if (data.empty()) throw Error(ErrorKind::kInsufficientData, "run_grid needs at least one ticker");

  ExperimentReport report;
  report.selection = options.selection;
  std::vector<const market::WindowedDataset*> included;
  for (const auto& ds : data) {
    std::string reason;
    if (ds.window_size != grid.window) {
      reason = "window size " + std::to_string(ds.window_size) + " differs from grid window " +
               std::to_string(grid.window);
    } else if (ds.train_size() < 2) {
      reason = "fewer than 2 training windows";
    } else if (ds.test_size() < 1) {
      reason = "no test windows";
    } else if (options.selection == SelectionMode::kValidation &&
               (market::split_position(ds.train_size()) < 2 ||
                market::split_position(ds.train_size()) >= ds.train_size())) {
      reason = "training rows too few for a validation split";
    }
    if (reason.empty()) {
      included.push_back(&ds);
      report.tickers.push_back(ds.ticker);
    } else {
      report.excluded.push_back({ds.ticker, reason});
    }
  }
  if (included.empty()) throw Error(ErrorKind::kInsufficientData, "every ticker was excluded");

  const auto embeddings = grid.embedding_configs();
  const auto readouts = grid.readout_specs();
  const std::size_t n_tickers = included.size();

  report.cells.reserve(embeddings.size() * readouts.size());
  for (const auto& e : embeddings) {
    for (const auto& r : readouts) {
      CellResult cell;
      cell.embedding = e;
      cell.readout = r;
      cell.per_ticker.resize(n_tickers);
      report.cells.push_back(std::move(cell));
    }
  }

  std::optional<embed::EmbeddingCache> cache;
  if (options.cache_dir) cache.emplace(*options.cache_dir);

  // Quantum configs differing only in evolution time are embedded together.
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t e = 0; e < embeddings.size(); ++e) {
    const auto* q = std::get_if<quantum::QuantumReservoirParams>(&embeddings[e].backend);
    auto same = [&](const std::vector<std::size_t>& g) {
      const auto* h = std::get_if<quantum::QuantumReservoirParams>(&embeddings[g.front()].backend);
      return q && h && h->scalers == q->scalers && h->method == q->method;
    };
    auto it = std::find_if(groups.begin(), groups.end(), same);
    if (it == groups.end()) {
      groups.push_back({e});
    } else {
      it->push_back(e);
    }
  }

  std::mutex progress_mutex;
  std::size_t done = 0;
  const std::size_t items = groups.size() * n_tickers;
  parallel_for(items, options.threads, [&](std::size_t item) {
    const auto& group = groups[item / n_tickers];
    const std::size_t k = item % n_tickers;
    const auto& ds = *included[k];
    std::vector<EmbeddingConfig> cfgs;
    for (std::size_t e : group) cfgs.push_back(embeddings[e]);
    const auto embedded = cache ? cache->get_or_compute(ds, std::span<const EmbeddingConfig>(cfgs))
                                : embed::embed_dataset_group(ds, cfgs);
    for (std::size_t g = 0; g < group.size(); ++g) {
      const std::size_t e = group[g];
      const embed::EmbeddedDataset& emb = embedded[g];
      const std::span<const std::uint8_t> labels(emb.labels);
      const std::size_t split = emb.split_index;
      for (std::size_t r = 0; r < readouts.size(); ++r) {
        TickerResult& out = report.cells[e * readouts.size() + r].per_ticker[k];
        out.ticker = ds.ticker;
        out.test = fit_and_score(readouts[r], emb.features, labels, split, split, emb.rows(), &out.degenerate_fit);
        if (options.selection == SelectionMode::kValidation) {
          const std::size_t inner = market::split_position(split);
          out.validation = fit_and_score(readouts[r], emb.features, labels, inner, inner, split, nullptr);
        }
      }
    }
    if (options.progress) {
      std::lock_guard lock(progress_mutex);
      ++done;
      if (done == items || done % 50 == 0)
        *options.progress << "  embedded " << done << "/" << items << " (config group, ticker) items\n";
    }
  });

  finalize_report(report);
  return report;
}

void write_cells_csv(std::ostream& out, const ExperimentReport& r) {
  out << "embedding,readout,embedding_params,regularization,tickers,mean_accuracy,mean_average_precision,"
         "selected\n";
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& c = r.cells[i];
    const bool selected = std::any_of(r.best.begin(), r.best.end(), [&](const Selection& s) { return s.cell == i; });
    out << embed::to_string(c.embedding.kind()) << ',' << readout::to_string(c.readout.kind) << ','
        << c.embedding.describe() << ',' << format_double(c.readout.regularization) << ','
        << c.per_ticker.size() << ',' << format_double(c.mean_accuracy) << ','
        << format_double(c.mean_average_precision) << ',' << (selected ? 1 : 0) << '\n';
  }
}

void write_ticker_csv(std::ostream& out, const ExperimentReport& r) {
  out << "embedding,readout,embedding_params,regularization,ticker,accuracy,average_precision,ap_defined,"
         "tp,fp,tn,fn\n";
  for (const auto& c : r.cells) {
    for (const auto& t : c.per_ticker) {
      out << embed::to_string(c.embedding.kind()) << ',' << readout::to_string(c.readout.kind) << ','
          << c.embedding.describe() << ',' << format_double(c.readout.regularization) << ',' << t.ticker
          << ',' << format_double(t.test.accuracy) << ',' << format_double(t.test.average_precision) << ','
          << (t.test.ap_defined ? 1 : 0) << ',' << t.test.tp << ',' << t.test.fp << ',' << t.test.tn << ','
          << t.test.fn << '\n';
    }
  }
}

void write_table(std::ostream& out, const ExperimentReport& r) {
  out << "Embedding comparison, means over tickers\n";
  out << "tickers: " << r.tickers.size() << " included, " << r.excluded.size() << " excluded; selection on "
      << to_string(r.selection) << " accuracy\n";
  for (const auto& x : r.excluded) out << "  excluded " << x.ticker << ": " << x.reason << '\n';

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < r.cells.size(); ++i) groups[kind_rank(r.cells[i].embedding.kind())].push_back(i);
  auto by_accuracy = [&](std::size_t a, std::size_t b) {
    const auto& x = r.cells[a];
    const auto& y = r.cells[b];
    return ranks_before(x, x.mean_accuracy, x.mean_average_precision, y, y.mean_accuracy, y.mean_average_precision);
  };

  out << "\nBest model per embedding and readout (test set)\n";
  out << std::left << std::setw(22) << "Embedding" << std::setw(22) << "Model" << std::right << std::setw(14)
      << "Avg. accuracy" << std::setw(16) << "Avg. precision" << "  Hyperparameters\n";
  for (const auto& [rank, members] : groups) {
    std::vector<std::size_t> best;
    for (const auto& s : r.best)
      if (kind_rank(s.embedding) == rank) best.push_back(s.cell);
    std::sort(best.begin(), best.end(), by_accuracy);
    bool first = true;
    for (std::size_t i : best) {
      const auto& c = r.cells[i];
      out << std::left << std::setw(22) << (first ? kind_title(c.embedding.kind()) : "") << std::setw(22)
          << readout_title(c.readout.kind) << std::right << std::setw(14) << fixed6(c.mean_accuracy)
          << std::setw(16) << fixed6(c.mean_average_precision) << "  " << c.embedding.describe() << " "
          << readout::to_string(c.readout.kind) << "=" << format_double(c.readout.regularization) << '\n';
      first = false;
    }
  }

  out << "\nAll cells\n";
  for (const auto& [rank, members] : groups) {
    std::vector<std::size_t> sorted = members;
    std::sort(sorted.begin(), sorted.end(), by_accuracy);
    out << kind_title(r.cells[sorted.front()].embedding.kind()) << '\n';
    for (std::size_t i : sorted) {
      const auto& c = r.cells[i];
      out << "  " << std::left << std::setw(22) << readout_title(c.readout.kind) << std::right << std::setw(10)
          << fixed6(c.mean_accuracy) << std::setw(10) << fixed6(c.mean_average_precision) << "  "
          << c.embedding.describe() << " " << readout::to_string(c.readout.kind) << "="
          << format_double(c.readout.regularization) << '\n';
    }
  }
}

ReportFiles emit_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  if (r.cells.empty()) throw Error(ErrorKind::kEvaluation, "cannot emit an empty report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create report directory " + dir.string());
  ReportFiles files{dir / "report.csv", dir / "report_tickers.csv", dir / "report.txt"};
  std::ostringstream cells, tickers, table;
  write_cells_csv(cells, r);
  write_ticker_csv(tickers, r);
  write_table(table, r);
  write_file(files.cells_csv, cells.str());
  write_file(files.tickers_csv, tickers.str());
  write_file(files.table, table.str());
  return files;
}

std::vector<RegimeSegment> parse_regime_spec(std::string_view spec) {
  auto fail = [&](std::size_t pos, const std::string& what) -> Error {
    return Error(ErrorKind::kConfig, "regime spec position " + std::to_string(pos + 1) + ": " + what);
  };
  if (spec.empty()) throw fail(0, "empty regime schedule");
  std::vector<RegimeSegment> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t colon = spec.find(':', pos);
    const std::size_t comma = spec.find(',', pos);
    if (colon == std::string_view::npos || (comma != std::string_view::npos && comma < colon))
      throw fail(pos, "expected 'length:sigma'");
    const std::string_view len_text = spec.substr(pos, colon - pos);
    std::size_t length = 0;
    {
      const auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), length);
      if (len_text.empty() || ec != std::errc() || ptr != len_text.data() + len_text.size())
        throw fail(pos, "length must be a non-negative integer");
    }
    if (length == 0) throw fail(pos, "segment length must be positive");
    const std::size_t sigma_pos = colon + 1;
    const std::size_t end = comma == std::string_view::npos ? spec.size() : comma;
    const std::string_view sigma_text = spec.substr(sigma_pos, end - sigma_pos);
    double sigma = 0.0;
    {
      const auto [ptr, ec] = std::from_chars(sigma_text.data(), sigma_text.data() + sigma_text.size(), sigma);
      if (sigma_text.empty() || ec != std::errc() || ptr != sigma_text.data() + sigma_text.size())
        throw fail(sigma_pos, "sigma must be a number");
    }
    if (!std::isfinite(sigma) || sigma < 0.0) throw fail(sigma_pos, "sigma must be finite and >= 0");
    out.push_back({length, sigma});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
    if (pos >= spec.size()) throw fail(pos, "trailing comma");
  }
  return out;
}

market::PriceSeries synth_regime_series(std::span<const RegimeSegment> regimes, std::uint64_t seed,
                                        std::string ticker, double initial_price) {
  if (regimes.empty()) throw Error(ErrorKind::kConfig, "regime schedule is empty");
  if (!(initial_price > 0.0) || !std::isfinite(initial_price))
    throw Error(ErrorKind::kConfig, "initial price must be positive");
  for (const auto& seg : regimes) {
    if (seg.length == 0) throw Error(ErrorKind::kConfig, "regime segment length must be positive");
    if (!std::isfinite(seg.sigma) || seg.sigma < 0.0)
      throw Error(ErrorKind::kConfig, "regime sigma must be finite and >= 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr long long kStartDay = 16437;  // 2015-01-02

  market::PriceSeries series{std::move(ticker), {}};
  double log_price = std::log(initial_price);
  long long day = kStartDay;
  series.observations.push_back({civil_date(day++), std::exp(log_price)});
  for (const auto& seg : regimes) {
    for (std::size_t i = 0; i < seg.length; ++i) {
      log_price += seg.sigma * normal(rng);
      series.observations.push_back({civil_date(day++), std::exp(log_price)});
    }
  }
  return series;
}

}  // namespace qrc::harness
