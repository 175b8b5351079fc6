#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qrc/error.hpp"
#include "qrc/harness.hpp"

using namespace qrc;
using namespace qrc::harness;
using embed::EmbeddingKind;
using readout::ReadoutKind;

namespace {

std::vector<market::WindowedDataset> synthetic_suite(int tickers, std::size_t segment = 60) {
  const std::vector<RegimeSegment> schedule{{segment, 0.005}, {segment / 3, 0.05},
                                            {segment, 0.005}, {segment / 3, 0.05}};
  std::vector<market::WindowedDataset> out;
  for (int k = 0; k < tickers; ++k) {
    auto prices = synth_regime_series(schedule, 100 + static_cast<std::uint64_t>(k), "T" + std::to_string(k));
    out.push_back(market::prepare_dataset(prices, {9, 1.0, 1}));
  }
  return out;
}

GridSpec small_grid() {
  GridSpec g;
  g.quantum = QuantumGrid{{1.0}, {1.0}, {0.5}, {0.5, 1.0}, quantum::EvolutionMethod::kChebyshev};
  g.esn = EsnGrid{{20}, {0.9}, {1.0}, {1.0}, 42};
  g.raw = true;
  g.readouts = {{ReadoutKind::kLogistic, {1e-2}, 100, 1e-8}, {ReadoutKind::kRidge, {1.0}, 100, 1e-8}};
  return g;
}

std::string cells_csv(const ExperimentReport& r) {
  std::ostringstream s;
  write_cells_csv(s, r);
  return s.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CellResult fake_cell(double reg, std::vector<double> acc, std::vector<double> ap) {
  CellResult c;
  c.embedding = embed::EmbeddingConfig::raw();
  c.readout = {ReadoutKind::kRidge, reg, 100, 1e-8};
  for (std::size_t i = 0; i < acc.size(); ++i) {
    TickerResult t;
    t.ticker = "T" + std::to_string(i);
    t.test.accuracy = acc[i];
    t.test.average_precision = ap[i];
    c.per_ticker.push_back(t);
  }
  return c;
}

}  // namespace

TEST_CASE("default grid shape") {
  const auto g = GridSpec::defaults();
  CHECK(g.problems().empty());
  const auto e = g.embedding_configs();
  CHECK(e.size() == 88);
  CHECK(e.front().kind() == EmbeddingKind::kQuantum);
  CHECK(e[81].kind() == EmbeddingKind::kClassicalEsn);
  CHECK(e.back().kind() == EmbeddingKind::kRaw);
  CHECK(g.readout_specs().size() == 6);
  CHECK(e.front().describe() == "a_x=0.5;a_z=0.5;a_zz=0.25;t=0.5;method=chebyshev");
  CHECK(e[1].describe() == "a_x=0.5;a_z=0.5;a_zz=0.25;t=1;method=chebyshev");

  const std::vector<EmbeddingKind> keep{EmbeddingKind::kRaw, EmbeddingKind::kQuantum};
  const auto r = g.restricted_to(keep);
  CHECK(r.embedding_configs().size() == 82);
  CHECK_FALSE(r.esn.has_value());
}

TEST_CASE("grid validation lists every problem") {
  GridSpec g;
  g.window = 1;
  g.readouts = {{ReadoutKind::kRidge, {0.0, -1.0}, 0, 1e-8}};
  g.esn = EsnGrid{{5}, {2.0}, {0.0}, {1.0}, 1};
  const auto p = g.problems();
  CHECK(p.size() >= 5);
  try {
    g.validate();
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("leak_rate") != std::string::npos);
    CHECK(std::string(e.what()).find("max_iter") != std::string::npos);
  }
  GridSpec empty;
  CHECK_FALSE(empty.problems().empty());
}

TEST_CASE("singleton grid equals a direct fit") {
  const auto data = synthetic_suite(1);
  GridSpec g;
  g.raw = true;
  g.readouts = {{ReadoutKind::kLogistic, {1e-2}, 100, 1e-8}};
  const auto report = run_grid(data, g);
  REQUIRE(report.cells.size() == 1);
  REQUIRE(report.cells[0].per_ticker.size() == 1);

  const auto emb = embed::embed_dataset(data[0], embed::EmbeddingConfig::raw());
  const auto split = static_cast<Eigen::Index>(emb.split_index);
  const auto model = readout::fit_logistic(emb.features.topRows(split),
                                           std::span<const std::uint8_t>(emb.labels).first(emb.split_index));
  const Eigen::VectorXd s = model.scores(emb.features.bottomRows(emb.features.rows() - split));
  const auto direct = readout::evaluate(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())),
                                        std::span<const std::uint8_t>(emb.labels).subspan(emb.split_index), 0.5);
  CHECK(report.cells[0].mean_accuracy == direct.accuracy);
  CHECK(report.cells[0].mean_average_precision == direct.average_precision);
  REQUIRE(report.best.size() == 1);
  CHECK(report.best_cell(EmbeddingKind::kRaw, ReadoutKind::kLogistic) == &report.cells[0]);
  CHECK(report.best_cell(EmbeddingKind::kQuantum, ReadoutKind::kLogistic) == nullptr);
}

TEST_CASE("means and tie-breaks") {
  ExperimentReport r;
  r.cells.push_back(fake_cell(1.0, {0.8, 1.0}, {0.5, 0.7}));
  r.cells.push_back(fake_cell(2.0, {0.9, 0.9}, {0.6, 0.7}));  // same accuracy, better AP
  r.cells.push_back(fake_cell(0.5, {0.9, 0.9}, {0.6, 0.7}));  // full tie, smaller text wins
  finalize_report(r);
  CHECK(std::abs(r.cells[0].mean_accuracy - 0.9) < 1e-12);
  CHECK(std::abs(r.cells[0].mean_average_precision - 0.6) < 1e-12);
  REQUIRE(r.best.size() == 1);
  // "ridge=0.5" < "ridge=1" < "ridge=2".
  CHECK(r.best[0].cell == 2);

  r.cells[1].per_ticker[0].test.average_precision = 0.9;
  finalize_report(r);
  CHECK(r.best[0].cell == 1);
}

TEST_CASE("duplicated ticker data gives identical results") {
  auto data = synthetic_suite(1);
  data.push_back(data[0]);
  data[1].ticker = "COPY";
  const auto report = run_grid(data, small_grid());
  for (const auto& c : report.cells) {
    REQUIRE(c.per_ticker.size() == 2);
    CHECK(c.per_ticker[0].test.accuracy == c.per_ticker[1].test.accuracy);
    CHECK(c.per_ticker[0].test.average_precision == c.per_ticker[1].test.average_precision);
    CHECK(c.mean_accuracy == c.per_ticker[0].test.accuracy);
  }
}

TEST_CASE("report means recompute from per-ticker entries") {
  const auto data = synthetic_suite(3);
  const auto report = run_grid(data, small_grid());
  CHECK(report.cells.size() == 8);
  for (const auto& c : report.cells) {
    double acc = 0.0, ap = 0.0;
    for (const auto& t : c.per_ticker) {
      acc += t.test.accuracy;
      ap += t.test.average_precision;
      CHECK(t.test.accuracy == static_cast<double>(t.test.tp + t.test.tn) /
                                   static_cast<double>(t.test.tp + t.test.tn + t.test.fp + t.test.fn));
    }
    CHECK(std::abs(c.mean_accuracy - acc / 3.0) < 1e-12);
    CHECK(std::abs(c.mean_average_precision - ap / 3.0) < 1e-12);
  }
  CHECK(report.best.size() == 6);
}

TEST_CASE("fits never see test labels") {
  auto data = synthetic_suite(2);
  const auto base = run_grid(data, small_grid());
  for (auto& ds : data)
    for (std::size_t i = ds.split_index; i < ds.windows.size(); ++i) ds.windows[i].label ^= 1;
  const auto flipped = run_grid(data, small_grid());
  for (std::size_t c = 0; c < base.cells.size(); ++c) {
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& a = base.cells[c].per_ticker[k].test;
      const auto& b = flipped.cells[c].per_ticker[k].test;
      // Same model, complemented labels.
      CHECK(std::abs(a.accuracy + b.accuracy - 1.0) < 1e-12);
      CHECK(a.tp == b.fp);
      CHECK(a.tn == b.fn);
    }
  }
}

TEST_CASE("excluded tickers and insufficient data") {
  auto data = synthetic_suite(2);
  market::WindowedDataset tiny = data[0];
  tiny.ticker = "TINY";
  tiny.windows.resize(2);
  tiny.split_index = 1;
  data.push_back(tiny);
  const auto report = run_grid(data, small_grid());
  CHECK(report.tickers.size() == 2);
  REQUIRE(report.excluded.size() == 1);
  CHECK(report.excluded[0].ticker == "TINY");
  for (const auto& c : report.cells) CHECK(c.per_ticker.size() == 2);

  const std::vector<market::WindowedDataset> only_tiny{tiny};
  CHECK_THROWS_AS(run_grid(only_tiny, small_grid()), Error);
  CHECK_THROWS_AS(run_grid(std::span<const market::WindowedDataset>{}, small_grid()), Error);
}

TEST_CASE("thread count, cache and reruns do not change results") {
  const auto data = synthetic_suite(3);
  RunOptions one;
  one.threads = 1;
  const auto a = cells_csv(run_grid(data, small_grid(), one));
  RunOptions many;
  many.threads = 4;
  CHECK(cells_csv(run_grid(data, small_grid(), many)) == a);

  const auto dir = std::filesystem::temp_directory_path() / "qrc_test_harness_cache";
  std::filesystem::remove_all(dir);
  RunOptions cached;
  cached.cache_dir = dir;
  CHECK(cells_csv(run_grid(data, small_grid(), cached)) == a);
  CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator{}) == 12);
  CHECK(cells_csv(run_grid(data, small_grid(), cached)) == a);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validation selection") {
  const auto data = synthetic_suite(2);
  RunOptions opt;
  opt.selection = SelectionMode::kValidation;
  const auto report = run_grid(data, small_grid(), opt);
  CHECK(report.selection == SelectionMode::kValidation);
  for (const auto& c : report.cells)
    for (const auto& t : c.per_ticker) CHECK(t.validation.has_value());
  CHECK(parse_selection_mode("validation") == SelectionMode::kValidation);
  CHECK_THROWS_AS(parse_selection_mode("oracle"), Error);
}

TEST_CASE("emit_report") {
  const auto dir = std::filesystem::temp_directory_path() / "qrc_test_emit";
  std::filesystem::remove_all(dir);
  const auto data = synthetic_suite(1);

  GridSpec one;
  one.raw = true;
  one.readouts = {{ReadoutKind::kRidge, {1.0}, 100, 1e-8}};
  const auto single = run_grid(data, one);
  const auto files = emit_report(single, dir);
  std::istringstream csv(slurp(files.cells_csv));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "embedding,readout,embedding_params,regularization,tickers,mean_accuracy,"
                    "mean_average_precision,selected");
  CHECK(lines[1].rfind("raw,ridge,-,1,1,", 0) == 0);

  const auto report = run_grid(synthetic_suite(2), small_grid());
  const auto f1 = emit_report(report, dir);
  const auto first = slurp(f1.table) + slurp(f1.cells_csv) + slurp(f1.tickers_csv);
  emit_report(report, dir);
  CHECK(slurp(f1.table) + slurp(f1.cells_csv) + slurp(f1.tickers_csv) == first);

  // Accuracy column descends inside each group of the full listing.
  std::istringstream table(slurp(f1.table));
  bool in_all = false;
  double previous = 2.0;
  int groups = 0;
  while (std::getline(table, line)) {
    if (line == "All cells") {
      in_all = true;
      continue;
    }
    if (!in_all) continue;
    if (line.rfind("  ", 0) != 0) {
      ++groups;
      previous = 2.0;
      continue;
    }
    std::istringstream row(line.substr(24));
    double acc = 0.0;
    row >> acc;
    CHECK(acc <= previous);
    previous = acc;
  }
  CHECK(groups == 3);

  std::filesystem::remove_all(dir);
  try {
    emit_report(report, "/proc/qrc-cannot-write-here");
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("regime spec grammar") {
  const auto s = parse_regime_spec("300:0.005,100:0.05,300:0.005");
  REQUIRE(s.size() == 3);
  CHECK(s[1].length == 100);
  CHECK(s[1].sigma == 0.05);
  for (const char* bad : {"", "0:0.1", "10", "10:", "10:x", "a:0.1", "10:0.1,", "10:-1", "10:0.1;5:0.2"}) {
    CHECK_THROWS_AS(parse_regime_spec(bad), Error);
  }
  try {
    parse_regime_spec("10:0.1,0:0.2");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    CHECK(std::string(e.what()).find("position 8") != std::string::npos);
  }
}

TEST_CASE("synthetic series") {
  const auto schedule = parse_regime_spec("300:0.005,100:0.05,300:0.005");
  const auto a = synth_regime_series(schedule, 7);
  CHECK(a.observations.size() == 701);
  CHECK(a.observations.front().date == "2015-01-02");
  CHECK(a.observations.front().adj_close == doctest::Approx(100.0));
  const auto b = synth_regime_series(schedule, 7);
  for (std::size_t i = 0; i < a.observations.size(); ++i)
    CHECK(a.observations[i].adj_close == b.observations[i].adj_close);
  for (std::size_t i = 1; i < a.observations.size(); ++i)
    CHECK(a.observations[i - 1].date < a.observations[i].date);

  const std::vector<RegimeSegment> flat{{50, 0.0}};
  const auto ds = market::prepare_dataset(synth_regime_series(flat, 1), {9, 1.0, 1});
  for (const auto& w : ds.windows) CHECK(w.label == 0);

  CHECK_THROWS_AS(synth_regime_series(std::vector<RegimeSegment>{}, 1), Error);
}

TEST_CASE("synthetic high-volatility segments dominate") {
  const std::vector<RegimeSegment> schedule{{100, 0.005}, {100, 0.05}, {100, 0.005}};
  std::size_t wins = 0, comparisons = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = market::log_returns(synth_regime_series(schedule, seed));
    const auto v = market::rolling_volatility(r, 9);
    // Windows lying entirely inside one regime.
    std::vector<double> low, high;
    for (std::size_t k = 0; k < v.raw.size(); ++k) {
      const std::size_t end = v.first_index + k;
      const std::size_t begin = end - 8;
      if (end < 100 || begin >= 200) low.push_back(v.raw[k]);
      if (begin >= 100 && end < 200) high.push_back(v.raw[k]);
    }
    for (std::size_t i = 0; i < high.size(); i += 7)
      for (std::size_t j = 0; j < low.size(); j += 7) {
        ++comparisons;
        wins += high[i] > low[j];
      }
  }
  CHECK(static_cast<double>(wins) >= 0.95 * static_cast<double>(comparisons));
}
