// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qrc/config.hpp"
#include "qrc/harness.hpp"
#include "qrc/hashing.hpp"
#include "qrc/market_pipeline.hpp"
#include "qrc/quantum_sim.hpp"
#include "qrc/readout.hpp"

#ifndef QRC_CLI_PATH
#error "QRC_CLI_PATH must name the qrc executable"
#endif

using namespace qrc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1. simulator against a Taylor matrix exponential ---------------------
Outcome simulator_oracle() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> qubits(2, 4);
  std::uniform_real_distribution<double> scale(0.25, 2.0);
  std::uniform_real_distribution<double> time(0.1, 3.0);
  double worst_eig = 0.0, worst_cheb = 0.0;
  for (int c = 0; c < 200; ++c) {
    const int n = qubits(rng);
    const auto x = testing::random_window(rng, static_cast<std::size_t>(n), 1.0);
    const quantum::Scalers s{scale(rng), scale(rng), scale(rng)};
    const double t = time(rng);
    const auto h = quantum::build_hamiltonian(x, s, n);
    const auto psi0 = quantum::StateVector::zero(n);
    Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
    e0[0] = 1.0;
    const Eigen::VectorXcd expect = testing::taylor_evolve(testing::kron_hamiltonian(x, s.a_x, s.a_z, s.a_zz), t, e0);
    for (auto method : {quantum::EvolutionMethod::kEigendecomposition, quantum::EvolutionMethod::kChebyshev}) {
      const auto got = quantum::evolve(psi0, h, t, method);
      double err = 0.0;
      for (Eigen::Index i = 0; i < expect.size(); ++i)
        err = std::max(err, std::abs(got[static_cast<std::size_t>(i)] - expect[i]));
      (method == quantum::EvolutionMethod::kChebyshev ? worst_cheb : worst_eig) =
          std::max(method == quantum::EvolutionMethod::kChebyshev ? worst_cheb : worst_eig, err);
    }
  }
  return {worst_eig < 1e-8 && worst_cheb < 1e-8,
          fmt("200 cases, max amplitude error eig=%.2e cheb=%.2e (limit 1e-08)", worst_eig, worst_cheb)};
}

// ---- 2. unitarity and feature bounds at n = 9 -----------------------------
Outcome unitarity_and_bounds() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> scale(0.25, 2.0);
  std::uniform_real_distribution<double> time(0.1, 3.0);
  double worst_norm = 0.0, worst_feature = 0.0;
  std::size_t bad_length = 0;
  for (int c = 0; c < 1000; ++c) {
    const auto x = testing::random_window(rng, 9, c % 2 ? 0.02 : 1.0);
    const quantum::Scalers s{scale(rng), scale(rng), scale(rng)};
    const auto h = quantum::build_hamiltonian(x, s, 9);
    const auto state = quantum::evolve(quantum::StateVector::zero(9), h, time(rng), quantum::EvolutionMethod::kChebyshev);
    worst_norm = std::max(worst_norm, std::abs(state.norm() - 1.0));
    const auto f = quantum::measure_features(state);
    if (f.size() != 45) ++bad_length;
    for (double v : f.values()) worst_feature = std::max(worst_feature, std::abs(v));
  }
  return {worst_norm < 1e-10 && worst_feature <= 1.0 && bad_length == 0,
          fmt("1000 embeddings, max |norm-1|=%.2e (limit 1e-10), max |feature|=%.17g, wrong lengths=%zu",
              worst_norm, worst_feature, bad_length)};
}

// ---- 3. pipeline fixtures --------------------------------------------------
Outcome pipeline_fixtures() {
  int failures = 0;
  auto near = [&](double got, double want) {
    if (!(std::abs(got - want) <= 1e-9)) ++failures;
  };
  const double e = std::exp(1.0);
  const auto r1 = market::log_returns({"A", {{"1", 1.0}, {"2", e}, {"3", e * e}}});
  near(r1.returns.at(0), 1.0);
  near(r1.returns.at(1), 1.0);
  const auto r2 = market::log_returns({"A", {{"1", 100.0}, {"2", 110.0}}});
  near(r2.returns.at(0), std::log(1.1));
  if (std::abs(r2.returns.at(0) - 0.0953102) > 1e-6) ++failures;
  const auto r3 = market::log_returns({"A", {{"1", 4.0}, {"2", 4.0}, {"3", 4.0}}});
  for (double v : r3.returns) near(v, 0.0);

  auto series = [](std::vector<double> v) {
    market::ReturnSeries r{"A", std::move(v), {}};
    r.dates.resize(r.returns.size());
    return r;
  };
  near(market::rolling_volatility(series({1, 2, 3}), 3).raw.at(0), 1.0);
  near(market::rolling_volatility(series({0, 0, 2}), 3).raw.at(0), 2.0 / std::sqrt(3.0));
  for (double v : market::rolling_volatility(series({0.3, 0.3, 0.3, 0.3}), 3).raw) near(v, 0.0);

  market::VolatilitySeries v;
  v.window = 2;
  v.first_index = 1;
  v.raw = {1, 1, 1, 1, 5};
  const auto labels = market::normalize_and_label(v, 1.0);
  if (labels.labels != std::vector<std::uint8_t>{0, 0, 0, 0, 1}) ++failures;
  near(v.normalized.at(4), std::sqrt(3.2));
  near(labels.threshold, 1.0);

  market::VolatilitySeries flat = v;
  flat.raw = {2, 2, 2, 2};
  const auto degenerate = market::normalize_and_label(flat, 1.0);
  for (auto c : degenerate.labels) failures += c;

  market::RegimeLabels ten;
  ten.first_index = 8;
  ten.labels = {0, 1};
  const auto ds = market::windowize(series(std::vector<double>(10, 0.01)), ten, 9, 1);
  if (ds.windows.size() != 2 || ds.split_index != 1) ++failures;

  // Threshold rule against the raw z-score rule.
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  int identity_failures = 0;
  for (int k = 0; k < 100; ++k) {
    auto r = series(testing::random_window(rng, 100 + static_cast<std::size_t>(k), 0.03));
    auto vol = market::rolling_volatility(r, 9);
    const auto raw = vol.raw;
    const double lambda = lam(rng);
    const auto got = market::normalize_and_label(vol, lambda);
    if (got.labels != testing::zscore_labels(raw, lambda) || std::abs(got.threshold - lambda) > 1e-9)
      ++identity_failures;
  }
  return {failures == 0 && identity_failures == 0,
          fmt("fixture mismatches=%d, threshold identity failures=%d/100", failures, identity_failures)};
}

// ---- 4. readouts -----------------------------------------------------------
Outcome readout_correctness() {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst_residual = 0.0;
  for (int k = 0; k < 50; ++k) {
    Eigen::MatrixXd x(20 + k, 5);
    Eigen::VectorXd y(x.rows());
    for (auto& v : x.reshaped()) v = n(rng);
    for (auto& v : y) v = n(rng);
    const double alpha = std::pow(10.0, (k % 7) - 3);
    const auto w = readout::solve_ridge_normal_equations(x, y, alpha);
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += alpha;
    const Eigen::VectorXd rhs = x.transpose() * y;
    worst_residual = std::max(worst_residual, (gram * w - rhs).norm() / rhs.norm());
  }

  double worst_gradient = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index d = 3 + k % 5;
    Eigen::MatrixXd x(60, d);
    for (auto& v : x.reshaped()) v = n(rng);
    std::vector<std::uint8_t> y(60);
    for (auto& v : y) v = n(rng) > 0;
    Eigen::VectorXd w(d);
    for (auto& v : w) v = n(rng);
    const double b = n(rng);
    const double l2 = 0.05;
    const auto g = readout::logistic_objective(x, y, l2, w, b).gradient;
    for (Eigen::Index j = 0; j <= d; ++j) {
      const double h = 1e-6;
      Eigen::VectorXd wp = w, wm = w;
      double bp = b, bm = b;
      if (j < d) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double numeric = (readout::logistic_objective(x, y, l2, wp, bp).loss -
                              readout::logistic_objective(x, y, l2, wm, bm).loss) / (2 * h);
      worst_gradient = std::max(worst_gradient, std::abs(numeric - g[j]) / std::max(std::abs(g[j]), 1e-2));
    }
  }

  const std::vector<double> scores{0.9, 0.8, 0.7};
  const std::vector<std::uint8_t> labels{1, 0, 1};
  const double ap = readout::average_precision(scores, labels);
  const double ap_err = std::abs(ap - 5.0 / 6.0);
  return {worst_residual < 1e-8 && worst_gradient < 1e-5 && ap_err < 1e-9,
          fmt("ridge relative residual=%.2e (limit 1e-08), logistic gradient rel err=%.2e (limit 1e-05), "
              "AP=%.12f (err %.1e)",
              worst_residual, worst_gradient, ap, ap_err)};
}

// ---- 5 and 6. directional comparison on synthetic regimes -----------------
constexpr const char* kSchedule = "150:0.005,50:0.05,150:0.005,50:0.05,150:0.005,50:0.05,150:0.005,50:0.05";
constexpr int kTickers = 10;
constexpr std::uint64_t kSeed = 1000;

std::vector<market::WindowedDataset> synthetic_suite() {
  const auto schedule = harness::parse_regime_spec(kSchedule);
  std::vector<market::WindowedDataset> out;
  for (int k = 0; k < kTickers; ++k) {
    char name[16];
    std::snprintf(name, sizeof name, "SYN%02d", k);
    const auto prices = harness::synth_regime_series(schedule, kSeed + static_cast<std::uint64_t>(k), name);
    out.push_back(market::prepare_dataset(prices, {9, 1.0, 1}));
  }
  return out;
}

harness::ExperimentReport* g_report = nullptr;
double g_grid_seconds = 0.0;

Outcome directional_reproduction() {
  const auto data = synthetic_suite();
  const std::size_t points = data.front().windows.size() + 9;  // prices per series
  const auto t0 = std::chrono::steady_clock::now();
  static harness::ExperimentReport report = harness::run_grid(data, harness::GridSpec::defaults());
  g_grid_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g_report = &report;
  using embed::EmbeddingKind;
  using readout::ReadoutKind;
  const auto* q = report.best_cell(EmbeddingKind::kQuantum, ReadoutKind::kLogistic);
  const auto* raw = report.best_cell(EmbeddingKind::kRaw, ReadoutKind::kLogistic);
  const auto* esn = report.best_cell(EmbeddingKind::kClassicalEsn, ReadoutKind::kLogistic);
  if (!q || !raw || !esn) return {false, "missing logistic cells in report"};
  const double gap_raw = q->mean_accuracy - raw->mean_accuracy;
  const double gap_esn = q->mean_accuracy - esn->mean_accuracy;
  const bool pass = gap_raw >= 0.05 && gap_esn >= -0.03 && g_grid_seconds < 600.0 && points >= 700;
  return {pass, fmt("%d series x %zu prices, %zu cells; quantum+logistic=%.6f raw+logistic=%.6f (gap %.4f, need "
                    ">= 0.05) esn+logistic=%.6f (gap %.4f, need >= -0.03); grid %.1f s (limit 600 s)",
                    kTickers, points, report.cells.size(), q->mean_accuracy, raw->mean_accuracy, gap_raw,
                    esn->mean_accuracy, gap_esn, g_grid_seconds)};
}

Outcome linear_insufficiency() {
  if (!g_report) return {false, "grid report unavailable"};
  const auto* q = g_report->best_cell(embed::EmbeddingKind::kQuantum, readout::ReadoutKind::kRidge);
  const auto* raw = g_report->best_cell(embed::EmbeddingKind::kRaw, readout::ReadoutKind::kRidge);
  if (!q || !raw) return {false, "missing ridge cells in report"};
  return {raw->mean_accuracy < q->mean_accuracy,
          fmt("raw+ridge=%.6f quantum+ridge=%.6f", raw->mean_accuracy, q->mean_accuracy)};
}

// ---- 7. determinism through the command-line tool -------------------------
int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return status == -1 ? -1 : WEXITSTATUS(status);
}

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "qrc_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = QRC_CLI_PATH;
  std::ofstream(dir / "config.json") << config::default_config_json();
  const std::string q = "'";
  if (shell(q + cli + "' synth --regimes " + kSchedule + " --seed " + std::to_string(kSeed) + " --tickers " +
            std::to_string(kTickers) + " --out '" + (dir / "prices.csv").string() + "' 2>/dev/null") != 0)
    return {false, "synth failed"};
  if (shell(q + cli + "' prepare --prices '" + (dir / "prices.csv").string() + "' --out '" +
            (dir / "data").string() + "' 2>/dev/null") != 0)
    return {false, "prepare failed"};
  std::vector<std::string> hashes;
  for (const char* run : {"run1", "run2"}) {
    if (shell(q + cli + "' run --quiet --data '" + (dir / "data").string() + "' --config '" +
              (dir / "config.json").string() + "' --out '" + (dir / run).string() + "' 2>/dev/null") != 0)
      return {false, std::string(run) + " failed"};
    std::string combined;
    for (const char* f : {"report.csv", "report_tickers.csv", "report.txt"}) combined += sha256_file(dir / run / f);
    hashes.push_back(combined);
  }
  const bool same = hashes[0] == hashes[1];
  const std::string digest = sha256_file(dir / "run1" / "report.csv").substr(0, 16);
  fs::remove_all(dir);
  return {same, "two full default-grid CLI runs; report.csv sha256 " + digest + "...; " +
                    (same ? "all three report files byte-identical" : "reports differ")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double limit_seconds;
  };
  const std::vector<Criterion> criteria{
      {1, "simulator oracle equivalence", simulator_oracle, 30.0},
      {2, "unitarity and feature bounds", unitarity_and_bounds, 60.0},
      {3, "pipeline fixtures", pipeline_fixtures, 0.0},
      {4, "readout correctness", readout_correctness, 0.0},
      {5, "directional comparison on synthetic regimes", directional_reproduction, 0.0},
      {6, "linear-insufficiency witness", linear_insufficiency, 0.0},
      {7, "end-to-end determinism", cli_determinism, 0.0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_seconds > 0.0 && secs >= c.limit_seconds) {
      out.pass = false;
      out.detail += fmt("; over time limit %.0f s", c.limit_seconds);
    }
    failed += !out.pass;
    std::printf("%s [%d] %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
