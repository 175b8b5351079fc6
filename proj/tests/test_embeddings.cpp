#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "qrc/embeddings.hpp"
#include "qrc/error.hpp"

using namespace qrc;
using namespace qrc::embed;

namespace {

market::WindowedDataset make_dataset(std::size_t returns, int window, int stride, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto r = testing::random_window(rng, returns, 0.02);
  market::WindowedDataset ds;
  ds.ticker = "EMB";
  ds.window_size = window;
  ds.stride = stride;
  for (std::size_t t = static_cast<std::size_t>(window) - 1; t < r.size(); t += static_cast<std::size_t>(stride)) {
    market::Window w;
    w.t = t;
    w.values.assign(r.begin() + static_cast<std::ptrdiff_t>(t + 1 - static_cast<std::size_t>(window)),
                    r.begin() + static_cast<std::ptrdiff_t>(t + 1));
    w.label = (t * 7 + 3) % 5 == 0 ? 1 : 0;
    ds.windows.push_back(std::move(w));
  }
  ds.split_index = market::split_position(ds.windows.size());
  return ds;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("embedding dimensions") {
  const auto ds = make_dataset(40, 9, 1, 1);
  CHECK(embed_dataset(ds, EmbeddingConfig::raw()).features.cols() == 9);
  CHECK(embed_dataset(ds, EmbeddingConfig::quantum()).features.cols() == 45);
  CHECK(embed_dataset(ds, EmbeddingConfig::esn()).features.cols() == 50);
  CHECK(EmbeddingConfig::quantum().output_dimension(4) == 10);
}

TEST_CASE("embedding preserves rows, labels and split") {
  const auto ds = make_dataset(60, 9, 1, 2);
  for (const auto& cfg : {EmbeddingConfig::raw(), EmbeddingConfig::quantum(), EmbeddingConfig::esn()}) {
    const auto emb = embed_dataset(ds, cfg);
    REQUIRE(emb.rows() == ds.windows.size());
    CHECK(emb.split_index == ds.split_index);
    CHECK(emb.ticker == ds.ticker);
    CHECK(emb.provenance == cfg);
    for (std::size_t i = 0; i < emb.rows(); ++i) {
      CHECK(emb.labels[i] == ds.windows[i].label);
      CHECK(emb.times[i] == ds.windows[i].t);
    }
  }
}

TEST_CASE("raw backend copies values") {
  const auto ds = make_dataset(30, 9, 1, 3);
  const auto emb = embed_dataset(ds, EmbeddingConfig::raw());
  for (std::size_t i = 0; i < emb.rows(); ++i)
    for (std::size_t j = 0; j < 9; ++j)
      CHECK(emb.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == ds.windows[i].values[j]);
}

TEST_CASE("quantum backend maps each window independently") {
  const auto ds = make_dataset(30, 6, 1, 4);
  quantum::QuantumReservoirParams q;
  q.scalers = {1.5, 0.7, 0.3};
  q.time = 0.8;
  const auto emb = embed_dataset(ds, EmbeddingConfig::quantum(q));
  for (std::size_t i : {std::size_t{0}, std::size_t{7}, emb.rows() - 1}) {
    const auto fv = quantum::quantum_embed(ds.windows[i].values, q);
    for (std::size_t j = 0; j < fv.values().size(); ++j)
      CHECK(emb.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == fv.values()[j]);
  }
}

TEST_CASE("quantum embedding is not reversal invariant") {
  std::mt19937_64 rng(8);
  const auto w = testing::random_window(rng, 9, 1.0);
  std::vector<double> rev(w.rbegin(), w.rend());
  const auto a = quantum::quantum_embed(w, {});
  const auto b = quantum::quantum_embed(rev, {});
  double diff = 0.0;
  for (std::size_t j = 0; j < a.values().size(); ++j) diff = std::max(diff, std::abs(a.values()[j] - b.values()[j]));
  CHECK(diff > 1e-6);
}

TEST_CASE("group embedding matches one-by-one embedding") {
  const auto ds = make_dataset(40, 7, 1, 5);
  std::vector<EmbeddingConfig> cfgs;
  for (double t : {0.5, 1.0, 2.0}) {
    quantum::QuantumReservoirParams q;
    q.time = t;
    cfgs.push_back(EmbeddingConfig::quantum(q));
  }
  quantum::QuantumReservoirParams other;
  other.scalers.a_zz = 1.0;
  cfgs.push_back(EmbeddingConfig::quantum(other));
  cfgs.push_back(EmbeddingConfig::raw());
  cfgs.push_back(EmbeddingConfig::esn());
  quantum::QuantumReservoirParams eig;
  eig.method = quantum::EvolutionMethod::kEigendecomposition;
  cfgs.push_back(EmbeddingConfig::quantum(eig));

  const auto group = embed_dataset_group(ds, cfgs);
  REQUIRE(group.size() == cfgs.size());
  for (std::size_t c = 0; c < cfgs.size(); ++c) {
    const auto single = embed_dataset(ds, cfgs[c]);
    CHECK(group[c].provenance == cfgs[c]);
    CHECK(group[c].labels == single.labels);
    CHECK((group[c].features - single.features).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Both evolution methods agree on the default config.
  CHECK((group[1].features - group[6].features).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("esn: fixed point, leak limit and bounds") {
  EsnParams p;
  p.reservoir_size = 20;
  const EchoStateReservoir res(p);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(20);
  CHECK(res.step(zero, 0.0).cwiseAbs().maxCoeff() == 0.0);

  EsnParams full = p;
  full.leak_rate = 1.0;
  full.input_scaling = 0.7;
  const EchoStateReservoir res1(full);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd s(20);
  for (auto& v : s) v = u(rng);
  const Eigen::VectorXd expect = (res1.recurrent() * s + res1.input_weights() * (0.4 * 0.7)).array().tanh().matrix();
  CHECK((res1.step(s, 0.4) - expect).cwiseAbs().maxCoeff() == 0.0);

  for (int trial = 0; trial < 50; ++trial) {
    for (auto& v : s) v = 3.0 * u(rng);
    const double input = 5.0 * u(rng);
    const Eigen::VectorXd next = res.step(s, input);
    const double a = p.leak_rate;
    for (Eigen::Index i = 0; i < 20; ++i) {
      CHECK(next[i] > (1 - a) * s[i] - a);
      CHECK(next[i] < (1 - a) * s[i] + a);
    }
  }
  CHECK_THROWS_AS(res.step(Eigen::VectorXd::Zero(5), 0.0), Error);
}

TEST_CASE("esn: recurrent matrix has the requested spectral radius") {
  for (double rho : {0.7, 0.9, 1.1}) {
    EsnParams p;
    p.spectral_radius = rho;
    const EchoStateReservoir res(p);
    CHECK(spectral_radius(res.recurrent()) == doctest::Approx(rho).epsilon(1e-9));
    CHECK(res.input_weights().cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("esn: echo-state convergence") {
  for (double leak : {0.3, 1.0}) {
    EsnParams p;
    p.spectral_radius = 0.9;
    p.leak_rate = leak;
    const EchoStateReservoir res(p);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd a(50), b(50);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const double start = (a - b).norm();
    for (int k = 0; k < 200; ++k) {
      const double input = u(rng);
      a = res.step(a, input);
      b = res.step(b, input);
    }
    CHECK((a - b).norm() * 10.0 <= start);
  }
}

TEST_CASE("esn: seeded determinism") {
  EsnParams p;
  const EchoStateReservoir r1(p), r2(p);
  CHECK(r1.recurrent() == r2.recurrent());
  CHECK(r1.input_weights() == r2.input_weights());
  EsnParams q = p;
  q.seed = 43;
  CHECK_FALSE(EchoStateReservoir(q).recurrent() == r1.recurrent());

  const auto ds = make_dataset(80, 9, 1, 6);
  CHECK(embed_dataset(ds, EmbeddingConfig::esn(p)).features == embed_dataset(ds, EmbeddingConfig::esn(p)).features);
}

TEST_CASE("esn: returns stream through once in order") {
  for (int stride : {1, 3, 9, 11}) {
    const auto ds = make_dataset(70, 9, stride, 7);
    EsnParams p;
    p.reservoir_size = 12;
    const auto emb = embed_dataset(ds, EmbeddingConfig::esn(p));
    // Rebuild the return series and stream it by hand.
    std::vector<double> r(ds.windows.back().t + 1, 0.0);
    std::vector<bool> known(r.size(), false);
    for (const auto& w : ds.windows)
      for (std::size_t j = 0; j < 9; ++j) {
        r[w.t - 8 + j] = w.values[j];
        known[w.t - 8 + j] = true;
      }
    const EchoStateReservoir res(p);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(12);
    std::size_t row = 0;
    for (std::size_t t = 0; t < r.size(); ++t) {
      if (!known[t]) continue;  // gaps between disjoint windows are never fed
      s = res.step(s, r[t]);
      if (row < ds.windows.size() && ds.windows[row].t == t) {
        CHECK((emb.features.row(static_cast<Eigen::Index>(row)).transpose() - s).cwiseAbs().maxCoeff() == 0.0);
        ++row;
      }
    }
    CHECK(row == ds.windows.size());
  }
}

TEST_CASE("config validation") {
  EsnParams small;
  small.reservoir_size = 5;
  CHECK_THROWS_AS(EmbeddingConfig::esn(small).validate(9), Error);
  for (double rho : {0.0, -1.0, 1.5, 2.0}) {
    EsnParams p;
    p.spectral_radius = rho;
    CHECK_THROWS_AS(EmbeddingConfig::esn(p).validate(9), Error);
  }
  for (double leak : {0.0, 1.01}) {
    EsnParams p;
    p.leak_rate = leak;
    CHECK_THROWS_AS(EmbeddingConfig::esn(p).validate(9), Error);
  }
  CHECK_THROWS_AS(EmbeddingConfig::quantum().validate(15), Error);
  quantum::QuantumReservoirParams q;
  q.time = NAN;
  CHECK_THROWS_AS(EmbeddingConfig::quantum(q).validate(9), Error);
  try {
    EmbeddingConfig::esn(small).validate(9);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
  CHECK_NOTHROW(EmbeddingConfig::esn().validate(9));
  CHECK_NOTHROW(EmbeddingConfig::raw().validate(9));

  market::WindowedDataset empty;
  empty.window_size = 9;
  CHECK_THROWS_AS(embed_dataset(empty, EmbeddingConfig::raw()), Error);
}

TEST_CASE("describe and kind names") {
  CHECK(EmbeddingConfig::quantum().describe() == "a_x=1;a_z=1;a_zz=0.5;t=1;method=chebyshev");
  CHECK(EmbeddingConfig::esn().describe() == "size=50;rho=0.9;leak=0.3;scale=1;seed=42");
  CHECK(EmbeddingConfig::raw().describe() == "-");
  for (auto k : {EmbeddingKind::kQuantum, EmbeddingKind::kClassicalEsn, EmbeddingKind::kRaw})
    CHECK(parse_embedding_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_embedding_kind("esn"), Error);
}

TEST_CASE("fingerprint tracks content") {
  auto ds = make_dataset(30, 9, 1, 9);
  const auto base = dataset_fingerprint(ds);
  CHECK(base.size() == 64);
  CHECK(dataset_fingerprint(ds) == base);
  ds.windows[3].label ^= 1;
  CHECK(dataset_fingerprint(ds) != base);
}

TEST_CASE("embedding cache round-trip and invalidation") {
  const auto dir = fresh_dir("qrc_test_cache");
  const EmbeddingCache cache(dir);
  auto ds = make_dataset(40, 9, 1, 10);
  const auto cfg = EmbeddingConfig::quantum();
  CHECK_FALSE(cache.load(ds, cfg).has_value());

  const auto computed = cache.get_or_compute(ds, cfg);
  CHECK(std::filesystem::exists(cache.path_for(ds.ticker, cfg)));
  const auto loaded = cache.load(ds, cfg);
  REQUIRE(loaded.has_value());
  CHECK(loaded->features == computed.features);
  CHECK(loaded->labels == computed.labels);
  CHECK(loaded->times == computed.times);
  CHECK(loaded->split_index == computed.split_index);

  CHECK(cache.path_for("A", EmbeddingConfig::raw()) != cache.path_for("A", cfg));
  CHECK(cache.path_for("A", cfg) != cache.path_for("B", cfg));

  // Changed data invalidates the entry.
  ds.windows[0].values[0] += 1e-3;
  CHECK_FALSE(cache.load(ds, cfg).has_value());

  // Group lookup mixes hits and misses.
  std::vector<EmbeddingConfig> cfgs{cfg, EmbeddingConfig::raw()};
  const auto group = cache.get_or_compute(ds, std::span<const EmbeddingConfig>(cfgs));
  CHECK(group[0].features == embed_dataset(ds, cfg).features);
  CHECK(group[1].features == embed_dataset(ds, cfgs[1]).features);
  CHECK(cache.load(ds, cfgs[1]).has_value());
  std::filesystem::remove_all(dir);
}
