#include "qrc/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qrc/error.hpp"
#include "qrc/hashing.hpp"

namespace qrc::embed {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::kConfig, message);
}

}  // namespace

std::string_view to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::kQuantum: return "quantum";
    case EmbeddingKind::kClassicalEsn: return "classical_esn";
    case EmbeddingKind::kRaw: return "raw";
  }
  return "unknown";
}

EmbeddingKind parse_embedding_kind(std::string_view text) {
  if (text == "quantum") return EmbeddingKind::kQuantum;
  if (text == "classical_esn") return EmbeddingKind::kClassicalEsn;
  if (text == "raw") return EmbeddingKind::kRaw;
  throw Error(ErrorKind::kConfig, "unknown embedding kind '" + std::string(text) + "'");
}

EmbeddingKind EmbeddingConfig::kind() const noexcept {
  switch (backend.index()) {
    case 0: return EmbeddingKind::kQuantum;
    case 1: return EmbeddingKind::kClassicalEsn;
    default: return EmbeddingKind::kRaw;
  }
}

void EmbeddingConfig::validate(int window) const {
  require(window >= 1, "window must be positive");
  std::visit(Overloaded{
                 [&](const quantum::QuantumReservoirParams& q) {
                   require(window <= quantum::kMaxQubits,
                           "quantum embedding supports at most " +
                               std::to_string(quantum::kMaxQubits) + " qubits");
                   require(std::isfinite(q.scalers.a_x) && std::isfinite(q.scalers.a_z) &&
                               std::isfinite(q.scalers.a_zz),
                           "quantum scalers must be finite");
                   require(std::isfinite(q.time), "quantum evolution time must be finite");
                 },
                 [&](const EsnParams& e) {
                   require(e.reservoir_size >= window,
                           "esn reservoir_size must be at least the window size");
                   require(e.spectral_radius > 0.0 && e.spectral_radius < 1.5,
                           "esn spectral_radius must lie in (0, 1.5)");
                   require(e.leak_rate > 0.0 && e.leak_rate <= 1.0, "esn leak_rate must lie in (0, 1]");
                   require(std::isfinite(e.input_scaling), "esn input_scaling must be finite");
                 },
                 [](const RawParams&) {},
             },
             backend);
}

std::size_t EmbeddingConfig::output_dimension(int window) const {
  return std::visit(Overloaded{
                        [&](const quantum::QuantumReservoirParams&) {
                          return quantum::FeatureVector::length_for(window);
                        },
                        [](const EsnParams& e) { return static_cast<std::size_t>(e.reservoir_size); },
                        [&](const RawParams&) { return static_cast<std::size_t>(window); },
                    },
                    backend);
}

std::string EmbeddingConfig::describe() const {
  return std::visit(
      Overloaded{
          [](const quantum::QuantumReservoirParams& q) {
            return "a_x=" + format_double(q.scalers.a_x) + ";a_z=" + format_double(q.scalers.a_z) +
                   ";a_zz=" + format_double(q.scalers.a_zz) + ";t=" + format_double(q.time) +
                   ";method=" + std::string(quantum::to_string(q.method));
          },
          [](const EsnParams& e) {
            return "size=" + std::to_string(e.reservoir_size) +
                   ";rho=" + format_double(e.spectral_radius) + ";leak=" + format_double(e.leak_rate) +
                   ";scale=" + format_double(e.input_scaling) + ";seed=" + std::to_string(e.seed);
          },
          [](const RawParams&) { return std::string("-"); },
      },
      backend);
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::kInternal, "eigenvalue computation did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

EchoStateReservoir::EchoStateReservoir(const EsnParams& params) : params_(params) {
  EmbeddingConfig{params}.validate(1);
  const auto n = static_cast<Eigen::Index>(params.reservoir_size);
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> recurrent_dist(-0.5, 0.5);
  std::uniform_real_distribution<double> input_dist(-1.0, 1.0);
  recurrent_.resize(n, n);
  // Fill row-major so the draw order does not depend on Eigen's storage.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) recurrent_(i, j) = recurrent_dist(rng);
  input_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) input_[i] = input_dist(rng);
  const double radius = spectral_radius(recurrent_);
  if (radius > 0.0) recurrent_ *= params.spectral_radius / radius;
}

Eigen::VectorXd EchoStateReservoir::step(const Eigen::VectorXd& state, double input) const {
  if (state.size() != recurrent_.rows())
    throw Error(ErrorKind::kInputShape, "reservoir state length does not match reservoir size");
  const double a = params_.leak_rate;
  const Eigen::VectorXd pre = recurrent_ * state + input_ * (input * params_.input_scaling);
  return (1.0 - a) * state + a * pre.array().tanh().matrix();
}

EmbeddedDataset embed_dataset(const market::WindowedDataset& ds, const EmbeddingConfig& cfg) {
  if (ds.windows.empty()) throw Error(ErrorKind::kInsufficientData, "cannot embed an empty dataset");
  cfg.validate(ds.window_size);
  const auto rows = static_cast<Eigen::Index>(ds.windows.size());
  const auto cols = static_cast<Eigen::Index>(cfg.output_dimension(ds.window_size));

  EmbeddedDataset out;
  out.ticker = ds.ticker;
  out.split_index = ds.split_index;
  out.provenance = cfg;
  out.features.resize(rows, cols);
  out.labels.reserve(ds.windows.size());
  out.times.reserve(ds.windows.size());
  for (const auto& win : ds.windows) {
    if (win.values.size() != static_cast<std::size_t>(ds.window_size))
      throw Error(ErrorKind::kInputShape, "window length does not match dataset window size");
    out.labels.push_back(win.label);
    out.times.push_back(win.t);
  }

  std::visit(Overloaded{
                 [&](const quantum::QuantumReservoirParams& q) {
                   for (Eigen::Index i = 0; i < rows; ++i) {
                     const auto fv = quantum::quantum_embed(ds.windows[static_cast<std::size_t>(i)].values, q);
                     for (Eigen::Index j = 0; j < cols; ++j) out.features(i, j) = fv.values()[static_cast<std::size_t>(j)];
                   }
                 },
                 [&](const EsnParams& e) {
                   const EchoStateReservoir reservoir(e);
                   Eigen::VectorXd state = Eigen::VectorXd::Zero(cols);
                   const auto w = static_cast<std::size_t>(ds.window_size);
                   std::optional<std::size_t> last_fed;
                   for (Eigen::Index i = 0; i < rows; ++i) {
                     const auto& win = ds.windows[static_cast<std::size_t>(i)];
                     const std::size_t first = win.t + 1 - w;
                     const std::size_t from = last_fed && *last_fed + 1 > first ? *last_fed + 1 : first;
                     for (std::size_t idx = from; idx <= win.t; ++idx) state = reservoir.step(state, win.values[idx - first]);
                     last_fed = win.t;
                     out.features.row(i) = state.transpose();
                   }
                 },
                 [&](const RawParams&) {
                   for (Eigen::Index i = 0; i < rows; ++i)
                     for (Eigen::Index j = 0; j < cols; ++j)
                       out.features(i, j) = ds.windows[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)];
                 },
             },
             cfg.backend);
  return out;
}

std::vector<EmbeddedDataset> embed_dataset_group(const market::WindowedDataset& ds,
                                                 std::span<const EmbeddingConfig> cfgs) {
  std::vector<EmbeddedDataset> out(cfgs.size());
  std::vector<bool> done(cfgs.size(), false);
  for (std::size_t a = 0; a < cfgs.size(); ++a) {
    if (done[a]) continue;
    const auto* qa = std::get_if<quantum::QuantumReservoirParams>(&cfgs[a].backend);
    if (!qa) {
      out[a] = embed_dataset(ds, cfgs[a]);
      done[a] = true;
      continue;
    }
    // Collect every config with the same scalers and method.
    std::vector<std::size_t> members;
    std::vector<double> times;
    for (std::size_t b = a; b < cfgs.size(); ++b) {
      const auto* qb = std::get_if<quantum::QuantumReservoirParams>(&cfgs[b].backend);
      if (done[b] || !qb || !(qb->scalers == qa->scalers) || qb->method != qa->method) continue;
      cfgs[b].validate(ds.window_size);
      members.push_back(b);
      times.push_back(qb->time);
      done[b] = true;
    }
    if (ds.windows.empty()) throw Error(ErrorKind::kInsufficientData, "cannot embed an empty dataset");
    const auto rows = static_cast<Eigen::Index>(ds.windows.size());
    const auto cols = static_cast<Eigen::Index>(cfgs[a].output_dimension(ds.window_size));
    for (std::size_t m : members) {
      auto& e = out[m];
      e.ticker = ds.ticker;
      e.split_index = ds.split_index;
      e.provenance = cfgs[m];
      e.features.resize(rows, cols);
      for (const auto& win : ds.windows) {
        if (win.values.size() != static_cast<std::size_t>(ds.window_size))
          throw Error(ErrorKind::kInputShape, "window length does not match dataset window size");
        e.labels.push_back(win.label);
        e.times.push_back(win.t);
      }
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto fvs = quantum::quantum_embed_times(ds.windows[static_cast<std::size_t>(i)].values, qa->scalers,
                                                    times, qa->method);
      for (std::size_t m = 0; m < members.size(); ++m)
        for (Eigen::Index j = 0; j < cols; ++j)
          out[members[m]].features(i, j) = fvs[m].values()[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

std::string dataset_fingerprint(const market::WindowedDataset& ds) {
  std::ostringstream text;
  market::write_dataset(text, ds);
  return sha256_hex(text.str());
}

EmbeddingCache::EmbeddingCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create cache directory " + directory_.string());
}

std::filesystem::path EmbeddingCache::path_for(const std::string& ticker, const EmbeddingConfig& cfg) const {
  const std::string key = std::string(to_string(cfg.kind())) + "|" + cfg.describe();
  return directory_ / (ticker + "-" + sha256_hex(key).substr(0, 16) + ".emb");
}

std::optional<EmbeddedDataset> EmbeddingCache::load(const market::WindowedDataset& ds,
                                                    const EmbeddingConfig& cfg) const {
  std::ifstream in(path_for(ds.ticker, cfg), std::ios::binary);
  if (!in) return std::nullopt;
  std::string key;
  std::string format, ticker, config, fingerprint;
  std::size_t rows = 0, cols = 0, split = 0;
  in >> key >> format >> key >> ticker >> key >> config >> key >> fingerprint >> key >> rows >> key >>
      cols >> key >> split;
  if (!in || format != "qrc-embedding-1" || ticker != ds.ticker ||
      config != std::string(to_string(cfg.kind())) + "|" + cfg.describe() ||
      fingerprint != dataset_fingerprint(ds) || rows != ds.windows.size() ||
      cols != cfg.output_dimension(ds.window_size) || split != ds.split_index) {
    return std::nullopt;
  }
  EmbeddedDataset out;
  out.ticker = ds.ticker;
  out.split_index = split;
  out.provenance = cfg;
  out.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t t = 0;
    int label = 0;
    in >> t >> label;
    for (std::size_t j = 0; j < cols; ++j) in >> out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (!in || t != ds.windows[i].t || label != ds.windows[i].label) return std::nullopt;
    out.times.push_back(t);
    out.labels.push_back(static_cast<std::uint8_t>(label));
  }
  return out;
}

void EmbeddingCache::store(const market::WindowedDataset& ds, const EmbeddedDataset& embedded) const {
  const auto path = path_for(ds.ticker, embedded.provenance);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIo, "cannot write embedding cache " + tmp);
    out << "format qrc-embedding-1\n";
    out << "ticker " << ds.ticker << '\n';
    out << "config " << to_string(embedded.provenance.kind()) << '|' << embedded.provenance.describe() << '\n';
    out << "dataset " << dataset_fingerprint(ds) << '\n';
    out << "rows " << embedded.rows() << '\n';
    out << "cols " << embedded.features.cols() << '\n';
    out << "split_index " << embedded.split_index << '\n';
    for (std::size_t i = 0; i < embedded.rows(); ++i) {
      out << embedded.times[i] << ' ' << static_cast<int>(embedded.labels[i]);
      for (Eigen::Index j = 0; j < embedded.features.cols(); ++j)
        out << ' ' << format_double(embedded.features(static_cast<Eigen::Index>(i), j));
      out << '\n';
    }
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot finalize embedding cache " + path.string());
}

EmbeddedDataset EmbeddingCache::get_or_compute(const market::WindowedDataset& ds,
                                               const EmbeddingConfig& cfg) const {
  if (auto cached = load(ds, cfg)) return std::move(*cached);
  EmbeddedDataset computed = embed_dataset(ds, cfg);
  store(ds, computed);
  return computed;
}

std::vector<EmbeddedDataset> EmbeddingCache::get_or_compute(const market::WindowedDataset& ds,
                                                            std::span<const EmbeddingConfig> cfgs) const {
  std::vector<EmbeddedDataset> out(cfgs.size());
  std::vector<EmbeddingConfig> missing;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    if (auto cached = load(ds, cfgs[i])) {
      out[i] = std::move(*cached);
    } else {
      missing.push_back(cfgs[i]);
      where.push_back(i);
    }
  }
  if (!missing.empty()) {
    auto computed = embed_dataset_group(ds, missing);
    for (std::size_t m = 0; m < computed.size(); ++m) {
      store(ds, computed[m]);
      out[where[m]] = std::move(computed[m]);
    }
  }
  return out;
}

}  // namespace qrc::embed
