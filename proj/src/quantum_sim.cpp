#include "qrc/quantum_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <type_traits>

#include <Eigen/Eigenvalues>

#include "qrc/error.hpp"

namespace qrc::quantum {
namespace {

constexpr double kNormTolerance = 1e-6;

void require_normalized(const StateVector& state, const char* op) {
  const double deviation = std::abs(state.norm() - 1.0);
  if (!(deviation <= kNormTolerance)) {
    std::ostringstream msg;
    msg << op << ": state is not normalized (|norm - 1| = " << deviation << ")";
    throw Error(ErrorKind::kState, msg.str());
  }
}

void require_qubits(int n) {
  if (n < 1) throw Error(ErrorKind::kInputShape, "qubit count must be positive");
  if (n > kMaxQubits) {
    std::ostringstream msg;
    msg << "qubit count " << n << " exceeds the supported maximum of " << kMaxQubits;
    throw Error(ErrorKind::kResource, msg.str());
  }
}

// i^k for k in 0..3.
Complex i_power(int k) {
  switch (k & 3) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

// sign[b] = (-1)^{parity(b & mask)} for b < dim, built without popcount.
std::vector<double> parity_signs(std::uint64_t mask, std::size_t dim) {
  std::vector<double> sign(dim, 1.0);
  for (std::size_t b = 1; b < dim; ++b) {
    const std::size_t low = b & (~b + 1);
    sign[b] = (low & mask) ? -sign[b & (b - 1)] : sign[b & (b - 1)];
  }
  return sign;
}

// Hamiltonian split into its diagonal and bit-flipping parts for repeated
// matrix-vector products.
struct CompiledSum {
  struct FlipTerm {
    std::uint64_t flip;
    Complex factor;             // coefficient * i^{#Y}
    std::vector<double> sign;   // parity signs of the phase mask, empty if none
  };

  std::vector<double> diagonal;
  std::vector<FlipTerm> flips;
  bool real = true;

  explicit CompiledSum(const PauliSum& h) : real(h.is_real()) {
    const std::size_t dim = std::size_t{1} << h.num_qubits();
    diagonal.assign(dim, 0.0);
    for (const auto& term : h.terms()) {
      const std::uint64_t flip = term.string.flip_mask();
      const std::uint64_t phase = term.string.phase_mask();
      if (flip == 0) {
        // Only I and Z factors: real diagonal.
        const auto sign = parity_signs(phase, dim);
        for (std::size_t b = 0; b < dim; ++b) diagonal[b] += term.coefficient * sign[b];
      } else {
        flips.push_back({flip, term.coefficient * i_power(term.string.y_count()),
                         phase ? parity_signs(phase, dim) : std::vector<double>{}});
      }
    }
  }

  // out = scale * H * in. T is double only when the matrix is real.
  template <class T>
  void apply(std::span<const T> in, std::span<T> out, double scale) const {
    const std::size_t dim = diagonal.size();
    for (std::size_t b = 0; b < dim; ++b) out[b] = (scale * diagonal[b]) * in[b];
    for (const auto& term : flips) {
      T f;
      if constexpr (std::is_same_v<T, double>) {
        f = scale * term.factor.real();
      } else {
        f = scale * term.factor;
      }
      // P|b> = factor * sign(b) |b ^ flip>
      if (!term.sign.empty()) {
        for (std::size_t b = 0; b < dim; ++b) out[b ^ term.flip] += (f * term.sign[b]) * in[b];
      } else if (std::has_single_bit(term.flip)) {
        const std::size_t m = term.flip;
        for (std::size_t base = 0; base < dim; base += 2 * m) {
          T* lo = out.data() + base;
          T* hi = lo + m;
          const T* in_lo = in.data() + base;
          const T* in_hi = in_lo + m;
          for (std::size_t j = 0; j < m; ++j) {
            lo[j] += f * in_hi[j];
            hi[j] += f * in_lo[j];
          }
        }
      } else {
        for (std::size_t b = 0; b < dim; ++b) out[b ^ term.flip] += f * in[b];
      }
    }
  }
};

// J_0(z) ... J_{m}(z) for z > 0 by Miller's downward recurrence, normalized
// with J_0 + 2 sum_k J_{2k} = 1.
std::vector<double> bessel_j_sequence(double z, int m) {
  int start = m + 20 + static_cast<int>(std::sqrt(40.0 * (m + 1)));
  if (start % 2) ++start;
  std::vector<double> j(static_cast<std::size_t>(start) + 2, 0.0);
  j[static_cast<std::size_t>(start)] = 1e-300;
  for (int k = start; k >= 1; --k) {
    const auto ku = static_cast<std::size_t>(k);
    j[ku - 1] = (2.0 * k / z) * j[ku] - j[ku + 1];
    if (std::abs(j[ku - 1]) > 1e250) {
      for (std::size_t r = ku - 1; r < j.size(); ++r) j[r] *= 1e-250;
    }
  }
  double norm = j[0];
  for (std::size_t k = 2; k < j.size(); k += 2) norm += 2.0 * j[k];
  for (auto& v : j) v /= norm;
  j.resize(static_cast<std::size_t>(m) + 1);
  return j;
}

std::vector<StateVector> evolve_eigen_many(const StateVector& state, const PauliSum& h,
                                           std::span<const double> times) {
  const auto dim = static_cast<Eigen::Index>(state.dimension());
  const Eigen::Map<const Eigen::VectorXcd> psi(state.amplitudes().data(), dim);
  const Eigen::MatrixXcd dense = assemble_dense(h);

  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXcd vectors;
  if (h.is_real()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense.real());
    if (solver.info() != Eigen::Success)
      throw Error(ErrorKind::kInternal, "eigendecomposition did not converge");
    eigenvalues = solver.eigenvalues();
    vectors = solver.eigenvectors().cast<Complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense);
    if (solver.info() != Eigen::Success)
      throw Error(ErrorKind::kInternal, "eigendecomposition did not converge");
    eigenvalues = solver.eigenvalues();
    vectors = solver.eigenvectors();
  }
  const Eigen::VectorXcd coeffs = vectors.adjoint() * psi;
  std::vector<StateVector> out;
  out.reserve(times.size());
  for (double t : times) {
    Eigen::VectorXcd phased = coeffs;
    for (Eigen::Index k = 0; k < dim; ++k) phased[k] *= std::polar(1.0, -eigenvalues[k] * t);
    const Eigen::VectorXcd evolved = vectors * phased;
    out.emplace_back(std::vector<Complex>(evolved.data(), evolved.data() + dim));
  }
  return out;
}

// Runs v_0 = start, v_1 = x v_0, v_{k+1} = 2 x v_k - v_{k-1} with
// x = scale * H and calls visit(k, v_k) for k = 0..order.
template <class T, class Visit>
void chebyshev_recurrence(const CompiledSum& compiled, double scale, std::vector<T> start, int order,
                          Visit&& visit) {
  const std::size_t dim = start.size();
  std::vector<T> prev = std::move(start);
  std::vector<T> curr(dim);
  std::vector<T> next(dim);
  visit(0, prev);
  if (order < 1) return;
  compiled.apply<T>(prev, curr, scale);
  visit(1, curr);
  for (int k = 2; k <= order; ++k) {
    compiled.apply<T>(curr, next, 2.0 * scale);
    for (std::size_t b = 0; b < dim; ++b) next[b] -= prev[b];
    visit(k, next);
    std::swap(prev, curr);
    std::swap(curr, next);
  }
}

std::vector<StateVector> evolve_chebyshev_many(const StateVector& state, const PauliSum& h,
                                               std::span<const double> times) {
  const double bound = h.norm_bound();
  const std::size_t dim = state.dimension();

  // exp(-i s z x) = J_0(z) + 2 sum_k (-i s)^k J_k(z) T_k(x),  x = H / bound,
  // with z = bound |t| and s the sign of t. J_k(z) falls off faster than
  // geometrically once k > z.
  struct Series {
    std::vector<Complex> coeff;  // expansion coefficient per order
    bool trivial = false;
  };
  std::vector<Series> series(times.size());
  int order = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double z = bound * std::abs(times[i]);
    if (z == 0.0) {
      series[i].trivial = true;
      continue;
    }
    const int cap = static_cast<int>(std::ceil(z + 12.0 * std::cbrt(z) + 40.0));
    const std::vector<double> bessel = bessel_j_sequence(z, cap);
    int k_max = cap;
    while (k_max > 0 && std::abs(bessel[static_cast<std::size_t>(k_max)]) < 1e-18) --k_max;
    const Complex step = times[i] >= 0.0 ? Complex(0.0, -1.0) : Complex(0.0, 1.0);
    Complex phase = 1.0;
    series[i].coeff.resize(static_cast<std::size_t>(k_max) + 1);
    for (int k = 0; k <= k_max; ++k) {
      series[i].coeff[static_cast<std::size_t>(k)] = (k == 0 ? 1.0 : 2.0) * bessel[static_cast<std::size_t>(k)] * phase;
      phase *= step;
    }
    order = std::max(order, k_max);
  }

  std::vector<std::vector<Complex>> results(times.size(), std::vector<Complex>(dim, Complex{0.0, 0.0}));
  const CompiledSum compiled(h);
  const double scale = bound > 0.0 ? 1.0 / bound : 0.0;
  const bool any_work = std::any_of(series.begin(), series.end(), [](const Series& s) { return !s.trivial; });

  if (any_work && compiled.real) {
    // Real H maps real vectors to real vectors: run the real and imaginary
    // parts of the state through separate real recurrences.
    std::vector<double> re(dim), im(dim);
    bool has_imag = false;
    for (std::size_t b = 0; b < dim; ++b) {
      re[b] = state[b].real();
      im[b] = state[b].imag();
      has_imag = has_imag || im[b] != 0.0;
    }
    auto accumulate = [&](bool imaginary_part) {
      return [&, imaginary_part](int k, const std::vector<double>& v) {
        for (std::size_t i = 0; i < series.size(); ++i) {
          const auto& c = series[i].coeff;
          if (series[i].trivial || static_cast<std::size_t>(k) >= c.size()) continue;
          const Complex a = imaginary_part ? Complex(0.0, 1.0) * c[static_cast<std::size_t>(k)]
                                           : c[static_cast<std::size_t>(k)];
          auto& out = results[i];
          for (std::size_t b = 0; b < dim; ++b) out[b] += a * v[b];
        }
      };
    };
    chebyshev_recurrence<double>(compiled, scale, std::move(re), order, accumulate(false));
    if (has_imag) chebyshev_recurrence<double>(compiled, scale, std::move(im), order, accumulate(true));
  } else if (any_work) {
    chebyshev_recurrence<Complex>(compiled, scale, state.amplitudes(), order,
                                  [&](int k, const std::vector<Complex>& v) {
                                    for (std::size_t i = 0; i < series.size(); ++i) {
                                      const auto& c = series[i].coeff;
                                      if (series[i].trivial || static_cast<std::size_t>(k) >= c.size()) continue;
                                      const Complex a = c[static_cast<std::size_t>(k)];
                                      auto& out = results[i];
                                      for (std::size_t b = 0; b < dim; ++b) out[b] += a * v[b];
                                    }
                                  });
  }

  std::vector<StateVector> out;
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    out.push_back(series[i].trivial ? state : StateVector(std::move(results[i])));
  }
  return out;
}

}  // namespace

// PauliString ----------------------------------------------------------------

PauliString::PauliString(std::vector<Pauli> ops) : ops_(std::move(ops)) {
  if (ops_.empty()) throw Error(ErrorKind::kInputShape, "Pauli string must cover at least one qubit");
  require_qubits(num_qubits());
}

PauliString PauliString::parse(std::string_view text) {
  std::vector<Pauli> ops;
  ops.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case 'I': ops.push_back(Pauli::I); break;
      case 'X': ops.push_back(Pauli::X); break;
      case 'Y': ops.push_back(Pauli::Y); break;
      case 'Z': ops.push_back(Pauli::Z); break;
      default:
        throw Error(ErrorKind::kInputShape,
                    std::string("invalid Pauli symbol '") + c + "'");
    }
  }
  return PauliString(std::move(ops));
}

PauliString PauliString::identity(int n) {
  require_qubits(n);
  return PauliString(std::vector<Pauli>(static_cast<std::size_t>(n), Pauli::I));
}

PauliString PauliString::single(int n, int qubit, Pauli op) {
  require_qubits(n);
  if (qubit < 0 || qubit >= n) throw Error(ErrorKind::kInputShape, "qubit index out of range");
  std::vector<Pauli> ops(static_cast<std::size_t>(n), Pauli::I);
  ops[static_cast<std::size_t>(qubit)] = op;
  return PauliString(std::move(ops));
}

PauliString PauliString::pair(int n, int q0, Pauli op0, int q1, Pauli op1) {
  if (q0 == q1) throw Error(ErrorKind::kInputShape, "pair term needs two distinct qubits");
  PauliString s = single(n, q0, op0);
  if (q1 < 0 || q1 >= n) throw Error(ErrorKind::kInputShape, "qubit index out of range");
  s.ops_[static_cast<std::size_t>(q1)] = op1;
  return s;
}

bool PauliString::is_identity() const noexcept {
  return std::all_of(ops_.begin(), ops_.end(), [](Pauli p) { return p == Pauli::I; });
}

std::string PauliString::to_string() const {
  std::string s;
  s.reserve(ops_.size());
  for (Pauli p : ops_) s.push_back(static_cast<char>(p));
  return s;
}

std::uint64_t PauliString::flip_mask() const noexcept {
  std::uint64_t mask = 0;
  for (std::size_t q = 0; q < ops_.size(); ++q)
    if (ops_[q] == Pauli::X || ops_[q] == Pauli::Y) mask |= std::uint64_t{1} << q;
  return mask;
}

std::uint64_t PauliString::phase_mask() const noexcept {
  std::uint64_t mask = 0;
  for (std::size_t q = 0; q < ops_.size(); ++q)
    if (ops_[q] == Pauli::Z || ops_[q] == Pauli::Y) mask |= std::uint64_t{1} << q;
  return mask;
}

int PauliString::y_count() const noexcept {
  return static_cast<int>(std::count(ops_.begin(), ops_.end(), Pauli::Y));
}

// PauliSum -------------------------------------------------------------------

PauliSum::PauliSum(int num_qubits) : num_qubits_(num_qubits) { require_qubits(num_qubits); }

void PauliSum::add(double coefficient, PauliString string) {
  if (!std::isfinite(coefficient))
    throw Error(ErrorKind::kInputShape, "Hamiltonian coefficient is not finite");
  if (string.num_qubits() != num_qubits_)
    throw Error(ErrorKind::kInputShape, "Pauli string width does not match the register");
  if (coefficient == 0.0) return;
  terms_.push_back({coefficient, std::move(string)});
}

double PauliSum::norm_bound() const noexcept {
  double total = 0.0;
  for (const auto& term : terms_) total += std::abs(term.coefficient);
  return total;
}

bool PauliSum::is_real() const noexcept {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const PauliTerm& t) { return t.string.y_count() % 2 == 0; });
}

// StateVector ----------------------------------------------------------------

StateVector::StateVector(std::vector<Complex> amplitudes) : amplitudes_(std::move(amplitudes)) {
  const std::size_t dim = amplitudes_.size();
  if (dim < 2 || !std::has_single_bit(dim))
    throw Error(ErrorKind::kInputShape, "statevector length must be a power of two >= 2");
  num_qubits_ = std::countr_zero(dim);
  require_qubits(num_qubits_);
}

StateVector StateVector::zero(int n) { return basis(n, 0); }

StateVector StateVector::basis(int n, std::uint64_t index) {
  require_qubits(n);
  const std::size_t dim = std::size_t{1} << n;
  if (index >= dim) throw Error(ErrorKind::kInputShape, "basis index out of range");
  std::vector<Complex> amps(dim, Complex{0.0, 0.0});
  amps[index] = 1.0;
  return StateVector(std::move(amps));
}

StateVector StateVector::product(std::span<const std::array<Complex, 2>> factors) {
  const int n = static_cast<int>(factors.size());
  require_qubits(n);
  const std::size_t dim = std::size_t{1} << n;
  std::vector<Complex> amps(dim, Complex{1.0, 0.0});
  for (std::size_t b = 0; b < dim; ++b)
    for (int q = 0; q < n; ++q) amps[b] *= factors[static_cast<std::size_t>(q)][(b >> q) & 1];
  return StateVector(std::move(amps));
}

double StateVector::norm() const noexcept {
  double total = 0.0;
  for (const auto& a : amplitudes_) total += std::norm(a);
  return std::sqrt(total);
}

// FeatureVector --------------------------------------------------------------

FeatureVector::FeatureVector(int num_qubits, std::vector<double> values)
    : num_qubits_(num_qubits), values_(std::move(values)) {
  if (values_.size() != length_for(num_qubits_))
    throw Error(ErrorKind::kInputShape, "feature vector length does not match qubit count");
}

std::size_t FeatureVector::pair_index(int num_qubits, int i, int j) {
  if (!(0 <= i && i < j && j < num_qubits))
    throw Error(ErrorKind::kInputShape, "pair index requires 0 <= i < j < n");
  const auto n = static_cast<std::size_t>(num_qubits);
  const auto iu = static_cast<std::size_t>(i);
  const auto ju = static_cast<std::size_t>(j);
  // Pairs (0,1)..(0,n-1), (1,2).. precede (i, j).
  const std::size_t before = iu * n - iu * (iu + 1) / 2;
  return n + before + (ju - iu - 1);
}

// Operations -----------------------------------------------------------------

std::string_view to_string(EvolutionMethod method) {
  switch (method) {
    case EvolutionMethod::kEigendecomposition: return "eigendecomposition";
    case EvolutionMethod::kChebyshev: return "chebyshev";
  }
  return "unknown";
}

EvolutionMethod parse_evolution_method(std::string_view text) {
  if (text == "eigendecomposition") return EvolutionMethod::kEigendecomposition;
  if (text == "chebyshev") return EvolutionMethod::kChebyshev;
  throw Error(ErrorKind::kConfig, "unknown evolution method '" + std::string(text) + "'");
}

PauliSum build_hamiltonian(std::span<const double> window, const Scalers& scalers,
                           int num_qubits) {
  if (window.size() != static_cast<std::size_t>(num_qubits)) {
    std::ostringstream msg;
    msg << "window length " << window.size() << " does not match qubit count " << num_qubits;
    throw Error(ErrorKind::kInputShape, msg.str());
  }
  if (!std::isfinite(scalers.a_x) || !std::isfinite(scalers.a_z) || !std::isfinite(scalers.a_zz))
    throw Error(ErrorKind::kInputShape, "Hamiltonian scalers must be finite");

  PauliSum h(num_qubits);
  for (int i = 0; i < num_qubits; ++i) h.add(scalers.a_x, PauliString::single(num_qubits, i, Pauli::X));
  for (int i = 0; i < num_qubits; ++i) {
    const double x = window[static_cast<std::size_t>(i)];
    h.add(scalers.a_z * x, PauliString::single(num_qubits, i, Pauli::Z));
  }
  for (int i = 0; i + 1 < num_qubits; ++i) {
    const double x = window[static_cast<std::size_t>(i)] + window[static_cast<std::size_t>(i) + 1];
    h.add(scalers.a_zz * x, PauliString::pair(num_qubits, i, Pauli::Z, i + 1, Pauli::Z));
  }
  return h;
}

Eigen::MatrixXcd assemble_dense(const PauliSum& h) {
  require_qubits(h.num_qubits());
  const auto dim = Eigen::Index{1} << h.num_qubits();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& term : h.terms()) {
    const std::uint64_t flip = term.string.flip_mask();
    const std::uint64_t phase = term.string.phase_mask();
    const Complex factor = term.coefficient * i_power(term.string.y_count());
    for (Eigen::Index col = 0; col < dim; ++col) {
      const auto c = static_cast<std::uint64_t>(col);
      const auto row = static_cast<Eigen::Index>(c ^ flip);
      m(row, col) += (std::popcount(c & phase) & 1) ? -factor : factor;
    }
  }
  return m;
}

void apply(const PauliSum& h, std::span<const Complex> in, std::span<Complex> out) {
  const std::size_t dim = std::size_t{1} << h.num_qubits();
  if (in.size() != dim || out.size() != dim)
    throw Error(ErrorKind::kInputShape, "vector length does not match the Hamiltonian");
  CompiledSum(h).apply(in, out, 1.0);
}

std::vector<StateVector> evolve_many(const StateVector& state, const PauliSum& h,
                                     std::span<const double> times, EvolutionMethod method) {
  if (state.num_qubits() != h.num_qubits())
    throw Error(ErrorKind::kInputShape, "state and Hamiltonian act on different registers");
  for (double t : times)
    if (!std::isfinite(t)) throw Error(ErrorKind::kInputShape, "evolution time must be finite");
  require_normalized(state, "evolve");
  if (h.empty()) return std::vector<StateVector>(times.size(), state);
  switch (method) {
    case EvolutionMethod::kEigendecomposition: return evolve_eigen_many(state, h, times);
    case EvolutionMethod::kChebyshev: return evolve_chebyshev_many(state, h, times);
  }
  throw Error(ErrorKind::kInternal, "unknown evolution method");
}

StateVector evolve(const StateVector& state, const PauliSum& h, double t, EvolutionMethod method) {
  if (t == 0.0 && std::isfinite(t)) {
    require_normalized(state, "evolve");
    return state;
  }
  const double times[] = {t};
  return std::move(evolve_many(state, h, times, method).front());
}

FeatureVector measure_features(const StateVector& state) {
  require_normalized(state, "measure_features");
  const int n = state.num_qubits();
  const std::size_t dim = state.dimension();
  std::vector<double> probs(dim);
  for (std::size_t b = 0; b < dim; ++b) probs[b] = std::norm(state[b]);

  // Sign-weighted probabilities q_i(b) = (-1)^{b_i} p_b; then
  // <Z_i> = sum_b q_i(b) and <Z_i Z_j> = sum_b (-1)^{b_j} q_i(b).
  std::vector<double> signs(static_cast<std::size_t>(n) * dim);
  for (int i = 0; i < n; ++i) {
    double* s = signs.data() + static_cast<std::size_t>(i) * dim;
    for (std::size_t b = 0; b < dim; ++b) s[b] = ((b >> i) & 1) ? -1.0 : 1.0;
  }
  std::vector<double> q(dim);
  std::vector<double> values(FeatureVector::length_for(n), 0.0);
  std::size_t k = static_cast<std::size_t>(n);
  for (int i = 0; i < n; ++i) {
    const double* si = signs.data() + static_cast<std::size_t>(i) * dim;
    double acc = 0.0;
    for (std::size_t b = 0; b < dim; ++b) {
      q[b] = si[b] * probs[b];
      acc += q[b];
    }
    values[static_cast<std::size_t>(i)] = acc;
    for (int j = i + 1; j < n; ++j, ++k) {
      const double* sj = signs.data() + static_cast<std::size_t>(j) * dim;
      double pair = 0.0;
      for (std::size_t b = 0; b < dim; ++b) pair += sj[b] * q[b];
      values[k] = pair;
    }
  }
  // Rounding can push a parity sum a hair outside [-1, 1].
  for (auto& v : values) v = std::clamp(v, -1.0, 1.0);
  return FeatureVector(n, std::move(values));
}

FeatureVector quantum_embed(std::span<const double> window, const QuantumReservoirParams& params) {
  const int n = static_cast<int>(window.size());
  require_qubits(n);
  const PauliSum h = build_hamiltonian(window, params.scalers, n);
  const StateVector evolved = evolve(StateVector::zero(n), h, params.time, params.method);
  return measure_features(evolved);
}

std::vector<FeatureVector> quantum_embed_times(std::span<const double> window, const Scalers& scalers,
                                               std::span<const double> times, EvolutionMethod method) {
  const int n = static_cast<int>(window.size());
  require_qubits(n);
  const PauliSum h = build_hamiltonian(window, scalers, n);
  const auto states = evolve_many(StateVector::zero(n), h, times, method);
  std::vector<FeatureVector> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(measure_features(s));
  return out;
}

}  // namespace qrc::quantum
