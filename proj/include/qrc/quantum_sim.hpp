#pragma once

// Statevector simulation of Pauli-sum Hamiltonians.
//
// Qubit ordering: qubit q is bit q of the basis-state index, so qubit 0 is
// the least-significant bit. |b_{n-1} ... b_1 b_0> has index sum_q b_q 2^q.
// assemble_dense, the sparse apply path and measure_features all use this
// convention.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qrc::quantum {

using Complex = std::complex<double>;

/// Largest register the simulator accepts.
inline constexpr int kMaxQubits = 14;

enum class Pauli : char { I = 'I', X = 'X', Y = 'Y', Z = 'Z' };

/// One Pauli symbol per qubit; ops()[q] acts on qubit q.
class PauliString {
 public:
  PauliString() = default;
  explicit PauliString(std::vector<Pauli> ops);

  /// Parses "XIZ" style text; character q is the operator on qubit q.
  static PauliString parse(std::string_view text);
  static PauliString identity(int n);
  static PauliString single(int n, int qubit, Pauli op);
  static PauliString pair(int n, int q0, Pauli op0, int q1, Pauli op1);

  int num_qubits() const noexcept { return static_cast<int>(ops_.size()); }
  const std::vector<Pauli>& ops() const noexcept { return ops_; }
  bool is_identity() const noexcept;
  std::string to_string() const;

  // Bit masks of qubits carrying X/Y (flip) and Y/Z (phase) factors.
  std::uint64_t flip_mask() const noexcept;
  std::uint64_t phase_mask() const noexcept;
  int y_count() const noexcept;

  friend bool operator==(const PauliString&, const PauliString&) = default;

 private:
  std::vector<Pauli> ops_;
};

struct PauliTerm {
  double coefficient = 0.0;
  PauliString string;

  friend bool operator==(const PauliTerm&, const PauliTerm&) = default;
};

/// Real-weighted sum of Pauli strings on a fixed register. Every term is
/// Hermitian, so the sum is Hermitian. Zero coefficients are never stored.
class PauliSum {
 public:
  explicit PauliSum(int num_qubits);

  /// Appends a term. Throws on non-finite coefficients or width mismatch;
  /// silently drops coefficient zero.
  void add(double coefficient, PauliString string);

  int num_qubits() const noexcept { return num_qubits_; }
  const std::vector<PauliTerm>& terms() const noexcept { return terms_; }
  bool empty() const noexcept { return terms_.empty(); }

  /// Sum of |coefficient|; an upper bound on the spectral radius.
  double norm_bound() const noexcept;
  /// True when no term has an odd number of Y factors (real matrix).
  bool is_real() const noexcept;

  friend bool operator==(const PauliSum&, const PauliSum&) = default;

 private:
  int num_qubits_;
  std::vector<PauliTerm> terms_;
};

/// Pure state on n qubits. Construction only checks the dimension; the
/// normalization precondition is enforced by the operations that need it.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::vector<Complex> amplitudes);

  /// |0...0>.
  static StateVector zero(int n);
  static StateVector basis(int n, std::uint64_t index);
  /// Tensor product; factors[q] is the single-qubit state of qubit q.
  static StateVector product(std::span<const std::array<Complex, 2>> factors);

  int num_qubits() const noexcept { return num_qubits_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }
  const std::vector<Complex>& amplitudes() const noexcept { return amplitudes_; }
  Complex operator[](std::size_t i) const { return amplitudes_[i]; }

  double norm() const noexcept;

 private:
  int num_qubits_ = 0;
  std::vector<Complex> amplitudes_;
};

/// Expectations <Z_0>..<Z_{n-1}> followed by <Z_i Z_j> for i<j in
/// lexicographic (i, j) order.
class FeatureVector {
 public:
  FeatureVector(int num_qubits, std::vector<double> values);

  static std::size_t length_for(int num_qubits) noexcept {
    const auto n = static_cast<std::size_t>(num_qubits);
    return n + n * (n - 1) / 2;
  }
  /// Position of <Z_i Z_j> (i < j) inside values().
  static std::size_t pair_index(int num_qubits, int i, int j);

  int num_qubits() const noexcept { return num_qubits_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double z(int i) const { return values_[static_cast<std::size_t>(i)]; }
  double zz(int i, int j) const { return values_[pair_index(num_qubits_, i, j)]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  int num_qubits_;
  std::vector<double> values_;
};

struct Scalers {
  double a_x = 1.0;
  double a_z = 1.0;
  double a_zz = 0.5;

  friend bool operator==(const Scalers&, const Scalers&) = default;
};

enum class EvolutionMethod {
  /// Dense Hermitian eigendecomposition, H = V diag(l) V^dagger.
  kEigendecomposition,
  /// Chebyshev-Bessel expansion of exp(-iHt) applied with sparse Pauli
  /// products, truncated below double precision.
  kChebyshev,
};

std::string_view to_string(EvolutionMethod method);
EvolutionMethod parse_evolution_method(std::string_view text);

struct QuantumReservoirParams {
  Scalers scalers;
  double time = 1.0;
  EvolutionMethod method = EvolutionMethod::kChebyshev;

  friend bool operator==(const QuantumReservoirParams&,
                         const QuantumReservoirParams&) = default;
};

/// H = A_X sum_i X_i + A_Z sum_i x_i Z_i + A_ZZ sum_i (x_i + x_{i+1}) Z_i Z_{i+1}
/// with one qubit per window entry.
PauliSum build_hamiltonian(std::span<const double> window, const Scalers& scalers,
                           int num_qubits);

Eigen::MatrixXcd assemble_dense(const PauliSum& h);

/// out = H * in, without forming the matrix.
void apply(const PauliSum& h, std::span<const Complex> in, std::span<Complex> out);

/// exp(-iHt)|state>.
StateVector evolve(const StateVector& state, const PauliSum& h, double t,
                   EvolutionMethod method = EvolutionMethod::kEigendecomposition);

/// exp(-iHt)|state> for several times, sharing one eigendecomposition or one
/// Chebyshev recurrence. Result i belongs to times[i].
std::vector<StateVector> evolve_many(const StateVector& state, const PauliSum& h,
                                     std::span<const double> times,
                                     EvolutionMethod method = EvolutionMethod::kEigendecomposition);

FeatureVector measure_features(const StateVector& state);

/// build_hamiltonian -> evolve from |0...0> -> measure_features.
FeatureVector quantum_embed(std::span<const double> window,
                            const QuantumReservoirParams& params);

/// quantum_embed for one Hamiltonian at several evolution times.
std::vector<FeatureVector> quantum_embed_times(std::span<const double> window, const Scalers& scalers,
                                               std::span<const double> times,
                                               EvolutionMethod method = EvolutionMethod::kChebyshev);

}  // namespace qrc::quantum
