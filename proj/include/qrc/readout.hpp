#pragma once

// Linear readouts trained on embedded windows, plus accuracy and average
// precision.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qrc::readout {

enum class ReadoutKind { kLogistic, kRidge };

std::string_view to_string(ReadoutKind kind);
ReadoutKind parse_readout_kind(std::string_view text);

/// Per-feature affine map fitted on training rows. Features whose training
/// standard deviation is below 1e-12 are flagged constant and map to 0.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population standard deviation, 1 for constant features
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct FitDiagnostics {
  int iterations = 0;
  bool converged = false;
  /// Single-class training data; the model predicts that class everywhere.
  bool degenerate = false;
  double gradient_norm = 0.0;
  std::vector<double> loss_history;  // logistic objective per iterate
};

/// Anything that turns feature rows into scores with a decision threshold.
/// Alternative readout families plug in here.
class ScoringModel {
 public:
  virtual ~ScoringModel() = default;
  virtual Eigen::VectorXd scores(const Eigen::MatrixXd& x) const = 0;
  virtual double decision_threshold() const = 0;
};

class LinearModel final : public ScoringModel {
 public:
  ReadoutKind kind = ReadoutKind::kLogistic;
  double regularization = 0.0;  // l2 for logistic, alpha for ridge
  Eigen::VectorXd weights;      // in standardized feature space
  double bias = 0.0;
  Standardizer standardizer;
  FitDiagnostics diagnostics;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(weights.size()); }
  Eigen::VectorXd scores(const Eigen::MatrixXd& x) const override;
  /// 0.5 for logistic probabilities, 0 for ridge margins.
  double decision_threshold() const override;
};

struct LogisticOptions {
  double l2 = 1e-2;
  int max_iter = 100;
  double tol = 1e-8;
};

/// Objective value and gradient of
///   mean_i log(1 + exp(-s_i (w.x_i + b))) + (l2 / 2) |w|^2,  s_i = 2 y_i - 1
/// at (w, b). The gradient's last entry is d/db.
struct LogisticObjective {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};
LogisticObjective logistic_objective(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                                     double l2, const Eigen::VectorXd& w, double b);

/// Damped Newton with backtracking from w = 0 on standardized features.
LinearModel fit_logistic(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                         const LogisticOptions& options = {});

/// Solves (X^T X + alpha I) w = X^T y by Cholesky.
Eigen::VectorXd solve_ridge_normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                             double alpha);

/// Ridge classifier: labels mapped to -1/+1, features standardized,
/// intercept = mean target.
LinearModel fit_ridge(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, double alpha);

struct ReadoutSpec {
  ReadoutKind kind = ReadoutKind::kLogistic;
  double regularization = 1e-2;
  int max_iter = 100;
  double tol = 1e-8;

  friend bool operator==(const ReadoutSpec&, const ReadoutSpec&) = default;
};

LinearModel fit_readout(const ReadoutSpec& spec, const Eigen::MatrixXd& x,
                        std::span<const std::uint8_t> y);

Eigen::VectorXd predict_scores(const LinearModel& model, const Eigen::MatrixXd& x);

struct EvalResult {
  double accuracy = 0.0;
  double average_precision = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  /// False when the labels contain no positives; average_precision is then 0.
  bool ap_defined = true;
};

/// Predicts 1 iff score > threshold. Average precision is the step-wise sum
/// over the descending score ranking, with tied scores treated as one block.
EvalResult evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                    double threshold);
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Model dump: line-oriented text.
//   kind <logistic|ridge>
//   regularization <x>
//   bias <x>
//   dimension <d>
//   then d lines: weight mean scale constant(0/1)
void write_model(std::ostream& out, const LinearModel& model);
LinearModel read_model(std::istream& in);

}  // namespace qrc::readout
