#include "qrc/readout.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qrc/error.hpp"
#include "qrc/hashing.hpp"

namespace qrc::readout {
namespace {

constexpr double kConstantFeature = 1e-12;
// Logit used by a degenerate single-class logistic model.
constexpr double kDegenerateLogit = 30.0;

double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

void check_rows(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y) {
  if (x.rows() == 0) throw Error(ErrorKind::kInsufficientData, "no training rows");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorKind::kInputShape, "feature rows and labels differ in length");
  for (auto label : y)
    if (label > 1) throw Error(ErrorKind::kInputShape, "labels must be 0 or 1");
}

// Returns the single class present in y, or -1 when both occur.
int single_class(std::span<const std::uint8_t> y) {
  const bool any_pos = std::any_of(y.begin(), y.end(), [](auto v) { return v == 1; });
  const bool any_neg = std::any_of(y.begin(), y.end(), [](auto v) { return v == 0; });
  if (any_pos && any_neg) return -1;
  return any_pos ? 1 : 0;
}

}  // namespace

std::string_view to_string(ReadoutKind kind) {
  switch (kind) {
    case ReadoutKind::kLogistic: return "logistic";
    case ReadoutKind::kRidge: return "ridge";
  }
  return "unknown";
}

ReadoutKind parse_readout_kind(std::string_view text) {
  if (text == "logistic") return ReadoutKind::kLogistic;
  if (text == "ridge") return ReadoutKind::kRidge;
  throw Error(ErrorKind::kConfig, "unknown readout kind '" + std::string(text) + "'");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  const auto d = x.cols();
  const double m = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale = Eigen::VectorXd::Ones(d);
  s.constant.assign(static_cast<std::size_t>(d), false);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt((x.col(j).array() - s.mean[j]).square().sum() / m);
    if (sd < kConstantFeature) {
      s.constant[static_cast<std::size_t>(j)] = true;
    } else {
      s.scale[j] = sd;
    }
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size())
    throw Error(ErrorKind::kInputShape, "feature dimension does not match the fitted standardizer");
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (constant[static_cast<std::size_t>(j)]) {
      z.col(j).setZero();
    } else {
      z.col(j) = (x.col(j).array() - mean[j]) / scale[j];
    }
  }
  return z;
}

Eigen::VectorXd LinearModel::scores(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != dimension())
    throw Error(ErrorKind::kInputShape, "feature dimension " + std::to_string(x.cols()) +
                                            " does not match model dimension " +
                                            std::to_string(dimension()));
  const Eigen::VectorXd margin = (standardizer.apply(x) * weights).array() + bias;
  if (kind == ReadoutKind::kRidge) return margin;
  return margin.unaryExpr([](double u) { return sigmoid(u); });
}

double LinearModel::decision_threshold() const { return kind == ReadoutKind::kLogistic ? 0.5 : 0.0; }

LogisticObjective logistic_objective(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                                     double l2, const Eigen::VectorXd& w, double b) {
  const auto m = x.rows();
  const Eigen::VectorXd margin = (x * w).array() + b;
  LogisticObjective out;
  out.gradient = Eigen::VectorXd::Zero(x.cols() + 1);
  Eigen::VectorXd residual(m);  // d loss_i / d margin_i
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    loss += softplus(-s * margin[i]);
    residual[i] = sigmoid(margin[i]) - y[static_cast<std::size_t>(i)];
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  out.loss = loss * inv_m + 0.5 * l2 * w.squaredNorm();
  out.gradient.head(x.cols()) = x.transpose() * residual * inv_m + l2 * w;
  out.gradient[x.cols()] = residual.sum() * inv_m;
  return out;
}

LinearModel fit_logistic(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y,
                         const LogisticOptions& options) {
  check_rows(x, y);
  if (!(options.l2 >= 0.0) || !std::isfinite(options.l2))
    throw Error(ErrorKind::kConfig, "logistic l2 must be a nonnegative finite number");
  LinearModel model;
  model.kind = ReadoutKind::kLogistic;
  model.regularization = options.l2;
  model.standardizer = Standardizer::fit(x);
  const Eigen::MatrixXd z = model.standardizer.apply(x);
  const auto d = z.cols();
  model.weights = Eigen::VectorXd::Zero(d);

  if (const int only = single_class(y); only >= 0) {
    model.bias = only ? kDegenerateLogit : -kDegenerateLogit;
    model.diagnostics.degenerate = true;
    model.diagnostics.converged = true;
    return model;
  }

  const double inv_m = 1.0 / static_cast<double>(z.rows());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  auto objective = [&](const Eigen::VectorXd& th) {
    return logistic_objective(z, y, options.l2, th.head(d), th[d]);
  };
  LogisticObjective current = objective(theta);
  auto& diag = model.diagnostics;
  diag.loss_history.push_back(current.loss);

  for (int iter = 0; iter < options.max_iter; ++iter) {
    diag.gradient_norm = current.gradient.norm();
    if (diag.gradient_norm < options.tol) {
      diag.converged = true;
      break;
    }
    // Hessian of the augmented system [z 1].
    const Eigen::VectorXd margin = (z * theta.head(d)).array() + theta[d];
    Eigen::VectorXd weight(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double p = sigmoid(margin[i]);
      weight[i] = p * (1.0 - p) * inv_m;
    }
    Eigen::MatrixXd hessian(d + 1, d + 1);
    hessian.topLeftCorner(d, d) = z.transpose() * weight.asDiagonal() * z;
    hessian.topRightCorner(d, 1) = z.transpose() * weight;
    hessian.bottomLeftCorner(1, d) = hessian.topRightCorner(d, 1).transpose();
    hessian(d, d) = weight.sum();
    hessian.topLeftCorner(d, d).diagonal().array() += options.l2;
    hessian.diagonal().array() += 1e-12;
    const Eigen::VectorXd direction = -hessian.ldlt().solve(current.gradient);

    const double slope = current.gradient.dot(direction);
    double step = 1.0;
    bool accepted = false;
    LogisticObjective trial;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      trial = objective(theta + step * direction);
      if (trial.loss <= current.loss + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    ++diag.iterations;
    if (!accepted) {
      // No representable decrease left along the Newton direction.
      diag.converged = diag.gradient_norm < std::sqrt(options.tol);
      break;
    }
    theta += step * direction;
    current = std::move(trial);
    diag.loss_history.push_back(current.loss);
  }
  diag.gradient_norm = current.gradient.norm();
  if (diag.gradient_norm < options.tol) diag.converged = true;
  model.weights = theta.head(d);
  for (std::size_t j = 0; j < model.standardizer.constant.size(); ++j)
    if (model.standardizer.constant[j]) model.weights[static_cast<Eigen::Index>(j)] = 0.0;
  model.bias = theta[d];
  return model;
}

Eigen::VectorXd solve_ridge_normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                             double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorKind::kConfig, "ridge alpha must be a positive finite number");
  if (x.rows() != y.size()) throw Error(ErrorKind::kInputShape, "rows and targets differ in length");
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += alpha;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::kInternal, "ridge system is not positive definite");
  return llt.solve(x.transpose() * y);
}

LinearModel fit_ridge(const Eigen::MatrixXd& x, std::span<const std::uint8_t> y, double alpha) {
  check_rows(x, y);
  LinearModel model;
  model.kind = ReadoutKind::kRidge;
  model.regularization = alpha;
  model.standardizer = Standardizer::fit(x);
  const Eigen::MatrixXd z = model.standardizer.apply(x);
  Eigen::VectorXd target(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) target[i] = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
  // Standardized columns have zero mean, so the unpenalized intercept is the
  // target mean and X^T (y - mean) = X^T y.
  model.weights = solve_ridge_normal_equations(z, target, alpha);
  model.bias = target.mean();
  model.diagnostics.degenerate = single_class(y) >= 0;
  model.diagnostics.converged = true;
  return model;
}

LinearModel fit_readout(const ReadoutSpec& spec, const Eigen::MatrixXd& x,
                        std::span<const std::uint8_t> y) {
  switch (spec.kind) {
    case ReadoutKind::kLogistic:
      return fit_logistic(x, y, {spec.regularization, spec.max_iter, spec.tol});
    case ReadoutKind::kRidge: return fit_ridge(x, y, spec.regularization);
  }
  throw Error(ErrorKind::kInternal, "unknown readout kind");
}

Eigen::VectorXd predict_scores(const LinearModel& model, const Eigen::MatrixXd& x) {
  return model.scores(x);
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0.0) return 0.0;

  double ap = 0.0;
  std::size_t seen = 0;
  std::size_t true_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t block_pos = 0;
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) block_pos += labels[order[j]];
    seen += j - i;
    true_pos += block_pos;
    if (block_pos > 0) {
      const double precision = static_cast<double>(true_pos) / static_cast<double>(seen);
      ap += (static_cast<double>(block_pos) / positives) * precision;
    }
    i = j;
  }
  return ap;
}

EvalResult evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                    double threshold) {
  if (scores.empty()) throw Error(ErrorKind::kEvaluation, "cannot evaluate an empty prediction set");
  if (scores.size() != labels.size())
    throw Error(ErrorKind::kEvaluation, "scores and labels differ in length");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw Error(ErrorKind::kEvaluation, "score is NaN");
    if (labels[i] > 1) throw Error(ErrorKind::kEvaluation, "labels must be 0 or 1");
  }
  EvalResult r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    if (labels[i]) {
      predicted ? ++r.tp : ++r.fn;
    } else {
      predicted ? ++r.fp : ++r.tn;
    }
  }
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(scores.size());
  r.ap_defined = r.tp + r.fn > 0;
  r.average_precision = average_precision(scores, labels);
  return r;
}

void write_model(std::ostream& out, const LinearModel& model) {
  out << "kind " << to_string(model.kind) << '\n';
  out << "regularization " << format_double(model.regularization) << '\n';
  out << "bias " << format_double(model.bias) << '\n';
  out << "dimension " << model.dimension() << '\n';
  for (Eigen::Index j = 0; j < model.weights.size(); ++j) {
    out << format_double(model.weights[j]) << ' ' << format_double(model.standardizer.mean[j]) << ' '
        << format_double(model.standardizer.scale[j]) << ' '
        << (model.standardizer.constant[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
  }
}

LinearModel read_model(std::istream& in) {
  LinearModel model;
  std::string key, kind;
  std::size_t dim = 0;
  in >> key >> kind;
  if (key != "kind") throw Error(ErrorKind::kIngestion, "model dump: expected 'kind'");
  model.kind = parse_readout_kind(kind);
  in >> key >> model.regularization;
  if (key != "regularization") throw Error(ErrorKind::kIngestion, "model dump: expected 'regularization'");
  in >> key >> model.bias;
  if (key != "bias") throw Error(ErrorKind::kIngestion, "model dump: expected 'bias'");
  in >> key >> dim;
  if (key != "dimension" || !in) throw Error(ErrorKind::kIngestion, "model dump: expected 'dimension'");
  const auto d = static_cast<Eigen::Index>(dim);
  model.weights.resize(d);
  model.standardizer.mean.resize(d);
  model.standardizer.scale.resize(d);
  model.standardizer.constant.assign(dim, false);
  for (Eigen::Index j = 0; j < d; ++j) {
    int constant = 0;
    in >> model.weights[j] >> model.standardizer.mean[j] >> model.standardizer.scale[j] >> constant;
    model.standardizer.constant[static_cast<std::size_t>(j)] = constant != 0;
  }
  if (!in) throw Error(ErrorKind::kIngestion, "model dump truncated");
  return model;
}

}  // namespace qrc::readout
