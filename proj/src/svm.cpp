#include "ovpath/svm.hpp"

#include "ovpath/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ovpath {

namespace {

constexpr double kTau = 1e-12;

struct Smo {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  double c;
  Eigen::Index n;
  Eigen::VectorXd alpha;
  Eigen::VectorXd grad;  // Q alpha - e
  Eigen::VectorXd w;
  Eigen::VectorXd diag;  // K_tt

  Smo(const Eigen::MatrixXd& x_, const Eigen::VectorXd& y_, double c_)
      : x(x_), y(y_), c(c_), n(x_.rows()), alpha(Eigen::VectorXd::Zero(n)),
        grad(Eigen::VectorXd::Constant(n, -1.0)), w(Eigen::VectorXd::Zero(x_.cols())),
        diag(x_.rowwise().squaredNorm()) {}

  bool in_up(Eigen::Index t) const { return (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0); }
  bool in_low(Eigen::Index t) const { return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < c); }

  // Returns the violation gap; sets i, j to the selected pair (j < 0 if none).
  double select(Eigen::Index& i, Eigen::Index& j, Eigen::VectorXd& kernel_row) const {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad(t);
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t)) gmin = std::min(gmin, v);
    }
    j = -1;
    if (i < 0) return 0.0;
    const Eigen::VectorXd xi = x.row(i).transpose();
    kernel_row.noalias() = x * xi;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double b = gmax + y(t) * grad(t);
      if (b <= 0.0) continue;
      double a = diag(i) + diag(t) - 2.0 * kernel_row(t);
      if (a <= 0.0) a = kTau;
      const double score = -(b * b) / a;
      if (score < best) {
        best = score;
        j = t;
      }
    }
    return gmax - gmin;
  }

  void update(Eigen::Index i, Eigen::Index j, const Eigen::VectorXd& kernel_row) {
    const double old_i = alpha(i), old_j = alpha(j);
    const double kij = kernel_row(j);
    const double qij = y(i) * y(j) * kij;
    if (y(i) != y(j)) {
      double quad = diag(i) + diag(j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) {
          alpha(j) = 0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = c - diff;
        }
      } else if (alpha(j) > c) {
        alpha(j) = c;
        alpha(i) = c + diff;
      }
    } else {
      double quad = diag(i) + diag(j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = sum - c;
        }
      } else if (alpha(j) < 0) {
        alpha(j) = 0;
        alpha(i) = sum;
      }
      if (sum > c) {
        if (alpha(j) > c) {
          alpha(j) = c;
          alpha(i) = sum - c;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = sum;
      }
    }
    const double di = (alpha(i) - old_i) * y(i);
    const double dj = (alpha(j) - old_j) * y(j);
    if (di == 0.0 && dj == 0.0) return;
    Eigen::VectorXd dw = di * x.row(i).transpose() + dj * x.row(j).transpose();
    w += dw;
    grad.array() += y.array() * (x * dw).array();
  }

  double dual_objective() const { return 0.5 * w.squaredNorm() - alpha.sum(); }

  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    int free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double yg = y(t) * grad(t);
      if (alpha(t) >= c) {
        if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (alpha(t) <= 0) {
        if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++free;
        sum += yg;
      }
    }
    const double rho = free > 0 ? sum / free : 0.5 * (ub + lb);
    return -rho;
  }
};

}  // namespace

double svm_primal_objective(const LinearModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            double c) {
  const Eigen::VectorXd f = (x * model.weights).array() + model.bias;
  const double hinge = (1.0 - y.array() * f.array()).max(0.0).sum();
  return 0.5 * model.weights.squaredNorm() + c * hinge;
}

LinearModel svm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvmOptions& options,
                      SvmTrace* trace) {
  if (x.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "rows and labels differ");
  if (!(options.c > 0.0)) throw Error(ErrorKind::ConfigError, "SVM C must be positive");
  bool pos = false, neg = false;
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    if (y(t) > 0) pos = true; else if (y(t) < 0) neg = true;
    if (y(t) != 1.0 && y(t) != -1.0) throw Error(ErrorKind::ConfigError, "labels must be +1 / -1");
  }
  if (!pos || !neg) throw Error(ErrorKind::SingleClass, "SVM training needs both classes");

  Smo smo(x, y, options.c);
  const std::int64_t epoch_len = std::max<std::int64_t>(1, x.rows());
  const std::int64_t max_iter = options.max_epochs * epoch_len;
  Eigen::VectorXd kernel_row(x.rows());
  double prev_obj = smo.dual_objective();
  double violation = std::numeric_limits<double>::infinity();
  std::int64_t iter = 0;
  bool converged = false;
  if (trace) *trace = {};
  while (iter < max_iter) {
    Eigen::Index i, j;
    violation = smo.select(i, j, kernel_row);
    if (violation <= options.kkt_tolerance || j < 0) {
      converged = true;
      break;
    }
    smo.update(i, j, kernel_row);
    ++iter;
    if (iter % epoch_len == 0) {
      const double obj = smo.dual_objective();
      if (trace) {
        trace->dual_objective.push_back(obj);
        LinearModel tmp;
        tmp.weights = smo.w;
        tmp.bias = smo.bias();
        trace->primal_objective.push_back(svm_primal_objective(tmp, x, y, options.c));
      }
      if (std::abs(prev_obj - obj) <= options.relative_change * std::max(1.0, std::abs(obj))) {
        converged = true;
        break;
      }
      prev_obj = obj;
    }
  }
  if (!converged) {
    throw Error(ErrorKind::NoConvergence, "SMO did not reach the KKT tolerance within " +
                                              std::to_string(options.max_epochs) + " epochs");
  }

  LinearModel model;
  model.kind = ModelKind::Svm;
  model.weights = smo.w;
  model.bias = smo.bias();
  model.standardize_mean = Eigen::VectorXd::Zero(x.cols());
  model.standardize_std = Eigen::VectorXd::Ones(x.cols());
  model.hyperparams["C"] = options.c;
  model.seed = options.seed;
  for (Eigen::Index k = 0; k < x.cols(); ++k) model.feature_names.push_back("x" + std::to_string(k));
  if (trace) {
    trace->dual_objective.push_back(smo.dual_objective());
    trace->primal_objective.push_back(svm_primal_objective(model, x, y, options.c));
    trace->iterations = iter;
    trace->final_violation = violation;
  }
  return model;
}

LinearModel svm_train_raw(const Eigen::MatrixXd& raw, const Eigen::VectorXd& y,
                          const std::vector<std::string>& names, const SvmOptions& options,
                          SvmTrace* trace) {
  const Standardized s = standardize_fit_apply(raw);
  LinearModel m = svm_train(s.x, y, options, trace);
  m.set_standardizer(s.params);
  if (names.size() == static_cast<std::size_t>(raw.cols())) m.feature_names = names;
  return m;
}

}  // namespace ovpath
