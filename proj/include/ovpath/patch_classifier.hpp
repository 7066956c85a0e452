#pragma once

#include "ovpath/labels.hpp"
#include "ovpath/linear_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ovpath {

// ---------------------------------------------------------------- ROC / AUC

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // predict positive when decision >= threshold
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0, 0), ends at (1, 1)
  double auc = 0.0;
};

/// Thresholds at every distinct decision value; trapezoidal AUC. Labels are
/// +1 / -1.
RocCurve roc_auc(const Eigen::VectorXd& decisions, const Eigen::VectorXd& labels);

std::string roc_csv(const RocCurve& roc);

// ---------------------------------------------------------------- histograms

struct DecisionHistogram {
  std::vector<double> edges;                 // bins + 1
  std::vector<std::int64_t> hgsoc, sbot;     // per bin
};

/// Uniform bins over the observed range of all decisions.
DecisionHistogram decision_histogram(const Eigen::VectorXd& decisions, const Eigen::VectorXd& labels, int bins = 50);
std::string histogram_csv(const DecisionHistogram& h);

// ---------------------------------------------------------------- LASSO

struct LassoOptions {
  double tolerance = 1e-7;           // max coefficient change over a full sweep
  std::int64_t max_sweeps = 100000;
};

struct LassoFit {
  LinearModel model;                                   // kind = lasso
  double lambda = 0.0;
  std::vector<std::pair<std::string, double>> nonzero; // |beta_j| > 0
  std::vector<std::pair<double, int>> path;            // (lambda, nonzero count)
  std::int64_t sweeps = 0;
};

/// lambda_max = max_j |x_j . (y - mean y)| / n.
double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Minimises (1/2n)||y - b0 - X beta||^2 + lambda ||beta||_1 by cyclic
/// coordinate descent with soft-thresholding; b0 = mean(y). `x` must be
/// column-centred (standardized). `warm` seeds the coefficients.
LassoFit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                   const LassoOptions& options = {}, const Eigen::VectorXd* warm = nullptr);

/// Max violation of the optimality conditions for a fit on (x, y).
double lasso_kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                           double lambda);

struct LassoPathSpec {
  int n_lambda = 100;
  double min_ratio = 1e-3;
  int folds = 5;
  std::uint64_t seed = 0;
  double max_dev_ratio = 0.999;  // the path stops once a fit explains this share of the deviance
};

std::vector<double> lambda_path(double lambda_max, const LassoPathSpec& spec);

struct LassoSelection {
  LassoFit fit;                      // refit on all rows at the chosen lambda
  std::vector<double> lambdas;
  std::vector<double> cv_mean;
  std::vector<double> cv_se;
  int index_min = 0;
  int index_1se = 0;
};

/// Standardizes raw features, cross-validates the path (folds grouped by
/// `groups` when given, else by row), and picks the largest lambda within one
/// standard error of the minimum. The path is truncated where the full-data or
/// any fold fit saturates (see LassoPathSpec::max_dev_ratio) or first fails to
/// converge within the sweep limit.
LassoSelection lasso_select(const Eigen::MatrixXd& raw, const Eigen::VectorXd& y,
                            const std::vector<std::string>& names, const LassoPathSpec& spec = {},
                            const std::vector<std::string>* groups = nullptr, const LassoOptions& options = {});

/// Columns No.,Content,Cellular Feature Name,Statistics,Importance; rows by
/// descending |coefficient|.
std::string lasso_table_csv(const LassoFit& fit);

// ---------------------------------------------------------------- subjects

struct SubjectCall {
  std::string subject_id;
  int n_patches = 0;
  std::vector<double> replicate_means;
  double fraction_positive = 0.0;
  double median = 0.0;
  Histotype predicted = Histotype::SBOT;
  std::uint64_t seed = 0;
};

/// B bootstrap replicates of the mean patch decision; each replicate draws
/// from its own stream derived from (seed, subject, replicate index).
SubjectCall subject_bootstrap(const std::string& subject_id, const std::vector<double>& decisions, int replicates,
                              std::uint64_t seed);

}  // namespace ovpath
