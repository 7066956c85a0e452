#pragma once

#include "ovpath/linear_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace ovpath {

struct SvmOptions {
  double c = 1.0;
  double kkt_tolerance = 1e-3;        // maximal violating pair gap
  double relative_change = 1e-6;      // relative dual objective change between epochs
  std::int64_t max_epochs = 100000;   // one epoch = n pair updates
  std::uint64_t seed = 0;
};

struct SvmTrace {
  std::vector<double> dual_objective;   // per epoch, non-increasing
  std::vector<double> primal_objective;
  std::int64_t iterations = 0;
  double final_violation = 0.0;
};

/// Soft-margin linear SVM with unregularized bias,
///   min 1/2 ||w||^2 + C sum max(0, 1 - y_i (w . x_i + b)),
/// solved in the dual by SMO with second-order working-set selection. `x` is
/// expected to be standardized already; the returned model carries identity
/// standardization (callers attach their Standardizer).
LinearModel svm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvmOptions& options = {},
                      SvmTrace* trace = nullptr);

/// Standardizes raw features, trains, and stores the standardization in the model.
LinearModel svm_train_raw(const Eigen::MatrixXd& raw, const Eigen::VectorXd& y,
                          const std::vector<std::string>& names, const SvmOptions& options = {},
                          SvmTrace* trace = nullptr);

double svm_primal_objective(const LinearModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            double c);

}  // namespace ovpath
