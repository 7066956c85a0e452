#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ovpath {

/// Column-wise z-score parameters. Zero-variance columns carry the sentinel
/// std 1 and standardize to 0.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& x);  // population std; needs >= 2 rows
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

struct Standardized {
  Eigen::MatrixXd x;
  Standardizer params;
};

Standardized standardize_fit_apply(const Eigen::MatrixXd& x);

enum class ModelKind { Svm, Lasso };

struct LinearModel {
  std::vector<std::string> feature_names;
  Eigen::VectorXd standardize_mean;
  Eigen::VectorXd standardize_std;
  Eigen::VectorXd weights;
  double bias = 0.0;
  ModelKind kind = ModelKind::Svm;
  std::map<std::string, double> hyperparams;
  std::uint64_t seed = 0;

  Eigen::Index dimension() const { return weights.size(); }

  /// w . standardize(x) + b for a raw (unstandardized) feature vector.
  double decision(const Eigen::VectorXd& raw) const;
  Eigen::VectorXd decisions(const Eigen::MatrixXd& raw) const;
  /// decision / ||w|| (0 when w = 0)
  double distance(const Eigen::VectorXd& raw) const;

  void set_standardizer(const Standardizer& s);

  nlohmann::json to_json() const;
  static LinearModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static LinearModel load(const std::string& path);
};

}  // namespace ovpath
