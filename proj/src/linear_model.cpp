#include "ovpath/linear_model.hpp"

#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"

#include <json.hpp>

#include <cmath>

namespace ovpath {

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw Error(ErrorKind::TooFewRows, "standardization needs at least 2 rows");
  Standardizer s;
  const double n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.std.resize(x.cols());
  s.constant.assign(x.cols(), false);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))))) {
      s.std(j) = 1.0;
      s.constant[j] = true;
    } else {
      s.std(j) = sd;
    }
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw Error(ErrorKind::DimensionMismatch, "standardizer width");
  Eigen::MatrixXd out = (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (constant[j]) out.col(j).setZero();
  return out;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) throw Error(ErrorKind::DimensionMismatch, "standardizer width");
  Eigen::VectorXd out = (x - mean).cwiseQuotient(std);
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (constant[j]) out(j) = 0.0;
  return out;
}

Standardized standardize_fit_apply(const Eigen::MatrixXd& x) {
  Standardized s;
  s.params = Standardizer::fit(x);
  s.x = s.params.apply(x);
  return s;
}

void LinearModel::set_standardizer(const Standardizer& s) {
  standardize_mean = s.mean;
  standardize_std = s.std;
}

double LinearModel::decision(const Eigen::VectorXd& raw) const {
  if (raw.size() != weights.size()) {
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(weights.size()) +
                                                  " features, got " + std::to_string(raw.size()));
  }
  return weights.dot((raw - standardize_mean).cwiseQuotient(standardize_std)) + bias;
}

Eigen::VectorXd LinearModel::decisions(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != weights.size()) throw Error(ErrorKind::DimensionMismatch, "feature count");
  const Eigen::VectorXd scaled = weights.cwiseQuotient(standardize_std);
  return (raw * scaled).array() + (bias - scaled.dot(standardize_mean));
}

double LinearModel::distance(const Eigen::VectorXd& raw) const {
  const double n = weights.norm();
  return n > 0.0 ? decision(raw) / n : 0.0;
}

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

nlohmann::json LinearModel::to_json() const {
  return {{"kind", kind == ModelKind::Svm ? "svm" : "lasso"},
          {"feature_names", feature_names},
          {"standardize_mean", to_vec(standardize_mean)},
          {"standardize_std", to_vec(standardize_std)},
          {"weights", to_vec(weights)},
          {"bias", bias},
          {"hyperparams", hyperparams},
          {"seed", seed}};
}

LinearModel LinearModel::from_json(const nlohmann::json& j) {
  try {
    LinearModel m;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "svm" && kind != "lasso") throw Error(ErrorKind::ParseError, "unknown model kind " + kind);
    m.kind = kind == "svm" ? ModelKind::Svm : ModelKind::Lasso;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.standardize_mean = from_vec(j.at("standardize_mean").get<std::vector<double>>());
    m.standardize_std = from_vec(j.at("standardize_std").get<std::vector<double>>());
    m.weights = from_vec(j.at("weights").get<std::vector<double>>());
    m.bias = j.at("bias").get<double>();
    m.hyperparams = j.at("hyperparams").get<std::map<std::string, double>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto d = static_cast<std::size_t>(m.weights.size());
    if (m.feature_names.size() != d || static_cast<std::size_t>(m.standardize_mean.size()) != d ||
        static_cast<std::size_t>(m.standardize_std.size()) != d) {
      throw Error(ErrorKind::ParseError, "model vectors disagree in length");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

void LinearModel::save(const std::string& path) const { csv::write_text(path, to_json().dump(2) + "\n"); }

LinearModel LinearModel::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(csv::read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

}  // namespace ovpath
