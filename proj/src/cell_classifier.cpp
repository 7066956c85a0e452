#include "ovpath/cell_classifier.hpp"

#include "ovpath/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace ovpath {

CellLabel svm_predict(const LinearModel& model, const Eigen::VectorXd& raw) {
  return predict_label(model.decision(raw));
}

Eigen::MatrixXd feature_matrix(const std::vector<CellFeatureVector>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), kCellFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i].values.transpose();
  return x;
}

LinearModel train_cell_classifier(const std::vector<CellFeatureVector>& rows, const SvmOptions& options,
                                  SvmTrace* trace) {
  std::vector<const CellFeatureVector*> used;
  for (const auto& r : rows)
    if (r.label != CellLabel::Unlabeled) used.push_back(&r);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(used.size()), kCellFeatureCount);
  Eigen::VectorXd y(static_cast<Eigen::Index>(used.size()));
  for (std::size_t i = 0; i < used.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = used[i]->values.transpose();
    y(static_cast<Eigen::Index>(i)) = label_sign(used[i]->label);
  }
  return svm_train_raw(x, y, cell_feature_names(), options, trace);
}

std::vector<FeatureImportance> feature_importance(const LinearModel& model) {
  const double scale = model.weights.size() > 0 ? model.weights.cwiseAbs().maxCoeff() : 0.0;
  std::vector<FeatureImportance> out;
  for (Eigen::Index j = 0; j < model.weights.size(); ++j) {
    const std::string name = j < static_cast<Eigen::Index>(model.feature_names.size())
                                 ? model.feature_names[j]
                                 : "x" + std::to_string(j);
    out.push_back({name, scale > 0.0 ? model.weights(j) / scale : 0.0});
  }
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    return std::abs(a.importance) > std::abs(b.importance);
  });
  return out;
}

ConfusionMatrix confusion(const std::vector<CellLabel>& truth, const std::vector<CellLabel>& predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::LengthMismatch, "label vectors differ in length");
  ConfusionMatrix m;
  auto index = [](CellLabel l) {
    if (l == CellLabel::Unlabeled) throw Error(ErrorKind::UnknownLabel, "confusion needs tumor/stroma labels");
    return l == CellLabel::Tumor ? 0 : 1;
  };
  for (std::size_t i = 0; i < truth.size(); ++i) ++m.counts[index(truth[i])][index(predicted[i])];
  const auto total = m.total();
  m.accuracy = total > 0 ? static_cast<double>(m.counts[0][0] + m.counts[1][1]) / static_cast<double>(total) : 0.0;
  return m;
}

Clustering kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int max_iterations) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw Error(ErrorKind::EmptyInput, "k-means on an empty matrix");
  const int kk = std::max(1, std::min<int>(k, static_cast<int>(n)));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Clustering out;
  out.centroids.resize(kk, x.cols());
  std::vector<bool> chosen(n, false);
  Eigen::Index first = static_cast<Eigen::Index>(unit(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  out.centroids.row(0) = x.row(first);
  chosen[first] = true;
  Eigen::VectorXd d2 = (x.rowwise() - out.centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < kk; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    }
    if (pick < 0) {
      // duplicates only: take the first unchosen row
      for (Eigen::Index i = 0; i < n && pick < 0; ++i)
        if (!chosen[i]) pick = i;
    }
    chosen[pick] = true;
    out.centroids.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - out.centroids.row(c)).rowwise().squaredNorm());
  }

  out.assignment.assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      (out.centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (out.assignment[i] != static_cast<int>(best)) {
        out.assignment[i] = static_cast<int>(best);
        changed = true;
      }
    }
    out.iterations = it + 1;
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kk, x.cols());
    std::vector<int> counts(kk, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.assignment[i]) += x.row(i);
      ++counts[out.assignment[i]];
    }
    for (int c = 0; c < kk; ++c)
      if (counts[c] > 0) out.centroids.row(c) = sums.row(c) / counts[c];
  }

  out.representative.assign(kk, -1);
  std::vector<double> best(kk, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = out.assignment[i];
    const double d = (x.row(i) - out.centroids.row(c)).squaredNorm();
    if (d < best[c]) {
      best[c] = d;
      out.representative[c] = static_cast<int>(i);
    }
  }
  return out;
}

Clustering cluster_misclassified(const Eigen::MatrixXd& features, int k, std::uint64_t seed) {
  if (features.rows() == 0) throw Error(ErrorKind::EmptyInput, "no misclassified cells");
  if (features.rows() == 1) return kmeans(features, k, seed);
  return kmeans(standardize_fit_apply(features).x, k, seed);
}

Eigen::MatrixXd pearson_matrix(const Eigen::MatrixXd& x) {
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd norms = centered.colwise().norm().transpose();
  Eigen::MatrixXd r = centered.transpose() * centered;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double denom = norms(i) * norms(j);
      const bool constant = !(norms(i) > 1e-300) || !(norms(j) > 1e-300);
      r(i, j) = constant ? 0.0 : std::clamp(r(i, j) / denom, -1.0, 1.0);
    }
    if (norms(i) > 1e-300) r(i, i) = 1.0;
  }
  return r;
}

CorrelationAnalysis feature_correlation(const Eigen::MatrixXd& x) {
  if (x.rows() < 3) throw Error(ErrorKind::TooFewRows, "correlation analysis needs at least 3 rows");
  CorrelationAnalysis out;
  out.pearson = pearson_matrix(x);
  const int p = static_cast<int>(x.cols());

  // Average linkage on d = 1 - |r|; clusters hold their leaf lists.
  const Eigen::MatrixXd dist = 1.0 - out.pearson.array().abs();
  struct Cluster {
    int node;
    std::vector<int> leaves;
  };
  std::vector<Cluster> active;
  for (int i = 0; i < p; ++i) active.push_back({i, {i}});
  int next_node = p;
  while (active.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 1;
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        double sum = 0.0;
        for (int i : active[a].leaves)
          for (int j : active[b].leaves) sum += dist(i, j);
        const double avg = sum / static_cast<double>(active[a].leaves.size() * active[b].leaves.size());
        if (avg < best - 1e-15) {
          best = avg;
          ba = a;
          bb = b;
        }
      }
    }
    Cluster merged{next_node++, active[ba].leaves};
    merged.leaves.insert(merged.leaves.end(), active[bb].leaves.begin(), active[bb].leaves.end());
    out.merges.emplace_back(active[ba].node, active[bb].node, best);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bb));
    active[ba] = std::move(merged);
  }
  out.leaf_order = p > 0 ? active.front().leaves : std::vector<int>{};
  out.reordered.resize(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) out.reordered(i, j) = out.pearson(out.leaf_order[i], out.leaf_order[j]);
  return out;
}

}  // namespace ovpath
