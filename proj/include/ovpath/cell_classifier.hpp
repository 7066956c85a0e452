#pragma once

#include "ovpath/cell_features.hpp"
#include "ovpath/labels.hpp"
#include "ovpath/linear_model.hpp"
#include "ovpath/svm.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ovpath {

/// Tumor is the positive class.
inline double label_sign(CellLabel l) { return l == CellLabel::Tumor ? 1.0 : -1.0; }

/// Tumor iff decision > 0; a zero decision is stroma.
inline CellLabel predict_label(double decision) { return decision > 0.0 ? CellLabel::Tumor : CellLabel::Stroma; }

CellLabel svm_predict(const LinearModel& model, const Eigen::VectorXd& raw);

/// Stacks feature vectors (rows) into a matrix.
Eigen::MatrixXd feature_matrix(const std::vector<CellFeatureVector>& rows);

/// Trains on rows labeled tumor/stroma; unlabeled rows are skipped.
LinearModel train_cell_classifier(const std::vector<CellFeatureVector>& rows, const SvmOptions& options = {},
                                  SvmTrace* trace = nullptr);

struct FeatureImportance {
  std::string name;
  double importance = 0.0;
};

/// w_j / max_k |w_k|, sorted by descending |importance| (stable on ties).
std::vector<FeatureImportance> feature_importance(const LinearModel& model);

struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 2>, 2> counts{};  // [true][predicted], order tumor, stroma
  double accuracy = 0.0;

  std::int64_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
};

ConfusionMatrix confusion(const std::vector<CellLabel>& truth, const std::vector<CellLabel>& predicted);

struct Clustering {
  std::vector<int> assignment;           // cluster per input row
  std::vector<int> representative;       // row index nearest to each centroid
  Eigen::MatrixXd centroids;             // k' x d, standardized space
  int iterations = 0;
};

/// k-means (k-means++ seeding, Lloyd to a fixpoint or 300 iterations) on
/// standardized features with k' = min(k, n).
Clustering kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int max_iterations = 300);

/// Standardizes `features` (when n >= 2) and clusters them.
Clustering cluster_misclassified(const Eigen::MatrixXd& features, int k, std::uint64_t seed);

struct CorrelationAnalysis {
  Eigen::MatrixXd pearson;     // input order
  std::vector<int> leaf_order; // dendrogram leaves
  Eigen::MatrixXd reordered;   // pearson permuted by leaf_order

  /// (left, right, height) per merge; indices < p are leaves, p + m is merge m.
  std::vector<std::tuple<int, int, double>> merges;
};

Eigen::MatrixXd pearson_matrix(const Eigen::MatrixXd& x);

/// Pearson correlations plus average-linkage clustering on 1 - |r|.
CorrelationAnalysis feature_correlation(const Eigen::MatrixXd& x);

}  // namespace ovpath
