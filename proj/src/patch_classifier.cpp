#include "ovpath/patch_classifier.hpp"

#include "ovpath/csv.hpp"
#include "ovpath/error.hpp"
#include "ovpath/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace ovpath {

RocCurve roc_auc(const Eigen::VectorXd& decisions, const Eigen::VectorXd& labels) {
  if (decisions.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "decisions and labels differ");
  const Eigen::Index n = decisions.size();
  std::int64_t pos = 0, neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) (labels(i) > 0 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw Error(ErrorKind::SingleClass, "ROC needs both classes");

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return decisions(a) > decisions(b); });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0, fp = 0;
  for (Eigen::Index k = 0; k < n;) {
    const double t = decisions(order[k]);
    while (k < n && decisions(order[k]) == t) {
      (labels(order[k]) > 0 ? tp : fp)++;
      ++k;
    }
    roc.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, t});
  }
  double auc = 0.0;
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const RocPoint& a = roc.points[i - 1];
    const RocPoint& b = roc.points[i];
    auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  roc.auc = auc;
  return roc;
}

std::string roc_csv(const RocCurve& roc) {
  std::string out = "fpr,tpr,threshold\n";
  for (const RocPoint& p : roc.points) {
    out += csv::format_exact(p.fpr) + "," + csv::format_exact(p.tpr) + "," +
           (std::isinf(p.threshold) ? std::string("inf") : csv::format_exact(p.threshold)) + "\n";
  }
  return out;
}

DecisionHistogram decision_histogram(const Eigen::VectorXd& decisions, const Eigen::VectorXd& labels, int bins) {
  if (decisions.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "decisions and labels differ");
  DecisionHistogram h;
  h.hgsoc.assign(bins, 0);
  h.sbot.assign(bins, 0);
  if (decisions.size() == 0) {
    h.edges.assign(bins + 1, 0.0);
    return h;
  }
  const double lo = decisions.minCoeff();
  const double hi = decisions.maxCoeff();
  const double width = hi > lo ? (hi - lo) / bins : 0.0;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + b * width);
  for (Eigen::Index i = 0; i < decisions.size(); ++i) {
    int b = width > 0.0 ? static_cast<int>((decisions(i) - lo) / width) : 0;
    b = std::clamp(b, 0, bins - 1);
    (labels(i) > 0 ? h.hgsoc : h.sbot)[b]++;
  }
  return h;
}

std::string histogram_csv(const DecisionHistogram& h) {
  std::string out = "bin_lo,bin_hi,HGSOC,SBOT\n";
  for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
    out += csv::format_exact(h.edges[b]) + "," + csv::format_exact(h.edges[b + 1]) + "," + std::to_string(h.hgsoc[b]) +
           "," + std::to_string(h.sbot[b]) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------- LASSO

namespace {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw Error(ErrorKind::EmptyInput, "LASSO on an empty design");
  const Eigen::VectorXd centered = y.array() - y.mean();
  return (x.transpose() * centered).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

LassoFit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, const LassoOptions& options,
                   const Eigen::VectorXd* warm) {
  if (x.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "rows and responses differ");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::ConfigError, "lambda must be non-negative");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double intercept = y.mean();
  const Eigen::VectorXd col_ss = x.colwise().squaredNorm().transpose() * inv_n;

  Eigen::VectorXd beta = warm && warm->size() == p ? *warm : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd resid = (y.array() - intercept).matrix() - x * beta;

  auto update = [&](Eigen::Index j) {
    if (!(col_ss(j) > 0.0)) {
      if (beta(j) != 0.0) {
        resid += beta(j) * x.col(j);
        beta(j) = 0.0;
      }
      return 0.0;
    }
    const double old = beta(j);
    const double z = x.col(j).dot(resid) * inv_n + col_ss(j) * old;
    const double next = soft_threshold(z, lambda) / col_ss(j);
    if (next != old) {
      resid -= (next - old) * x.col(j);
      beta(j) = next;
    }
    return std::abs(next - old);
  };

  // Exact solve of the stationarity conditions on the active set with the
  // current signs. Cyclic descent crawls when active columns are nearly
  // collinear; this jumps to the limit, or along the segment towards it up to
  // the first coefficient that would change sign, which is then zeroed. The
  // objective is a convex quadratic inside the sign orthant, so either step
  // decreases it.
  const Eigen::VectorXd centred = (y.array() - intercept).matrix();
  auto polish = [&](std::vector<Eigen::Index> active) {
    std::erase_if(active, [&](Eigen::Index j) { return beta(j) == 0.0; });
    const auto k = static_cast<Eigen::Index>(active.size());
    if (k == 0 || k >= n) return;
    Eigen::MatrixXd xa(n, k);
    Eigen::VectorXd sign(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      xa.col(i) = x.col(active[i]);
      sign(i) = beta(active[i]) > 0.0 ? 1.0 : -1.0;
    }
    const Eigen::MatrixXd gram = xa.transpose() * xa * inv_n;
    const Eigen::VectorXd rhs = xa.transpose() * centred * inv_n - lambda * sign;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) return;
    const Eigen::VectorXd cand = ldlt.solve(rhs);
    if (!cand.allFinite() || (gram * cand - rhs).norm() > 1e-10 * (1.0 + rhs.norm())) return;
    double t = 1.0;
    Eigen::Index hit = -1;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (cand(i) * sign(i) > 0.0) continue;
      const double b = beta(active[i]);
      const double ti = b / (b - cand(i));
      if (ti < t) {
        t = ti;
        hit = i;
      }
    }
    for (Eigen::Index i = 0; i < k; ++i) beta(active[i]) += t * (cand(i) - beta(active[i]));
    if (hit >= 0) beta(active[hit]) = 0.0;
    resid = centred - x * beta;
  };

  std::int64_t sweeps = 0;
  // At or above lambda_max the null model is optimal; the per-coordinate
  // products below round differently from the matrix product there.
  const bool null_model = lambda >= lasso_lambda_max(x, y);
  if (null_model) {
    beta.setZero();
    resid = centred;
  }
  while (!null_model) {
    // full sweep
    double change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) change = std::max(change, update(j));
    ++sweeps;
    if (change < options.tolerance) break;
    if (sweeps >= options.max_sweeps) throw Error(ErrorKind::NoConvergence, "LASSO sweep limit reached");
    // iterate on the active set until it settles, then re-check all
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p; ++j)
      if (beta(j) != 0.0) active.push_back(j);
    for (std::int64_t inner = 1;; ++inner) {
      double c = 0.0;
      for (Eigen::Index j : active) c = std::max(c, update(j));
      ++sweeps;
      if (c < options.tolerance) break;
      if (inner % 50 == 0) polish(active);
      if (sweeps >= options.max_sweeps) throw Error(ErrorKind::NoConvergence, "LASSO sweep limit reached");
    }
  }

  LassoFit fit;
  fit.lambda = lambda;
  fit.sweeps = sweeps;
  fit.model.kind = ModelKind::Lasso;
  fit.model.weights = beta;
  fit.model.bias = intercept;
  fit.model.standardize_mean = Eigen::VectorXd::Zero(p);
  fit.model.standardize_std = Eigen::VectorXd::Ones(p);
  fit.model.hyperparams["lambda"] = lambda;
  for (Eigen::Index j = 0; j < p; ++j) fit.model.feature_names.push_back("x" + std::to_string(j));
  for (Eigen::Index j = 0; j < p; ++j)
    if (beta(j) != 0.0) fit.nonzero.emplace_back(fit.model.feature_names[j], beta(j));
  fit.path.emplace_back(lambda, static_cast<int>(fit.nonzero.size()));
  return fit;
}

double lasso_kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                           double lambda) {
  const double n = static_cast<double>(x.rows());
  const Eigen::VectorXd resid = (y.array() - y.mean()).matrix() - x * beta;
  const Eigen::VectorXd grad = x.transpose() * resid / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) == 0.0) {
      worst = std::max(worst, std::abs(grad(j)) - lambda);
    } else {
      worst = std::max(worst, std::abs(grad(j) - lambda * (beta(j) > 0 ? 1.0 : -1.0)));
    }
  }
  return std::max(worst, 0.0);
}

std::vector<double> lambda_path(double lambda_max, const LassoPathSpec& spec) {
  std::vector<double> out;
  const int m = std::max(spec.n_lambda, 1);
  for (int i = 0; i < m; ++i) {
    const double t = m == 1 ? 0.0 : static_cast<double>(i) / (m - 1);
    out.push_back(lambda_max * std::pow(spec.min_ratio, t));
  }
  return out;
}

LassoSelection lasso_select(const Eigen::MatrixXd& raw, const Eigen::VectorXd& y,
                            const std::vector<std::string>& names, const LassoPathSpec& spec,
                            const std::vector<std::string>* groups, const LassoOptions& options) {
  const Eigen::Index n = raw.rows();
  if (spec.folds < 2 || n < spec.folds) throw Error(ErrorKind::TooFewRows, "not enough rows for cross-validation");

  // Fold assignment: shuffle groups (or rows) with the seed, deal round-robin.
  std::vector<int> fold(n);
  {
    std::vector<std::string> keys;
    if (groups) {
      if (groups->size() != static_cast<std::size_t>(n)) throw Error(ErrorKind::LengthMismatch, "group labels");
      std::set<std::string> uniq(groups->begin(), groups->end());
      keys.assign(uniq.begin(), uniq.end());
    } else {
      for (Eigen::Index i = 0; i < n; ++i) keys.push_back(std::to_string(i));
    }
    if (keys.size() < static_cast<std::size_t>(spec.folds)) {
      throw Error(ErrorKind::TooFewRows, "fewer groups than folds");
    }
    std::mt19937_64 rng(derive_seed(spec.seed, 0x1a550ULL));
    std::shuffle(keys.begin(), keys.end(), rng);
    std::map<std::string, int> key_fold;
    for (std::size_t i = 0; i < keys.size(); ++i) key_fold[keys[i]] = static_cast<int>(i % spec.folds);
    for (Eigen::Index i = 0; i < n; ++i) fold[i] = key_fold[groups ? (*groups)[i] : std::to_string(i)];
  }

  const Standardized full = standardize_fit_apply(raw);
  LassoSelection sel;
  sel.lambdas = lambda_path(lasso_lambda_max(full.x, y), spec);

  // Descends the path with warm starts, stopping after the first fit that
  // explains at least max_dev_ratio of the deviance.
  auto descend = [&](const Eigen::MatrixXd& x, const Eigen::VectorXd& yy, std::size_t limit, auto&& visit) {
    const double tss = (yy.array() - yy.mean()).square().sum();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    std::size_t l = 0;
    while (l < limit) {
      LassoFit fit;
      try {
        fit = lasso_fit(x, yy, sel.lambdas[l], options, &beta);
      } catch (const Error& e) {
        // the tail of the path is where coordinate descent stalls; end it there
        if (e.kind() != ErrorKind::NoConvergence || l == 0) throw;
        break;
      }
      beta = fit.model.weights;
      const double rss = ((yy.array() - fit.model.bias).matrix() - x * beta).squaredNorm();
      visit(l, std::move(fit));
      ++l;
      if (tss > 0.0 && 1.0 - rss / tss >= spec.max_dev_ratio) break;
    }
    return l;
  };

  std::vector<LassoFit> full_path;
  std::size_t m = descend(full.x, y, sel.lambdas.size(), [&](std::size_t, LassoFit fit) { full_path.push_back(std::move(fit)); });

  std::vector<std::vector<double>> fold_err(spec.folds);
  for (int f = 0; f < spec.folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(i);
    const Eigen::MatrixXd xtr_raw = raw(tr, Eigen::all);
    const Eigen::VectorXd ytr = y(tr);
    const Standardized s = standardize_fit_apply(xtr_raw);
    const Eigen::MatrixXd xte = s.params.apply(Eigen::MatrixXd(raw(te, Eigen::all)));
    const Eigen::VectorXd yte = y(te);
    m = std::min(m, descend(s.x, ytr, m, [&](std::size_t, const LassoFit& fit) {
          const Eigen::VectorXd pred = (xte * fit.model.weights).array() + fit.model.bias;
          fold_err[f].push_back((yte - pred).squaredNorm() / static_cast<double>(te.size()));
        }));
  }
  sel.lambdas.resize(m);
  sel.cv_mean.assign(m, 0.0);
  sel.cv_se.assign(m, 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    double mean = 0.0;
    for (int f = 0; f < spec.folds; ++f) mean += fold_err[f][l];
    mean /= spec.folds;
    double var = 0.0;
    for (int f = 0; f < spec.folds; ++f) var += (fold_err[f][l] - mean) * (fold_err[f][l] - mean);
    var /= (spec.folds - 1);
    sel.cv_mean[l] = mean;
    sel.cv_se[l] = std::sqrt(var / spec.folds);
  }
  sel.index_min = static_cast<int>(std::min_element(sel.cv_mean.begin(), sel.cv_mean.end()) - sel.cv_mean.begin());
  const double bound = sel.cv_mean[sel.index_min] + sel.cv_se[sel.index_min];
  sel.index_1se = sel.index_min;
  for (std::size_t l = 0; l < m; ++l) {
    if (sel.cv_mean[l] <= bound) {
      sel.index_1se = static_cast<int>(l);  // lambdas descend, first hit is the largest
      break;
    }
  }

  std::vector<std::pair<double, int>> path;
  for (std::size_t l = 0; l < m; ++l) path.emplace_back(sel.lambdas[l], static_cast<int>(full_path[l].nonzero.size()));
  LassoFit chosen = std::move(full_path[sel.index_1se]);
  chosen.path = std::move(path);
  chosen.model.set_standardizer(full.params);
  if (names.size() == static_cast<std::size_t>(raw.cols())) chosen.model.feature_names = names;
  chosen.nonzero.clear();
  for (Eigen::Index j = 0; j < chosen.model.weights.size(); ++j) {
    if (chosen.model.weights(j) != 0.0) chosen.nonzero.emplace_back(chosen.model.feature_names[j], chosen.model.weights(j));
  }
  chosen.model.hyperparams["folds"] = spec.folds;
  chosen.model.seed = spec.seed;
  sel.fit = std::move(chosen);
  return sel;
}

std::string lasso_table_csv(const LassoFit& fit) {
  auto rows = fit.nonzero;
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
  std::string out = "No.,Content,Cellular Feature Name,Statistics,Importance\n";
  int k = 1;
  for (const auto& [name, coef] : rows) {
    const auto first = name.find(':');
    const auto last = name.rfind(':');
    std::string content = name, feature, stat;
    if (first != std::string::npos && last != first) {
      content = name.substr(0, first);
      feature = name.substr(first + 1, last - first - 1);
      stat = name.substr(last + 1);
    }
    out += std::to_string(k++) + "," + content + "," + feature + "," + stat + "," + csv::format_g6(coef) + "\n";
  }
  return out;
}

SubjectCall subject_bootstrap(const std::string& subject_id, const std::vector<double>& decisions, int replicates,
                              std::uint64_t seed) {
  if (decisions.empty()) throw Error(ErrorKind::NoEligiblePatches, "subject " + subject_id + " has no eligible patches");
  if (replicates < 1) throw Error(ErrorKind::ConfigError, "bootstrap needs at least one replicate");
  SubjectCall call;
  call.subject_id = subject_id;
  call.n_patches = static_cast<int>(decisions.size());
  call.seed = seed;
  call.replicate_means.resize(replicates);
  const auto n = decisions.size();
  const std::uint64_t subject_key = fnv1a(subject_id);
  for (int b = 0; b < replicates; ++b) {
    std::mt19937_64 rng(derive_seed(seed, subject_key, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += decisions[pick(rng)];
    call.replicate_means[b] = sum / static_cast<double>(n);
  }
  int positive = 0;
  for (double m : call.replicate_means) positive += m > 0.0 ? 1 : 0;
  call.fraction_positive = static_cast<double>(positive) / replicates;
  std::vector<double> sorted = call.replicate_means;
  std::sort(sorted.begin(), sorted.end());
  const auto r = sorted.size();
  call.median = r % 2 == 1 ? sorted[r / 2] : 0.5 * (sorted[r / 2 - 1] + sorted[r / 2]);
  call.predicted = call.median > 0.0 ? Histotype::HGSOC : Histotype::SBOT;
  return call;
}

}  // namespace ovpath
