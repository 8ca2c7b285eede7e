#include "lprobe/probes.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "lprobe/error.hpp"

namespace lprobe {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Standardized {
  VectorXd means;
  VectorXd stds;
  std::vector<Index> active;  // columns with non-zero variance
};

Standardized standardize_stats(const MatrixXd& X) {
  const double n = static_cast<double>(X.rows());
  Standardized s;
  s.means = X.colwise().mean().transpose();
  s.stds = VectorXd::Ones(X.cols());
  for (Index d = 0; d < X.cols(); ++d) {
    const double var = (X.col(d).array() - s.means(d)).square().sum() / n;
    const double scale = std::max(1.0, std::abs(s.means(d)));
    if (var > 1e-24 * scale * scale) {
      s.stds(d) = std::sqrt(var);
      s.active.push_back(d);
    }
  }
  return s;
}

}  // namespace

std::string_view target_name(ProsodyTarget target) {
  return target == ProsodyTarget::Prominence ? "prominence" : "boundary";
}

double default_ridge_lambda(const MatrixXd& X) {
  if (X.cols() == 0) return 0.0;
  const Standardized s = standardize_stats(X);
  // Each active standardized column has unit variance.
  return 1e-4 * static_cast<double>(s.active.size()) / static_cast<double>(X.cols());
}

RidgeModel fit_ridge(const MatrixXd& X, const VectorXd& y, std::optional<double> lambda) {
  const Index n = X.rows();
  if (n <= 1) fail_validation("ridge: need more than one row");
  if (y.size() != n) fail_validation("ridge: X and y lengths differ");
  if (!X.allFinite() || !y.allFinite()) fail_validation("ridge: non-finite input");
  const double lam = lambda ? *lambda : default_ridge_lambda(X);
  if (!(lam >= 0.0)) fail_validation("ridge: lambda must be non-negative");

  const Standardized s = standardize_stats(X);
  RidgeModel model;
  model.lambda = lam;
  model.feature_means = s.means;
  model.feature_stds = s.stds;
  model.weights = VectorXd::Zero(X.cols());
  model.bias = y.mean();

  const Index k = static_cast<Index>(s.active.size());
  if (k == 0) return model;
  MatrixXd z(n, k);
  for (Index c = 0; c < k; ++c) {
    const Index d = s.active[static_cast<std::size_t>(c)];
    z.col(c) = (X.col(d).array() - s.means(d)) / s.stds(d);
  }
  const double nn = static_cast<double>(n);
  const VectorXd yc = y.array() - model.bias;
  MatrixXd gram = (z.transpose() * z) / nn;
  gram.diagonal().array() += lam;
  const VectorXd rhs = (z.transpose() * yc) / nn;
  Eigen::LDLT<MatrixXd> ldlt(gram);
  VectorXd w = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !w.allFinite()) {
    fail_numerical("ridge: normal equations could not be solved");
  }
  // Gradient of the regularized objective at the solution (bias gradient is
  // zero by construction since z is centered).
  const VectorXd grad = gram * w - rhs;
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  if (grad.cwiseAbs().maxCoeff() > 1e-6 * scale) {
    fail_numerical("ridge: system is singular beyond ridge repair (gradient residual " +
                   std::to_string(grad.cwiseAbs().maxCoeff()) + ")");
  }
  for (Index c = 0; c < k; ++c) model.weights(s.active[static_cast<std::size_t>(c)]) = w(c);
  return model;
}

VectorXd predict(const RidgeModel& model, const MatrixXd& X) {
  if (X.cols() != model.weights.size()) {
    fail_validation("predict: feature dimension " + std::to_string(X.cols()) +
                    " does not match model dimension " + std::to_string(model.weights.size()));
  }
  const VectorXd scaled = model.weights.array() / model.feature_stds.array();
  const double offset = model.bias - scaled.dot(model.feature_means);
  return (X * scaled).array() + offset;
}

double mean_squared_error(const VectorXd& y, const VectorXd& y_hat) {
  if (y.size() != y_hat.size() || y.size() == 0) fail_validation("mse: length mismatch");
  return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

void FoldAssignment::validate() const {
  if (folds < 2) fail_validation("fold assignment needs at least 2 folds");
  for (const auto& [speaker, fold] : speaker_to_fold) {
    if (fold >= folds) {
      fail_validation("speaker '" + speaker + "' assigned to fold " + std::to_string(fold) +
                      " outside [0, " + std::to_string(folds) + ")");
    }
  }
}

FoldAssignment auto_assign_folds(const std::map<std::string, std::string>& speaker_accent,
                                 std::uint32_t folds) {
  FoldAssignment a;
  a.folds = folds;
  std::map<std::string, std::vector<std::string>> by_accent;
  for (const auto& [speaker, accent] : speaker_accent) by_accent[accent].push_back(speaker);
  for (const auto& [accent, speakers] : by_accent) {
    for (std::size_t i = 0; i < speakers.size(); ++i) {
      a.speaker_to_fold[speakers[i]] = static_cast<std::uint32_t>(i % folds);
    }
  }
  a.validate();
  return a;
}

void assert_no_speaker_leakage(const std::set<std::string>& train, const std::set<std::string>& test,
                               std::uint32_t fold) {
  for (const auto& s : test) {
    if (train.contains(s)) {
      fail_numerical("speaker leakage in fold " + std::to_string(fold) + ": '" + s +
                     "' appears in both the training and the test split");
    }
  }
}

ProbeResult grouped_cv(const SegmentTable& table, ProsodyTarget target,
                       const FoldAssignment& assignment, std::optional<double> lambda) {
  assignment.validate();
  const Index n = static_cast<Index>(table.size());
  VectorXd y(n);
  std::vector<std::uint32_t> row_fold(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.rows[i];
    const auto& value = target == ProsodyTarget::Prominence ? r.prominence : r.boundary;
    if (!value) {
      fail_validation("probe: row " + r.utt_id + "/" + std::to_string(r.index) + " has no " +
                      std::string(target_name(target)) + " target");
    }
    y(static_cast<Index>(i)) = *value;
    const auto it = assignment.speaker_to_fold.find(r.speaker);
    if (it == assignment.speaker_to_fold.end()) {
      fail_validation("probe: speaker '" + r.speaker + "' has no fold assignment");
    }
    row_fold[i] = it->second;
  }

  ProbeResult result;
  result.layer = table.layer;
  result.target = target;
  std::map<std::string, std::pair<double, std::size_t>> accent_sse;
  double total_sse = 0.0;
  std::size_t total_rows = 0;
  for (std::uint32_t f = 0; f < assignment.folds; ++f) {
    std::vector<std::size_t> train, test;
    ProbeFold fold;
    fold.fold = f;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (row_fold[i] == f) {
        test.push_back(i);
        fold.test_speakers.insert(table.rows[i].speaker);
      } else {
        train.push_back(i);
        fold.train_speakers.insert(table.rows[i].speaker);
      }
    }
    if (test.empty()) continue;
    if (train.size() < 2) {
      fail_validation("probe: fold " + std::to_string(f) + " leaves an empty training split");
    }
    assert_no_speaker_leakage(fold.train_speakers, fold.test_speakers, f);

    MatrixXd xtr(static_cast<Index>(train.size()), table.features.cols());
    VectorXd ytr(static_cast<Index>(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k) {
      xtr.row(static_cast<Index>(k)) = table.features.row(static_cast<Index>(train[k]));
      ytr(static_cast<Index>(k)) = y(static_cast<Index>(train[k]));
    }
    MatrixXd xte(static_cast<Index>(test.size()), table.features.cols());
    VectorXd yte(static_cast<Index>(test.size()));
    for (std::size_t k = 0; k < test.size(); ++k) {
      xte.row(static_cast<Index>(k)) = table.features.row(static_cast<Index>(test[k]));
      yte(static_cast<Index>(k)) = y(static_cast<Index>(test[k]));
    }
    const RidgeModel model = fit_ridge(xtr, ytr, lambda);
    const VectorXd err = predict(model, xte) - yte;

    std::map<std::string, std::pair<double, std::size_t>> fold_accent;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const double e2 = err(static_cast<Index>(k)) * err(static_cast<Index>(k));
      const std::string& accent = table.rows[test[k]].accent;
      fold_accent[accent].first += e2;
      fold_accent[accent].second += 1;
      accent_sse[accent].first += e2;
      accent_sse[accent].second += 1;
    }
    for (const auto& [accent, acc] : fold_accent) {
      fold.per_accent_mse[accent] = acc.first / static_cast<double>(acc.second);
    }
    const double sse = err.squaredNorm();
    fold.mse = sse / static_cast<double>(test.size());
    fold.test_rows = test.size();
    total_sse += sse;
    total_rows += test.size();
    result.folds.push_back(std::move(fold));
  }
  if (total_rows == 0) fail_validation("probe: no test rows in any fold");
  result.overall_mse = total_sse / static_cast<double>(total_rows);
  for (const auto& [accent, acc] : accent_sse) {
    result.per_accent_mse[accent] = acc.first / static_cast<double>(acc.second);
  }
  return result;
}

}  // namespace lprobe
