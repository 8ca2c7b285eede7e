#include "lprobe/cca.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lprobe/error.hpp"
#include "lprobe/rng.hpp"

namespace lprobe {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Maps a view into its whitened principal subspace: returns the d x k matrix
/// U_k diag((lambda + ridge)^-1/2) over eigenvalues above rank_tol * lambda_max.
MatrixXd whitening(const MatrixXd& cov, const CcaOptions& opt) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail_numerical("CCA: covariance eigendecomposition failed");
  const VectorXd& lambda = eig.eigenvalues();  // ascending
  const double lmax = lambda(lambda.size() - 1);
  const double ridge = opt.ridge_eps * cov.diagonal().mean();
  const double cutoff = opt.rank_tol * lmax;
  Index keep = 0;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > cutoff) ++keep;
  }
  if (keep == 0) fail_numerical("CCA: covariance has no eigenvalue above the rank tolerance");
  MatrixXd out(cov.rows(), keep);
  // Largest eigenvalue first.
  for (Index c = 0; c < keep; ++c) {
    const Index src = lambda.size() - 1 - c;
    out.col(c) = eig.eigenvectors().col(src) / std::sqrt(lambda(src) + ridge);
  }
  return out;
}

VectorXd projection_weights(const MatrixXd& centered, const MatrixXd& directions) {
  const MatrixXd variates = centered * directions;
  Eigen::HouseholderQR<MatrixXd> qr(variates);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(variates.rows(), variates.cols());
  VectorXd alpha = (q.transpose() * centered).cwiseAbs().rowwise().sum();
  const double total = alpha.sum();
  if (!(total > 0.0)) fail_numerical("CCA: projection weights sum to zero");
  return alpha / total;
}

double pearson(const VectorXd& a, const VectorXd& b, bool* degenerate) {
  const double n = static_cast<double>(a.size());
  const VectorXd ac = a.array() - a.sum() / n;
  const VectorXd bc = b.array() - b.sum() / n;
  const double va = ac.squaredNorm() / n;
  const double vb = bc.squaredNorm() / n;
  // Canonical variates have unit training variance, so an absolute floor is
  // meaningful here.
  constexpr double kFloor = 1e-12;
  if (!(va > kFloor) || !(vb > kFloor)) {
    *degenerate = true;
    return 0.0;
  }
  *degenerate = false;
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

}  // namespace

CcaDirections fit_cca(const MatrixXd& X, const MatrixXd& Y, const CcaOptions& opt) {
  const Index n = X.rows();
  if (Y.rows() != n) fail_validation("CCA: X and Y row counts differ");
  if (n <= std::max(X.cols(), Y.cols())) {
    fail_validation("CCA: need more rows (" + std::to_string(n) + ") than columns (" +
                    std::to_string(std::max(X.cols(), Y.cols())) + ")");
  }
  if (!X.allFinite() || !Y.allFinite()) fail_validation("CCA: non-finite input");

  CcaDirections d;
  d.mean_x = X.colwise().mean().transpose();
  d.mean_y = Y.colwise().mean().transpose();
  const MatrixXd xc = X.rowwise() - d.mean_x.transpose();
  const MatrixXd yc = Y.rowwise() - d.mean_y.transpose();
  const double denom = static_cast<double>(n - 1);
  const MatrixXd sxx = (xc.transpose() * xc) / denom;
  const MatrixXd syy = (yc.transpose() * yc) / denom;
  const MatrixXd sxy = (xc.transpose() * yc) / denom;
  if (!(sxx.trace() > 0.0)) fail_validation("CCA: representation view has zero variance");
  if (!(syy.trace() > 0.0)) {
    fail_validation("CCA: label view has zero variance (all rows share one class)");
  }

  const MatrixXd wx = whitening(sxx, opt);
  const MatrixXd wy = whitening(syy, opt);
  const MatrixXd t = wx.transpose() * sxy * wy;
  Eigen::BDCSVD<MatrixXd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index k = std::min(wx.cols(), wy.cols());
  d.train_correlations = svd.singularValues().head(k).cwiseMax(0.0).cwiseMin(1.0);
  d.V = wx * svd.matrixU().leftCols(k);
  d.W = wy * svd.matrixV().leftCols(k);

  WeightView view = opt.weight_view;
  if (view == WeightView::Auto) {
    view = X.cols() <= Y.cols() ? WeightView::Representation : WeightView::Label;
  }
  d.weighted_view = view;
  d.weights = view == WeightView::Representation ? projection_weights(xc, d.V)
                                                 : projection_weights(yc, d.W);
  return d;
}

CcaEvaluation eval_cca_detail(const CcaDirections& dirs, const MatrixXd& X_test,
                              const MatrixXd& Y_test) {
  if (X_test.rows() == 0) fail_validation("CCA eval: empty test set");
  if (X_test.rows() != Y_test.rows()) fail_validation("CCA eval: X and Y row counts differ");
  if (X_test.cols() != dirs.V.rows() || Y_test.cols() != dirs.W.rows()) {
    fail_validation("CCA eval: test dimensions do not match the fitted directions");
  }
  const MatrixXd a = (X_test.rowwise() - dirs.mean_x.transpose()) * dirs.V;
  const MatrixXd b = (Y_test.rowwise() - dirs.mean_y.transpose()) * dirs.W;
  CcaEvaluation ev;
  ev.correlations = VectorXd::Zero(dirs.rank());
  double weighted = 0.0, used = 0.0;
  for (Index i = 0; i < dirs.rank(); ++i) {
    bool degenerate = false;
    const double r = pearson(a.col(i), b.col(i), &degenerate);
    if (degenerate) {
      ev.skipped.push_back(i);
      continue;
    }
    ev.correlations(i) = r;
    weighted += dirs.weights(i) * r;
    used += dirs.weights(i);
  }
  if (!(used > 0.0)) fail_numerical("CCA eval: every projected test variate has zero variance");
  ev.score = weighted / used;
  return ev;
}

double eval_cca(const CcaDirections& dirs, const MatrixXd& X_test, const MatrixXd& Y_test) {
  return eval_cca_detail(dirs, X_test, Y_test).score;
}

LabelMatrix one_hot(std::span<const std::string> labels, std::vector<std::string> classes) {
  if (classes.empty()) {
    const std::set<std::string> uniq(labels.begin(), labels.end());
    classes.assign(uniq.begin(), uniq.end());
  }
  std::map<std::string, Index> column;
  for (std::size_t c = 0; c < classes.size(); ++c) column[classes[c]] = static_cast<Index>(c);
  LabelMatrix out{classes, MatrixXd::Zero(static_cast<Index>(labels.size()),
                                          static_cast<Index>(classes.size()))};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = column.find(labels[i]);
    if (it == column.end()) fail_validation("one_hot: unknown label '" + labels[i] + "'");
    out.Y(static_cast<Index>(i), it->second) = 1.0;
  }
  return out;
}

std::vector<double> CcaResult::fold_scores() const {
  std::vector<double> s;
  for (const auto& f : folds) s.push_back(f.score);
  return s;
}

std::vector<std::vector<std::size_t>> split_folds(std::span<const std::string> labels,
                                                  std::uint32_t folds, std::uint64_t seed,
                                                  bool stratify_by_label) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<std::vector<std::size_t>> out(folds);
  if (stratify_by_label) {
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
    for (std::size_t i = 0; i < n; ++i) out[i % folds].push_back(perm[i]);
  } else {
    for (std::uint32_t f = 0; f < folds; ++f) {
      const std::size_t lo = f * n / folds, hi = (f + 1) * n / folds;
      out[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                    perm.begin() + static_cast<std::ptrdiff_t>(hi));
    }
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

CcaResult cca_protocol(const SegmentTable& full, const CcaProtocolOptions& opt,
                       const std::string& accent) {
  if (opt.folds < 2) fail_validation("CCA protocol: need at least 2 folds");
  if (opt.eval_folds < 1 || opt.eval_folds > opt.folds) {
    fail_validation("CCA protocol: eval_folds must be in [1, folds]");
  }
  const SegmentTable table = accent == "all" ? full : full.filter_accent(accent);
  std::vector<std::string> labels;
  labels.reserve(table.size());
  for (const auto& r : table.rows) labels.push_back(r.label);
  const LabelMatrix lm = one_hot(labels);
  const std::size_t d1 = table.dim(), d2 = lm.classes.size();
  const std::size_t need = static_cast<std::size_t>(opt.folds) * (d1 + d2);
  if (table.size() < need || table.size() == 0) {
    fail_validation("CCA protocol: layer " + std::to_string(table.layer) + " accent " + accent +
                    " has " + std::to_string(table.size()) + " rows; need at least folds*(d1+d2) = " +
                    std::to_string(need));
  }

  CcaResult result;
  result.layer = table.layer;
  result.accent = accent;
  const auto folds = split_folds(labels, opt.folds, opt.seed, opt.stratify_by_label);
  double total = 0.0;
  for (std::uint32_t f = 0; f < opt.eval_folds; ++f) {
    std::vector<std::size_t> train;
    for (std::uint32_t g = 0; g < opt.folds; ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train.begin(), train.end());
    const auto& test = folds[f];

    // Drop label columns that never occur in the training split.
    std::vector<bool> present(d2, false);
    for (std::size_t r : train) {
      for (std::size_t c = 0; c < d2; ++c) {
        if (lm.Y(static_cast<Index>(r), static_cast<Index>(c)) != 0.0) present[c] = true;
      }
    }
    CcaFold fold;
    fold.fold = f;
    std::vector<Index> cols;
    for (std::size_t c = 0; c < d2; ++c) {
      if (present[c]) {
        cols.push_back(static_cast<Index>(c));
      } else {
        fold.dropped_classes.push_back(lm.classes[c]);
      }
    }
    auto gather = [&](const std::vector<std::size_t>& rows, MatrixXd& x, MatrixXd& y) {
      x.resize(static_cast<Index>(rows.size()), static_cast<Index>(d1));
      y.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Index r = static_cast<Index>(rows[i]);
        x.row(static_cast<Index>(i)) = table.features.row(r);
        for (std::size_t c = 0; c < cols.size(); ++c) {
          y(static_cast<Index>(i), static_cast<Index>(c)) = lm.Y(r, cols[c]);
        }
      }
    };
    MatrixXd xtr, ytr, xte, yte;
    gather(train, xtr, ytr);
    gather(test, xte, yte);
    const CcaDirections dirs = fit_cca(xtr, ytr, opt.cca);
    const CcaEvaluation ev = eval_cca_detail(dirs, xte, yte);
    fold.score = ev.score;
    fold.train_rho = dirs.train_correlations;
    fold.test_rho = ev.correlations;
    total += ev.score;
    result.folds.push_back(std::move(fold));
  }
  result.score = total / static_cast<double>(opt.eval_folds);
  return result;
}

}  // namespace lprobe
