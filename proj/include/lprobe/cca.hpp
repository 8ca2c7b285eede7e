#pragma once

// Projection-weighted canonical correlation analysis (PWCCA) between pooled
// representations X (n x d1) and one-hot phoneme labels Y (n x d2), and the
// k-fold train/test protocol that turns it into one score per layer.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lprobe/segment_table.hpp"

namespace lprobe {

/// View whose columns define the projection weights.
/// Auto follows the reference PWCCA implementation: the view with fewer
/// columns (the representation view on ties).
enum class WeightView { Auto, Representation, Label };

struct CcaOptions {
  double ridge_eps = 1e-8;  // relative to the mean covariance diagonal
  double rank_tol = 1e-10;  // eigenvalues below rank_tol * max are dropped
  WeightView weight_view = WeightView::Auto;
};

struct CcaDirections {
  Eigen::VectorXd mean_x;
  Eigen::VectorXd mean_y;
  Eigen::MatrixXd V;  // d1 x k, columns v_i
  Eigen::MatrixXd W;  // d2 x k, columns w_i
  Eigen::VectorXd train_correlations;  // rho_i, non-increasing, in [0, 1]
  Eigen::VectorXd weights;             // alpha_i >= 0, sum 1
  WeightView weighted_view = WeightView::Representation;

  Eigen::Index rank() const { return V.cols(); }
  /// sum_i alpha_i rho_i on the training data.
  double train_score() const { return weights.dot(train_correlations); }
};

CcaDirections fit_cca(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                      const CcaOptions& options = {});

struct CcaEvaluation {
  double score = 0.0;
  Eigen::VectorXd correlations;        // per-direction test Pearson correlation
  std::vector<Eigen::Index> skipped;   // directions with a zero-variance variate
};

/// Test-set score sum_i alpha_i rho_i^test with training weights; directions
/// whose projected test variate has zero variance are skipped and the
/// remaining weights renormalized.
CcaEvaluation eval_cca_detail(const CcaDirections& dirs, const Eigen::MatrixXd& X_test,
                              const Eigen::MatrixXd& Y_test);
double eval_cca(const CcaDirections& dirs, const Eigen::MatrixXd& X_test,
                const Eigen::MatrixXd& Y_test);

struct LabelMatrix {
  std::vector<std::string> classes;
  Eigen::MatrixXd Y;  // n x classes.size(), one-hot
};

/// One-hot encoding against `classes` (sorted unique labels when empty).
LabelMatrix one_hot(std::span<const std::string> labels, std::vector<std::string> classes = {});

struct CcaProtocolOptions {
  std::uint32_t folds = 10;
  std::uint32_t eval_folds = 3;
  std::uint64_t seed = 0;
  /// Deal each label's rows round-robin across folds instead of a plain
  /// shuffled split.
  bool stratify_by_label = false;
  CcaOptions cca;
};

struct CcaFold {
  std::uint32_t fold = 0;
  double score = 0.0;
  Eigen::VectorXd train_rho;
  Eigen::VectorXd test_rho;
  std::vector<std::string> dropped_classes;  // absent from this fold's training split
};

struct CcaResult {
  std::uint32_t layer = 0;
  std::string accent = "all";
  std::vector<CcaFold> folds;
  double score = 0.0;  // mean of the fold scores

  std::vector<double> fold_scores() const;
};

/// Row indices of each fold after a seeded shuffle.
std::vector<std::vector<std::size_t>> split_folds(std::span<const std::string> labels,
                                                  std::uint32_t folds, std::uint64_t seed,
                                                  bool stratify_by_label);

CcaResult cca_protocol(const SegmentTable& table, const CcaProtocolOptions& options,
                       const std::string& accent = "all");

}  // namespace lprobe
