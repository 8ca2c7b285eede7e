#pragma once

// Linear prosody probes: ridge regression from pooled word representations to
// prominence / boundary targets, evaluated with speaker-grouped k-fold CV.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lprobe/segment_table.hpp"

namespace lprobe {

enum class ProsodyTarget { Prominence, Boundary };

std::string_view target_name(ProsodyTarget target);

/// y_hat = bias + sum_d weights[d] * (x[d] - feature_means[d]) / feature_stds[d]
struct RidgeModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double lambda = 0.0;
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_stds;  // zero-variance columns pinned to 1 with weight 0
};

/// Default penalty: 1e-4 * trace(standardized covariance) / D.
double default_ridge_lambda(const Eigen::MatrixXd& X);

/// Minimizes (1/n) ||y - b - Z w||^2 + lambda ||w||^2 over z-scored features Z
/// (bias unpenalized). lambda = nullopt uses default_ridge_lambda.
RidgeModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     std::optional<double> lambda = std::nullopt);

Eigen::VectorXd predict(const RidgeModel& model, const Eigen::MatrixXd& X);

double mean_squared_error(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

struct FoldAssignment {
  std::uint32_t folds = 4;
  std::map<std::string, std::uint32_t> speaker_to_fold;

  void validate() const;
};

/// Deals each accent's speakers (sorted by name) round-robin over the folds,
/// so every fold holds one speaker per accent whenever each accent has
/// exactly `folds` speakers.
FoldAssignment auto_assign_folds(const std::map<std::string, std::string>& speaker_accent,
                                 std::uint32_t folds = 4);

/// Throws (numerical failure) when the two speaker sets intersect.
void assert_no_speaker_leakage(const std::set<std::string>& train_speakers,
                               const std::set<std::string>& test_speakers, std::uint32_t fold);

struct ProbeFold {
  std::uint32_t fold = 0;
  double mse = 0.0;
  std::size_t test_rows = 0;
  std::set<std::string> train_speakers;
  std::set<std::string> test_speakers;
  std::map<std::string, double> per_accent_mse;
};

struct ProbeResult {
  std::uint32_t layer = 0;
  ProsodyTarget target = ProsodyTarget::Prominence;
  std::map<std::string, double> per_accent_mse;  // pooled over all test folds
  double overall_mse = 0.0;                      // sample-weighted mean of fold MSEs
  std::vector<ProbeFold> folds;
};

ProbeResult grouped_cv(const SegmentTable& table, ProsodyTarget target,
                       const FoldAssignment& assignment,
                       std::optional<double> lambda = std::nullopt);

}  // namespace lprobe
