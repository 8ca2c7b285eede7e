#pragma once

// Exact t-SNE of pooled segment vectors and plot-data export.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lprobe/segment_table.hpp"

namespace lprobe {

struct EmbedConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate(std::size_t n) const;
};

struct PointMeta {
  std::string accent;
  std::string speaker;
  std::string phoneme;
  std::uint32_t layer = 0;

  bool operator==(const PointMeta&) const = default;
};

struct EmbedResult {
  Eigen::MatrixX2d points;
  std::vector<PointMeta> meta;  // empty or one per point
  double final_kl = 0.0;
  std::vector<std::pair<int, double>> kl_history;  // (iteration, KL) over the final 250 iterations
};

/// Conditional Gaussian affinities: row i of the returned n x n matrix is
/// p_{j|i}, bandwidth chosen by bisection so the row's perplexity matches.
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& x, double perplexity, unsigned jobs = 1);

/// KL(P || Q) of an embedding against a symmetrized joint P (sums to 1).
double tsne_kl(const Eigen::MatrixXd& p, const Eigen::MatrixX2d& y);

/// Initial point i is N(0, 1e-4^2) drawn from a generator keyed by the seed
/// and a hash of row i's bytes, so permuting rows permutes the output.
EmbedResult tsne(const Eigen::MatrixXd& x, const EmbedConfig& config);

/// tsne over a table's rows with per-point metadata attached.
EmbedResult embed_table(const SegmentTable& table, const EmbedConfig& config);

/// CSV x,y,accent,speaker,phoneme,layer with coordinates at 9 significant
/// digits. Returns the number of data rows; an empty result writes the
/// header only and appends a warning.
std::size_t export_points(const EmbedResult& result, const std::filesystem::path& path,
                          std::vector<std::string>* warnings = nullptr);
EmbedResult read_points(const std::filesystem::path& path);

/// Mean fraction of each point's k nearest neighbours (self excluded) that
/// share its label.
double knn_purity(const Eigen::MatrixX2d& points, std::span<const std::string> labels, std::size_t k = 10);

}  // namespace lprobe
