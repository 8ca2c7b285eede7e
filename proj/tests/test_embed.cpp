#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lprobe/embed.hpp"
#include "lprobe/error.hpp"
#include "lprobe/rng.hpp"
#include "synth.hpp"

using namespace lprobe;
using Eigen::MatrixXd;

namespace {

MatrixXd clusters(int k, int per, int dim, double sep, std::uint64_t seed, std::vector<std::string>* labels) {
  SplitMix64 rng(seed);
  MatrixXd centers(k, dim);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < dim; ++j) centers(c, j) = rng.normal();
  }
  MatrixXd x(k * per, dim);
  for (int c = 0; c < k; ++c) {
    centers.row(c) *= sep / centers.row(c).norm();
    for (int i = 0; i < per; ++i) {
      for (int j = 0; j < dim; ++j) x(c * per + i, j) = centers(c, j) + rng.normal();
      if (labels) labels->push_back("a" + std::to_string(c));
    }
  }
  return x;
}

}  // namespace

TEST_CASE("conditional affinities hit the target perplexity") {
  std::vector<std::string> labels;
  const MatrixXd x = clusters(3, 40, 10, 5.0, 1, &labels);
  const MatrixXd p = conditional_affinities(x, 20.0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p(i, i) == 0.0);
    double h = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (p(i, j) > 0) h -= p(i, j) * std::log(p(i, j));
    }
    CHECK(std::abs(h - std::log(20.0)) < 1e-4);
  }
  CHECK_THROWS_AS(conditional_affinities(MatrixXd::Ones(60, 4), 10.0), Error);
}

TEST_CASE("input validation") {
  EmbedConfig cfg;
  const MatrixXd small = MatrixXd::Random(40, 3);
  CHECK_THROWS_AS(tsne(small, cfg), Error);
  const MatrixXd fifty = MatrixXd::Random(50, 3);
  CHECK_THROWS_AS(tsne(fifty, cfg), Error);  // perplexity 30 > 49/3
  cfg.perplexity = 10;
  cfg.iterations = 100;
  CHECK_THROWS_AS(tsne(fifty, cfg), Error);
  try {
    EmbedConfig ok;
    ok.perplexity = 10;
    tsne(MatrixXd::Ones(60, 4), ok);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("infeasible") != std::string::npos);
  }
}

TEST_CASE("two far clusters separate; duplicates stay together") {
  std::vector<std::string> labels;
  MatrixXd x = clusters(2, 200, 50, 20.0, 2, &labels);
  // Duplicate ten points.
  for (int i = 0; i < 10; ++i) {
    x.row(200 + 20 * i) = x.row(20 * i);
    labels[static_cast<std::size_t>(200 + 20 * i)] = "a0";
  }
  EmbedConfig cfg;
  cfg.seed = 5;
  const EmbedResult r = tsne(x, cfg);
  REQUIRE(r.points.rows() == 400);
  CHECK(r.points.allFinite());
  CHECK(r.points.colwise().mean().cwiseAbs().maxCoeff() < 1e-6);
  CHECK(r.final_kl >= 0.0);
  // Perpendicular bisector of the two embedded means separates the clusters.
  const Eigen::RowVector2d m0 = r.points.topRows(200).colwise().mean();
  const Eigen::RowVector2d m1 = r.points.bottomRows(200).colwise().mean();
  const Eigen::RowVector2d dir = m1 - m0, mid = 0.5 * (m0 + m1);
  int errors = 0;
  for (int i = 0; i < 400; ++i) {
    const double side = (r.points.row(i) - mid).dot(dir);
    const bool second = labels[static_cast<std::size_t>(i)] == "a1";
    if ((side > 0) != second) ++errors;
  }
  CHECK(errors == 0);

  std::vector<double> all;
  for (int i = 0; i < 400; ++i) {
    for (int j = i + 1; j < 400; ++j) all.push_back((r.points.row(i) - r.points.row(j)).norm());
  }
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(all.size() / 20), all.end());
  const double p5 = all[all.size() / 20];
  for (int i = 0; i < 10; ++i) CHECK((r.points.row(20 * i) - r.points.row(200 + 20 * i)).norm() < p5);
}

TEST_CASE("kl log, determinism, job independence and row order") {
  std::vector<std::string> labels;
  const MatrixXd x = clusters(4, 30, 8, 6.0, 3, &labels);
  EmbedConfig cfg;
  cfg.perplexity = 15;
  cfg.seed = 9;
  const EmbedResult a = tsne(x, cfg);
  const EmbedResult b = tsne(x, cfg);
  CHECK(a.points == b.points);
  REQUIRE(a.kl_history.size() == 250);
  CHECK(a.kl_history.front().first == 750);
  CHECK(a.kl_history.back().first == 999);
  // Momentum can ring at the 1e-7 level near convergence.
  for (std::size_t i = 1; i < a.kl_history.size(); ++i) {
    CHECK(a.kl_history[i].second <= a.kl_history[i - 1].second * (1 + 1e-6));
  }
  CHECK(a.final_kl == doctest::Approx(a.kl_history.back().second));
  cfg.jobs = 3;
  CHECK(tsne(x, cfg).points == a.points);
  cfg.jobs = 1;
  cfg.seed = 10;
  CHECK(tsne(x, cfg).points != a.points);
  cfg.seed = 9;

  // Initial points are keyed by row content, so a permuted input starts from
  // the permuted layout. Summation order still differs and t-SNE amplifies
  // rounding, so only the quality of the result is compared.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  MatrixXd xp(x.rows(), x.cols());
  std::vector<std::string> lp;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    lp.push_back(labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
  }
  const EmbedResult c = tsne(xp, cfg);
  CHECK(knn_purity(a.points, labels, 10) == 1.0);
  CHECK(knn_purity(c.points, lp, 10) == 1.0);
  CHECK(c.final_kl == doctest::Approx(a.final_kl).epsilon(0.05));
}

TEST_CASE("point export round trip") {
  const auto dir = testing::fresh_dir("embed_export");
  EmbedResult r;
  r.points.resize(3, 2);
  r.points << 1.0 / 3.0, -2.5e-7, 123456.789, 0.0, -1.0, 2.0;
  r.meta = {{"us", "s1", "AA", 4}, {"uk", "s2", "AA", 4}, {"in", "s3", "AA", 4}};
  CHECK(export_points(r, dir / "p.csv") == 3);
  std::ifstream in(dir / "p.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 4);
  const EmbedResult back = read_points(dir / "p.csv");
  CHECK(back.meta == r.meta);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(back.points(i, j) == doctest::Approx(r.points(i, j)).epsilon(1e-8));
    }
  }
  EmbedResult empty;
  empty.points.resize(0, 2);
  std::vector<std::string> warnings;
  CHECK(export_points(empty, dir / "e.csv", &warnings) == 0);
  CHECK(warnings.size() == 1);
  CHECK(read_points(dir / "e.csv").points.rows() == 0);
}

TEST_CASE("knn purity") {
  Eigen::MatrixX2d p(6, 2);
  p << 0, 0, 0.1, 0, 0, 0.1, 10, 10, 10.1, 10, 10, 10.1;
  const std::vector<std::string> l{"a", "a", "a", "b", "b", "b"};
  CHECK(knn_purity(p, l, 2) == 1.0);
  const std::vector<std::string> mixed{"a", "b", "a", "b", "a", "b"};
  CHECK(knn_purity(p, mixed, 2) < 0.5);
  CHECK_THROWS_AS(knn_purity(p, l, 6), Error);
}
