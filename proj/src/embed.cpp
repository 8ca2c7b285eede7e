#include "lprobe/embed.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "lprobe/error.hpp"
#include "lprobe/parallel.hpp"
#include "lprobe/rng.hpp"
#include "lprobe/simd/kernels.hpp"

namespace lprobe {
namespace {

constexpr double kInitSigma = 1e-4;
constexpr double kEntropyTol = 1e-4;
constexpr int kMaxBisection = 64;
constexpr int kKlWindow = 250;

std::vector<double> row_major(const Eigen::MatrixXd& x) {
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  const auto d = static_cast<std::size_t>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) out[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(k)] = x(i, k);
  }
  return out;
}

std::string fmt9(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, r.ptr);
}

void recenter(Eigen::MatrixX2d& y) { y.rowwise() -= y.colwise().mean(); }

}  // namespace

void EmbedConfig::validate(std::size_t n) const {
  if (n < 50) fail_validation("tsne needs at least 50 points, got " + std::to_string(n));
  if (!(perplexity >= 5.0) || !(perplexity <= static_cast<double>(n - 1) / 3.0)) {
    fail_validation("perplexity " + fmt9(perplexity) + " is infeasible for n = " + std::to_string(n) +
                    " (need 5 <= perplexity <= (n - 1) / 3)");
  }
  if (iterations < 250) fail_validation("tsne needs at least 250 iterations");
  if (!(learning_rate > 0.0) || !(early_exaggeration >= 1.0) || exaggeration_iterations < 0) {
    fail_validation("tsne learning rate must be positive and exaggeration >= 1");
  }
}

Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& x, double perplexity, unsigned jobs) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto dim = static_cast<std::size_t>(x.cols());
  if (!x.allFinite()) fail_validation("tsne input contains non-finite values");
  const auto rows = row_major(x);
  const auto& k = simd::active_kernels();
  const double target = std::log(perplexity);
  // Row-major result; transposed into place at the end.
  std::vector<double> p(n * n, 0.0);
  std::vector<char> failed(n, 0);

  parallel_chunks(n, jobs, [&](std::size_t b, std::size_t e) {
    std::vector<double> d(n);
    for (std::size_t i = b; i < e; ++i) {
      k.squared_distances(rows.data(), n, dim, i, d.data());
      double dmin = std::numeric_limits<double>::infinity(), dsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) dmin = std::min(dmin, d[j]);
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) {
          d[j] -= dmin;
          dsum += d[j];
        }
      }
      double* row = p.data() + i * n;
      double beta = dsum > 0.0 ? static_cast<double>(n - 1) / dsum : 1.0;
      double lo = 0.0, hi = std::numeric_limits<double>::infinity();
      bool ok = false;
      for (int step = 0; step < kMaxBisection; ++step) {
        double s = 0.0, sd = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) {
            row[j] = 0.0;
            continue;
          }
          row[j] = std::exp(-beta * d[j]);
          s += row[j];
          sd += row[j] * d[j];
        }
        const double h = std::log(s) + beta * sd / s;
        const double inv = 1.0 / s;
        for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
        const double diff = h - target;
        if (std::abs(diff) < kEntropyTol) {
          ok = true;
          break;
        }
        if (diff > 0.0) {
          lo = beta;
          beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
        } else {
          hi = beta;
          beta = 0.5 * (lo + hi);
        }
      }
      if (!ok) failed[i] = 1;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) {
      fail_validation("perplexity " + fmt9(perplexity) + " is infeasible: bandwidth search for point " +
                      std::to_string(i) + " did not converge (degenerate input?)");
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p[i * n + j];
  }
  return out;
}

double tsne_kl(const Eigen::MatrixXd& p, const Eigen::MatrixX2d& y) {
  const auto n = static_cast<std::size_t>(y.rows());
  std::vector<double> xs(y.col(0).data(), y.col(0).data() + n), ys(y.col(1).data(), y.col(1).data() + n);
  std::vector<double> num(n * n);
  std::vector<double> sums(n);
  const auto& k = simd::active_kernels();
  for (std::size_t i = 0; i < n; ++i) sums[i] = k.tsne_kernel_row(xs.data(), ys.data(), n, i, num.data() + i * n);
  const double z = std::accumulate(sums.begin(), sums.end(), 0.0);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      if (i != j && pij > 0.0) kl += pij * std::log(pij * z / num[i * n + j]);
    }
  }
  return kl;
}

EmbedResult tsne(const Eigen::MatrixXd& x, const EmbedConfig& config) {
  const auto n = static_cast<std::size_t>(x.rows());
  config.validate(n);
  const Eigen::MatrixXd cond = conditional_affinities(x, config.perplexity, config.jobs);
  // Symmetric, so column i doubles as row i in contiguous memory.
  const Eigen::MatrixXd p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));

  EmbedResult result;
  result.points.resize(static_cast<Eigen::Index>(n), 2);
  const std::uint64_t base = derive_seed(config.seed, "tsne-init");
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(static_cast<Eigen::Index>(i), c);
    const auto* bytes = reinterpret_cast<const unsigned char*>(row.data());
    SplitMix64 rng(SplitMix64::mix64(base ^ fnv1a64({bytes, row.size() * sizeof(double)})));
    result.points(static_cast<Eigen::Index>(i), 0) = kInitSigma * rng.normal();
    result.points(static_cast<Eigen::Index>(i), 1) = kInitSigma * rng.normal();
  }
  recenter(result.points);

  const auto& k = simd::active_kernels();
  std::vector<double> xs(n), ys(n), num(n * n), sums(n), gx(n), gy(n), kl_rows(n);
  std::vector<double> ux(n, 0.0), uy(n, 0.0), gain_x(n, 1.0), gain_y(n, 1.0);
  const int log_from = config.iterations - kKlWindow;

  for (int it = 0; it < config.iterations; ++it) {
    const bool early = it < config.exaggeration_iterations;
    const double exaggeration = early ? config.early_exaggeration : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = result.points(static_cast<Eigen::Index>(i), 0);
      ys[i] = result.points(static_cast<Eigen::Index>(i), 1);
    }
    parallel_chunks(n, config.jobs, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) sums[i] = k.tsne_kernel_row(xs.data(), ys.data(), n, i, num.data() + i * n);
    });
    const double z = std::accumulate(sums.begin(), sums.end(), 0.0);
    const double inv_z = 1.0 / z;
    const bool log_kl = it >= log_from;
    parallel_chunks(n, config.jobs, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const double* prow = p.col(static_cast<Eigen::Index>(i)).data();
        k.tsne_gradient_row(xs.data(), ys.data(), prow, num.data() + i * n, n, i, exaggeration, inv_z,
                            &gx[i], &gy[i]);
        if (log_kl) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            if (j != i && prow[j] > 0.0) acc += prow[j] * std::log(prow[j] * z / num[i * n + j]);
          }
          kl_rows[i] = acc;
        }
      }
    });
    if (log_kl) result.kl_history.emplace_back(it, std::accumulate(kl_rows.begin(), kl_rows.end(), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(gx[i]) || !std::isfinite(gy[i])) {
        fail_numerical("tsne: non-finite gradient at iteration " + std::to_string(it));
      }
      auto step = [&](double g, double& u, double& gain) {
        gain = (g > 0.0) != (u > 0.0) ? gain + 0.2 : gain * 0.8;
        gain = std::max(gain, 0.01);
        u = momentum * u - config.learning_rate * gain * g;
        return u;
      };
      result.points(static_cast<Eigen::Index>(i), 0) += step(gx[i], ux[i], gain_x[i]);
      result.points(static_cast<Eigen::Index>(i), 1) += step(gy[i], uy[i], gain_y[i]);
    }
    recenter(result.points);
  }
  if (!result.points.allFinite()) fail_numerical("tsne: non-finite embedding");
  result.final_kl = std::max(0.0, tsne_kl(p, result.points));
  return result;
}

EmbedResult embed_table(const SegmentTable& table, const EmbedConfig& config) {
  EmbedResult r = tsne(table.features, config);
  r.meta.reserve(table.size());
  for (const auto& row : table.rows) r.meta.push_back({row.accent, row.speaker, row.label, table.layer});
  return r;
}

std::size_t export_points(const EmbedResult& result, const std::filesystem::path& path,
                          std::vector<std::string>* warnings) {
  const auto n = static_cast<std::size_t>(result.points.rows());
  if (!result.meta.empty() && result.meta.size() != n) {
    fail_validation("export_points: metadata count does not match point count");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot open " + path.string() + " for writing");
  out << "x,y,accent,speaker,phoneme,layer\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << fmt9(result.points(static_cast<Eigen::Index>(i), 0)) << ','
        << fmt9(result.points(static_cast<Eigen::Index>(i), 1));
    if (result.meta.empty()) {
      out << ",,,,\n";
      continue;
    }
    const auto& m = result.meta[i];
    for (const std::string* s : {&m.accent, &m.speaker, &m.phoneme}) {
      if (s->find_first_of(",\"\n") != std::string::npos) {
        fail_validation("export_points: field '" + *s + "' contains a CSV delimiter");
      }
      out << ',' << *s;
    }
    out << ',' << m.layer << '\n';
  }
  if (!out) fail_io("write failure on " + path.string());
  if (n == 0 && warnings) warnings->push_back("empty selection; wrote header only to " + path.string());
  return n;
}

EmbedResult read_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "x,y,accent,speaker,phoneme,layer") {
    fail_validation(path.string() + ": missing points header");
  }
  std::vector<std::array<double, 2>> pts;
  EmbedResult r;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      const auto c = line.find(',', pos);
      cols.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cols.size() != 6) fail_validation(where + ": expected 6 columns");
    std::array<double, 2> xy{};
    for (int a = 0; a < 2; ++a) {
      const auto& s = cols[static_cast<std::size_t>(a)];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), xy[static_cast<std::size_t>(a)]);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail_validation(where + ": bad coordinate");
    }
    pts.push_back(xy);
    std::uint32_t layer = 0;
    if (!cols[5].empty()) {
      const auto res = std::from_chars(cols[5].data(), cols[5].data() + cols[5].size(), layer);
      if (res.ec != std::errc()) fail_validation(where + ": bad layer");
    }
    r.meta.push_back({cols[2], cols[3], cols[4], layer});
  }
  r.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    r.points(static_cast<Eigen::Index>(i), 0) = pts[i][0];
    r.points(static_cast<Eigen::Index>(i), 1) = pts[i][1];
  }
  return r;
}

double knn_purity(const Eigen::MatrixX2d& points, std::span<const std::string> labels, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (labels.size() != n) fail_validation("knn_purity: label count does not match point count");
  if (k == 0 || k >= n) fail_validation("knn_purity: need 0 < k < n");
  double total = 0.0;
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = {(points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).squaredNorm(), j};
    }
    d[i].first = std::numeric_limits<double>::infinity();
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::size_t same = 0;
    for (std::size_t m = 0; m < k; ++m) same += labels[d[m].second] == labels[i] ? 1 : 0;
    total += static_cast<double>(same) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

}  // namespace lprobe
