#include "lprobe/simd/kernels.hpp"

namespace lprobe::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

void accumulate_f32_scalar(double* acc, const float* x, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) acc[k] += static_cast<double>(x[k]);
}

void squared_distances_scalar(const double* rows, std::size_t n, std::size_t dim, std::size_t i,
                              double* out) {
  const double* ri = rows + i * dim;
  for (std::size_t j = 0; j < n; ++j) {
    const double* rj = rows + j * dim;
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = ri[k] - rj[k];
      s += d * d;
    }
    out[j] = s;
  }
}

double tsne_kernel_row_scalar(const double* xs, const double* ys, std::size_t n, std::size_t i,
                              double* out) {
  double sum = 0.0;
  const double xi = xs[i], yi = ys[i];
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = xi - xs[j], dy = yi - ys[j];
    out[j] = 1.0 / (1.0 + (dx * dx + dy * dy));
    sum += out[j];
  }
  sum -= out[i];
  out[i] = 0.0;
  return sum;
}

void tsne_gradient_row_scalar(const double* xs, const double* ys, const double* p_row,
                              const double* num_row, std::size_t n, std::size_t i,
                              double exaggeration, double inv_z, double* gx, double* gy) {
  double ax = 0.0, ay = 0.0;
  const double xi = xs[i], yi = ys[i];
  for (std::size_t j = 0; j < n; ++j) {
    const double num = num_row[j];
    const double c = (exaggeration * p_row[j] - num * inv_z) * num;
    ax += c * (xi - xs[j]);
    ay += c * (yi - ys[j]);
  }
  *gx = 4.0 * ax;
  *gy = 4.0 * ay;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",
                                 dot_scalar,
                                 accumulate_f32_scalar,
                                 squared_distances_scalar,
                                 tsne_kernel_row_scalar,
                                 tsne_gradient_row_scalar};
  return table;
}

}  // namespace lprobe::simd
