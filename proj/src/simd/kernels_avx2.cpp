// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include <immintrin.h>

#include "lprobe/simd/kernels.hpp"

namespace lprobe::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

void accumulate_f32_avx2(double* acc, const float* x, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d wide = _mm256_cvtps_pd(_mm_loadu_ps(x + k));
    _mm256_storeu_pd(acc + k, _mm256_add_pd(_mm256_loadu_pd(acc + k), wide));
  }
  for (; k < n; ++k) acc[k] += static_cast<double>(x[k]);
}

void squared_distances_avx2(const double* rows, std::size_t n, std::size_t dim, std::size_t i,
                            double* out) {
  const double* ri = rows + i * dim;
  for (std::size_t j = 0; j < n; ++j) {
    const double* rj = rows + j * dim;
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= dim; k += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(ri + k), _mm256_loadu_pd(rj + k));
      acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; k < dim; ++k) {
      const double d = ri[k] - rj[k];
      s += d * d;
    }
    out[j] = s;
  }
}

double tsne_kernel_row_avx2(const double* xs, const double* ys, std::size_t n, std::size_t i,
                            double* out) {
  const __m256d xi = _mm256_set1_pd(xs[i]);
  const __m256d yi = _mm256_set1_pd(ys[i]);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dx = _mm256_sub_pd(xi, _mm256_loadu_pd(xs + j));
    const __m256d dy = _mm256_sub_pd(yi, _mm256_loadu_pd(ys + j));
    const __m256d d2 = _mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy));
    const __m256d num = _mm256_div_pd(one, _mm256_add_pd(one, d2));
    _mm256_storeu_pd(out + j, num);
    acc = _mm256_add_pd(acc, num);
  }
  double sum = hsum(acc);
  for (; j < n; ++j) {
    const double dx = xs[i] - xs[j], dy = ys[i] - ys[j];
    out[j] = 1.0 / (1.0 + (dx * dx + dy * dy));
    sum += out[j];
  }
  sum -= out[i];
  out[i] = 0.0;
  return sum;
}

void tsne_gradient_row_avx2(const double* xs, const double* ys, const double* p_row,
                            const double* num_row, std::size_t n, std::size_t i,
                            double exaggeration, double inv_z, double* gx, double* gy) {
  const __m256d xi = _mm256_set1_pd(xs[i]);
  const __m256d yi = _mm256_set1_pd(ys[i]);
  const __m256d ex = _mm256_set1_pd(exaggeration);
  const __m256d iz = _mm256_set1_pd(inv_z);
  __m256d ax = _mm256_setzero_pd();
  __m256d ay = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d num = _mm256_loadu_pd(num_row + j);
    const __m256d p = _mm256_loadu_pd(p_row + j);
    const __m256d c = _mm256_mul_pd(_mm256_sub_pd(_mm256_mul_pd(ex, p), _mm256_mul_pd(num, iz)), num);
    ax = _mm256_fmadd_pd(c, _mm256_sub_pd(xi, _mm256_loadu_pd(xs + j)), ax);
    ay = _mm256_fmadd_pd(c, _mm256_sub_pd(yi, _mm256_loadu_pd(ys + j)), ay);
  }
  double sx = hsum(ax), sy = hsum(ay);
  for (; j < n; ++j) {
    const double num = num_row[j];
    const double c = (exaggeration * p_row[j] - num * inv_z) * num;
    sx += c * (xs[i] - xs[j]);
    sy += c * (ys[i] - ys[j]);
  }
  *gx = 4.0 * sx;
  *gy = 4.0 * sy;
}

}  // namespace

const KernelTable* avx2_kernels_impl() {
  static const KernelTable table{"avx2",
                                 dot_avx2,
                                 accumulate_f32_avx2,
                                 squared_distances_avx2,
                                 tsne_kernel_row_avx2,
                                 tsne_gradient_row_avx2};
  return &table;
}

}  // namespace lprobe::simd
