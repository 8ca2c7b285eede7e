#pragma once

// Data-parallel inner loops shared by pooling and t-SNE. Each kernel has a
// scalar reference implementation and, on x86-64, an AVX2+FMA variant. The
// variant is chosen once per process from CPUID; set LPROBE_SIMD=scalar to
// force the reference path. Variants agree to rounding (see test_kernels).

#include <cstddef>
#include <string_view>

namespace lprobe::simd {

struct KernelTable {
  std::string_view name;

  /// sum_k a[k] * b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);

  /// acc[k] += x[k], widening float to double.
  void (*accumulate_f32)(double* acc, const float* x, std::size_t n);

  /// out[j] = ||row_i - row_j||^2 for rows of a row-major n x dim matrix.
  void (*squared_distances)(const double* rows, std::size_t n, std::size_t dim, std::size_t i,
                            double* out);

  /// Student-t kernel row of a 2-D embedding stored as separate x / y arrays:
  /// out[j] = 1 / (1 + ||y_i - y_j||^2), out[i] = 0. Returns the row sum.
  double (*tsne_kernel_row)(const double* ys_x, const double* ys_y, std::size_t n, std::size_t i,
                            double* out);

  /// KL gradient for point i:
  /// g = 4 sum_j (exaggeration * p_ij - num_ij * inv_z) * num_ij * (y_i - y_j).
  void (*tsne_gradient_row)(const double* ys_x, const double* ys_y, const double* p_row,
                            const double* num_row, std::size_t n, std::size_t i,
                            double exaggeration, double inv_z, double* grad_x, double* grad_y);
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2();

/// The process-wide selection (computed on first use).
const KernelTable& active_kernels();

}  // namespace lprobe::simd
