#include "ttmba/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace ttmba::kernels::detail {

namespace {

// R rows by V*2 columns of C in registers; products accumulate in k order.
template <int R, int V>
inline void block(std::size_t k, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc) {
  float64x2_t acc[R][V];
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < V; ++v) acc[r][v] = vld1q_f64(c + r * ldc + 2 * v);
  for (std::size_t p = 0; p < k; ++p) {
    float64x2_t bv[V];
    for (int v = 0; v < V; ++v) bv[v] = vld1q_f64(b + p * ldb + 2 * v);
    for (int r = 0; r < R; ++r) {
      const float64x2_t av = vdupq_n_f64(a[r * lda + p]);
      for (int v = 0; v < V; ++v) acc[r][v] = vfmaq_f64(acc[r][v], av, bv[v]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < V; ++v) vst1q_f64(c + r * ldc + 2 * v, acc[r][v]);
}

template <int R>
inline void row_panel(std::size_t n, std::size_t k, const double* a, std::size_t lda,
                      const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) block<R, 4>(k, a, lda, b + j, ldb, c + j, ldc);
  for (; j + 2 <= n; j += 2) block<R, 1>(k, a, lda, b + j, ldb, c + j, ldc);
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      double acc = c[r * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc = __builtin_fma(a[r * lda + p], b[p * ldb + j], acc);
      c[r * ldc + j] = acc;
    }
  }
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_panel<4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc);
  for (; i < m; ++i) row_panel<1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const float64x2_t av = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = __builtin_fma(alpha, x[i], y[i]);
}

double dot(std::size_t n, const double* x, const double* y) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) s = __builtin_fma(x[i], y[i], s);
  return s;
}

void add(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

}  // namespace

const KernelTable neon_table{Isa::Neon, gemm, axpy, dot, add};

}  // namespace ttmba::kernels::detail

#endif
