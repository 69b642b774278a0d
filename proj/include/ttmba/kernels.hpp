#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision inner loops. Every kernel has a scalar reference and
// optional SIMD variants; the widest one the CPU supports is picked on first
// use, and TTMBA_ISA=scalar|avx2|neon in the environment overrides the choice.
namespace ttmba::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // C[m,n] += A[m,k] * B[k,n], row-major with leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  double (*dot)(std::size_t n, const double* x, const double* y);
  // out = x + y
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
};

bool isa_available(Isa isa);
const KernelTable& table(Isa isa);

const KernelTable& active();
// Replaces the active table. Throws std::invalid_argument when unavailable.
void set_active(Isa isa);

// Convenience wrappers over active(); all accumulate into C.
// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace ttmba::kernels
