#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttmba/kernels.hpp"

namespace ttmba::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa))
    throw std::invalid_argument("kernel set '" + std::string(isa_name(isa)) + "' is not available");
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
    case Isa::Neon: return detail::neon_table;
#endif
    default: return detail::scalar_table;
  }
}

namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("TTMBA_ISA")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
      if (want == isa_name(isa) && isa_available(isa)) return &table(isa);
  }
  for (Isa isa : {Isa::Avx2, Isa::Neon})
    if (isa_available(isa)) return &table(isa);
  return &detail::scalar_table;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{pick_default()};
  return ptr;
}

std::vector<double>& scratch(std::size_t n) {
  thread_local std::vector<double> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void set_active(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  active().gemm(m, n, k, a, k, b, n, c, n);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  auto& bt = scratch(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  active().gemm(m, n, k, a, k, bt.data(), n, c, n);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  auto& at = scratch(m * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
  active().gemm(m, n, k, at.data(), k, b, n, c, n);
}

}  // namespace ttmba::kernels
