#include "svaclr/kernels.hpp"

#include <cmath>
#include <cstdint>

#include "svaclr/runtime.hpp"

namespace svaclr::kernels {

namespace {
// Below this many output elements the fork/join overhead dominates; the
// serial path is used. Results do not depend on where the cutoff sits.
constexpr std::size_t kParallelCutoff = 16 * 1024;

inline double apply_binary(Binary op, double x, double y) {
  switch (op) {
    case Binary::add: return x + y;
    case Binary::sub: return x - y;
    case Binary::mul: return x * y;
  }
  return 0.0;
}

inline double apply_unary(Unary op, double x) {
  switch (op) {
    case Unary::relu: return x > 0.0 ? x : 0.0;
    case Unary::exp: return std::exp(x);
    case Unary::log: return std::log(x);
    case Unary::neg: return -x;
  }
  return 0.0;
}
}  // namespace

namespace serial {

void matmul(const double* a, const double* b, double* out, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += api * brow[j];
    }
  }
}

void binary(Binary op, const double* a, const double* b, double* out,
            std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) out[i] = apply_binary(op, a[i], b[i]);
}

void unary(Unary op, const double* a, double* out, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) out[i] = apply_unary(op, a[i]);
}

void scale(const double* a, double alpha, double* out, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) out[i] = a[i] * alpha;
}

void axpy(double alpha, const double* x, double* y, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) y[i] += alpha * x[i];
}

}  // namespace serial

void matmul(const double* a, const double* b, double* out, std::size_t m,
            std::size_t k, std::size_t n) {
  if (m * n * k < kParallelCutoff || m < 2) {
    serial::matmul(a, b, out, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* row = out + static_cast<std::size_t>(i) * n;
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (std::size_t j = 0; j < n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n) {
  if (m * n * k < kParallelCutoff || m < 2) {
    serial::matmul_nt(a, b, out, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n) {
  if (m * n * k < kParallelCutoff || m < 2) {
    serial::matmul_tn(a, b, out, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* row = out + static_cast<std::size_t>(i) * n;
    for (std::size_t j = 0; j < n; ++j) row[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + static_cast<std::size_t>(i)];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += api * brow[j];
    }
  }
}

void binary(Binary op, const double* a, const double* b, double* out,
            std::size_t count) {
  if (count < kParallelCutoff) {
    serial::binary(op, a, b, out, count);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    out[i] = apply_binary(op, a[i], b[i]);
}

void unary(Unary op, const double* a, double* out, std::size_t count) {
  if (count < kParallelCutoff) {
    serial::unary(op, a, out, count);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    out[i] = apply_unary(op, a[i]);
}

void scale(const double* a, double alpha, double* out, std::size_t count) {
  if (count < kParallelCutoff) {
    serial::scale(a, alpha, out, count);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    out[i] = a[i] * alpha;
}

void axpy(double alpha, const double* x, double* y, std::size_t count) {
  if (count < kParallelCutoff) {
    serial::axpy(alpha, x, y, count);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(runtime::thread_cap())
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    y[i] += alpha * x[i];
}

}  // namespace svaclr::kernels
