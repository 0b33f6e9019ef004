#pragma once

#include <cstddef>

namespace svaclr::kernels {

enum class Binary { add, sub, mul };
enum class Unary { relu, exp, log, neg };

// Dense f64 kernels. The default entry points parallelise with OpenMP over
// independent output rows/elements; `serial` holds the reference
// implementations the tests compare against. Per-element accumulation order
// is identical in both, so outputs are bit-equal for any thread count.

// out(m x n) = a(m x k) * b(k x n)
void matmul(const double* a, const double* b, double* out, std::size_t m,
            std::size_t k, std::size_t n);
// out(m x n) = a(m x k) * b(n x k)^T
void matmul_nt(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n);
// out(m x n) = a(k x m)^T * b(k x n)
void matmul_tn(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n);

void binary(Binary op, const double* a, const double* b, double* out,
            std::size_t count);
void unary(Unary op, const double* a, double* out, std::size_t count);
void scale(const double* a, double alpha, double* out, std::size_t count);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t count);

namespace serial {
void matmul(const double* a, const double* b, double* out, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* out, std::size_t m,
               std::size_t k, std::size_t n);
void binary(Binary op, const double* a, const double* b, double* out,
            std::size_t count);
void unary(Unary op, const double* a, double* out, std::size_t count);
void scale(const double* a, double alpha, double* out, std::size_t count);
void axpy(double alpha, const double* x, double* y, std::size_t count);
}  // namespace serial

}  // namespace svaclr::kernels
