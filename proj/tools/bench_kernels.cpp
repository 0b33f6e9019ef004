// Timing harness comparing the serial reference kernels against the
// OpenMP-parallel ones, plus the naive DFT against the radix-2 FFT.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "svaclr/dft.hpp"
#include "svaclr/kernels.hpp"
#include "svaclr/rng.hpp"
#include "svaclr/runtime.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  const auto start = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto elapsed = Clock::now() - start;
  return std::chrono::duration<double, std::milli>(elapsed).count() / reps;
}

std::vector<double> random_block(svaclr::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svaclr kernel benchmark: serial reference vs OpenMP"};
  std::size_t size = 256;
  int reps = 20;
  app.add_option("--size", size, "square matmul dimension (default 256)");
  app.add_option("--reps", reps, "repetitions per measurement (default 20)");
  CLI11_PARSE(app, argc, argv);

  svaclr::Rng rng(42);
  const std::size_t n = size;
  const auto a = random_block(rng, n * n);
  const auto b = random_block(rng, n * n);
  std::vector<double> out(n * n);

  std::printf("threads: %d\n\n", svaclr::runtime::thread_cap());
  std::printf("%-22s %12s %12s %9s\n", "kernel", "serial ms", "openmp ms",
              "speedup");

  const auto report = [&](const char* name, double serial, double parallel) {
    std::printf("%-22s %12.3f %12.3f %8.2fx\n", name, serial, parallel,
                serial / parallel);
  };

  report("matmul",
         time_ms(reps, [&] {
           svaclr::kernels::serial::matmul(a.data(), b.data(), out.data(), n,
                                           n, n);
         }),
         time_ms(reps, [&] {
           svaclr::kernels::matmul(a.data(), b.data(), out.data(), n, n, n);
         }));
  report("matmul_nt",
         time_ms(reps, [&] {
           svaclr::kernels::serial::matmul_nt(a.data(), b.data(), out.data(),
                                              n, n, n);
         }),
         time_ms(reps, [&] {
           svaclr::kernels::matmul_nt(a.data(), b.data(), out.data(), n, n, n);
         }));
  report("matmul_tn",
         time_ms(reps, [&] {
           svaclr::kernels::serial::matmul_tn(a.data(), b.data(), out.data(),
                                              n, n, n);
         }),
         time_ms(reps, [&] {
           svaclr::kernels::matmul_tn(a.data(), b.data(), out.data(), n, n, n);
         }));

  const std::size_t count = n * n;
  report("elementwise mul",
         time_ms(reps, [&] {
           svaclr::kernels::serial::binary(svaclr::kernels::Binary::mul,
                                           a.data(), b.data(), out.data(),
                                           count);
         }),
         time_ms(reps, [&] {
           svaclr::kernels::binary(svaclr::kernels::Binary::mul, a.data(),
                                   b.data(), out.data(), count);
         }));
  report("exp",
         time_ms(reps, [&] {
           svaclr::kernels::serial::unary(svaclr::kernels::Unary::exp,
                                          a.data(), out.data(), count);
         }),
         time_ms(reps, [&] {
           svaclr::kernels::unary(svaclr::kernels::Unary::exp, a.data(),
                                  out.data(), count);
         }));

  const auto window = random_block(rng, 512);
  std::printf("\n%-22s %12s %12s %9s\n", "transform (512 pts)", "naive ms",
              "fft ms", "speedup");
  const double naive_ms = time_ms(reps, [&] {
    volatile double sink =
        svaclr::dft::magnitude_naive(window, 1, 128)[0];
    (void)sink;
  });
  const double fft_ms = time_ms(reps, [&] {
    volatile double sink = svaclr::dft::magnitude_fft(window, 1, 128)[0];
    (void)sink;
  });
  report("dft magnitude 128", naive_ms, fft_ms);
  return 0;
}
