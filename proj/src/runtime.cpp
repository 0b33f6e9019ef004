#include "svaclr/runtime.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace svaclr::runtime {

namespace {
std::atomic<int> g_thread_cap{0};  // 0 = not resolved yet

int resolve_from_env() {
  if (const char* env = std::getenv("SVACLR_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
      // fall through to the OpenMP default
    }
  }
  return omp_get_max_threads();
}
}  // namespace

int thread_cap() {
  int cap = g_thread_cap.load(std::memory_order_relaxed);
  if (cap == 0) {
    cap = resolve_from_env();
    g_thread_cap.store(cap, std::memory_order_relaxed);
  }
  return cap;
}

void set_thread_cap(int n) {
  // n < 1 drops the override; the next thread_cap() re-reads the environment
  g_thread_cap.store(n >= 1 ? n : 0, std::memory_order_relaxed);
}

}  // namespace svaclr::runtime
