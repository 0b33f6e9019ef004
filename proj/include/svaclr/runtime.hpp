#pragma once

namespace svaclr::runtime {

// Worker-thread cap for the OpenMP kernels. Resolved from SVACLR_THREADS on
// first use (falling back to the OpenMP default), overridable in-process.
// Every parallel kernel is written so its results are bit-identical for any
// cap value; the cap only trades wall time.
int thread_cap();
void set_thread_cap(int n);

}  // namespace svaclr::runtime
