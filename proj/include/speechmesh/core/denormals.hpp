#pragma once

// Backprop drives many float values below the normal range and x86
// subnormal arithmetic is orders of magnitude slower, so all numeric
// code runs with flush-to-zero / denormals-are-zero enabled. The mode
// is per thread: it is set once at static initialization for the main
// thread, and worker threads must call flush_denormals_to_zero()
// themselves.

#if defined(__SSE2__) || defined(__x86_64__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

namespace speechmesh {

inline void flush_denormals_to_zero() {
#if defined(__SSE2__) || defined(__x86_64__)
  _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
  _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
}

namespace detail {
inline const bool denormals_flushed_at_startup = [] {
  flush_denormals_to_zero();
  return true;
}();
}  // namespace detail

}  // namespace speechmesh
