#include "capcritic/runtime.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace capcritic {

void retain_freed_memory() {
#ifdef __GLIBC__
  constexpr int kThreshold = 256 << 20;
  mallopt(M_TRIM_THRESHOLD, kThreshold);
  mallopt(M_MMAP_THRESHOLD, kThreshold);
#endif
}

}  // namespace capcritic
