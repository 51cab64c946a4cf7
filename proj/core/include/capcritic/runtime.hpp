#pragma once

namespace capcritic {

// Training allocates and frees the same tape buffers every step. glibc's
// default trim/mmap thresholds hand that memory back to the kernel each time,
// which costs more than the arithmetic at desk scale. No-op off glibc.
void retain_freed_memory();

}  // namespace capcritic
