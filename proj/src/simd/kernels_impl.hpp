#pragma once

#include "harmony/simd/kernels.hpp"

namespace harmony::simd::detail {

extern const KernelTable scalar_table;

#if defined(HARMONY_BUILD_AVX2)
extern const KernelTable avx2_table;
#endif

} // namespace harmony::simd::detail
