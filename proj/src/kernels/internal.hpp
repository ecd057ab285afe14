#pragma once

#include "rcnf/kernels.hpp"

namespace rcnf::kernels {

namespace scalar {
extern const KernelTable kTable;
}

#if defined(RCNF_HAVE_AVX2_TU)
namespace avx2 {
extern const KernelTable kTable;
}
#endif

}  // namespace rcnf::kernels
