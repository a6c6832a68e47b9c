#pragma once

#include "litatlas/kernels.hpp"

namespace litatlas::kernels {

// Defined in avx2.cpp when compiled for x86-64; the table pointer is null
// otherwise. CPU support is checked by the dispatcher, not here.
const KernelTable* avx2_table_unchecked();

}  // namespace litatlas::kernels
