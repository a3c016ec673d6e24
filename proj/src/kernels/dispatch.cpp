// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include <cstdlib>
#include <string_view>

#include "blockquant/kernels/kernels.hpp"

namespace bq::kernels {

#if defined(BLOCKQUANT_HAVE_AVX2)
const KernelTable* avx2_table_if_compiled();
#endif

const KernelTable* avx2_kernels() {
#if defined(BLOCKQUANT_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? avx2_table_if_compiled() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() {
    static const KernelTable* chosen = [] {
        const char* env = std::getenv("BLOCKQUANT_SIMD");
        if (env != nullptr && std::string_view(env) == "scalar") return &scalar_kernels();
        if (const KernelTable* t = avx2_kernels()) return t;
        return &scalar_kernels();
    }();
    return *chosen;
}

std::vector<const KernelTable*> available() {
    std::vector<const KernelTable*> out{&scalar_kernels()};
    if (const KernelTable* t = avx2_kernels()) out.push_back(t);
    return out;
}

}  // namespace bq::kernels
