// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace bq::kernels {

/// Inner loops used by the quantiser and the GEMMs. Every variant must
/// produce results bit-identical to the scalar reference: GEMM accumulates
/// each output element sequentially over k with separate multiply and add,
/// and rounding is round-half-even under the default FP environment.
struct KernelTable {
    const char* name;

    /// c[m x n] = a[m x k] * b[k x n], row-major.
    void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n);

    /// max_i |x_i|, 0 for n == 0.
    double (*max_abs)(const double* x, std::size_t n);

    /// out_i = clamp(rint(x_i * inv_step), -limit, limit) * step + 0.0.
    /// `step` and `inv_step` are exact powers of two; the trailing +0.0
    /// turns a negative zero into the canonical positive zero.
    void (*quantize_uniform)(const double* x, double* out, std::size_t n, double inv_step,
                             double step, double limit);

    /// Sum of a_i * b_i where every operand is an integer and every partial
    /// sum stays below 2^53, so the result is exact in any order.
    double (*dot_exact)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table chosen at first use: AVX2 when available, unless the environment
/// variable BLOCKQUANT_SIMD is set to "scalar".
const KernelTable& active();

/// Every table usable on this machine, scalar first. Used by the
/// equivalence tests.
std::vector<const KernelTable*> available();

}  // namespace bq::kernels
