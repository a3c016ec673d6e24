// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>

#include "blockquant/kernels/kernels.hpp"

namespace bq::kernels {

namespace {

void gemm_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc = acc + a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
}

double max_abs_scalar(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

void quantize_uniform_scalar(const double* x, double* out, std::size_t n, double inv_step,
                             double step, double limit) {
    for (std::size_t i = 0; i < n; ++i) {
        const double q = std::nearbyint(x[i] * inv_step);
        out[i] = std::clamp(q, -limit, limit) * step + 0.0;
    }
}

double dot_exact_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

constexpr KernelTable kScalar{
    "scalar", gemm_scalar, max_abs_scalar, quantize_uniform_scalar, dot_exact_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace bq::kernels
