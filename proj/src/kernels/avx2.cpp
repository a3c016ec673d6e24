// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//
// Compiled with -mavx2 only; reached through the dispatch table after a
// runtime CPU check. No FMA: each lane performs the same multiply-then-add
// sequence as the scalar reference.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "blockquant/kernels/kernels.hpp"

namespace bq::kernels {

namespace {

void gemm_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d acc0 = _mm256_setzero_pd();
            __m256d acc1 = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                const __m256d av = _mm256_set1_pd(arow[p]);
                const double* brow = b + p * n + j;
                acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(av, _mm256_loadu_pd(brow)));
                acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(av, _mm256_loadu_pd(brow + 4)));
            }
            _mm256_storeu_pd(crow + j, acc0);
            _mm256_storeu_pd(crow + j + 4, acc1);
        }
        for (; j + 4 <= n; j += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                acc = _mm256_add_pd(
                    acc, _mm256_mul_pd(_mm256_set1_pd(arow[p]), _mm256_loadu_pd(b + p * n + j)));
            }
            _mm256_storeu_pd(crow + j, acc);
        }
        for (; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc = acc + arow[p] * b[p * n + j];
            crow[j] = acc;
        }
    }
}

double max_abs_avx2(const double* x, std::size_t n) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d vmax = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vmax = _mm256_max_pd(vmax, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i)));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vmax);
    double m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

void quantize_uniform_avx2(const double* x, double* out, std::size_t n, double inv_step,
                           double step, double limit) {
    const __m256d vinv = _mm256_set1_pd(inv_step);
    const __m256d vstep = _mm256_set1_pd(step);
    const __m256d vhi = _mm256_set1_pd(limit);
    const __m256d vlo = _mm256_set1_pd(-limit);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d q = _mm256_round_pd(_mm256_mul_pd(_mm256_loadu_pd(x + i), vinv),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
        q = _mm256_min_pd(_mm256_max_pd(q, vlo), vhi);
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_mul_pd(q, vstep), zero));
    }
    for (; i < n; ++i) {
        const double q = std::nearbyint(x[i] * inv_step);
        out[i] = std::clamp(q, -limit, limit) * step + 0.0;
    }
}

double dot_exact_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

constexpr KernelTable kAvx2{
    "avx2", gemm_avx2, max_abs_avx2, quantize_uniform_avx2, dot_exact_avx2,
};

}  // namespace

const KernelTable* avx2_table_if_compiled() { return &kAvx2; }

}  // namespace bq::kernels
