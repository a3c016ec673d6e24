// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//
// Every kernel table must agree bit for bit with the scalar table.

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "blockquant/kernels/kernels.hpp"
#include "blockquant/rng.hpp"

using namespace bq;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal() * scale;
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("kernel tables") {
    const auto tables = kernels::available();
    REQUIRE(!tables.empty());
    CHECK(tables.front() == &kernels::scalar_kernels());
    bool active_listed = false;
    for (const auto* t : tables) active_listed = active_listed || t == &kernels::active();
    CHECK(active_listed);
    if (kernels::avx2_kernels() != nullptr) MESSAGE("avx2 kernels available");
}

TEST_CASE("gemm variants agree bit for bit, including ragged shapes") {
    Rng rng(1);
    const auto& ref = kernels::scalar_kernels();
    for (const auto* t : kernels::available()) {
        for (std::size_t m : {1u, 3u, 8u}) {
            for (std::size_t k : {1u, 5u, 16u, 37u}) {
                for (std::size_t n : {1u, 3u, 4u, 7u, 9u, 33u}) {
                    const auto a = random_vec(m * k, rng);
                    const auto b = random_vec(k * n, rng);
                    std::vector<double> c0(m * n), c1(m * n);
                    ref.gemm(a.data(), b.data(), c0.data(), m, k, n);
                    t->gemm(a.data(), b.data(), c1.data(), m, k, n);
                    CHECK(bit_equal(c0, c1));
                    // sequential accumulation over k
                    double acc = 0.0;
                    for (std::size_t p = 0; p < k; ++p) acc = acc + a[p] * b[p * n];
                    CHECK(c0[0] == acc);
                }
            }
        }
    }
}

TEST_CASE("max_abs variants agree") {
    Rng rng(2);
    for (const auto* t : kernels::available()) {
        CHECK(t->max_abs(nullptr, 0) == 0.0);
        for (std::size_t n = 1; n < 40; ++n) {
            auto v = random_vec(n, rng);
            v[rng.below(n)] = -7.5;
            CHECK(t->max_abs(v.data(), n) == kernels::scalar_kernels().max_abs(v.data(), n));
            CHECK(t->max_abs(v.data(), n) >= 7.5);
        }
    }
}

TEST_CASE("quantize_uniform variants agree, including ties and clamping") {
    Rng rng(3);
    const auto& ref = kernels::scalar_kernels();
    for (const auto* t : kernels::available()) {
        for (std::size_t n : {1u, 4u, 15u, 16u, 19u}) {
            auto x = random_vec(n, rng, 4.0);
            // exact halves, negative zero candidates and out of range values
            if (n > 3) {
                x[0] = 2.5 * 0.25;
                x[1] = -0.5 * 0.25;
                x[2] = 1000.0;
                x[3] = -1000.0;
            }
            std::vector<double> o0(n), o1(n);
            ref.quantize_uniform(x.data(), o0.data(), n, 4.0, 0.25, 7.0);
            t->quantize_uniform(x.data(), o1.data(), n, 4.0, 0.25, 7.0);
            CHECK(bit_equal(o0, o1));
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::fabs(o0[i]) <= 1.75);
                CHECK_FALSE((o0[i] == 0.0 && std::signbit(o0[i])));
            }
            if (n > 3) {
                CHECK(o0[0] == 0.5);  // 2.5 -> 2
                CHECK(o0[1] == 0.0);  // -0.5 -> 0, positive
                CHECK(o0[2] == 1.75);
                CHECK(o0[3] == -1.75);
            }
        }
    }
}

TEST_CASE("dot_exact variants agree on integer operands") {
    Rng rng(4);
    for (const auto* t : kernels::available()) {
        for (std::size_t n = 0; n < 70; n += 3) {
            std::vector<double> a(n), b(n);
            double want = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = static_cast<double>(static_cast<int>(rng.below(255)) - 127);
                b[i] = static_cast<double>(static_cast<int>(rng.below(255)) - 127);
                want += a[i] * b[i];
            }
            CHECK(t->dot_exact(a.data(), b.data(), n) == want);
        }
    }
}
