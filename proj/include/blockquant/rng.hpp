// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <random>

namespace bq {

/// Seeded generator with portable derived distributions. The standard
/// library's distribution objects are implementation-defined, so uniform,
/// integer and normal draws are computed here from raw mt19937_64 output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) by rejection sampling; n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller (one value per call).
    double normal();

    /// Derives an independent stream seed from (seed, tag).
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag);

private:
    std::mt19937_64 engine_;
};

}  // namespace bq
