// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/formats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "blockquant/errors.hpp"

namespace bq {

namespace {

// Top exponent field that still encodes finite values.
std::uint32_t top_finite_exponent(const FloatSpec& spec) {
    const std::uint32_t emax = spec.max_exponent_field();
    return spec.saturating ? emax : emax - 1;
}

double magnitude_of(std::uint32_t e, std::uint32_t m, const FloatSpec& spec) {
    const int M = spec.mantissa_bits;
    if (!spec.implicit_leading_bit) {
        return std::ldexp(static_cast<double>(m), static_cast<int>(e) - spec.bias - M);
    }
    if (spec.exponent_bits == 0) {
        // single binade, no subnormals
        return std::ldexp(static_cast<double>((std::uint64_t{1} << M) + m), -spec.bias - M);
    }
    if (e == 0) {
        return std::ldexp(static_cast<double>(m), 1 - spec.bias - M);
    }
    return std::ldexp(static_cast<double>((std::uint64_t{1} << M) + m),
                      static_cast<int>(e) - spec.bias - M);
}

struct Candidate {
    std::uint32_t e;
    std::uint32_t m;
    double value;
};

Candidate pick(const Candidate& lo, const Candidate& hi, double a, RoundingMode rounding) {
    const double dlo = a - lo.value;
    const double dhi = hi.value - a;
    if (dlo < dhi) return lo;
    if (dhi < dlo) return hi;
    if (rounding == RoundingMode::NearestEven) {
        const bool lo_even = (lo.m & 1u) == 0;
        const bool hi_even = (hi.m & 1u) == 0;
        if (lo_even != hi_even) return lo_even ? lo : hi;
    }
    return hi;
}

// Implicit-bit formats: magnitude is strictly increasing in the packed
// (e, m) code, so a binary search over codes finds the bracketing pair.
Candidate nearest_implicit(double a, const FloatSpec& spec, RoundingMode rounding) {
    const int M = spec.mantissa_bits;
    const std::uint64_t top = (static_cast<std::uint64_t>(top_finite_exponent(spec)) << M) |
                              spec.max_mantissa_field();
    auto split = [M](std::uint64_t code) {
        return std::pair<std::uint32_t, std::uint32_t>{
            static_cast<std::uint32_t>(code >> M),
            static_cast<std::uint32_t>(code & ((std::uint64_t{1} << M) - 1))};
    };
    auto value = [&](std::uint64_t code) {
        auto [e, m] = split(code);
        return magnitude_of(e, m, spec);
    };
    if (value(0) >= a) {
        return {0, 0, value(0)};
    }
    // invariant: value(lo) <= a < value(hi)
    std::uint64_t lo = 0;
    std::uint64_t hi = top;
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (value(mid) <= a) lo = mid; else hi = mid;
    }
    auto [le, lm] = split(lo);
    auto [he, hm] = split(hi);
    return pick({le, lm, value(lo)}, {he, hm, value(hi)}, a, rounding);
}

// DMF: the value set is a union of uniform grids, one per exponent. The
// nearest value lies on the finest grid whose range covers `a`, or is the
// top of the next finer grid.
Candidate nearest_denormal(double a, const FloatSpec& spec, RoundingMode rounding) {
    const int M = spec.mantissa_bits;
    const std::uint32_t mmax = spec.max_mantissa_field();
    if (M == 0) {
        return {0, 0, 0.0};
    }
    const std::uint32_t etop = top_finite_exponent(spec);
    auto grid_max = [&](std::uint32_t e) { return magnitude_of(e, mmax, spec); };

    // smallest e with grid_max(e) >= a; caller guarantees a < grid_max(etop)
    std::uint32_t lo_e = 0;
    std::uint32_t hi_e = etop;
    if (grid_max(0) >= a) {
        hi_e = 0;
    } else {
        while (hi_e - lo_e > 1) {
            const std::uint32_t mid = lo_e + (hi_e - lo_e) / 2;
            if (grid_max(mid) >= a) hi_e = mid; else lo_e = mid;
        }
    }
    const std::uint32_t e = hi_e;
    const double step = magnitude_of(e, 1, spec);
    const auto m_lo = static_cast<std::uint32_t>(std::floor(a / step));
    Candidate lo{e, m_lo, magnitude_of(e, m_lo, spec)};
    if (lo.value == a) return lo;
    if (e > 0) {
        const Candidate finer{e - 1, mmax, grid_max(e - 1)};
        if (finer.value > lo.value) lo = finer;
    }
    const Candidate hi{e, m_lo + 1, magnitude_of(e, m_lo + 1, spec)};
    return pick(lo, hi, a, rounding);
}

}  // namespace

void FloatSpec::validate() const {
    if (exponent_bits < 0 || mantissa_bits < 0) {
        throw ConfigError("float spec: negative field width");
    }
    if (width() > 32) {
        throw ConfigError("float spec: total width " + std::to_string(width()) + " exceeds 32 bits");
    }
    if (exponent_bits > 10) {
        throw ConfigError("float spec: more than 10 exponent bits is not representable in binary64");
    }
    if (!saturating && exponent_bits == 0) {
        throw ConfigError("float spec: a non-saturating format needs at least one exponent bit");
    }
    const long top = static_cast<long>(max_exponent_field()) - bias;
    const long bottom = 1L - bias - mantissa_bits;
    if (top > 1000 || bottom < -1000) {
        throw ConfigError("float spec: bias " + std::to_string(bias) + " leaves binary64 range");
    }
}

std::uint32_t BitPattern::pack(const FloatSpec& spec) const {
    const int M = spec.mantissa_bits;
    const int E = spec.exponent_bits;
    return static_cast<std::uint32_t>((static_cast<std::uint64_t>(sign) << (E + M)) |
                                      (static_cast<std::uint64_t>(exponent) << M) | mantissa);
}

BitPattern BitPattern::unpack(std::uint32_t code, const FloatSpec& spec) {
    const int M = spec.mantissa_bits;
    const int E = spec.exponent_bits;
    BitPattern p;
    p.mantissa = static_cast<std::uint32_t>(code & ((std::uint64_t{1} << M) - 1));
    p.exponent = static_cast<std::uint32_t>((code >> M) & ((std::uint64_t{1} << E) - 1));
    p.sign = static_cast<std::uint32_t>((static_cast<std::uint64_t>(code) >> (E + M)) & 1u);
    return p;
}

double decode(const BitPattern& p, const FloatSpec& spec) {
    const double sign = p.sign ? -1.0 : 1.0;
    if (!spec.saturating && p.exponent == spec.max_exponent_field()) {
        if (spec.implicit_leading_bit && p.mantissa == 0) {
            return sign * std::numeric_limits<double>::infinity();
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
    return sign * magnitude_of(p.exponent, p.mantissa, spec);
}

BitPattern encode_nearest(double x, const FloatSpec& spec, RoundingMode rounding) {
    if (!std::isfinite(x)) {
        throw InvalidInput("encode_nearest: non-finite input");
    }
    const double a = std::fabs(x);
    const double top = max_finite(spec);
    Candidate c{};
    if (a >= top) {
        c = {top_finite_exponent(spec), spec.max_mantissa_field(), top};
    } else if (spec.implicit_leading_bit) {
        c = nearest_implicit(a, spec, rounding);
    } else {
        c = nearest_denormal(a, spec, rounding);
    }
    BitPattern p{0, c.e, c.m};
    // canonical positive zero; otherwise keep the input's sign
    if (c.value != 0.0 && std::signbit(x)) p.sign = 1;
    return p;
}

double round_to_format(double x, const FloatSpec& spec, RoundingMode rounding) {
    return decode(encode_nearest(x, spec, rounding), spec);
}

std::vector<EnumeratedValue> enumerate_values(const FloatSpec& spec) {
    if (spec.width() > 16) {
        throw Unsupported("enumerate_values: width " + std::to_string(spec.width()) +
                          " exceeds 16 bits");
    }
    const std::uint32_t count = std::uint32_t{1} << spec.width();
    std::vector<EnumeratedValue> out;
    out.reserve(count);
    for (std::uint32_t code = 0; code < count; ++code) {
        const BitPattern p = BitPattern::unpack(code, spec);
        const double v = decode(p, spec);
        if (std::isfinite(v)) out.push_back({p, v, false});
    }
    std::stable_sort(out.begin(), out.end(), [&](const EnumeratedValue& l, const EnumeratedValue& r) {
        return l.value < r.value;
    });
    for (std::size_t i = 1; i < out.size(); ++i) {
        out[i].duplicate = out[i].value == out[i - 1].value;
    }
    return out;
}

double max_finite(const FloatSpec& spec) {
    return magnitude_of(top_finite_exponent(spec), spec.max_mantissa_field(), spec);
}

}  // namespace bq
