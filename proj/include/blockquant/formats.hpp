// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <vector>

namespace bq {

/// Scalar floating-point format with a sign bit, E exponent bits and M
/// mantissa bits.
///
/// `implicit_leading_bit` selects MiniFloat semantics (subnormals at e=0,
/// normals carry a hidden 1) versus denormalised MiniFloat (DMF), where
/// every exponent scales a plain m/2^M fraction. A saturating format has no
/// infinity or NaN encodings: the top exponent is an ordinary binade.
///
/// With E=0 and the implicit bit on, the single exponent value is both the
/// subnormal and the top exponent; the top binade wins, so such a format has
/// no zero (e.g. E=0, M=3, b=0 spans [1, 1.875]).
struct FloatSpec {
    int exponent_bits = 4;
    int mantissa_bits = 3;
    int bias = 7;
    bool implicit_leading_bit = true;
    bool saturating = true;

    static int default_bias(int exponent_bits) {
        return exponent_bits >= 1 ? (1 << (exponent_bits - 1)) - 1 : 0;
    }
    static FloatSpec minifloat(int e, int m) { return {e, m, default_bias(e), true, true}; }
    static FloatSpec minifloat(int e, int m, int bias) { return {e, m, bias, true, true}; }
    static FloatSpec dmf(int e, int m) { return {e, m, default_bias(e), false, true}; }
    static FloatSpec dmf(int e, int m, int bias) { return {e, m, bias, false, true}; }

    int width() const { return 1 + exponent_bits + mantissa_bits; }
    std::uint32_t max_exponent_field() const { return (std::uint32_t{1} << exponent_bits) - 1; }
    std::uint32_t max_mantissa_field() const { return (std::uint32_t{1} << mantissa_bits) - 1; }

    /// Throws ConfigError when widths are out of range.
    void validate() const;

    friend bool operator==(const FloatSpec&, const FloatSpec&) = default;
};

struct BitPattern {
    std::uint32_t sign = 0;
    std::uint32_t exponent = 0;
    std::uint32_t mantissa = 0;

    /// sign | exponent | mantissa packed into the low `spec.width()` bits.
    std::uint32_t pack(const FloatSpec& spec) const;
    static BitPattern unpack(std::uint32_t code, const FloatSpec& spec);

    friend bool operator==(const BitPattern&, const BitPattern&) = default;
};

enum class RoundingMode {
    /// Nearest value; ties go to the even mantissa field, and when both
    /// candidates share parity (M=0), to the larger magnitude.
    NearestEven,
    /// Nearest value; ties go to the larger magnitude.
    NearestAway,
};

/// Exact binary64 value of `p`. Non-saturating formats yield +-inf / NaN on
/// the reserved top exponent.
double decode(const BitPattern& p, const FloatSpec& spec);

/// Pattern whose value is nearest to `x`. Magnitudes beyond max_finite
/// saturate; zero results are always the positive zero pattern.
/// Throws InvalidInput for non-finite x.
BitPattern encode_nearest(double x, const FloatSpec& spec,
                          RoundingMode rounding = RoundingMode::NearestEven);

/// Convenience: decode(encode_nearest(x)).
double round_to_format(double x, const FloatSpec& spec,
                       RoundingMode rounding = RoundingMode::NearestEven);

struct EnumeratedValue {
    BitPattern pattern;
    double value = 0.0;
    /// True when an earlier entry in the sorted list has the same value.
    bool duplicate = false;
};

/// Every finite value of the format, ascending (ties ordered by packed
/// code). Throws Unsupported for widths above 16 bits.
std::vector<EnumeratedValue> enumerate_values(const FloatSpec& spec);

double max_finite(const FloatSpec& spec);

}  // namespace bq
