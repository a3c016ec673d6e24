// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "blockquant/formats.hpp"

namespace bq {

enum class BlockKind {
    Identity,  // no quantisation (binary64 passthrough, 32-bit for accounting)
    FixedPoint,
    MiniFloat,
    DMF,
    BFP,
    BM,
    BL,
};

std::string_view to_string(BlockKind kind);
std::optional<BlockKind> parse_block_kind(std::string_view name);

struct BlockShape {
    std::size_t rows = 1;
    std::size_t cols = 16;
    friend bool operator==(const BlockShape&, const BlockShape&) = default;
};

/// Block quantisation descriptor.
///
/// Field use per kind:
///  - FixedPoint: `mantissa_bits` magnitude bits (W = 1 + M), per-tensor scale
///  - MiniFloat / DMF: `element` is the full scalar format, block [1,1]
///  - BFP: `mantissa_bits` per element, `shared_bits` shared exponent width
///  - BM: `element` gives E and M, its bias is replaced by the shared bias
///  - BL: `element` gives E (M = 0), shared bias of `shared_bits`
struct BlockFormat {
    BlockKind kind = BlockKind::Identity;
    FloatSpec element{};
    int mantissa_bits = 0;
    int shared_bits = 0;
    BlockShape block{1, 1};

    static BlockFormat identity();
    static BlockFormat fixed_point(int width);
    static BlockFormat minifloat(int e, int m);
    static BlockFormat dmf(int e, int m);
    static BlockFormat elementwise(const FloatSpec& spec);
    static BlockFormat bfp(int mantissa_bits, int shared_exponent_bits = 8, BlockShape block = {});
    /// BFP with `width` = 1 sign + (width-1) mantissa bits.
    static BlockFormat bfp_width(int width, BlockShape block = {});
    static BlockFormat bm(int e, int m, int shared_bias_bits = 8, BlockShape block = {});
    static BlockFormat bl(int e, int shared_bias_bits = 8, BlockShape block = {});

    /// Named rows of the standard configuration table: "fp32", "fixed_w8a8",
    /// "minifloat_w8a8", "dmf_w8a8", "bfp_w8a8", "bfp_w6a6", "bfp_w4a4",
    /// "bm_w8a8", "bl_w8a8". Throws ConfigError on unknown names.
    static BlockFormat preset(std::string_view name);

    /// Bits stored per element, excluding shared fields.
    int element_bits() const;
    /// Bits of the per-block shared field (0 for non-block formats).
    int shared_field_bits() const;
    bool is_block_format() const;

    void validate() const;
    std::string describe() const;

    friend bool operator==(const BlockFormat&, const BlockFormat&) = default;
};

}  // namespace bq
