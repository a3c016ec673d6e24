// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/block_format.hpp"

#include <array>
#include <utility>

#include "blockquant/errors.hpp"

namespace bq {

namespace {

constexpr std::array<std::pair<BlockKind, std::string_view>, 7> kKindNames{{
    {BlockKind::Identity, "identity"},
    {BlockKind::FixedPoint, "fixed"},
    {BlockKind::MiniFloat, "minifloat"},
    {BlockKind::DMF, "dmf"},
    {BlockKind::BFP, "bfp"},
    {BlockKind::BM, "bm"},
    {BlockKind::BL, "bl"},
}};

}  // namespace

std::string_view to_string(BlockKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<BlockKind> parse_block_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

BlockFormat BlockFormat::identity() { return {}; }

BlockFormat BlockFormat::fixed_point(int width) {
    BlockFormat f;
    f.kind = BlockKind::FixedPoint;
    f.mantissa_bits = width - 1;
    return f;
}

BlockFormat BlockFormat::minifloat(int e, int m) { return elementwise(FloatSpec::minifloat(e, m)); }

BlockFormat BlockFormat::dmf(int e, int m) { return elementwise(FloatSpec::dmf(e, m)); }

BlockFormat BlockFormat::elementwise(const FloatSpec& spec) {
    BlockFormat f;
    f.kind = spec.implicit_leading_bit ? BlockKind::MiniFloat : BlockKind::DMF;
    f.element = spec;
    return f;
}

BlockFormat BlockFormat::bfp(int mantissa_bits, int shared_exponent_bits, BlockShape block) {
    BlockFormat f;
    f.kind = BlockKind::BFP;
    f.mantissa_bits = mantissa_bits;
    f.shared_bits = shared_exponent_bits;
    f.block = block;
    return f;
}

BlockFormat BlockFormat::bfp_width(int width, BlockShape block) { return bfp(width - 1, 8, block); }

BlockFormat BlockFormat::bm(int e, int m, int shared_bias_bits, BlockShape block) {
    BlockFormat f;
    f.kind = BlockKind::BM;
    f.element = FloatSpec::minifloat(e, m);
    f.shared_bits = shared_bias_bits;
    f.block = block;
    return f;
}

BlockFormat BlockFormat::bl(int e, int shared_bias_bits, BlockShape block) {
    BlockFormat f;
    f.kind = BlockKind::BL;
    f.element = FloatSpec::minifloat(e, 0);
    f.shared_bits = shared_bias_bits;
    f.block = block;
    return f;
}

BlockFormat BlockFormat::preset(std::string_view name) {
    if (name == "fp32") return identity();
    if (name == "fixed_w8a8") return fixed_point(8);
    if (name == "minifloat_w8a8") return minifloat(4, 3);
    if (name == "dmf_w8a8") return dmf(4, 3);
    if (name == "bfp_w8a8") return bfp(7);
    if (name == "bfp_w6a6") return bfp(5);
    if (name == "bfp_w4a4") return bfp(3);
    if (name == "bm_w8a8") return bm(4, 3);
    if (name == "bl_w8a8") return bl(7);
    throw ConfigError("unknown format preset '" + std::string(name) + "'");
}

int BlockFormat::element_bits() const {
    switch (kind) {
        case BlockKind::Identity: return 32;
        case BlockKind::FixedPoint: return 1 + mantissa_bits;
        case BlockKind::MiniFloat:
        case BlockKind::DMF:
        case BlockKind::BM: return element.width();
        case BlockKind::BL: return 1 + element.exponent_bits;
        case BlockKind::BFP: return 1 + mantissa_bits;
    }
    return 32;
}

int BlockFormat::shared_field_bits() const { return is_block_format() ? shared_bits : 0; }

bool BlockFormat::is_block_format() const {
    return kind == BlockKind::BFP || kind == BlockKind::BM || kind == BlockKind::BL;
}

void BlockFormat::validate() const {
    if (block.rows == 0 || block.cols == 0) {
        throw ConfigError("block shape entries must be >= 1");
    }
    switch (kind) {
        case BlockKind::Identity: return;
        case BlockKind::FixedPoint:
            if (mantissa_bits < 1 || mantissa_bits > 31) {
                throw ConfigError("fixed-point width must be in [2, 32]");
            }
            return;
        case BlockKind::MiniFloat:
        case BlockKind::DMF:
            element.validate();
            return;
        case BlockKind::BFP:
            if (mantissa_bits < 1 || mantissa_bits > 31) {
                throw ConfigError("bfp mantissa bits must be in [1, 31]");
            }
            if (shared_bits < 1 || shared_bits > 10) {
                throw ConfigError("bfp shared exponent bits must be in [1, 10]");
            }
            return;
        case BlockKind::BM:
        case BlockKind::BL:
            if (kind == BlockKind::BL && element.mantissa_bits != 0) {
                throw ConfigError("bl elements carry no mantissa bits");
            }
            if (element.exponent_bits < 1) {
                throw ConfigError("bm/bl elements need at least one exponent bit");
            }
            if (shared_bits < 1 || shared_bits > 9) {
                throw ConfigError("bm/bl shared bias bits must be in [1, 9]");
            }
            // every shared bias value must give a valid element format
            for (int bias : {0, (1 << shared_bits) - 1}) {
                FloatSpec s = element;
                s.bias = bias;
                s.validate();
            }
            return;
    }
}

std::string BlockFormat::describe() const {
    const std::string blk = std::to_string(block.rows) + "x" + std::to_string(block.cols);
    switch (kind) {
        case BlockKind::Identity: return "identity";
        case BlockKind::FixedPoint: return "fixed(w=" + std::to_string(element_bits()) + ")";
        case BlockKind::MiniFloat:
        case BlockKind::DMF:
            return std::string(to_string(kind)) + "(e=" + std::to_string(element.exponent_bits) +
                   ",m=" + std::to_string(element.mantissa_bits) +
                   ",b=" + std::to_string(element.bias) + ")";
        case BlockKind::BFP:
            return "bfp(m=" + std::to_string(mantissa_bits) + ",e=" + std::to_string(shared_bits) +
                   ",block=" + blk + ")";
        case BlockKind::BM:
            return "bm(e=" + std::to_string(element.exponent_bits) + ",m=" +
                   std::to_string(element.mantissa_bits) + ",b=" + std::to_string(shared_bits) +
                   ",block=" + blk + ")";
        case BlockKind::BL:
            return "bl(e=" + std::to_string(element.exponent_bits) + ",b=" +
                   std::to_string(shared_bits) + ",block=" + blk + ")";
    }
    return "unknown";
}

}  // namespace bq
