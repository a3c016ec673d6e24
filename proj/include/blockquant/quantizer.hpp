// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "blockquant/block_format.hpp"
#include "blockquant/formats.hpp"
#include "blockquant/tensor.hpp"

namespace bq {

/// One rectangular block of a matrix; trailing blocks may be smaller.
struct Block {
    std::size_t row0 = 0;
    std::size_t col0 = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
    friend bool operator==(const Block&, const Block&) = default;
};

/// Row-major list of blocks tiling a [rows, cols] matrix exactly once.
std::vector<Block> partition_blocks(std::size_t rows, std::size_t cols, BlockShape block);

/// Quantised matrix. Shape is the logical tensor shape (rank 1..3, leading
/// dimensions fold into rows). `shared` holds one field per block of
/// `partition_blocks(rows, cols, block)`: the biased shared exponent for
/// BFP, the shared exponent bias for BM and BL, empty otherwise.
/// `payload` is one pattern per element in row-major order:
///  - BFP: sign + mantissa (exponent unused)
///  - BL: sign + exponent (mantissa unused)
///  - FixedPoint: sign + magnitude in `mantissa`, scaled by `scale`
///  - Identity: empty, values live in `passthrough`
struct QTensor {
    std::vector<std::size_t> shape;
    BlockFormat format;
    BlockShape block{1, 1};
    std::vector<std::uint32_t> shared;
    std::vector<BitPattern> payload;
    double scale = 1.0;
    std::vector<double> passthrough;

    std::size_t rows() const;
    std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }
    std::vector<Block> blocks() const { return partition_blocks(rows(), cols(), block); }

    friend bool operator==(const QTensor&, const QTensor&) = default;
};

/// Unbiased BFP shared exponent stored in a field of `shared_bits` bits.
int bfp_shared_exponent(std::uint32_t field, int shared_bits);

/// Effective element spec of a BM/BL block given its shared bias.
FloatSpec block_element_spec(const BlockFormat& format, std::uint32_t shared_bias);

QTensor cast_bfp(const Tensor& t, const BlockFormat& format);
QTensor cast_bm(const Tensor& t, const BlockFormat& format);
QTensor cast_bl(const Tensor& t, const BlockFormat& format);
QTensor cast_fixed_point(const Tensor& t, int width);
QTensor cast_elementwise(const Tensor& t, const FloatSpec& spec);

/// Dispatches on format.kind. Throws InvalidInput on non-finite input.
QTensor quantize(const Tensor& t, const BlockFormat& format);

/// Exact binary64 reconstruction.
Tensor dequantize(const QTensor& q);

/// dequantize(quantize(t, format)); BFP takes a kernel fast path with
/// identical results.
Tensor fake_quantize(const Tensor& t, const BlockFormat& format);

/// Checks payload widths and shared-field counts; throws FormatError.
void validate_qtensor(const QTensor& q);

}  // namespace bq
