// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>

#include "blockquant/quantizer.hpp"
#include "blockquant/tensor.hpp"

namespace bq {

/// C = A B for A [m,k], B [k,n]. Each output is accumulated sequentially
/// over k in binary64, so results do not depend on the kernel variant.
Tensor gemm_ref(const Tensor& a, const Tensor& b);

/// C = A B^T for A [m,k], B^T given as [n,k]. Both operands are blocked
/// along k, which is the layout every GEMM site quantises.
Tensor gemm_ref_bt(const Tensor& a, const Tensor& bt);

/// Quantised GEMM: A [m,k] and B^T [n,k], both quantised along k.
///
/// For two BFP operands with matching block columns the product of each
/// block pair is an integer mantissa dot product scaled once by the two
/// shared exponents. The integer sums are exact while
/// Ma + Mb + ceil(log2(block cols)) <= 53; wider formats and non-BFP
/// operands go through dequantize + gemm_ref_bt.
///
/// Throws BlockAlignmentError when the BFP block columns differ and
/// InvalidInput when the reduction lengths differ.
Tensor qgemm(const QTensor& a, const QTensor& bt);

/// Row-wise (x - mean) / sqrt(var + eps) * gain + bias, population variance.
Tensor layer_norm(const Tensor& x, std::span<const double> gain, std::span<const double> bias,
                  double eps);

/// Numerically stable softmax over the last axis.
Tensor softmax_lastaxis(const Tensor& x);

Tensor relu(const Tensor& x);

}  // namespace bq
