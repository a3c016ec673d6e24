// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "blockquant/errors.hpp"
#include "blockquant/kernels/kernels.hpp"

namespace bq {

Tensor gemm_ref(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw InvalidInput("gemm_ref: inner dimensions differ");
    Tensor c = Tensor::matrix(a.rows(), b.cols());
    kernels::active().gemm(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(),
                           b.cols());
    return c;
}

Tensor gemm_ref_bt(const Tensor& a, const Tensor& bt) {
    if (a.cols() != bt.cols()) throw InvalidInput("gemm_ref_bt: reduction lengths differ");
    return gemm_ref(a, bt.transposed());
}

namespace {

struct SignedMantissas {
    std::vector<double> values;       // signed integer mantissas, row-major [rows, k]
    std::vector<int> block_exponent;  // per block: log2 of the grid step
};

SignedMantissas unpack_bfp(const QTensor& q) {
    SignedMantissas s;
    s.values.resize(q.payload.size());
    for (std::size_t i = 0; i < q.payload.size(); ++i) {
        const double m = q.payload[i].mantissa;
        s.values[i] = q.payload[i].sign ? -m : m;
    }
    for (std::uint32_t field : q.shared) {
        s.block_exponent.push_back(bfp_shared_exponent(field, q.format.shared_bits) -
                                   (q.format.mantissa_bits - 1));
    }
    return s;
}

}  // namespace

Tensor qgemm(const QTensor& a, const QTensor& bt) {
    if (a.cols() != bt.cols()) throw InvalidInput("qgemm: reduction lengths differ");
    const bool both_bfp = a.format.kind == BlockKind::BFP && bt.format.kind == BlockKind::BFP;
    if (!both_bfp) return gemm_ref_bt(dequantize(a), dequantize(bt));
    if (a.block.cols != bt.block.cols) {
        throw BlockAlignmentError("qgemm: operand blocks do not align along the reduction axis");
    }
    const std::size_t k = a.cols();
    const std::size_t bc = a.block.cols;
    const int log_bc = static_cast<int>(std::bit_width(std::min(bc, k) - 1));
    if (a.format.mantissa_bits + bt.format.mantissa_bits + log_bc > 53) {
        return gemm_ref_bt(dequantize(a), dequantize(bt));
    }

    const SignedMantissas ma = unpack_bfp(a);
    const SignedMantissas mb = unpack_bfp(bt);
    const std::size_t kblocks = (k + bc - 1) / bc;
    const std::size_t m = a.rows();
    const std::size_t n = bt.rows();
    const auto& kern = kernels::active();
    Tensor c = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t abase = (i / a.block.rows) * kblocks;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t bbase = (j / bt.block.rows) * kblocks;
            double acc = 0.0;
            for (std::size_t kb = 0; kb < kblocks; ++kb) {
                const std::size_t k0 = kb * bc;
                const std::size_t len = std::min(bc, k - k0);
                const double dot =
                    kern.dot_exact(ma.values.data() + i * k + k0, mb.values.data() + j * k + k0, len);
                acc += std::ldexp(dot, ma.block_exponent[abase + kb] + mb.block_exponent[bbase + kb]);
            }
            c(i, j) = acc;
        }
    }
    return c;
}

Tensor layer_norm(const Tensor& x, std::span<const double> gain, std::span<const double> bias,
                  double eps) {
    const std::size_t n = x.cols();
    if (gain.size() != n || bias.size() != n) throw InvalidInput("layer_norm: parameter length");
    Tensor y(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        auto out = y.row(r);
        for (std::size_t c = 0; c < n; ++c) out[c] = (in[c] - mean) * inv * gain[c] + bias[c];
    }
    return y;
}

Tensor softmax_lastaxis(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        auto out = y.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            out[c] = std::exp(in[c] - mx);
            sum += out[c];
        }
        for (double& v : out) v /= sum;
    }
    return y;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

}  // namespace bq
