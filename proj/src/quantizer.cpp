// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blockquant/errors.hpp"
#include "blockquant/kernels/kernels.hpp"

namespace bq {

namespace {

void require_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) {
        throw InvalidInput(std::string(op) + ": non-finite input");
    }
}

void require_kind(const BlockFormat& f, BlockKind kind, const char* op) {
    if (f.kind != kind) {
        throw ConfigError(std::string(op) + ": format kind is " + std::string(to_string(f.kind)));
    }
    f.validate();
}

double block_max_abs(const Tensor& t, const Block& b, const kernels::KernelTable& k) {
    double m = 0.0;
    for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
        m = std::max(m, k.max_abs(t.data().data() + r * t.cols() + b.col0, b.cols));
    }
    return m;
}

int bfp_bias(int shared_bits) { return (1 << (shared_bits - 1)) - 1; }

// Biased shared exponent field of a BFP block with max magnitude a_max.
std::uint32_t bfp_field_for(double a_max, int shared_bits) {
    const int bias = bfp_bias(shared_bits);
    const int top = (1 << shared_bits) - 1;
    if (a_max == 0.0) return 0;
    const int es = std::ilogb(a_max);
    return static_cast<std::uint32_t>(std::clamp(es + bias, 0, top));
}

// Shared bias of a BM/BL block: places a_max's binade at the top exponent.
std::uint32_t shared_bias_for(double a_max, const BlockFormat& f) {
    const int top = (1 << f.shared_bits) - 1;
    if (a_max == 0.0) return static_cast<std::uint32_t>(top);
    const int emax = static_cast<int>(f.element.max_exponent_field());
    return static_cast<std::uint32_t>(std::clamp(emax - std::ilogb(a_max), 0, top));
}

struct BfpGrid {
    double step;
    double inv_step;
    double limit;
};

BfpGrid bfp_grid(std::uint32_t field, int mantissa_bits, int shared_bits) {
    const int es = bfp_shared_exponent(field, shared_bits);
    return {std::ldexp(1.0, es - mantissa_bits + 1), std::ldexp(1.0, mantissa_bits - 1 - es),
            std::ldexp(1.0, mantissa_bits) - 1.0};
}

QTensor empty_like(const Tensor& t, const BlockFormat& f, BlockShape block) {
    QTensor q;
    q.shape = t.shape();
    q.format = f;
    q.block = block;
    q.payload.resize(t.size());
    return q;
}

QTensor cast_with_shared_bias(const Tensor& t, const BlockFormat& format, RoundingMode rounding) {
    const auto& k = kernels::active();
    QTensor q = empty_like(t, format, format.block);
    const std::size_t cols = t.cols();
    for (const Block& b : q.blocks()) {
        const std::uint32_t bias = shared_bias_for(block_max_abs(t, b, k), format);
        q.shared.push_back(bias);
        const FloatSpec spec = block_element_spec(format, bias);
        for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
            for (std::size_t c = b.col0; c < b.col0 + b.cols; ++c) {
                q.payload[r * cols + c] = encode_nearest(t.data()[r * cols + c], spec, rounding);
            }
        }
    }
    return q;
}

}  // namespace

std::vector<Block> partition_blocks(std::size_t rows, std::size_t cols, BlockShape block) {
    std::vector<Block> out;
    if (rows == 0 || cols == 0) return out;
    out.reserve(((rows + block.rows - 1) / block.rows) * ((cols + block.cols - 1) / block.cols));
    for (std::size_t r = 0; r < rows; r += block.rows) {
        for (std::size_t c = 0; c < cols; c += block.cols) {
            out.push_back({r, c, std::min(block.rows, rows - r), std::min(block.cols, cols - c)});
        }
    }
    return out;
}

std::size_t QTensor::rows() const {
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
    return shape.empty() ? 0 : r;
}

int bfp_shared_exponent(std::uint32_t field, int shared_bits) {
    return static_cast<int>(field) - bfp_bias(shared_bits);
}

FloatSpec block_element_spec(const BlockFormat& format, std::uint32_t shared_bias) {
    FloatSpec s = format.element;
    s.bias = static_cast<int>(shared_bias);
    s.implicit_leading_bit = true;
    s.saturating = true;
    if (format.kind == BlockKind::BL) s.mantissa_bits = 0;
    return s;
}

QTensor cast_bfp(const Tensor& t, const BlockFormat& format) {
    require_kind(format, BlockKind::BFP, "cast_bfp");
    require_finite(t, "cast_bfp");
    const auto& k = kernels::active();
    QTensor q = empty_like(t, format, format.block);
    const std::size_t cols = t.cols();
    for (const Block& b : q.blocks()) {
        const std::uint32_t field = bfp_field_for(block_max_abs(t, b, k), format.shared_bits);
        q.shared.push_back(field);
        const BfpGrid g = bfp_grid(field, format.mantissa_bits, format.shared_bits);
        for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
            for (std::size_t c = b.col0; c < b.col0 + b.cols; ++c) {
                const double x = t.data()[r * cols + c];
                const double m = std::min(std::nearbyint(std::fabs(x) * g.inv_step), g.limit);
                BitPattern& p = q.payload[r * cols + c];
                p.mantissa = static_cast<std::uint32_t>(m);
                p.sign = (m != 0.0 && std::signbit(x)) ? 1u : 0u;
            }
        }
    }
    return q;
}

QTensor cast_bm(const Tensor& t, const BlockFormat& format) {
    require_kind(format, BlockKind::BM, "cast_bm");
    require_finite(t, "cast_bm");
    return cast_with_shared_bias(t, format, RoundingMode::NearestEven);
}

QTensor cast_bl(const Tensor& t, const BlockFormat& format) {
    require_kind(format, BlockKind::BL, "cast_bl");
    require_finite(t, "cast_bl");
    return cast_with_shared_bias(t, format, RoundingMode::NearestAway);
}

QTensor cast_fixed_point(const Tensor& t, int width) {
    const BlockFormat format = BlockFormat::fixed_point(width);
    format.validate();
    require_finite(t, "cast_fixed_point");
    const double qmax = std::ldexp(1.0, width - 1) - 1.0;
    const double amax = kernels::active().max_abs(t.data().data(), t.size());
    QTensor q = empty_like(t, format, BlockShape{t.rows(), t.cols()});
    q.scale = amax == 0.0 ? 1.0 : amax / qmax;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double x = t.data()[i];
        const double m = std::min(std::nearbyint(std::fabs(x) / q.scale), qmax);
        q.payload[i].mantissa = static_cast<std::uint32_t>(m);
        q.payload[i].sign = (m != 0.0 && std::signbit(x)) ? 1u : 0u;
    }
    return q;
}

QTensor cast_elementwise(const Tensor& t, const FloatSpec& spec) {
    const BlockFormat format = BlockFormat::elementwise(spec);
    format.validate();
    require_finite(t, "cast_elementwise");
    QTensor q = empty_like(t, format, BlockShape{1, 1});
    for (std::size_t i = 0; i < t.size(); ++i) {
        q.payload[i] = encode_nearest(t.data()[i], spec);
    }
    return q;
}

QTensor quantize(const Tensor& t, const BlockFormat& format) {
    switch (format.kind) {
        case BlockKind::Identity: {
            require_finite(t, "quantize");
            QTensor q;
            q.shape = t.shape();
            q.format = format;
            q.passthrough = t.data();
            return q;
        }
        case BlockKind::FixedPoint: return cast_fixed_point(t, format.element_bits());
        case BlockKind::MiniFloat:
        case BlockKind::DMF: return cast_elementwise(t, format.element);
        case BlockKind::BFP: return cast_bfp(t, format);
        case BlockKind::BM: return cast_bm(t, format);
        case BlockKind::BL: return cast_bl(t, format);
    }
    throw ConfigError("quantize: unknown format kind");
}

Tensor dequantize(const QTensor& q) {
    Tensor out(q.shape);
    auto& d = out.data();
    const BlockFormat& f = q.format;
    switch (f.kind) {
        case BlockKind::Identity:
            d = q.passthrough;
            return out;
        case BlockKind::FixedPoint:
            for (std::size_t i = 0; i < d.size(); ++i) {
                const double m = q.payload[i].mantissa * q.scale;
                d[i] = q.payload[i].sign ? -m : m;
            }
            return out;
        case BlockKind::MiniFloat:
        case BlockKind::DMF:
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = decode(q.payload[i], f.element);
            return out;
        case BlockKind::BFP:
        case BlockKind::BM:
        case BlockKind::BL: break;
    }
    const std::size_t cols = q.cols();
    const auto blocks = q.blocks();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const Block& b = blocks[bi];
        for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
            for (std::size_t c = b.col0; c < b.col0 + b.cols; ++c) {
                const BitPattern& p = q.payload[r * cols + c];
                if (f.kind == BlockKind::BFP) {
                    const BfpGrid g = bfp_grid(q.shared[bi], f.mantissa_bits, f.shared_bits);
                    const double v = p.mantissa * g.step;
                    d[r * cols + c] = p.sign ? -v : v;
                } else {
                    d[r * cols + c] = decode(p, block_element_spec(f, q.shared[bi]));
                }
            }
        }
    }
    return out;
}

Tensor fake_quantize(const Tensor& t, const BlockFormat& format) {
    if (format.kind == BlockKind::Identity) {
        require_finite(t, "fake_quantize");
        return t;
    }
    if (format.kind != BlockKind::BFP) {
        return dequantize(quantize(t, format));
    }
    format.validate();
    require_finite(t, "fake_quantize");
    const auto& k = kernels::active();
    Tensor out(t.shape());
    const std::size_t cols = t.cols();
    for (const Block& b : partition_blocks(t.rows(), cols, format.block)) {
        const std::uint32_t field = bfp_field_for(block_max_abs(t, b, k), format.shared_bits);
        const BfpGrid g = bfp_grid(field, format.mantissa_bits, format.shared_bits);
        for (std::size_t r = b.row0; r < b.row0 + b.rows; ++r) {
            const std::size_t off = r * cols + b.col0;
            k.quantize_uniform(t.data().data() + off, out.data().data() + off, b.cols, g.inv_step,
                               g.step, g.limit);
        }
    }
    return out;
}

void validate_qtensor(const QTensor& q) {
    const BlockFormat& f = q.format;
    f.validate();
    std::size_t n = 1;
    for (std::size_t s : q.shape) n *= s;
    if (q.shape.empty() || q.shape.size() > 3) throw FormatError("qtensor: bad rank");
    if (f.kind == BlockKind::Identity) {
        if (q.passthrough.size() != n) throw FormatError("qtensor: passthrough length mismatch");
        return;
    }
    if (q.payload.size() != n) throw FormatError("qtensor: payload length mismatch");
    const std::size_t expected_shared = f.is_block_format() ? q.blocks().size() : 0;
    if (q.shared.size() != expected_shared) throw FormatError("qtensor: shared field count mismatch");
    if (f.is_block_format() && !(q.block == f.block)) throw FormatError("qtensor: block shape mismatch");
    const std::uint64_t shared_limit = std::uint64_t{1} << f.shared_field_bits();
    for (std::uint32_t s : q.shared) {
        if (s >= shared_limit) throw FormatError("qtensor: shared field exceeds its width");
    }
    int e_bits = 0;
    int m_bits = 0;
    switch (f.kind) {
        case BlockKind::FixedPoint:
        case BlockKind::BFP: m_bits = f.mantissa_bits; break;
        case BlockKind::BL: e_bits = f.element.exponent_bits; break;
        default:
            e_bits = f.element.exponent_bits;
            m_bits = f.element.mantissa_bits;
            break;
    }
    for (const BitPattern& p : q.payload) {
        if (p.sign > 1 || (std::uint64_t{p.exponent} >> e_bits) != 0 ||
            (std::uint64_t{p.mantissa} >> m_bits) != 0) {
            throw FormatError("qtensor: payload field exceeds its width");
        }
    }
    if (f.kind == BlockKind::FixedPoint) {
        const double qmax = std::ldexp(1.0, f.mantissa_bits) - 1.0;
        for (const BitPattern& p : q.payload) {
            if (p.mantissa > qmax) throw FormatError("qtensor: fixed-point magnitude out of range");
        }
        if (!std::isfinite(q.scale) || q.scale <= 0.0) throw FormatError("qtensor: bad scale");
    }
}

}  // namespace bq
