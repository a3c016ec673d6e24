// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/tensor.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "blockquant/errors.hpp"

namespace bq {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ConfigError(std::string(op) + ": shape mismatch");
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
    if (shape_.empty() || shape_.size() > 3) {
        throw ConfigError("tensor rank must be 1..3");
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty() || shape_.size() > 3) {
        throw ConfigError("tensor rank must be 1..3");
    }
    if (data_.size() != element_count(shape_)) {
        throw ConfigError("tensor data length does not match shape");
    }
}

std::size_t Tensor::rows() const {
    if (shape_.empty()) return 0;
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
    return r;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor Tensor::transposed() const {
    const std::size_t r = rows();
    const std::size_t c = cols();
    Tensor t = Tensor::matrix(c, r);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) t(j, i) = (*this)(i, j);
    }
    return t;
}

Tensor slice_cols(const Tensor& m, std::size_t begin, std::size_t count) {
    Tensor out = Tensor::matrix(m.rows(), count);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, begin + j);
    }
    return out;
}

void assign_cols(Tensor& dst, const Tensor& part, std::size_t begin) {
    for (std::size_t i = 0; i < part.rows(); ++i) {
        for (std::size_t j = 0; j < part.cols(); ++j) dst(i, begin + j) = part(i, j);
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto& d = a.data();
    const auto& s = b.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void scale_inplace(Tensor& a, double s) {
    for (double& v : a.data()) v *= s;
}

void add_row_bias(Tensor& m, std::span<const double> bias) {
    if (bias.size() != m.cols()) {
        throw ConfigError("bias length does not match columns");
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
}

double relative_error(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "relative_error");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        num += d * d;
        den += b.data()[i] * b.data()[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

}  // namespace bq
