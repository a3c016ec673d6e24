// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bq {

/// Dense row-major binary64 tensor of rank 1..3. Most operations work on
/// rank-2 matrices; rank-3 tensors are treated as stacked matrices.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    /// Leading dimensions folded into rows; the last dimension is columns.
    std::size_t rows() const;
    std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;
    Tensor transposed() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Columns [begin, begin + count) of a matrix.
Tensor slice_cols(const Tensor& m, std::size_t begin, std::size_t count);
/// Writes `part` into columns starting at `begin`.
void assign_cols(Tensor& dst, const Tensor& part, std::size_t begin);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);
void scale_inplace(Tensor& a, double s);
/// Adds `bias` to every row.
void add_row_bias(Tensor& m, std::span<const double> bias);

/// ||a - b||_F / ||b||_F, 0 when both are zero, +inf when only b is zero.
double relative_error(const Tensor& a, const Tensor& b);

}  // namespace bq
