// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockquant/block_format.hpp"
#include "blockquant/model_zoo.hpp"
#include "blockquant/tensor.hpp"
#include "blockquant/transformer.hpp"

namespace bq {

/// Shape of one GEMM operand as it is quantised: `count` matrices of
/// [rows, cols], blocked along cols (the reduction axis). Activation counts
/// are per sequence of seq_len tokens.
struct OperandShape {
    SiteKey key;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t count = 1;
    bool weight = false;
    std::size_t elements() const { return rows * cols * count; }
};

std::vector<OperandShape> operand_shapes(const ModelDims& dims);

/// Multiply-accumulate count of a site per sequence.
std::size_t site_macs(const ModelDims& dims, GemmSite site);

/// Storage bits per element of a [rows, cols] matrix, shared fields spread
/// over the blocks that actually exist (tail blocks included).
double amortized_bits(const BlockFormat& format, std::size_t rows, std::size_t cols);

struct SiteDensity {
    SiteKey key;
    std::size_t elements = 0;
    double bits_per_element = 0.0;
};

struct DensityReport {
    std::vector<SiteDensity> sites;
    double total_bits = 0.0;
    std::size_t total_elements = 0;
    double mean_bits = 0.0;
    double memory_density = 0.0;
    /// Present when every site maps onto an area-table row.
    std::optional<double> arithmetic_density;
};

/// Throws ConfigError for unmapped sites.
DensityReport density_report(const QuantConfig& qcfg, const ModelDims& dims);

/// 32 / element-weighted mean bits.
double memory_density(const QuantConfig& qcfg, const ModelDims& dims);

/// Multiplier area in LUT equivalents, one row per supported
/// configuration (DSP blocks already converted at 100 LUTs each).
class AreaTable {
public:
    struct Row {
        std::string name;
        double area = 0.0;
    };

    /// Built-in rows, version "1".
    static const AreaTable& builtin();
    /// JSON document {"version": str, "rows": {name: area, ...}}.
    static AreaTable from_json(const std::string& text);

    const std::string& version() const { return version_; }
    const std::vector<Row>& rows() const { return rows_; }
    /// Throws Unsupported for unknown names.
    double area(const std::string& name) const;
    double fp32_area() const { return area("fp32"); }

private:
    std::string version_;
    std::vector<Row> rows_;
};

/// Area-table row for a format applied to both GEMM operands, or nullopt.
/// Rows: fp32, int_w8a8, minifloat_w8a8, bm_w8a8, bfp_w8a8, bl_w8a8,
/// bfp_w6a6, bfp_w4a4; block formats must use [1,16] blocks.
std::optional<std::string> area_row_for(const BlockFormat& format);

/// fp32 area / area of the format's row. Throws Unsupported when the format
/// has no row.
double arithmetic_density(const BlockFormat& format, const AreaTable& table = AreaTable::builtin());

/// MAC-weighted arithmetic density of a mixed configuration. Each site is
/// charged the area of its wider operand's row; throws Unsupported when
/// any operand has no row.
double arithmetic_density(const QuantConfig& qcfg, const ModelDims& dims,
                          const AreaTable& table = AreaTable::builtin());

struct QuantError {
    double mse = 0.0;
    /// +inf when the error power is zero.
    double sqnr_db = 0.0;
    double max_abs_err = 0.0;
};

QuantError quant_error(const Tensor& t, const BlockFormat& format);

/// Streaming mean / population variance with Chan's pairwise merge.
class RunningStats {
public:
    void add(std::span<const double> values);
    void merge(const RunningStats& other);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ == 0 ? 0.0 : m2_ / static_cast<double>(n_); }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Population variance by the two-pass formula.
double two_pass_variance(std::span<const double> values);

struct SiteVariance {
    std::size_t layer = 0;
    ProbeSite site = ProbeSite::Q;
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;
};

struct VarianceProfile {
    std::vector<SiteVariance> entries;  // layer-major, sites in request order
    const SiteVariance& at(std::size_t layer, ProbeSite site) const;
};

/// Population variance of each requested tensor over every element seen
/// across the dataset. Uses the identity config unless `qcfg` is given.
VarianceProfile variance_profile(const ToyModel& model, const Dataset& data,
                                 const std::vector<ProbeSite>& sites,
                                 const QuantConfig* qcfg = nullptr);

}  // namespace bq
