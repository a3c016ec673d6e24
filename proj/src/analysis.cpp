// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "blockquant/errors.hpp"
#include "blockquant/quantizer.hpp"

namespace bq {

std::vector<OperandShape> operand_shapes(const ModelDims& dims) {
    dims.validate();
    const std::size_t s = dims.seq_len, d = dims.d_model, f = dims.d_ff, h = dims.heads;
    const std::size_t dk = dims.d_head();
    std::vector<OperandShape> out;
    for (std::size_t l = 0; l < dims.layers; ++l) {
        auto add = [&](GemmSite site, Operand op, std::size_t rows, std::size_t cols, std::size_t count) {
            out.push_back({{l, site, op}, rows, cols, count, is_weight_operand(site, op)});
        };
        for (GemmSite site : {GemmSite::QProj, GemmSite::KProj, GemmSite::VProj}) {
            add(site, Operand::A, s, d, 1);
            add(site, Operand::B, d, d, 1);
        }
        add(GemmSite::QKT, Operand::A, s, dk, h);
        add(GemmSite::QKT, Operand::B, s, dk, h);
        add(GemmSite::AV, Operand::A, s, s, h);
        add(GemmSite::AV, Operand::B, dk, s, h);
        add(GemmSite::OutProj, Operand::A, s, d, 1);
        add(GemmSite::OutProj, Operand::B, d, d, 1);
        add(GemmSite::FC1, Operand::A, s, d, 1);
        add(GemmSite::FC1, Operand::B, f, d, 1);
        add(GemmSite::FC2, Operand::A, s, f, 1);
        add(GemmSite::FC2, Operand::B, d, f, 1);
    }
    return out;
}

std::size_t site_macs(const ModelDims& dims, GemmSite site) {
    const std::size_t s = dims.seq_len, d = dims.d_model, f = dims.d_ff, h = dims.heads;
    const std::size_t dk = dims.d_head();
    switch (site) {
        case GemmSite::QProj:
        case GemmSite::KProj:
        case GemmSite::VProj:
        case GemmSite::OutProj: return s * d * d;
        case GemmSite::QKT:
        case GemmSite::AV: return h * s * s * dk;
        case GemmSite::FC1:
        case GemmSite::FC2: return s * d * f;
    }
    return 0;
}

double amortized_bits(const BlockFormat& format, std::size_t rows, std::size_t cols) {
    const double elements = static_cast<double>(rows * cols);
    double bits = elements * format.element_bits();
    if (format.is_block_format()) {
        const std::size_t blocks = ((rows + format.block.rows - 1) / format.block.rows) *
                                   ((cols + format.block.cols - 1) / format.block.cols);
        bits += static_cast<double>(blocks) * format.shared_field_bits();
    }
    return bits / elements;
}

DensityReport density_report(const QuantConfig& qcfg, const ModelDims& dims) {
    DensityReport r;
    for (const OperandShape& op : operand_shapes(dims)) {
        const BlockFormat& f = qcfg.at(op.key);
        const double bpe = amortized_bits(f, op.rows, op.cols);
        r.sites.push_back({op.key, op.elements(), bpe});
        r.total_bits += bpe * static_cast<double>(op.elements());
        r.total_elements += op.elements();
    }
    r.mean_bits = r.total_bits / static_cast<double>(r.total_elements);
    r.memory_density = 32.0 / r.mean_bits;
    try {
        r.arithmetic_density = arithmetic_density(qcfg, dims);
    } catch (const Unsupported&) {
        r.arithmetic_density.reset();
    }
    return r;
}

double memory_density(const QuantConfig& qcfg, const ModelDims& dims) {
    return density_report(qcfg, dims).memory_density;
}

const AreaTable& AreaTable::builtin() {
    static const AreaTable table = [] {
        AreaTable t;
        t.version_ = "1";
        t.rows_ = {
            {"fp32", 835.0},       {"int_w8a8", 109.0}, {"minifloat_w8a8", 48.0},
            {"bm_w8a8", 51.0},     {"bfp_w8a8", 58.0},  {"bl_w8a8", 52.0},
            {"bfp_w6a6", 43.6},    {"bfp_w4a4", 22.4},
        };
        return t;
    }();
    return table;
}

AreaTable AreaTable::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("area table: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("version") || !doc.contains("rows") ||
        !doc["version"].is_string() || !doc["rows"].is_object() || doc.size() != 2) {
        throw ConfigError("area table must be {\"version\": str, \"rows\": {name: area}}");
    }
    AreaTable t;
    t.version_ = doc["version"].get<std::string>();
    for (const auto& [name, value] : doc["rows"].items()) {
        if (!value.is_number() || !(value.get<double>() > 0.0)) {
            throw ConfigError("area table row '" + name + "' must be a positive number");
        }
        t.rows_.push_back({name, value.get<double>()});
    }
    t.area("fp32");
    return t;
}

double AreaTable::area(const std::string& name) const {
    for (const Row& r : rows_) {
        if (r.name == name) return r.area;
    }
    throw Unsupported("area table has no row '" + name + "'");
}

std::optional<std::string> area_row_for(const BlockFormat& f) {
    const bool table_block = f.block == BlockShape{1, 16};
    switch (f.kind) {
        case BlockKind::Identity: return "fp32";
        case BlockKind::FixedPoint:
            if (f.element_bits() == 8) return "int_w8a8";
            break;
        case BlockKind::MiniFloat:
            if (f.element == FloatSpec::minifloat(4, 3)) return "minifloat_w8a8";
            break;
        case BlockKind::DMF: break;
        case BlockKind::BM:
            if (table_block && f.shared_bits == 8 && f.element.exponent_bits == 4 &&
                f.element.mantissa_bits == 3) {
                return "bm_w8a8";
            }
            break;
        case BlockKind::BL:
            if (table_block && f.shared_bits == 8 && f.element.exponent_bits == 7) return "bl_w8a8";
            break;
        case BlockKind::BFP:
            if (table_block && f.shared_bits == 8) {
                if (f.mantissa_bits == 7) return "bfp_w8a8";
                if (f.mantissa_bits == 5) return "bfp_w6a6";
                if (f.mantissa_bits == 3) return "bfp_w4a4";
            }
            break;
    }
    return std::nullopt;
}

double arithmetic_density(const BlockFormat& format, const AreaTable& table) {
    const auto row = area_row_for(format);
    if (!row) throw Unsupported("no area-table entry for " + format.describe());
    return table.fp32_area() / table.area(*row);
}

double arithmetic_density(const QuantConfig& qcfg, const ModelDims& dims, const AreaTable& table) {
    double weighted_area = 0.0;
    double macs = 0.0;
    for (std::size_t l = 0; l < dims.layers; ++l) {
        for (GemmSite site : kAllSites) {
            double area = 0.0;
            for (Operand op : {Operand::A, Operand::B}) {
                const BlockFormat& f = qcfg.at({l, site, op});
                const auto row = area_row_for(f);
                if (!row) throw Unsupported("no area-table entry for " + f.describe());
                area = std::max(area, table.area(*row));
            }
            const double m = static_cast<double>(site_macs(dims, site));
            weighted_area += area * m;
            macs += m;
        }
    }
    return table.fp32_area() / (weighted_area / macs);
}

QuantError quant_error(const Tensor& t, const BlockFormat& format) {
    const Tensor q = fake_quantize(t, format);
    QuantError e;
    double signal = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double diff = t.data()[i] - q.data()[i];
        e.mse += diff * diff;
        signal += t.data()[i] * t.data()[i];
        e.max_abs_err = std::max(e.max_abs_err, std::fabs(diff));
    }
    if (t.size() > 0) {
        e.mse /= static_cast<double>(t.size());
        signal /= static_cast<double>(t.size());
    }
    e.sqnr_db = e.mse == 0.0 ? std::numeric_limits<double>::infinity()
                             : 10.0 * std::log10(signal / e.mse);
    return e;
}

void RunningStats::add(std::span<const double> values) {
    if (values.empty()) return;
    RunningStats batch;
    batch.n_ = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    batch.mean_ = sum / static_cast<double>(batch.n_);
    for (double v : values) batch.m2_ += (v - batch.mean_) * (v - batch.mean_);
    merge(batch);
}

void RunningStats::merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double delta = o.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += o.m2_ + delta * delta * (na * nb / n);
    n_ += o.n_;
}

double two_pass_variance(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double m2 = 0.0;
    for (double v : values) m2 += (v - mean) * (v - mean);
    return m2 / static_cast<double>(values.size());
}

const SiteVariance& VarianceProfile::at(std::size_t layer, ProbeSite site) const {
    for (const SiteVariance& e : entries) {
        if (e.layer == layer && e.site == site) return e;
    }
    throw ConfigError("variance profile has no entry for layer " + std::to_string(layer) + " site " +
                      std::string(probe_name(site)));
}

VarianceProfile variance_profile(const ToyModel& model, const Dataset& data,
                                 const std::vector<ProbeSite>& sites, const QuantConfig* qcfg) {
    const QuantConfig identity = QuantConfig::uniform(model.layers.size(), BlockFormat::identity());
    const std::vector<PreparedLayer> prepared = prepare_model(model, qcfg ? *qcfg : identity);
    std::map<std::pair<std::size_t, ProbeSite>, RunningStats> stats;
    const Observer obs = [&](std::size_t layer, ProbeSite site, const Tensor& t) {
        if (std::find(sites.begin(), sites.end(), site) == sites.end()) return;
        stats[{layer, site}].add(t.data());
    };
    for (std::size_t first = 0; first < data.size(); first += kEvalChunk) {
        model_logits(model, prepared, data, first, std::min(kEvalChunk, data.size() - first), obs);
    }
    VarianceProfile p;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        for (ProbeSite s : sites) {
            const RunningStats& r = stats[{l, s}];
            p.entries.push_back({l, s, r.count(), r.mean(), r.variance()});
        }
    }
    return p;
}

}  // namespace bq
