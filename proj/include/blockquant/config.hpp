// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockquant/block_format.hpp"
#include "blockquant/model_zoo.hpp"
#include "blockquant/search.hpp"
#include "blockquant/transformer.hpp"

namespace bq {

/// Format descriptor: a preset name such as "bfp_w4a4", or an object
///   {"kind": "bfp", "m": 3, "e": 8, "block": [1, 16]}
///   {"kind": "bm", "e": 4, "m": 3, "b": 8, "block": [1, 16]}
///   {"kind": "bl", "e": 7, "b": 8, "block": [1, 16]}
///   {"kind": "minifloat" | "dmf", "e": 4, "m": 3, "bias": 7,
///    "implicit_bit": true, "saturating": true}
///   {"kind": "fixed", "width": 8}
///   {"kind": "identity"}
/// Optional members take the defaults shown; unknown members are rejected.
BlockFormat format_from_json(const nlohmann::json& j);
std::string format_to_json(const BlockFormat& f);

/// {"default": fmt, "activations": fmt, "weights": fmt, "sites": {key: fmt}}
/// with per-site entries taking precedence over the operand-class
/// entries, which take precedence over "default". A bare descriptor is
/// shorthand for {"default": descriptor}. Every site must end up mapped.
QuantConfig quant_config_from_json(const nlohmann::json& j, std::size_t layers);
std::string quant_config_to_json(const QuantConfig& q);

struct ModelSource {
    std::string file;               // load BQTM1 when non-empty
    std::string generate = "copy";  // "copy" or "random"
    ModelDims dims;
    /// Unset: the run seed is used.
    std::optional<std::uint64_t> seed;
    std::size_t shift = 2;
    ScalingOffsetPlan offsets;
};

struct SearchSettings {
    std::size_t budget = 300;
    std::vector<int> widths{4, 5, 6, 7, 8};
    bool search_block_size = false;
    std::optional<double> alpha;  // nullopt: calibrate
    std::size_t calibration_budget = 300;
    std::size_t patience = 50;
    std::optional<double> acc_floor;  // nullopt: fp32 accuracy - acc_margin
    double acc_margin = 0.02;
    std::optional<double> mem_floor;  // nullopt: uniform 4-bit BFP density
    TpeParams tpe;
    std::size_t batch = 4;
    bool random_only = false;
    /// Extra objective terms; only "arithmetic_density" is built in.
    std::vector<std::pair<std::string, double>> extras;
};

/// Unified configuration document for every CLI command. Unknown keys are
/// rejected at every level. Command-line flags override the file.
struct RunConfig {
    std::optional<ModelSource> model;
    std::optional<DatasetSpec> dataset;
    std::optional<nlohmann::json> quant;
    SearchSettings search;
    std::vector<ProbeSite> profile_sites{ProbeSite::Q, ProbeSite::K, ProbeSite::V, ProbeSite::Bc,
                                         ProbeSite::B1};
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string format = "json";
    std::string out_dir = "out";
    std::string input;   // quantize: tensor file; report: trial log
};

RunConfig parse_run_config(const std::string& text);

/// Loads or generates the model described by `src`.
ToyModel materialize_model(const ModelSource& src);

}  // namespace bq
