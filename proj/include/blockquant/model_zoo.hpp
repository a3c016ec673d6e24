// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "blockquant/tensor.hpp"
#include "blockquant/transformer.hpp"

namespace bq {

struct ModelDims {
    std::size_t d_model = 64;
    std::size_t d_ff = 64;
    std::size_t heads = 4;
    std::size_t layers = 6;
    std::size_t vocab = 8;
    std::size_t seq_len = 8;

    std::size_t d_head() const { return d_model / heads; }
    /// Throws ConfigError for zero sizes or d_model not divisible by heads.
    void validate() const;
    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Token embedding + learned positions, a stack of layers and an unembedding
/// read from the final residual stream (no final norm).
struct ToyModel {
    ModelDims dims;
    std::uint64_t seed = 0;
    Tensor embed;    // [vocab, d_model]
    Tensor pos;      // [seq_len, d_model]
    std::vector<LayerWeights> layers;
    Tensor unembed;  // [d_model, vocab]

    bool all_finite() const;
    friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

/// Gaussian weights with standard deviation 1/sqrt(d_model), zero biases,
/// unit LayerNorm gains. Identical output for identical (dims, seed).
ToyModel build_toy_model(const ModelDims& dims, std::uint64_t seed);

/// Model that solves the copy task with the given shift exactly.
///
/// Residual stream layout: token code, position code, then one carry slot
/// per layer, each `vocab` wide (codes are centred one-hot vectors, so every
/// slot sums to zero and LayerNorm reduces to a fixed per-layer scale).
/// In layer l head 0 copies carry l (the token code for l = 0) into carry
/// l+1; layer 0 attends `shift` positions back, later layers attend to
/// their own position. The MLP then adds -2x the copied value, flipping the
/// carry's sign, so a layer whose MLP path is lost leaves the wrong sign.
/// Head-0 value channels 0 and 8 and MLP units 0, 8 and 16 hold bounded
/// filler activations that carry no information. The remaining heads and
/// units hold small random weights whose outputs are discarded.
///
/// Requires vocab == 8, seq_len <= 8 (position code is 8 wide),
/// d_model >= 16 + 8 * layers, d_head >= 16 and d_ff >= 19.
ToyModel build_copy_model(const ModelDims& dims, std::size_t shift, std::uint64_t seed);

struct DatasetSpec {
    std::size_t size = 64;   // number of sequences
    std::size_t shift = 2;   // label at position t is the token at t - shift
    std::uint64_t seed = 0;
    friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct Dataset {
    std::size_t seq_len = 0;
    std::size_t shift = 0;
    std::vector<std::uint32_t> tokens;  // [size, seq_len]
    std::size_t size() const { return seq_len == 0 ? 0 : tokens.size() / seq_len; }
    /// Label for (sequence, position) or -1 when the position is unscored.
    int label(std::size_t seq, std::size_t t) const;
};

/// Uniform random tokens; positions t >= shift are scored.
Dataset synth_dataset(const ModelDims& dims, const DatasetSpec& spec);

/// Power-of-two activation multipliers per layer. With channel_stride s,
/// only value channels and MLP units whose index is a multiple of s are
/// rescaled: s = 1 scales whole tensors, larger strides create outlier
/// channels inside each quantisation block.
struct ScalingOffsetPlan {
    std::map<std::size_t, double> multipliers;
    std::size_t channel_stride = 1;
};

/// Multiplies the selected W_V columns and W1 columns (with b1) by m and
/// divides the matching W_O and W2 rows by m. The FP64 function is
/// unchanged up to rounding (exactly, since m is a power of two).
/// Throws ConfigError for unknown layers or multipliers that are not
/// powers of two >= 1.
ToyModel inject_scaling_offsets(const ToyModel& model, const ScalingOffsetPlan& plan);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::size_t scored = 0;
    friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

/// Embeds one chunk of sequences into [n, seq_len, d_model].
Tensor embed_tokens(const ToyModel& model, const Dataset& data, std::size_t first, std::size_t count);

/// Logits [n * seq_len, vocab] for sequences [first, first + count).
Tensor model_logits(const ToyModel& model, const std::vector<PreparedLayer>& prepared,
                    const Dataset& data, std::size_t first, std::size_t count,
                    const Observer& observer = {});

std::vector<PreparedLayer> prepare_model(const ToyModel& model, const QuantConfig& qcfg);

/// Exact-match accuracy and mean cross-entropy over scored positions.
/// Sequences are processed in fixed chunks; `workers` threads share the
/// chunks and results are reduced in chunk order, so the result does not
/// depend on `workers`.
EvalResult evaluate(const ToyModel& model, const Dataset& data, const QuantConfig& qcfg,
                    std::size_t workers = 1);

/// Sequences per evaluation chunk.
constexpr std::size_t kEvalChunk = 16;

}  // namespace bq
