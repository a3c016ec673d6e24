// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blockquant/block_format.hpp"
#include "blockquant/tensor.hpp"

namespace bq {

/// The eight matrix multiplications of one Transformer layer, in
/// execution order.
enum class GemmSite { QProj, KProj, VProj, QKT, AV, OutProj, FC1, FC2 };

inline constexpr std::array<GemmSite, 8> kAllSites = {
    GemmSite::QProj, GemmSite::KProj,   GemmSite::VProj, GemmSite::QKT,
    GemmSite::AV,    GemmSite::OutProj, GemmSite::FC1,   GemmSite::FC2,
};

/// Operand A is the left (activation) input; operand B is the right input,
/// a weight matrix except at QKT (K) and AV (V).
enum class Operand { A, B };

std::string_view site_name(GemmSite site);
std::optional<GemmSite> parse_site(std::string_view name);
bool is_weight_operand(GemmSite site, Operand op);

struct SiteKey {
    std::size_t layer = 0;
    GemmSite site = GemmSite::QProj;
    Operand operand = Operand::A;

    /// "L{layer}.{site}.{a|b}", e.g. "L3.fc1.b".
    std::string str() const;
    static std::optional<SiteKey> parse(std::string_view text);
    friend auto operator<=>(const SiteKey&, const SiteKey&) = default;
};

/// Every site key of a model with `layers` layers, layer-major.
std::vector<SiteKey> all_site_keys(std::size_t layers);

/// Mixed-precision assignment: one BlockFormat per GEMM operand.
class QuantConfig {
public:
    static QuantConfig uniform(std::size_t layers, const BlockFormat& format);
    /// Activations get `act`, weights get `weight`.
    static QuantConfig uniform(std::size_t layers, const BlockFormat& act, const BlockFormat& weight);

    void set(const SiteKey& key, const BlockFormat& format) { formats_[key.str()] = format; }
    /// Throws ConfigError when the key is missing.
    const BlockFormat& at(const SiteKey& key) const;
    bool contains(const SiteKey& key) const { return formats_.count(key.str()) != 0; }
    /// Throws ConfigError unless every key of `layers` layers is present.
    void require_complete(std::size_t layers) const;

    const std::map<std::string, BlockFormat>& entries() const { return formats_; }
    friend bool operator==(const QuantConfig&, const QuantConfig&) = default;

private:
    std::map<std::string, BlockFormat> formats_;
};

struct LayerWeights {
    std::vector<double> ln1_gain, ln1_bias;  // [d_model]
    Tensor wq, wk, wv;                       // [d_model, d_model], head i = columns [i*d_k, (i+1)*d_k)
    Tensor wo;                               // [d_model, d_model]
    std::vector<double> bo;                  // [d_model]
    std::vector<double> ln2_gain, ln2_bias;  // [d_model]
    Tensor w1;                               // [d_model, d_ff]
    std::vector<double> b1;                  // [d_ff]
    Tensor w2;                               // [d_ff, d_model]
    std::vector<double> b2;                  // [d_model]

    std::size_t d_model() const { return wq.rows(); }
    std::size_t d_ff() const { return w1.cols(); }
    bool all_finite() const;
    friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

/// Intermediate tensors exposed to observers. Q, K, V, Bc and B1 are the
/// unbounded activations; Xn and Bn are LayerNorm outputs.
enum class ProbeSite { Xn, Q, K, V, Bc, B0, Bn, B1, B2, Out };
std::string_view probe_name(ProbeSite site);
std::optional<ProbeSite> parse_probe(std::string_view name);

/// Called with (layer, site, tensor); the tensor covers the whole batch.
using Observer = std::function<void(std::size_t, ProbeSite, const Tensor&)>;

/// Weights with their site formats applied once. Each weight is
/// fake-quantised in transposed [out, in] form, so blocks run along the
/// reduction axis, and stored back in [in, out] layout.
struct PreparedLayer {
    std::size_t layer = 0;
    std::size_t heads = 1;
    const LayerWeights* weights = nullptr;
    Tensor wq, wk, wv, wo, w1, w2;
    BlockFormat a_q, a_k, a_v, a_qk, b_qk, a_av, b_av, a_o, a_1, a_2;
};

PreparedLayer prepare_layer(const LayerWeights& w, std::size_t heads, std::size_t layer,
                            const QuantConfig& qcfg);

constexpr double kLayerNormEps = 1e-5;

/// One Transformer layer on X of shape [seq, d_model] or
/// [batch, seq, d_model]; attention never crosses sequences. Every GEMM
/// operand is fake-quantised with its site's format. LayerNorm, softmax,
/// bias and residual additions stay in binary64.
Tensor forward_prepared(const Tensor& x, const PreparedLayer& layer, const Observer& observer = {});

Tensor transformer_layer_forward(const Tensor& x, const LayerWeights& w, std::size_t heads,
                                 std::size_t layer, const QuantConfig& qcfg,
                                 const Observer& observer = {});

}  // namespace bq
