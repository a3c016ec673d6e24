// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/transformer.hpp"

#include <cmath>
#include <charconv>

#include "blockquant/errors.hpp"
#include "blockquant/linalg.hpp"
#include "blockquant/quantizer.hpp"

namespace bq {

namespace {

constexpr std::array<std::string_view, 8> kSiteNames = {
    "q_proj", "k_proj", "v_proj", "qk", "av", "out_proj", "fc1", "fc2",
};

constexpr std::array<std::string_view, 10> kProbeNames = {
    "Xn", "Q", "K", "V", "Bc", "B0", "Bn", "B1", "B2", "O",
};

Tensor submatrix(const Tensor& m, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) {
    Tensor out = Tensor::matrix(nr, nc);
    for (std::size_t r = 0; r < nr; ++r) {
        for (std::size_t c = 0; c < nc; ++c) out(r, c) = m(r0 + r, c0 + c);
    }
    return out;
}

void assign_submatrix(Tensor& dst, const Tensor& part, std::size_t r0, std::size_t c0) {
    for (std::size_t r = 0; r < part.rows(); ++r) {
        for (std::size_t c = 0; c < part.cols(); ++c) dst(r0 + r, c0 + c) = part(r, c);
    }
}

Tensor quantize_weight(const Tensor& w, const BlockFormat& f) {
    return fake_quantize(w.transposed(), f).transposed();
}

void notify(const Observer& obs, std::size_t layer, ProbeSite site, const Tensor& t) {
    if (obs) obs(layer, site, t);
}

}  // namespace

std::string_view site_name(GemmSite site) { return kSiteNames[static_cast<std::size_t>(site)]; }

std::optional<GemmSite> parse_site(std::string_view name) {
    for (std::size_t i = 0; i < kSiteNames.size(); ++i) {
        if (kSiteNames[i] == name) return static_cast<GemmSite>(i);
    }
    return std::nullopt;
}

bool is_weight_operand(GemmSite site, Operand op) {
    return op == Operand::B && site != GemmSite::QKT && site != GemmSite::AV;
}

std::string SiteKey::str() const {
    return "L" + std::to_string(layer) + "." + std::string(site_name(site)) +
           (operand == Operand::A ? ".a" : ".b");
}

std::optional<SiteKey> SiteKey::parse(std::string_view text) {
    if (text.size() < 6 || text.front() != 'L') return std::nullopt;
    const std::size_t dot1 = text.find('.');
    const std::size_t dot2 = text.rfind('.');
    if (dot1 == std::string_view::npos || dot1 == dot2 || dot1 < 2) return std::nullopt;
    SiteKey key;
    const char* first = text.data() + 1;
    const char* last = text.data() + dot1;
    auto [ptr, ec] = std::from_chars(first, last, key.layer);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    const auto site = parse_site(text.substr(dot1 + 1, dot2 - dot1 - 1));
    if (!site) return std::nullopt;
    key.site = *site;
    const std::string_view op = text.substr(dot2 + 1);
    if (op == "a") {
        key.operand = Operand::A;
    } else if (op == "b") {
        key.operand = Operand::B;
    } else {
        return std::nullopt;
    }
    return key;
}

std::vector<SiteKey> all_site_keys(std::size_t layers) {
    std::vector<SiteKey> keys;
    for (std::size_t l = 0; l < layers; ++l) {
        for (GemmSite s : kAllSites) {
            keys.push_back({l, s, Operand::A});
            keys.push_back({l, s, Operand::B});
        }
    }
    return keys;
}

QuantConfig QuantConfig::uniform(std::size_t layers, const BlockFormat& format) {
    return uniform(layers, format, format);
}

QuantConfig QuantConfig::uniform(std::size_t layers, const BlockFormat& act,
                                 const BlockFormat& weight) {
    QuantConfig q;
    for (const SiteKey& k : all_site_keys(layers)) {
        q.set(k, is_weight_operand(k.site, k.operand) ? weight : act);
    }
    return q;
}

const BlockFormat& QuantConfig::at(const SiteKey& key) const {
    const auto it = formats_.find(key.str());
    if (it == formats_.end()) throw ConfigError("quant config has no entry for " + key.str());
    return it->second;
}

void QuantConfig::require_complete(std::size_t layers) const {
    for (const SiteKey& k : all_site_keys(layers)) at(k);
}

bool LayerWeights::all_finite() const {
    auto finite = [](const std::vector<double>& v) {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    };
    return finite(ln1_gain) && finite(ln1_bias) && wq.all_finite() && wk.all_finite() &&
           wv.all_finite() && wo.all_finite() && finite(bo) && finite(ln2_gain) &&
           finite(ln2_bias) && w1.all_finite() && finite(b1) && w2.all_finite() && finite(b2);
}

std::string_view probe_name(ProbeSite site) { return kProbeNames[static_cast<std::size_t>(site)]; }

std::optional<ProbeSite> parse_probe(std::string_view name) {
    for (std::size_t i = 0; i < kProbeNames.size(); ++i) {
        if (kProbeNames[i] == name) return static_cast<ProbeSite>(i);
    }
    return std::nullopt;
}

PreparedLayer prepare_layer(const LayerWeights& w, std::size_t heads, std::size_t layer,
                            const QuantConfig& qcfg) {
    const std::size_t d = w.d_model();
    if (heads == 0 || d % heads != 0) throw ConfigError("d_model must be divisible by heads");
    auto fmt = [&](GemmSite s, Operand o) { return qcfg.at({layer, s, o}); };
    PreparedLayer p;
    p.layer = layer;
    p.heads = heads;
    p.weights = &w;
    p.wq = quantize_weight(w.wq, fmt(GemmSite::QProj, Operand::B));
    p.wk = quantize_weight(w.wk, fmt(GemmSite::KProj, Operand::B));
    p.wv = quantize_weight(w.wv, fmt(GemmSite::VProj, Operand::B));
    p.wo = quantize_weight(w.wo, fmt(GemmSite::OutProj, Operand::B));
    p.w1 = quantize_weight(w.w1, fmt(GemmSite::FC1, Operand::B));
    p.w2 = quantize_weight(w.w2, fmt(GemmSite::FC2, Operand::B));
    p.a_q = fmt(GemmSite::QProj, Operand::A);
    p.a_k = fmt(GemmSite::KProj, Operand::A);
    p.a_v = fmt(GemmSite::VProj, Operand::A);
    p.a_qk = fmt(GemmSite::QKT, Operand::A);
    p.b_qk = fmt(GemmSite::QKT, Operand::B);
    p.a_av = fmt(GemmSite::AV, Operand::A);
    p.b_av = fmt(GemmSite::AV, Operand::B);
    p.a_o = fmt(GemmSite::OutProj, Operand::A);
    p.a_1 = fmt(GemmSite::FC1, Operand::A);
    p.a_2 = fmt(GemmSite::FC2, Operand::A);
    return p;
}

Tensor forward_prepared(const Tensor& x_in, const PreparedLayer& p, const Observer& obs) {
    const LayerWeights& w = *p.weights;
    const std::size_t d = w.d_model();
    if (x_in.rank() < 2 || x_in.cols() != d) throw InvalidInput("layer input must be [.., seq, d_model]");
    const std::size_t seq = x_in.shape()[x_in.rank() - 2];
    const std::size_t n = x_in.rows();
    const std::size_t batch = n / seq;
    const std::size_t dk = d / p.heads;
    const double scale = std::sqrt(static_cast<double>(dk));
    const Tensor x = Tensor({n, d}, x_in.data());

    const Tensor xn = layer_norm(x, w.ln1_gain, w.ln1_bias, kLayerNormEps);
    notify(obs, p.layer, ProbeSite::Xn, xn);

    const Tensor q = gemm_ref(fake_quantize(xn, p.a_q), p.wq);
    const Tensor k = gemm_ref(fake_quantize(xn, p.a_k), p.wk);
    const Tensor v = gemm_ref(fake_quantize(xn, p.a_v), p.wv);
    notify(obs, p.layer, ProbeSite::Q, q);
    notify(obs, p.layer, ProbeSite::K, k);
    notify(obs, p.layer, ProbeSite::V, v);

    Tensor bc = Tensor::matrix(n, d);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < p.heads; ++h) {
            const Tensor qh = submatrix(q, b * seq, seq, h * dk, dk);
            const Tensor kh = submatrix(k, b * seq, seq, h * dk, dk);
            const Tensor vh_t = submatrix(v, b * seq, seq, h * dk, dk).transposed();
            Tensor a = gemm_ref_bt(fake_quantize(qh, p.a_qk), fake_quantize(kh, p.b_qk));
            for (double& e : a.data()) e /= scale;
            const Tensor a_hat = softmax_lastaxis(a);
            const Tensor bh = gemm_ref_bt(fake_quantize(a_hat, p.a_av), fake_quantize(vh_t, p.b_av));
            assign_submatrix(bc, bh, b * seq, h * dk);
        }
    }
    notify(obs, p.layer, ProbeSite::Bc, bc);

    Tensor b0 = gemm_ref(fake_quantize(bc, p.a_o), p.wo);
    add_row_bias(b0, w.bo);
    notify(obs, p.layer, ProbeSite::B0, b0);

    const Tensor bn = layer_norm(add(b0, x), w.ln2_gain, w.ln2_bias, kLayerNormEps);
    notify(obs, p.layer, ProbeSite::Bn, bn);

    Tensor pre1 = gemm_ref(fake_quantize(bn, p.a_1), p.w1);
    add_row_bias(pre1, w.b1);
    const Tensor b1 = relu(pre1);
    notify(obs, p.layer, ProbeSite::B1, b1);

    Tensor b2 = gemm_ref(fake_quantize(b1, p.a_2), p.w2);
    add_row_bias(b2, w.b2);
    notify(obs, p.layer, ProbeSite::B2, b2);

    Tensor out = add(add(b2, b0), x);
    notify(obs, p.layer, ProbeSite::Out, out);
    return Tensor(x_in.shape(), std::move(out.data()));
}

Tensor transformer_layer_forward(const Tensor& x, const LayerWeights& w, std::size_t heads,
                                 std::size_t layer, const QuantConfig& qcfg,
                                 const Observer& observer) {
    const PreparedLayer p = prepare_layer(w, heads, layer, qcfg);
    return forward_prepared(x, p, observer);
}

}  // namespace bq
