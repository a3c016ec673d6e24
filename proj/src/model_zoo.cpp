// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/model_zoo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "blockquant/errors.hpp"
#include "blockquant/linalg.hpp"
#include "blockquant/rng.hpp"

namespace bq {

namespace {

Tensor gaussian(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.data()) v = rng.normal() * stddev;
    return t;
}

LayerWeights blank_layer(const ModelDims& d) {
    LayerWeights w;
    w.ln1_gain.assign(d.d_model, 1.0);
    w.ln1_bias.assign(d.d_model, 0.0);
    w.wq = Tensor::matrix(d.d_model, d.d_model);
    w.wk = Tensor::matrix(d.d_model, d.d_model);
    w.wv = Tensor::matrix(d.d_model, d.d_model);
    w.wo = Tensor::matrix(d.d_model, d.d_model);
    w.bo.assign(d.d_model, 0.0);
    w.ln2_gain.assign(d.d_model, 1.0);
    w.ln2_bias.assign(d.d_model, 0.0);
    w.w1 = Tensor::matrix(d.d_model, d.d_ff);
    w.b1.assign(d.d_ff, 0.0);
    w.w2 = Tensor::matrix(d.d_ff, d.d_model);
    w.b2.assign(d.d_model, 0.0);
    return w;
}

bool is_power_of_two_multiplier(double m) {
    if (!std::isfinite(m) || m < 1.0) return false;
    int exp = 0;
    return std::frexp(m, &exp) == 0.5;
}

// Code of value t in an 8-wide slot: +1 at t, -1 at t+4 (mod 8). Codes
// sum to zero, so LayerNorm sees no mean shift, and a cyclic shift of the
// slot maps codes onto codes, so position offsets are linear maps.
constexpr std::size_t kCode = 8;
double code(std::size_t value, std::size_t i) {
    if (i == value % kCode) return 1.0;
    if (i == (value + kCode / 2) % kCode) return -1.0;
    return 0.0;
}

// First residual column of carry slot l; slot 0 is the token code.
std::size_t slot(std::size_t l) { return l == 0 ? 0 : 2 * kCode + kCode * (l - 1); }
constexpr std::size_t kPosBegin = kCode;

// Head-0 value channels holding the copied code, avoiding the filler
// channels 0 and 8.
constexpr std::array<std::size_t, kCode> kValueChannels = {1, 2, 3, 4, 5, 6, 7, 9};
// MLP units holding the +/- halves of the copied code, avoiding the filler
// units 0, 8 and 16.
constexpr std::array<std::size_t, 2 * kCode> kMlpUnits = {1,  2,  3,  4,  5,  6,  7,  9,
                                                          10, 11, 12, 13, 14, 15, 17, 18};
constexpr std::array<std::size_t, 3> kFillerUnits = {0, 8, 16};

// Magnitude of every normalised activation the planted path reads: the
// middle of the binade [1, 2), so block formats with a 1-bit mantissa
// still see a clean power-of-two grid around it.
constexpr double kLevel = 1.5;

// Mean magnitude of the non-zero entries of columns [begin, begin + 8)
// of a LayerNorm output computed with unit gain.
double slot_level(const Tensor& x, std::size_t begin) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = begin; c < begin + kCode; ++c) {
            if (std::fabs(x(r, c)) > 1e-6) {
                sum += std::fabs(x(r, c));
                ++n;
            }
        }
    }
    return n == 0 ? 1.0 : sum / static_cast<double>(n);
}

}  // namespace

void ModelDims::validate() const {
    if (d_model == 0 || d_ff == 0 || heads == 0 || layers == 0 || vocab == 0 || seq_len == 0) {
        throw ConfigError("model dims must all be positive");
    }
    if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
}

bool ToyModel::all_finite() const {
    if (!embed.all_finite() || !pos.all_finite() || !unembed.all_finite()) return false;
    return std::all_of(layers.begin(), layers.end(), [](const LayerWeights& w) { return w.all_finite(); });
}

ToyModel build_toy_model(const ModelDims& dims, std::uint64_t seed) {
    dims.validate();
    Rng rng(seed);
    const double sd = 1.0 / std::sqrt(static_cast<double>(dims.d_model));
    ToyModel m;
    m.dims = dims;
    m.seed = seed;
    m.embed = gaussian(rng, dims.vocab, dims.d_model, sd);
    m.pos = gaussian(rng, dims.seq_len, dims.d_model, sd);
    for (std::size_t l = 0; l < dims.layers; ++l) {
        LayerWeights w = blank_layer(dims);
        w.wq = gaussian(rng, dims.d_model, dims.d_model, sd);
        w.wk = gaussian(rng, dims.d_model, dims.d_model, sd);
        w.wv = gaussian(rng, dims.d_model, dims.d_model, sd);
        w.wo = gaussian(rng, dims.d_model, dims.d_model, sd);
        w.w1 = gaussian(rng, dims.d_model, dims.d_ff, sd);
        w.w2 = gaussian(rng, dims.d_ff, dims.d_model, sd);
        m.layers.push_back(std::move(w));
    }
    m.unembed = gaussian(rng, dims.d_model, dims.vocab, sd);
    return m;
}

ToyModel build_copy_model(const ModelDims& dims, std::size_t shift, std::uint64_t seed) {
    dims.validate();
    if (dims.vocab != kCode || dims.seq_len > kCode || dims.d_model < slot(dims.layers + 1) ||
        dims.d_head() < 16 || dims.d_ff < 19) {
        throw ConfigError("copy model needs vocab 8, seq_len <= 8, d_model >= 16 + 8 * layers, "
                          "d_head >= 16 and d_ff >= 19");
    }
    Rng rng(seed);
    const std::size_t d = dims.d_model;
    const std::size_t dk = dims.d_head();
    const double noise_sd = 0.1 / std::sqrt(static_cast<double>(d));
    // Query/key weight; with codes of level 1.5 the matching key scores
    // 2 * (16 * 1.5)^2 / sqrt(d_head) above the others.
    const double qk_weight = 16.0;

    ToyModel m;
    m.dims = dims;
    m.seed = seed;
    m.embed = Tensor::matrix(dims.vocab, d);
    for (std::size_t v = 0; v < dims.vocab; ++v) {
        for (std::size_t i = 0; i < kCode; ++i) m.embed(v, i) = code(v, i);
    }
    m.pos = Tensor::matrix(dims.seq_len, d);
    for (std::size_t t = 0; t < dims.seq_len; ++t) {
        for (std::size_t i = 0; i < kCode; ++i) m.pos(t, kPosBegin + i) = code(t, i);
    }

    // Probe batch used to calibrate the LayerNorm gains layer by layer.
    Dataset probe;
    probe.seq_len = dims.seq_len;
    probe.shift = shift;
    for (std::size_t s = 0; s < kCode; ++s) {
        for (std::size_t t = 0; t < dims.seq_len; ++t) {
            probe.tokens.push_back(static_cast<std::uint32_t>((s + 3 * t) % kCode));
        }
    }
    Tensor x = embed_tokens(m, probe, 0, probe.size());
    const std::vector<double> ones(d, 1.0), zeros(d, 0.0);

    for (std::size_t l = 0; l < dims.layers; ++l) {
        LayerWeights w = blank_layer(dims);
        const std::size_t offset = l == 0 ? shift % kCode : 0;

        // LayerNorm 1 keeps only the position code and the carry read here.
        const Tensor xn = layer_norm(x, ones, zeros, kLayerNormEps);
        std::fill(w.ln1_gain.begin(), w.ln1_gain.end(), 0.0);
        for (std::size_t begin : {kPosBegin, slot(l)}) {
            const double g = kLevel / slot_level(xn, begin);
            for (std::size_t i = 0; i < kCode; ++i) w.ln1_gain[begin + i] = g;
        }

        for (std::size_t p = 0; p < kCode; ++p) {
            w.wq(kPosBegin + p, (p + kCode - offset) % kCode) = qk_weight;
            w.wk(kPosBegin + p, p) = qk_weight;
        }
        // Filler value channels: +-level for every position.
        for (std::size_t p = 0; p < kCode / 2; ++p) {
            w.wv(kPosBegin + p, 0) = 1.0;
            w.wv(kPosBegin + (p % 2 == 0 ? p : p + kCode / 2), 8) = 1.0;
        }
        for (std::size_t i = 0; i < kCode; ++i) {
            w.wv(slot(l) + i, kValueChannels[i]) = 1.0;
            w.wo(kValueChannels[i], slot(l + 1) + i) = 1.0;
        }
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = dk; c < d; ++c) {
                w.wq(r, c) = rng.normal() * noise_sd;
                w.wk(r, c) = rng.normal() * noise_sd;
                w.wv(r, c) = rng.normal() * noise_sd;
            }
        }

        // LayerNorm 2 keeps only the freshly written carry.
        Tensor b0;
        const QuantConfig identity = QuantConfig::uniform(dims.layers, BlockFormat::identity());
        transformer_layer_forward(x, w, dims.heads, l, identity,
                                  [&](std::size_t, ProbeSite site, const Tensor& t) {
                                      if (site == ProbeSite::B0) b0 = t;
                                  });
        const Tensor bn = layer_norm(add(Tensor(x.shape(), b0.data()), x), ones, zeros, kLayerNormEps);
        std::fill(w.ln2_gain.begin(), w.ln2_gain.end(), 0.0);
        const double g2 = kLevel / slot_level(bn, slot(l + 1));
        for (std::size_t i = 0; i < kCode; ++i) w.ln2_gain[slot(l + 1) + i] = g2;

        for (std::size_t i = 0; i < kCode; ++i) {
            const std::size_t up = kMlpUnits[2 * i];
            const std::size_t down = kMlpUnits[2 * i + 1];
            w.w1(slot(l + 1) + i, up) = 1.0;
            w.w1(slot(l + 1) + i, down) = -1.0;
            w.w2(up, slot(l + 1) + i) = -2.0;
            w.w2(down, slot(l + 1) + i) = 2.0;
        }
        for (std::size_t u : kFillerUnits) w.b1[u] = kLevel;
        for (std::size_t u = kMlpUnits.back() + 1; u < dims.d_ff; ++u) {
            for (std::size_t r = 0; r < d; ++r) w.w1(r, u) = rng.normal() * noise_sd;
        }

        x = transformer_layer_forward(x, w, dims.heads, l, identity);
        m.layers.push_back(std::move(w));
    }

    // Layer l leaves carry l+1 at (-1)^(l+1) times level; the unembedding
    // undoes the sign so the copied token scores 2 * 1.5 * 2 = 6.
    m.unembed = Tensor::matrix(d, dims.vocab);
    const double sign = (dims.layers % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t v = 0; v < dims.vocab; ++v) {
        for (std::size_t i = 0; i < kCode; ++i) {
            m.unembed(slot(dims.layers) + i, v) = 2.0 * sign * code(v, i);
        }
    }
    return m;
}

int Dataset::label(std::size_t seq, std::size_t t) const {
    if (t < shift) return -1;
    return static_cast<int>(tokens[seq * seq_len + t - shift]);
}

Dataset synth_dataset(const ModelDims& dims, const DatasetSpec& spec) {
    dims.validate();
    if (spec.shift >= dims.seq_len) throw ConfigError("dataset shift must be below seq_len");
    if (spec.size == 0) throw ConfigError("dataset size must be positive");
    Dataset ds;
    ds.seq_len = dims.seq_len;
    ds.shift = spec.shift;
    Rng rng(Rng::mix(spec.seed, 0xDA7A));
    ds.tokens.resize(spec.size * dims.seq_len);
    for (auto& tok : ds.tokens) tok = static_cast<std::uint32_t>(rng.below(dims.vocab));
    return ds;
}

ToyModel inject_scaling_offsets(const ToyModel& model, const ScalingOffsetPlan& plan) {
    if (plan.channel_stride == 0) throw ConfigError("channel_stride must be positive");
    ToyModel out = model;
    for (const auto& [layer, mult] : plan.multipliers) {
        if (layer >= model.layers.size()) {
            throw ConfigError("scaling offset for unknown layer " + std::to_string(layer));
        }
        if (!is_power_of_two_multiplier(mult)) {
            throw ConfigError("scaling offset multipliers must be powers of two >= 1");
        }
        LayerWeights& w = out.layers[layer];
        for (std::size_t ch = 0; ch < w.d_model(); ch += plan.channel_stride) {
            for (std::size_t r = 0; r < w.wv.rows(); ++r) w.wv(r, ch) *= mult;
            for (double& v : w.wo.row(ch)) v /= mult;
        }
        for (std::size_t u = 0; u < w.d_ff(); u += plan.channel_stride) {
            for (std::size_t r = 0; r < w.w1.rows(); ++r) w.w1(r, u) *= mult;
            w.b1[u] *= mult;
            for (double& v : w.w2.row(u)) v /= mult;
        }
    }
    return out;
}

Tensor embed_tokens(const ToyModel& model, const Dataset& data, std::size_t first, std::size_t count) {
    const std::size_t seq = data.seq_len;
    const std::size_t d = model.dims.d_model;
    if (seq != model.dims.seq_len) throw ConfigError("dataset seq_len differs from the model");
    Tensor x({count, seq, d});
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t t = 0; t < seq; ++t) {
            const std::uint32_t tok = data.tokens[(first + s) * seq + t];
            if (tok >= model.dims.vocab) throw InvalidInput("token id outside the vocabulary");
            double* dst = x.data().data() + (s * seq + t) * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] = model.embed(tok, c) + model.pos(t, c);
        }
    }
    return x;
}

std::vector<PreparedLayer> prepare_model(const ToyModel& model, const QuantConfig& qcfg) {
    qcfg.require_complete(model.layers.size());
    std::vector<PreparedLayer> out;
    out.reserve(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        out.push_back(prepare_layer(model.layers[l], model.dims.heads, l, qcfg));
    }
    return out;
}

Tensor model_logits(const ToyModel& model, const std::vector<PreparedLayer>& prepared,
                    const Dataset& data, std::size_t first, std::size_t count,
                    const Observer& observer) {
    Tensor x = embed_tokens(model, data, first, count);
    for (const PreparedLayer& p : prepared) x = forward_prepared(x, p, observer);
    return gemm_ref(Tensor({x.rows(), x.cols()}, std::move(x.data())), model.unembed);
}

EvalResult evaluate(const ToyModel& model, const Dataset& data, const QuantConfig& qcfg,
                    std::size_t workers) {
    const std::vector<PreparedLayer> prepared = prepare_model(model, qcfg);
    const std::size_t n = data.size();
    const std::size_t chunks = (n + kEvalChunk - 1) / kEvalChunk;
    struct Partial {
        std::size_t correct = 0;
        std::size_t scored = 0;
        double loss = 0.0;
    };
    std::vector<Partial> partial(chunks);

    auto run_chunk = [&](std::size_t c) {
        const std::size_t first = c * kEvalChunk;
        const std::size_t count = std::min(kEvalChunk, n - first);
        const Tensor logits = model_logits(model, prepared, data, first, count);
        if (!logits.all_finite()) throw InvalidInput("non-finite logits during evaluation");
        Partial p;
        for (std::size_t s = 0; s < count; ++s) {
            for (std::size_t t = 0; t < data.seq_len; ++t) {
                const int label = data.label(first + s, t);
                if (label < 0) continue;
                const auto row = logits.row(s * data.seq_len + t);
                const auto best = std::max_element(row.begin(), row.end()) - row.begin();
                const double mx = row[best];
                double sum = 0.0;
                for (double v : row) sum += std::exp(v - mx);
                p.loss += mx + std::log(sum) - row[label];
                p.correct += best == label ? 1 : 0;
                ++p.scored;
            }
        }
        partial[c] = p;
    };

    const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), chunks);
    if (threads <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    EvalResult r;
    double loss = 0.0;
    std::size_t correct = 0;
    for (const Partial& p : partial) {
        loss += p.loss;
        correct += p.correct;
        r.scored += p.scored;
    }
    if (r.scored > 0) {
        r.accuracy = static_cast<double>(correct) / static_cast<double>(r.scored);
        r.mean_loss = loss / static_cast<double>(r.scored);
    }
    return r;
}

}  // namespace bq
