// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>

#include "blockquant/errors.hpp"
#include "blockquant/model_zoo.hpp"
#include "blockquant/quantizer.hpp"
#include "blockquant/rng.hpp"
#include "blockquant/transformer.hpp"
#include "oracles.hpp"

using namespace bq;

namespace {

ModelDims small_dims() {
    ModelDims d;
    d.d_model = 32;
    d.d_ff = 48;
    d.heads = 4;
    d.layers = 2;
    d.seq_len = 6;
    return d;
}

// Toy weights with non-trivial LayerNorm parameters and biases.
LayerWeights random_layer(const ModelDims& dims, std::uint64_t seed) {
    LayerWeights w = build_toy_model(dims, seed).layers[0];
    Rng rng(seed + 100);
    for (auto* v : {&w.ln1_gain, &w.ln1_bias, &w.bo, &w.ln2_gain, &w.ln2_bias, &w.b1, &w.b2}) {
        for (double& x : *v) x += 0.3 * rng.normal();
    }
    return w;
}

Tensor random_input(std::size_t batch, std::size_t seq, std::size_t d, Rng& rng) {
    Tensor x({batch, seq, d});
    for (double& v : x.data()) v = rng.normal();
    return x;
}

double rel_error(const Tensor& got, const Tensor& ref) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        num += (got.data()[i] - ref.data()[i]) * (got.data()[i] - ref.data()[i]);
        den += ref.data()[i] * ref.data()[i];
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("site keys") {
    const SiteKey k{3, GemmSite::FC1, Operand::B};
    CHECK(k.str() == "L3.fc1.b");
    CHECK(SiteKey::parse("L3.fc1.b") == k);
    for (const SiteKey& s : all_site_keys(2)) CHECK(SiteKey::parse(s.str()) == s);
    CHECK(all_site_keys(6).size() == 96);
    CHECK_FALSE(SiteKey::parse("L3.fc9.b").has_value());
    CHECK_FALSE(SiteKey::parse("fc1.b").has_value());
    CHECK_FALSE(SiteKey::parse("L1.qkt.c").has_value());
    CHECK(is_weight_operand(GemmSite::QProj, Operand::B));
    CHECK_FALSE(is_weight_operand(GemmSite::QKT, Operand::B));
    CHECK_FALSE(is_weight_operand(GemmSite::AV, Operand::B));
    CHECK_FALSE(is_weight_operand(GemmSite::FC2, Operand::A));
}

TEST_CASE("quant config") {
    QuantConfig q = QuantConfig::uniform(2, BlockFormat::bfp(3), BlockFormat::bfp(7));
    CHECK(q.entries().size() == 32);
    CHECK(q.at({1, GemmSite::QKT, Operand::B}) == BlockFormat::bfp(3));
    CHECK(q.at({1, GemmSite::VProj, Operand::B}) == BlockFormat::bfp(7));
    CHECK_NOTHROW(q.require_complete(2));
    CHECK_THROWS_AS(q.require_complete(3), ConfigError);
    CHECK_THROWS_AS(q.at({5, GemmSite::QKT, Operand::B}), ConfigError);
    q.set({0, GemmSite::AV, Operand::A}, BlockFormat::bm(4, 3));
    CHECK(q.at({0, GemmSite::AV, Operand::A}) == BlockFormat::bm(4, 3));
}

TEST_CASE("identity config is bit-exact to the binary64 oracle") {
    const ModelDims dims = small_dims();
    Rng rng(9);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const LayerWeights w = random_layer(dims, seed);
        const Tensor x = random_input(3, dims.seq_len, dims.d_model, rng);
        const Tensor y = transformer_layer_forward(x, w, dims.heads, 0, QuantConfig::uniform(1, BlockFormat::identity()));
        REQUIRE(y.shape() == x.shape());
        const std::size_t per = dims.seq_len * dims.d_model;
        for (std::size_t b = 0; b < 3; ++b) {
            const std::vector<double> xs(x.data().begin() + b * per, x.data().begin() + (b + 1) * per);
            const auto want = oracle::layer(xs, dims.seq_len, w, dims.heads);
            const std::vector<double> got(y.data().begin() + b * per, y.data().begin() + (b + 1) * per);
            CHECK(got == want);
        }
    }
}

TEST_CASE("rank-2 input equals a batch of one") {
    const ModelDims dims = small_dims();
    Rng rng(10);
    const LayerWeights w = random_layer(dims, 4);
    const Tensor x = random_input(1, dims.seq_len, dims.d_model, rng);
    const Tensor x2({dims.seq_len, dims.d_model}, x.data());
    const QuantConfig q = QuantConfig::uniform(1, BlockFormat::bfp(4));
    CHECK(transformer_layer_forward(x2, w, dims.heads, 0, q).data() ==
          transformer_layer_forward(x, w, dims.heads, 0, q).data());
}

TEST_CASE("observer sees every probe in order") {
    const ModelDims dims = small_dims();
    Rng rng(11);
    const LayerWeights w = random_layer(dims, 5);
    const Tensor x = random_input(2, dims.seq_len, dims.d_model, rng);
    std::vector<ProbeSite> seen;
    Tensor observed_out;
    const Tensor y = transformer_layer_forward(x, w, dims.heads, 1, QuantConfig::uniform(2, BlockFormat::identity()),
                                               [&](std::size_t layer, ProbeSite s, const Tensor& t) {
                                                   CHECK(layer == 1);
                                                   CHECK(t.all_finite());
                                                   seen.push_back(s);
                                                   if (s == ProbeSite::Out) observed_out = t;
                                               });
    CHECK(observed_out.data() == y.data());
    const std::vector<ProbeSite> want = {ProbeSite::Xn, ProbeSite::Q,  ProbeSite::K,  ProbeSite::V,  ProbeSite::Bc,
                                         ProbeSite::B0, ProbeSite::Bn, ProbeSite::B1, ProbeSite::B2, ProbeSite::Out};
    CHECK(seen == want);
    for (ProbeSite s : want) CHECK(parse_probe(probe_name(s)) == s);
}

TEST_CASE("prepared weights are quantised along the reduction axis") {
    const ModelDims dims = small_dims();
    const LayerWeights w = random_layer(dims, 6);
    QuantConfig q = QuantConfig::uniform(1, BlockFormat::identity());
    q.set({0, GemmSite::FC1, Operand::B}, BlockFormat::bfp(3));
    const PreparedLayer p = prepare_layer(w, dims.heads, 0, q);
    CHECK(p.wq == w.wq);
    CHECK(p.w1 == fake_quantize(w.w1.transposed(), BlockFormat::bfp(3)).transposed());
}

TEST_CASE("BFP error shrinks as the mantissa widens") {
    const ModelDims dims = small_dims();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 7);
        const LayerWeights w = random_layer(dims, seed);
        const Tensor x = random_input(2, dims.seq_len, dims.d_model, rng);
        const Tensor ref = transformer_layer_forward(x, w, dims.heads, 0, QuantConfig::uniform(1, BlockFormat::identity()));
        double prev = INFINITY;
        for (int width = 4; width <= 8; ++width) {
            const double err = rel_error(
                transformer_layer_forward(x, w, dims.heads, 0, QuantConfig::uniform(1, BlockFormat::bfp(width - 1))), ref);
            CHECK(err <= prev);
            CHECK(err > 0.0);
            prev = err;
        }
        // a 15-bit mantissa sits within a small multiple of its half-step
        const double e15 =
            rel_error(transformer_layer_forward(x, w, dims.heads, 0, QuantConfig::uniform(1, BlockFormat::bfp(15))), ref);
        CHECK(e15 < std::ldexp(1.0, -12));
    }
}

TEST_CASE("non-finite input is rejected") {
    const ModelDims dims = small_dims();
    const LayerWeights w = random_layer(dims, 7);
    Tensor x({dims.seq_len, dims.d_model}, 0.5);
    x(0, 0) = NAN;
    CHECK_THROWS_AS(transformer_layer_forward(x, w, dims.heads, 0, QuantConfig::uniform(1, BlockFormat::bfp(4))),
                    InvalidInput);
}
