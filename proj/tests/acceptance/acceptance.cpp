// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS or FAIL line per
// criterion and exits non-zero when any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "blockquant/analysis.hpp"
#include "blockquant/formats.hpp"
#include "blockquant/json_out.hpp"
#include "blockquant/linalg.hpp"
#include "blockquant/model_zoo.hpp"
#include "blockquant/quantizer.hpp"
#include "blockquant/rng.hpp"
#include "blockquant/search.hpp"
#include "blockquant/transformer.hpp"
#include "oracles.hpp"

using namespace bq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first few failures with context and counts the rest.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (ok) return;
        if (failures_++ < 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    bool ok() const { return failures_ == 0; }
    std::string summary() const {
        std::string s = std::to_string(checks_) + " checks";
        if (failures_ > 0) s += ", " + std::to_string(failures_) + " failed: " + notes_;
        return s;
    }

private:
    std::size_t checks_ = 0;
    std::size_t failures_ = 0;
    std::string notes_;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// ------------------------------------------------------------------ 1

Outcome densities() {
    const ModelDims d;
    const std::vector<std::pair<BlockFormat, std::string>> mem = {
        {BlockFormat::fixed_point(8), "4.0"}, {BlockFormat::minifloat(4, 3), "4.0"}, {BlockFormat::dmf(4, 3), "4.0"},
        {BlockFormat::bfp_width(6), "4.9"},   {BlockFormat::bfp_width(4), "7.1"},    {BlockFormat::bm(4, 3), "3.8"},
        {BlockFormat::bl(7), "3.8"},
    };
    const std::vector<std::pair<BlockFormat, std::string>> arith = {
        {BlockFormat::fixed_point(8), "7.7"}, {BlockFormat::minifloat(4, 3), "17.4"}, {BlockFormat::bm(4, 3), "16.4"},
        {BlockFormat::bfp_width(8), "14.4"},  {BlockFormat::bl(7), "16.1"},           {BlockFormat::bfp_width(6), "19.2"},
        {BlockFormat::bfp_width(4), "37.3"},
    };
    Checker c;
    std::string got_mem, got_ar;
    for (const auto& [f, want] : mem) {
        const std::string v = format_one_decimal(memory_density(QuantConfig::uniform(d.layers, f), d));
        got_mem += (got_mem.empty() ? "" : " ") + v;
        c.expect(v == want, f.describe() + " mem " + v + " != " + want);
    }
    for (const auto& [f, want] : arith) {
        const std::string v = format_one_decimal(arithmetic_density(f));
        got_ar += (got_ar.empty() ? "" : " ") + v;
        c.expect(v == want, f.describe() + " arith " + v + " != " + want);
    }
    // the 4-bit figure for reductions that are whole blocks
    ModelDims whole = d;
    whole.seq_len = 16;
    const double w4 = memory_density(QuantConfig::uniform(whole.layers, BlockFormat::bfp_width(4)), whole);
    c.expect(std::fabs(w4 - 32.0 / 4.5) < 1e-12, "whole-block 4-bit density " + fmt(w4, 6));
    return {c.ok(), "mem [" + got_mem + "] arith [" + got_ar + "] 4-bit unrounded " + fmt(w4, 3) + "; " + c.summary()};
}

// ------------------------------------------------------------------ 2

Outcome exhaustive_formats() {
    Checker c;
    const std::vector<std::pair<std::string, FloatSpec>> specs = {
        {"minifloat e4m3", FloatSpec::minifloat(4, 3)},
        {"dmf e4m3", FloatSpec::dmf(4, 3)},
        {"bl element e7m0", block_element_spec(BlockFormat::bl(7), 127)},
    };
    std::string maxima;
    for (const auto& [name, f] : specs) {
        double top = 0.0;
        for (std::uint32_t code = 0; code < (1u << f.width()); ++code) {
            const BitPattern p = BitPattern::unpack(code, f);
            const double v = decode(p, f);
            c.expect(v == oracle::value(p.sign, p.exponent, p.mantissa, f), name + " decode oracle");
            c.expect(decode(encode_nearest(v, f), f) == v, name + " round trip");
            BitPattern flipped = p;
            flipped.sign ^= 1u;
            c.expect(decode(flipped, f) == -v, name + " sign symmetry");
            if (p.sign == 0) {
                // magnitude order: lexicographic for implicit-bit formats,
                // per field when every exponent restarts at zero
                if (f.implicit_leading_bit && (p.exponent | p.mantissa) != 0) {
                    const std::uint32_t prev = (p.exponent << f.mantissa_bits | p.mantissa) - 1;
                    c.expect(decode({0, prev >> f.mantissa_bits, prev & ((1u << f.mantissa_bits) - 1)}, f) < v,
                             name + " monotone");
                }
                if (!f.implicit_leading_bit) {
                    if (p.mantissa > 0) c.expect(decode({0, p.exponent, p.mantissa - 1}, f) < v, name + " monotone m");
                    if (p.exponent > 0) c.expect(decode({0, p.exponent - 1, p.mantissa}, f) <= v, name + " monotone e");
                }
            }
        }
        for (const auto& g : oracle::magnitudes(f)) top = std::max(top, g.v);
        c.expect(max_finite(f) == top, name + " max finite");
        c.expect(enumerate_values(f).back().value == top, name + " enumeration max");
        maxima += (maxima.empty() ? "" : " ") + fmt(max_finite(f), 6);
    }
    c.expect(max_finite(specs[0].second) == 480.0, "minifloat max 480");
    c.expect(max_finite(specs[1].second) == 224.0, "dmf max 224");
    return {c.ok(), "max finite " + maxima + "; " + c.summary()};
}

// ------------------------------------------------------------------ 3

// Random inputs: half Gaussian over a wide range of scales, half dyadic
// rationals that often land exactly on grid midpoints.
std::vector<double> cast_inputs(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double scale = std::ldexp(1.0, static_cast<int>(rng.below(13)) - 6);
        if (i % 2 == 0) {
            v[i] = rng.normal() * scale;
        } else {
            const double k = static_cast<double>(static_cast<int>(rng.below(513)) - 256);
            v[i] = k / 64.0 * scale;
        }
    }
    return v;
}

double fixed_oracle(double x, double scale, int width) {
    const std::int64_t qmax = (std::int64_t{1} << (width - 1)) - 1;
    double best = 0.0, best_d = INFINITY;
    for (std::int64_t k = 0; k <= qmax; ++k) {
        const double d = std::fabs(std::fabs(x) - static_cast<double>(k) * scale);
        if (d < best_d || (d == best_d && k % 2 == 0)) {
            best_d = d;
            best = static_cast<double>(k) * scale;
        }
    }
    return best == 0.0 ? 0.0 : std::copysign(best, x);
}

Outcome nearest_casting() {
    constexpr std::size_t kInputs = 10000;
    const std::size_t cols = 16, rows = kInputs / cols;
    Rng rng(2024);
    Checker c;
    std::size_t checked = 0;
    double worst_ratio = 0.0;

    auto make = [&] {
        Tensor t = Tensor::matrix(rows, cols);
        t.data() = cast_inputs(rng, rows * cols);
        return t;
    };

    // element-wise floats
    for (const FloatSpec& f : {FloatSpec::minifloat(4, 3), FloatSpec::dmf(4, 3), FloatSpec::minifloat(5, 2)}) {
        const Tensor t = make();
        const Tensor q = fake_quantize(t, BlockFormat::elementwise(f));
        for (std::size_t i = 0; i < t.size(); ++i, ++checked) {
            const double want = oracle::nearest(t.data()[i], f);
            const double got = q.data()[i];
            if (f.implicit_leading_bit) {
                c.expect(got == want, BlockFormat::elementwise(f).describe() + " at " + fmt(t.data()[i], 17));
            } else {
                c.expect(std::fabs(t.data()[i] - got) == std::fabs(t.data()[i] - want),
                         BlockFormat::elementwise(f).describe() + " at " + fmt(t.data()[i], 17));
            }
        }
    }

    // fixed point
    for (int width : {4, 8}) {
        const Tensor t = make();
        const QTensor q = cast_fixed_point(t, width);
        const Tensor d = dequantize(q);
        double amax = 0.0;
        for (double v : t.data()) amax = std::max(amax, std::fabs(v));
        const double scale = amax / (std::ldexp(1.0, width - 1) - 1.0);
        for (std::size_t i = 0; i < t.size(); ++i, ++checked) {
            c.expect(d.data()[i] == fixed_oracle(t.data()[i], scale, width), "fixed at " + fmt(t.data()[i], 17));
        }
    }

    // BFP with the element error bound
    for (int m : {1, 3, 5, 7}) {
        const Tensor t = make();
        const QTensor q = cast_bfp(t, BlockFormat::bfp(m));
        const Tensor d = dequantize(q);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::vector<double> xs(t.row(r).begin(), t.row(r).end());
            const auto want = oracle::bfp_block(xs, m, 8);
            const int es = bfp_shared_exponent(q.shared[r], 8);
            const double sat = (2.0 - std::ldexp(1.0, 1 - m)) * std::ldexp(1.0, es);
            const double bound = std::ldexp(1.0, es - m);
            for (std::size_t i = 0; i < cols; ++i, ++checked) {
                c.expect(d(r, i) == want[i], "bfp m" + std::to_string(m) + " at " + fmt(xs[i], 17));
                if (std::fabs(xs[i]) <= sat) {
                    const double err = std::fabs(xs[i] - d(r, i));
                    worst_ratio = std::max(worst_ratio, err / bound);
                    c.expect(err <= bound, "bfp bound");
                }
            }
        }
    }

    // BM and BL against the per-block grid
    for (const BlockFormat& f : {BlockFormat::bm(4, 3), BlockFormat::bm(5, 2), BlockFormat::bl(7)}) {
        const Tensor t = make();
        const QTensor q = quantize(t, f);
        const Tensor d = dequantize(q);
        for (std::size_t r = 0; r < rows; ++r) {
            const FloatSpec s = block_element_spec(f, q.shared[r]);
            for (std::size_t i = 0; i < cols; ++i, ++checked) {
                const double want = oracle::nearest(t(r, i), s, f.kind == BlockKind::BM);
                c.expect(d(r, i) == want, f.describe() + " at " + fmt(t(r, i), 17));
            }
        }
    }
    return {c.ok(), std::to_string(checked) + " elements over 12 specs, worst BFP error / bound " +
                        fmt(worst_ratio, 3) + "; " + c.summary()};
}

// ------------------------------------------------------------------ 4

Outcome gemm_oracle() {
    Rng rng(77);
    Checker c;
    double worst = 0.0;
    const std::size_t ks[] = {16, 20, 48};
    for (std::size_t inst = 0; inst < 200; ++inst) {
        const std::size_t m = 1 + rng.below(64), n = 1 + rng.below(64);
        const std::size_t k = inst % 4 == 3 ? 1 + rng.below(64) : ks[inst % 3];
        Tensor a = Tensor::matrix(m, k), bt = Tensor::matrix(n, k);
        for (double& v : a.data()) v = rng.normal() * std::ldexp(1.0, static_cast<int>(rng.below(7)) - 3);
        for (double& v : bt.data()) v = rng.normal();
        const BlockFormat fa = BlockFormat::bfp(2 + static_cast<int>(rng.below(6)));
        const BlockFormat fb = BlockFormat::bfp(2 + static_cast<int>(rng.below(6)));
        const QTensor qa = quantize(a, fa), qb = quantize(bt, fb);
        const Tensor got = qgemm(qa, qb);
        const auto want = oracle::matmul(dequantize(qa).data(), dequantize(qb).transposed().data(), m, k, n);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < want.size(); ++i) {
            num += (got.data()[i] - want[i]) * (got.data()[i] - want[i]);
            den += want[i] * want[i];
        }
        const double rel = den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
        worst = std::max(worst, rel);
        c.expect(rel <= 1e-12, "instance " + std::to_string(inst) + " rel " + fmt(rel));
    }
    return {c.ok(), "200 instances, worst relative error " + fmt(worst, 3) + "; " + c.summary()};
}

// ------------------------------------------------------------------ 5

Outcome forward_fidelity() {
    const ModelDims d;
    Checker c;
    std::string errs;
    double worst15 = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const ToyModel model = build_toy_model(d, seed);
        const LayerWeights& w = model.layers[0];
        Rng rng(seed + 100);
        Tensor x({4, d.seq_len, d.d_model});
        for (double& v : x.data()) v = rng.normal();
        const Tensor ref = transformer_layer_forward(x, w, d.heads, 0, QuantConfig::uniform(1, BlockFormat::identity()));

        const std::size_t per = d.seq_len * d.d_model;
        for (std::size_t b = 0; b < 4; ++b) {
            const std::vector<double> xs(x.data().begin() + b * per, x.data().begin() + (b + 1) * per);
            const std::vector<double> got(ref.data().begin() + b * per, ref.data().begin() + (b + 1) * per);
            c.expect(got == oracle::layer(xs, d.seq_len, w, d.heads), "identity not bit-exact");
        }

        double prev = INFINITY;
        std::string row;
        for (int width = 4; width <= 8; ++width) {
            const double e = relative_error(
                transformer_layer_forward(x, w, d.heads, 0, QuantConfig::uniform(1, BlockFormat::bfp_width(width))), ref);
            c.expect(e <= prev, "seed " + std::to_string(seed) + " width " + std::to_string(width) + " not monotone");
            row += (row.empty() ? "" : ",") + fmt(e, 2);
            prev = e;
        }
        const double e15 =
            relative_error(transformer_layer_forward(x, w, d.heads, 0, QuantConfig::uniform(1, BlockFormat::bfp(15))), ref);
        worst15 = std::max(worst15, e15);
        c.expect(e15 <= 1e-6, "seed " + std::to_string(seed) + " M=15 error " + fmt(e15, 3) + " > 1e-6");
        if (seed == 1) errs = row;
    }
    return {c.ok(), "seed 1 errors w4..w8 [" + errs + "], worst M=15 error " + fmt(worst15, 3) + "; " + c.summary()};
}

// ------------------------------------------------------------------ 6

Outcome objective_and_alpha() {
    Checker c;
    c.expect(alpha_from(0.6, 4.0) == 0.15, "alpha(0.6, 4.0) != 0.15");
    c.expect(alpha_from(1.0, 1.0) == 1.0, "alpha(1, 1) != 1");

    ModelDims d;
    d.layers = 2;
    d.d_model = 32;
    d.heads = 2;
    const ToyModel m = build_copy_model(d, 2, 1);
    const Dataset ds = synth_dataset(d, {16, 2, 3});
    const SearchSpace space = SearchSpace::per_operand(d.layers, {4, 6, 8});
    const Evaluator ev = [&](const std::vector<std::uint32_t>& choice) {
        const QuantConfig q = space.to_config(choice);
        Metrics r;
        r.acc = evaluate(m, ds, q).accuracy;
        r.mem = memory_density(q, d);
        r.extras = {arithmetic_density(q, d)};
        return r;
    };
    const AlphaCalibration a = calibrate_alpha(space, ev, 120, 7, {}, 20);
    const AlphaCalibration b = calibrate_alpha(space, ev, 120, 7, {}, 20);
    c.expect(a.alpha == b.alpha && a.trials == b.trials, "calibration not deterministic");
    c.expect(a.alpha == alpha_from(a.acc_c, a.mem_c), "alpha != acc_c / mem_c");

    const Objective obj{a.alpha, {{"arithmetic_density", 0.001}}};
    const auto trials = run_search(space, obj, ev, 40, 7);
    for (const Trial& t : trials) c.expect(obj.score(t.acc, t.mem, t.extras) == t.score, "score not recomputable");
    return {c.ok(), "alpha(0.6,4.0)=" + format_real(alpha_from(0.6, 4.0)) + ", calibrated alpha " + format_real(a.alpha) +
                        " after " + std::to_string(a.trials) + " trials (twice); " + c.summary()};
}

// ------------------------------------------------------------------ 7

Outcome tpe_efficacy() {
    const SearchSpace space = SearchSpace::per_operand(6, {4, 5, 6, 7, 8});
    double tpe = 0.0, rnd = 0.0;
    SearchOptions random_only;
    random_only.random_only = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(Rng::mix(seed, 0x9147ED));
        std::vector<std::uint32_t> target;
        for (const SearchDim& dim : space.dims) target.push_back(static_cast<std::uint32_t>(rng.below(dim.choices())));
        const Evaluator ev = [&](const std::vector<std::uint32_t>& choice) {
            Metrics r;
            for (std::size_t i = 0; i < choice.size(); ++i) r.acc += choice[i] == target[i] ? 1.0 : 0.0;
            return r;
        };
        tpe += best_so_far(run_search(space, Objective{0.0, {}}, ev, 200, seed)).back();
        rnd += best_so_far(run_search(space, Objective{0.0, {}}, ev, 200, seed, random_only)).back();
    }
    tpe /= 10.0;
    rnd /= 10.0;
    return {tpe > rnd, "mean best of 200 over 10 seeds: tpe " + fmt(tpe) + " vs random " + fmt(rnd) + " (of 96)"};
}

// ------------------------------------------------------------------ 8

Outcome sensitivity() {
    const ModelDims d;
    const ToyModel model = inject_scaling_offsets(build_copy_model(d, 2, 1), {{{2, 32.0}, {5, 32.0}}, 8});
    const Dataset ds = synth_dataset(d, {64, 2, 3});
    const double fp = evaluate(model, ds, QuantConfig::uniform(d.layers, BlockFormat::identity())).accuracy;
    const double mem4 = memory_density(QuantConfig::uniform(d.layers, BlockFormat::bfp_width(4)), d);
    const double acc4 = evaluate(model, ds, QuantConfig::uniform(d.layers, BlockFormat::bfp_width(4))).accuracy;
    const SearchSpace space = SearchSpace::per_operand(d.layers, {2, 3, 4, 5, 6, 7, 8});
    const Evaluator ev = [&](const std::vector<std::uint32_t>& choice) {
        const QuantConfig q = space.to_config(choice);
        Metrics r;
        r.acc = evaluate(model, ds, q).accuracy;
        r.mem = memory_density(q, d);
        return r;
    };
    auto sensitive = [](const SiteKey& k) {
        return (k.layer == 2 || k.layer == 5) && k.operand == Operand::A &&
               (k.site == GemmSite::OutProj || k.site == GemmSite::FC2);
    };
    auto other = [&](const SiteKey& k) { return !is_weight_operand(k.site, k.operand) && !sensitive(k); };

    Checker c;
    std::vector<Trial> pooled;
    std::string per_seed;
    double min_mem = INFINITY;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const AlphaCalibration cal = calibrate_alpha(space, ev, 300, Rng::mix(seed, 0xCA11B));
        const auto trials = run_search(space, Objective{cal.alpha, {}}, ev, 300, seed);
        const auto kept = filter_trials(trials, fp - 0.02, mem4);
        c.expect(!kept.empty(), "seed " + std::to_string(seed) + " kept no trials");
        for (const Trial& t : kept) min_mem = std::min(min_mem, t.mem);
        per_seed += (per_seed.empty() ? "" : ", ") + std::to_string(kept.size()) + " kept (" +
                    fmt(mean_width(kept, space, sensitive), 3) + " vs " + fmt(mean_width(kept, space, other), 3) + ")";
        pooled.insert(pooled.end(), kept.begin(), kept.end());
    }
    const double ws = mean_width(pooled, space, sensitive);
    const double wo = mean_width(pooled, space, other);
    c.expect(ws > wo, "sensitive width " + fmt(ws) + " <= other " + fmt(wo));
    c.expect(min_mem >= mem4, "filtered density below uniform 4-bit");
    return {c.ok(), "fp acc " + fmt(fp) + ", uniform 4-bit acc " + fmt(acc4) + " at density " + fmt(mem4) +
                        "; mean activation width sensitive " + fmt(ws, 3) + " vs other " + fmt(wo, 3) +
                        "; per seed " + per_seed + "; min kept density " + fmt(min_mem) + "; " + c.summary()};
}

// ------------------------------------------------------------------ 9

int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" BQ_CLI_PATH "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[e.path().filename().string()] = ss.str();
    }
    return out;
}

Outcome cli_determinism() {
    const fs::path dir = fs::current_path() / "acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string model = R"("model": {"generate": "copy", "seed": 3,
        "scaling_offsets": {"multipliers": {"2": 32, "5": 32}, "channel_stride": 8}})";
    const std::map<std::string, std::string> configs = {
        {"make.json", "{" + model + "}"},
        {"quant.json", R"({"quant": "bfp_w4a4", "input": "t.csv"})"},
        {"eval.json", "{" + model + R"(, "dataset": {"size": 32, "seed": 4}, "quant": "bfp_w6a6"})"},
        {"density.json", R"({"quant": {"default": "bfp_w4a4", "sites": {"L2.fc2.a": "bfp_w8a8"}}})"},
        {"profile.json", "{" + model + R"(, "dataset": {"size": 16, "seed": 4}})"},
        {"search.json", "{" + model + R"(, "dataset": {"size": 16, "seed": 4},
            "search": {"budget": 24, "calibration_budget": 24, "patience": 8, "widths": [2, 4, 6, 8]},
            "seed": 11})"},
        {"report.json", "{" + model + R"(, "dataset": {"size": 16, "seed": 4}, "input": "search_1/trials.jsonl"})"},
    };
    for (const auto& [name, text] : configs) std::ofstream(dir / name) << text;
    std::ofstream(dir / "t.csv") << "0.5,-1.25,3,0.001\n7,2,-0.75,1\n";

    struct Cmd {
        std::string name, args;
    };
    const std::vector<Cmd> cmds = {
        {"make-model", "make-model --config make.json"},
        {"quantize", "quantize --config quant.json"},
        {"quantize-csv", "quantize --config quant.json --format csv"},
        {"eval", "eval --config eval.json --workers 2"},
        {"density", "density --config density.json"},
        {"profile", "profile --config profile.json"},
        {"search", "search --config search.json --workers 4"},
        {"report", "report --config report.json"},
    };
    Checker c;
    std::size_t files = 0;
    for (const Cmd& cmd : cmds) {
        std::map<std::string, std::string> runs[2];
        for (int i = 0; i < 2; ++i) {
            const std::string out = cmd.name + "_" + std::to_string(i + 1);
            const int code = run_cli(dir, cmd.args + " --out " + out);
            c.expect(code == 0, cmd.name + " exit " + std::to_string(code));
            runs[i] = read_dir(dir / out);
        }
        c.expect(!runs[0].empty(), cmd.name + " wrote nothing");
        c.expect(runs[0] == runs[1], cmd.name + " outputs differ");
        files += runs[0].size();
    }
    // worker count does not change the search log
    c.expect(run_cli(dir, "search --config search.json --workers 1 --out search_w1") == 0, "search w1 exit");
    c.expect(read_dir(dir / "search_w1") == read_dir(dir / "search_1"), "search differs between 1 and 4 workers");
    return {c.ok(), std::to_string(cmds.size()) + " commands run twice, " + std::to_string(files) +
                        " files compared, 4-worker search equals 1-worker; " + c.summary()};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, "density reproduction", 1.0, densities},
        {2, "format exhaustiveness", 10.0, exhaustive_formats},
        {3, "nearest-value casting", 30.0, nearest_casting},
        {4, "shared-exponent GEMM oracle", 30.0, gemm_oracle},
        {5, "forward-pass fidelity", 60.0, forward_fidelity},
        {6, "objective and alpha calibration", 10.0, objective_and_alpha},
        {7, "TPE efficacy", 120.0, tpe_efficacy},
        {8, "sensitivity discovery", 600.0, sensitivity},
        {9, "CLI determinism", 60.0, cli_determinism},
    };
    int failed = 0;
    for (const Criterion& cr : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > cr.limit_s) {
            o.pass = false;
            o.detail += "; took " + fmt(secs, 3) + " s, limit " + fmt(cr.limit_s, 3) + " s";
        }
        std::printf("%s criterion %d (%s) [%.2f s]: %s\n", o.pass ? "PASS" : "FAIL", cr.id, cr.name, secs,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
