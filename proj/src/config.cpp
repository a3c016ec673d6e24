// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/config.hpp"

#include <cmath>
#include <initializer_list>
#include <set>

#include "blockquant/errors.hpp"
#include "blockquant/json_out.hpp"
#include "blockquant/serialize.hpp"

namespace bq {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    require_object(j, where);
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : keys) ok = ok || k == a;
        if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

std::int64_t get_int(const json& j, const char* key, std::int64_t def, const std::string& where) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
    return v.get<std::int64_t>();
}

std::size_t get_size(const json& j, const char* key, std::size_t def, const std::string& where) {
    const std::int64_t v = get_int(j, key, static_cast<std::int64_t>(def), where);
    if (v < 0) throw ConfigError(where + "." + key + " must be non-negative");
    return static_cast<std::size_t>(v);
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t def, const std::string& where) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

double get_real(const json& j, const char* key, double def, const std::string& where) {
    if (!j.contains(key)) return def;
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(where + "." + key + " must be finite");
    return d;
}

bool get_bool(const json& j, const char* key, bool def, const std::string& where) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
    return j.at(key).get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& def, const std::string& where) {
    if (!j.contains(key)) return def;
    if (!j.at(key).is_string()) throw ConfigError(where + "." + key + " must be a string");
    return j.at(key).get<std::string>();
}

BlockShape get_block(const json& j, const std::string& where) {
    if (!j.contains("block")) return BlockShape{1, 16};
    const json& b = j.at("block");
    if (!b.is_array() || b.size() != 2 || !b[0].is_number_integer() || !b[1].is_number_integer() ||
        b[0].get<std::int64_t>() < 1 || b[1].get<std::int64_t>() < 1) {
        throw ConfigError(where + ".block must be [rows, cols] with entries >= 1");
    }
    return BlockShape{b[0].get<std::size_t>(), b[1].get<std::size_t>()};
}

int narrow(std::int64_t v, const std::string& what) {
    if (v < -4096 || v > 4096) throw ConfigError(what + " out of range");
    return static_cast<int>(v);
}

ModelDims parse_dims(const json& j, const std::string& where) {
    allow_keys(j, where, {"d_model", "d_ff", "heads", "layers", "vocab", "seq_len"});
    ModelDims d;
    d.d_model = get_size(j, "d_model", d.d_model, where);
    d.d_ff = get_size(j, "d_ff", d.d_ff, where);
    d.heads = get_size(j, "heads", d.heads, where);
    d.layers = get_size(j, "layers", d.layers, where);
    d.vocab = get_size(j, "vocab", d.vocab, where);
    d.seq_len = get_size(j, "seq_len", d.seq_len, where);
    d.validate();
    return d;
}

ModelSource parse_model(const json& j) {
    const std::string w = "model";
    allow_keys(j, w, {"file", "generate", "dims", "seed", "shift", "scaling_offsets"});
    ModelSource m;
    m.file = get_string(j, "file", "", w);
    m.generate = get_string(j, "generate", m.generate, w);
    if (m.generate != "copy" && m.generate != "random") {
        throw ConfigError("model.generate must be \"copy\" or \"random\"");
    }
    if (j.contains("dims")) m.dims = parse_dims(j.at("dims"), "model.dims");
    if (j.contains("seed")) m.seed = get_u64(j, "seed", 0, w);
    m.shift = get_size(j, "shift", m.shift, w);
    if (j.contains("scaling_offsets")) {
        const json& s = j.at("scaling_offsets");
        allow_keys(s, "model.scaling_offsets", {"multipliers", "channel_stride"});
        m.offsets.channel_stride = get_size(s, "channel_stride", 1, "model.scaling_offsets");
        if (s.contains("multipliers")) {
            const json& mm = s.at("multipliers");
            require_object(mm, "model.scaling_offsets.multipliers");
            for (const auto& [k, v] : mm.items()) {
                std::size_t layer = 0;
                try {
                    std::size_t used = 0;
                    layer = std::stoul(k, &used);
                    if (used != k.size()) throw std::invalid_argument(k);
                } catch (const std::exception&) {
                    throw ConfigError("scaling offset keys must be layer indices");
                }
                if (!v.is_number()) throw ConfigError("scaling offset multipliers must be numbers");
                m.offsets.multipliers[layer] = v.get<double>();
            }
        }
    }
    return m;
}

DatasetSpec parse_dataset(const json& j) {
    allow_keys(j, "dataset", {"size", "shift", "seed"});
    DatasetSpec d;
    d.size = get_size(j, "size", d.size, "dataset");
    d.shift = get_size(j, "shift", d.shift, "dataset");
    d.seed = get_u64(j, "seed", d.seed, "dataset");
    return d;
}

SearchSettings parse_search(const json& j) {
    const std::string w = "search";
    allow_keys(j, w, {"budget", "widths", "search_block_size", "alpha", "calibration_budget",
                      "patience", "acc_floor", "acc_margin", "mem_floor", "tpe", "batch",
                      "random_only", "extras"});
    SearchSettings s;
    s.budget = get_size(j, "budget", s.budget, w);
    if (j.contains("widths")) {
        const json& ws = j.at("widths");
        if (!ws.is_array() || ws.empty()) throw ConfigError("search.widths must be a non-empty array");
        s.widths.clear();
        for (const json& v : ws) {
            if (!v.is_number_integer()) throw ConfigError("search.widths entries must be integers");
            s.widths.push_back(narrow(v.get<std::int64_t>(), "search width"));
        }
    }
    s.search_block_size = get_bool(j, "search_block_size", false, w);
    if (j.contains("alpha")) {
        const json& a = j.at("alpha");
        if (a.is_string() && a.get<std::string>() == "calibrate") {
            s.alpha.reset();
        } else if (a.is_number() && a.get<double>() >= 0.0) {
            s.alpha = a.get<double>();
        } else {
            throw ConfigError("search.alpha must be a number >= 0 or \"calibrate\"");
        }
    }
    s.calibration_budget = get_size(j, "calibration_budget", s.calibration_budget, w);
    s.patience = get_size(j, "patience", s.patience, w);
    if (j.contains("acc_floor")) s.acc_floor = get_real(j, "acc_floor", 0.0, w);
    s.acc_margin = get_real(j, "acc_margin", s.acc_margin, w);
    if (j.contains("mem_floor")) {
        const json& m = j.at("mem_floor");
        if (m.is_string() && m.get<std::string>() == "uniform4") {
            s.mem_floor.reset();
        } else if (m.is_number()) {
            s.mem_floor = m.get<double>();
        } else {
            throw ConfigError("search.mem_floor must be a number or \"uniform4\"");
        }
    }
    if (j.contains("tpe")) {
        const json& t = j.at("tpe");
        allow_keys(t, "search.tpe", {"gamma", "n_startup", "n_candidates", "prior_weight"});
        s.tpe.gamma = get_real(t, "gamma", s.tpe.gamma, "search.tpe");
        s.tpe.n_startup = get_size(t, "n_startup", s.tpe.n_startup, "search.tpe");
        s.tpe.n_candidates = get_size(t, "n_candidates", s.tpe.n_candidates, "search.tpe");
        s.tpe.prior_weight = get_real(t, "prior_weight", s.tpe.prior_weight, "search.tpe");
        if (!(s.tpe.gamma > 0.0 && s.tpe.gamma <= 1.0) || s.tpe.n_candidates == 0 ||
            !(s.tpe.prior_weight > 0.0)) {
            throw ConfigError("search.tpe parameters out of range");
        }
    }
    s.batch = get_size(j, "batch", s.batch, w);
    if (s.batch == 0) throw ConfigError("search.batch must be positive");
    s.random_only = get_bool(j, "random_only", false, w);
    if (j.contains("extras")) {
        const json& e = j.at("extras");
        require_object(e, "search.extras");
        for (const auto& [k, v] : e.items()) {
            if (k != "arithmetic_density") throw ConfigError("unknown extra metric '" + k + "'");
            if (!v.is_number()) throw ConfigError("extra metric weights must be numbers");
            s.extras.emplace_back(k, v.get<double>());
        }
    }
    return s;
}

}  // namespace

BlockFormat format_from_json(const json& j) {
    if (j.is_string()) return BlockFormat::preset(j.get<std::string>());
    require_object(j, "format");
    const std::string kind = get_string(j, "kind", "", "format");
    const auto k = parse_block_kind(kind);
    if (!k) throw ConfigError("unknown format kind '" + kind + "'");
    const std::string w = "format(" + kind + ")";
    BlockFormat f;
    switch (*k) {
        case BlockKind::Identity:
            allow_keys(j, w, {"kind"});
            f = BlockFormat::identity();
            break;
        case BlockKind::FixedPoint:
            allow_keys(j, w, {"kind", "width"});
            f = BlockFormat::fixed_point(narrow(get_int(j, "width", 8, w), "fixed width"));
            break;
        case BlockKind::MiniFloat:
        case BlockKind::DMF: {
            allow_keys(j, w, {"kind", "e", "m", "bias", "implicit_bit", "saturating"});
            FloatSpec s;
            s.exponent_bits = narrow(get_int(j, "e", 4, w), "e");
            s.mantissa_bits = narrow(get_int(j, "m", 3, w), "m");
            if (s.exponent_bits < 0 || s.exponent_bits > 10) throw ConfigError("e must be in [0, 10]");
            s.bias = narrow(get_int(j, "bias", FloatSpec::default_bias(s.exponent_bits), w), "bias");
            s.implicit_leading_bit = get_bool(j, "implicit_bit", *k == BlockKind::MiniFloat, w);
            s.saturating = get_bool(j, "saturating", true, w);
            if (s.implicit_leading_bit != (*k == BlockKind::MiniFloat)) {
                throw ConfigError("implicit_bit must be true for minifloat and false for dmf");
            }
            f = BlockFormat::elementwise(s);
            break;
        }
        case BlockKind::BFP:
            allow_keys(j, w, {"kind", "m", "e", "block"});
            f = BlockFormat::bfp(narrow(get_int(j, "m", 7, w), "m"), narrow(get_int(j, "e", 8, w), "e"),
                                 get_block(j, w));
            break;
        case BlockKind::BM:
            allow_keys(j, w, {"kind", "e", "m", "b", "block"});
            f = BlockFormat::bm(narrow(get_int(j, "e", 4, w), "e"), narrow(get_int(j, "m", 3, w), "m"),
                                narrow(get_int(j, "b", 8, w), "b"), get_block(j, w));
            break;
        case BlockKind::BL:
            allow_keys(j, w, {"kind", "e", "b", "block"});
            f = BlockFormat::bl(narrow(get_int(j, "e", 7, w), "e"), narrow(get_int(j, "b", 8, w), "b"),
                                get_block(j, w));
            break;
    }
    f.validate();
    return f;
}

std::string format_to_json(const BlockFormat& f) {
    JsonWriter w;
    w.begin_object().key("kind").value(to_string(f.kind));
    auto block = [&] {
        w.key("block").begin_array().value(static_cast<std::uint64_t>(f.block.rows))
            .value(static_cast<std::uint64_t>(f.block.cols)).end_array();
    };
    switch (f.kind) {
        case BlockKind::Identity: break;
        case BlockKind::FixedPoint: w.key("width").value(f.element_bits()); break;
        case BlockKind::MiniFloat:
        case BlockKind::DMF:
            w.key("e").value(f.element.exponent_bits).key("m").value(f.element.mantissa_bits);
            w.key("bias").value(f.element.bias).key("implicit_bit").value(f.element.implicit_leading_bit);
            w.key("saturating").value(f.element.saturating);
            break;
        case BlockKind::BFP:
            w.key("m").value(f.mantissa_bits).key("e").value(f.shared_bits);
            block();
            break;
        case BlockKind::BM:
            w.key("e").value(f.element.exponent_bits).key("m").value(f.element.mantissa_bits);
            w.key("b").value(f.shared_bits);
            block();
            break;
        case BlockKind::BL:
            w.key("e").value(f.element.exponent_bits).key("b").value(f.shared_bits);
            block();
            break;
    }
    w.end_object();
    return w.str();
}

QuantConfig quant_config_from_json(const json& j, std::size_t layers) {
    const bool structured = j.is_object() && !j.contains("kind");
    if (!structured) return QuantConfig::uniform(layers, format_from_json(j));
    allow_keys(j, "quant", {"default", "activations", "weights", "sites"});
    std::optional<BlockFormat> def, act, wgt;
    if (j.contains("default")) def = format_from_json(j.at("default"));
    if (j.contains("activations")) act = format_from_json(j.at("activations"));
    if (j.contains("weights")) wgt = format_from_json(j.at("weights"));
    QuantConfig q;
    for (const SiteKey& key : all_site_keys(layers)) {
        const bool weight = is_weight_operand(key.site, key.operand);
        const auto& cls = weight ? wgt : act;
        if (cls) {
            q.set(key, *cls);
        } else if (def) {
            q.set(key, *def);
        }
    }
    if (j.contains("sites")) {
        const json& s = j.at("sites");
        require_object(s, "quant.sites");
        for (const auto& [k, v] : s.items()) {
            const auto key = SiteKey::parse(k);
            if (!key) throw ConfigError("bad site key '" + k + "'");
            if (key->layer >= layers) throw ConfigError("site key '" + k + "' names a missing layer");
            q.set(*key, format_from_json(v));
        }
    }
    q.require_complete(layers);
    return q;
}

std::string quant_config_to_json(const QuantConfig& q) {
    JsonWriter w;
    w.begin_object().key("sites").begin_object();
    for (const auto& [k, f] : q.entries()) w.key(k).raw(format_to_json(f));
    w.end_object().end_object();
    return w.str();
}

RunConfig parse_run_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    allow_keys(doc, "config", {"model", "dataset", "quant", "search", "profile", "seed", "workers",
                               "format", "out", "input"});
    RunConfig c;
    if (doc.contains("model")) c.model = parse_model(doc.at("model"));
    if (doc.contains("dataset")) c.dataset = parse_dataset(doc.at("dataset"));
    if (doc.contains("quant")) c.quant = doc.at("quant");
    if (doc.contains("search")) c.search = parse_search(doc.at("search"));
    if (doc.contains("profile")) {
        const json& p = doc.at("profile");
        allow_keys(p, "profile", {"sites"});
        if (p.contains("sites")) {
            if (!p.at("sites").is_array()) throw ConfigError("profile.sites must be an array");
            c.profile_sites.clear();
            for (const json& s : p.at("sites")) {
                const auto site = s.is_string() ? parse_probe(s.get<std::string>()) : std::nullopt;
                if (!site) throw ConfigError("unknown profile site " + s.dump());
                c.profile_sites.push_back(*site);
            }
        }
    }
    c.seed = get_u64(doc, "seed", c.seed, "config");
    c.workers = get_size(doc, "workers", c.workers, "config");
    c.format = get_string(doc, "format", c.format, "config");
    if (c.format != "json" && c.format != "csv") throw ConfigError("format must be json or csv");
    c.out_dir = get_string(doc, "out", c.out_dir, "config");
    c.input = get_string(doc, "input", c.input, "config");
    return c;
}

ToyModel materialize_model(const ModelSource& src) {
    ToyModel m;
    if (!src.file.empty()) {
        m = decode_model(read_file(src.file));
    } else if (src.generate == "copy") {
        m = build_copy_model(src.dims, src.shift, src.seed.value_or(0));
    } else {
        m = build_toy_model(src.dims, src.seed.value_or(0));
    }
    if (!src.offsets.multipliers.empty()) m = inject_scaling_offsets(m, src.offsets);
    return m;
}

}  // namespace bq
