// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner. Every command reads one JSON config (plus flag
// overrides), computes all results in memory, and only then writes its
// output files, each through a temporary file and a rename.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "blockquant/analysis.hpp"
#include "blockquant/config.hpp"
#include "blockquant/errors.hpp"
#include "blockquant/json_out.hpp"
#include "blockquant/model_zoo.hpp"
#include "blockquant/quantizer.hpp"
#include "blockquant/rng.hpp"
#include "blockquant/search.hpp"
#include "blockquant/serialize.hpp"

namespace {

using namespace bq;
using nlohmann::json;

// ---------------------------------------------------------------- logging

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
    static const Level level = [] {
        const char* env = std::getenv("BLOCKQUANT_LOG");
        if (env == nullptr) return Level::Warn;
        const std::string v = env;
        if (v == "error" || v == "0") return Level::Error;
        if (v == "info" || v == "2") return Level::Info;
        if (v == "debug" || v == "3") return Level::Debug;
        return Level::Warn;
    }();
    return level;
}

void log(Level level, const std::string& msg) {
    if (level > log_level()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

// ---------------------------------------------------------------- outputs

/// Files produced by a command, written together once everything has been
/// computed.
class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) {}
    void add(const std::string& name, std::string bytes) { files_.emplace_back(name, std::move(bytes)); }
    void commit() const {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
        for (const auto& [name, bytes] : files_) {
            const std::string path = (std::filesystem::path(dir_) / name).string();
            write_file_atomic(path, bytes);
            log(Level::Info, "wrote " + path);
        }
    }

private:
    std::string dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

std::string csv_line(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out + "\n";
}

std::string str(std::size_t v) { return std::to_string(v); }

// ---------------------------------------------------------------- shared setup

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string out;
    std::string format;
    std::string input;
};

RunConfig load_config(const Flags& f) {
    RunConfig c = parse_run_config(f.config.empty() ? std::string("{}") : read_file(f.config));
    if (f.seed) c.seed = *f.seed;
    if (f.workers) c.workers = *f.workers;
    if (!f.out.empty()) c.out_dir = f.out;
    if (!f.format.empty()) c.format = f.format;
    if (!f.input.empty()) c.input = f.input;
    if (c.workers == 0) throw ConfigError("workers must be positive");
    if (c.model && !c.model->seed) c.model->seed = c.seed;
    return c;
}

const ModelSource& require_model(const RunConfig& c) {
    if (!c.model) throw ConfigError("this command needs a \"model\" section");
    return *c.model;
}

ModelDims dims_of(const RunConfig& c) {
    if (!c.model) return ModelDims{};
    const ModelSource& src = *c.model;
    if (!src.file.empty()) return decode_model(read_file(src.file)).dims;
    return src.dims;
}

QuantConfig quant_of(const RunConfig& c, std::size_t layers) {
    if (!c.quant) return QuantConfig::uniform(layers, BlockFormat::identity());
    return quant_config_from_json(*c.quant, layers);
}

Dataset dataset_of(const RunConfig& c, const ModelDims& dims) {
    return synth_dataset(dims, c.dataset.value_or(DatasetSpec{}));
}

// ---------------------------------------------------------------- make-model

void cmd_make_model(const RunConfig& c) {
    ModelSource src = c.model.value_or(ModelSource{});
    if (!src.seed) src.seed = c.seed;
    const ToyModel m = materialize_model(src);
    JsonWriter w;
    w.begin_object()
        .key("d_model").value(std::uint64_t{m.dims.d_model})
        .key("d_ff").value(std::uint64_t{m.dims.d_ff})
        .key("heads").value(std::uint64_t{m.dims.heads})
        .key("layers").value(std::uint64_t{m.dims.layers})
        .key("vocab").value(std::uint64_t{m.dims.vocab})
        .key("seq_len").value(std::uint64_t{m.dims.seq_len})
        .key("seed").value(m.seed)
        .end_object();
    Outputs out(c.out_dir);
    out.add("model.bqtm", encode_model(m));
    out.add("model.json", w.str() + "\n");
    out.commit();
    std::cout << w.str() << "\n";
}

// ---------------------------------------------------------------- quantize

void cmd_quantize(const RunConfig& c) {
    if (c.input.empty()) throw ConfigError("quantize needs an input tensor (\"input\" or --input)");
    if (!c.quant) throw ConfigError("quantize needs a \"quant\" format descriptor");
    const BlockFormat fmt = format_from_json(*c.quant);
    const Tensor t = load_tensor(c.input);
    const QTensor q = quantize(t, fmt);
    const QuantError err = quant_error(t, fmt);

    std::string report;
    if (c.format == "csv") {
        report = csv_line({"mse", "sqnr_db", "max_abs_err", "elements"}) +
                 csv_line({format_real(err.mse), format_real(err.sqnr_db), format_real(err.max_abs_err),
                           str(t.size())});
    } else {
        JsonWriter w;
        w.begin_object()
            .key("format").raw(format_to_json(fmt))
            .key("elements").value(std::uint64_t{t.size()})
            .key("mse").value(err.mse)
            .key("sqnr_db").value(err.sqnr_db)
            .key("max_abs_err").value(err.max_abs_err)
            .end_object();
        report = w.str() + "\n";
    }
    Outputs out(c.out_dir);
    out.add("qtensor.bqqt", encode_qtensor(q));
    out.add(c.format == "csv" ? "quant_error.csv" : "quant_error.json", report);
    out.commit();
    std::cout << report;
}

// ---------------------------------------------------------------- eval

void cmd_eval(const RunConfig& c) {
    const ToyModel m = materialize_model(require_model(c));
    const Dataset data = dataset_of(c, m.dims);
    const QuantConfig q = quant_of(c, m.dims.layers);
    const EvalResult r = evaluate(m, data, q, c.workers);
    const DensityReport d = density_report(q, m.dims);

    std::string report;
    if (c.format == "csv") {
        report = csv_line({"accuracy", "mean_loss", "scored", "memory_density", "arithmetic_density"}) +
                 csv_line({format_real(r.accuracy), format_real(r.mean_loss), str(r.scored),
                           format_real(d.memory_density),
                           d.arithmetic_density ? format_real(*d.arithmetic_density) : ""});
    } else {
        JsonWriter w;
        w.begin_object()
            .key("accuracy").value(r.accuracy)
            .key("mean_loss").value(r.mean_loss)
            .key("scored").value(std::uint64_t{r.scored})
            .key("memory_density").value(d.memory_density)
            .key("arithmetic_density");
        if (d.arithmetic_density) {
            w.value(*d.arithmetic_density);
        } else {
            w.null();
        }
        w.end_object();
        report = w.str() + "\n";
    }
    Outputs out(c.out_dir);
    out.add(c.format == "csv" ? "eval.csv" : "eval.json", report);
    out.commit();
    std::cout << report;
}

// ---------------------------------------------------------------- density

void cmd_density(const RunConfig& c) {
    const ModelDims dims = dims_of(c);
    const QuantConfig q = quant_of(c, dims.layers);
    const DensityReport d = density_report(q, dims);

    std::string report;
    if (c.format == "csv") {
        report = csv_line({"site", "elements", "bits_per_element"});
        for (const SiteDensity& s : d.sites) {
            report += csv_line({s.key.str(), str(s.elements), format_real(s.bits_per_element)});
        }
    } else {
        JsonWriter w;
        w.begin_object().key("sites").begin_array();
        for (const SiteDensity& s : d.sites) {
            w.begin_object()
                .key("site").value(s.key.str())
                .key("elements").value(std::uint64_t{s.elements})
                .key("bits_per_element").value(s.bits_per_element)
                .end_object();
        }
        w.end_array()
            .key("total_bits").value(d.total_bits)
            .key("total_elements").value(std::uint64_t{d.total_elements})
            .key("mean_bits").value(d.mean_bits)
            .key("memory_density").value(d.memory_density)
            .key("memory_density_rounded").value(format_one_decimal(d.memory_density))
            .key("arithmetic_density");
        if (d.arithmetic_density) {
            w.value(*d.arithmetic_density);
        } else {
            w.null();
        }
        w.end_object();
        report = w.str() + "\n";
    }
    Outputs out(c.out_dir);
    out.add(c.format == "csv" ? "density.csv" : "density.json", report);
    out.commit();
    std::cout << report;
}

// ---------------------------------------------------------------- profile

void cmd_profile(const RunConfig& c) {
    const ToyModel m = materialize_model(require_model(c));
    const Dataset data = dataset_of(c, m.dims);
    std::optional<QuantConfig> q;
    if (c.quant) q = quant_config_from_json(*c.quant, m.dims.layers);
    const VarianceProfile p = variance_profile(m, data, c.profile_sites, q ? &*q : nullptr);

    std::string report;
    if (c.format == "csv") {
        report = csv_line({"layer", "site", "count", "mean", "variance"});
        for (const SiteVariance& v : p.entries) {
            report += csv_line({str(v.layer), std::string(probe_name(v.site)), str(v.count),
                                format_real(v.mean), format_real(v.variance)});
        }
    } else {
        JsonWriter w;
        w.begin_object().key("entries").begin_array();
        for (const SiteVariance& v : p.entries) {
            w.begin_object()
                .key("layer").value(std::uint64_t{v.layer})
                .key("site").value(probe_name(v.site))
                .key("count").value(std::uint64_t{v.count})
                .key("mean").value(v.mean)
                .key("variance").value(v.variance)
                .end_object();
        }
        w.end_array().end_object();
        report = w.str() + "\n";
    }
    Outputs out(c.out_dir);
    out.add(c.format == "csv" ? "profile.csv" : "profile.json", report);
    out.commit();
    std::cout << report;
}

// ---------------------------------------------------------------- search

std::string trial_json(const Trial& t, const SearchSpace& space, const Objective& obj) {
    JsonWriter w;
    w.begin_object().key("index").value(std::uint64_t{t.index}).key("seed").value(t.seed);
    w.key("config").begin_object();
    for (std::size_t d = 0; d < space.dims.size(); ++d) {
        const SearchDim& dim = space.dims[d];
        w.key(dim.key.str())
            .begin_object()
            .key("width").value(dim.width_of(t.choices[d]))
            .key("block").value(std::uint64_t{dim.block_of(t.choices[d])})
            .end_object();
    }
    w.end_object().key("acc").value(t.acc).key("mem").value(t.mem);
    w.key("extras").begin_object();
    for (std::size_t i = 0; i < obj.extras.size() && i < t.extras.size(); ++i) {
        w.key(obj.extras[i].first).value(t.extras[i]);
    }
    w.end_object().key("score").value(t.score).key("status").value(t.status).end_object();
    return w.str();
}

std::string histogram_csv(const std::vector<HistogramRow>& rows) {
    std::vector<std::string> header{"dimension", "samples"};
    for (const char* b : kWidthBuckets) header.emplace_back(b);
    std::string out = csv_line(header);
    for (const HistogramRow& r : rows) {
        std::vector<std::string> cells{r.key.str(), str(r.samples)};
        for (double f : r.fractions) cells.push_back(r.empty() ? "" : format_real(f));
        out += csv_line(cells);
    }
    return out;
}

bool is_activation(const SiteKey& k) { return !is_weight_operand(k.site, k.operand); }

double uniform4_density(const ModelDims& dims) {
    return memory_density(QuantConfig::uniform(dims.layers, BlockFormat::bfp_width(4)), dims);
}

void cmd_search(const RunConfig& c) {
    const ToyModel m = materialize_model(require_model(c));
    const Dataset data = dataset_of(c, m.dims);
    const SearchSettings& s = c.search;
    const SearchSpace space = SearchSpace::per_operand(m.dims.layers, s.widths, s.search_block_size);
    space.validate();

    const double fp_acc =
        evaluate(m, data, QuantConfig::uniform(m.dims.layers, BlockFormat::identity()), c.workers).accuracy;
    log(Level::Info, "fp64 accuracy " + format_real(fp_acc));

    std::vector<std::string> extra_names;
    for (const auto& e : s.extras) extra_names.push_back(e.first);
    const Evaluator evaluator = [&](const std::vector<std::uint32_t>& choices) {
        const QuantConfig q = space.to_config(choices);
        Metrics out;
        out.acc = evaluate(m, data, q, 1).accuracy;
        out.mem = memory_density(q, m.dims);
        for (const auto& name : extra_names) {
            if (name == "arithmetic_density") out.extras.push_back(arithmetic_density(q, m.dims));
        }
        return out;
    };

    SearchOptions opts;
    opts.tpe = s.tpe;
    opts.workers = c.workers;
    opts.batch = s.batch;
    opts.random_only = s.random_only;

    Objective obj;
    obj.extras = s.extras;
    std::optional<AlphaCalibration> cal;
    if (s.alpha) {
        obj.alpha = *s.alpha;
    } else {
        cal = calibrate_alpha(space, evaluator, s.calibration_budget, Rng::mix(c.seed, 0xCA11B), opts,
                              s.patience);
        obj.alpha = cal->alpha;
        log(Level::Info, "calibrated alpha " + format_real(obj.alpha));
    }

    const std::vector<Trial> trials = run_search(space, obj, evaluator, s.budget, c.seed, opts);
    const double acc_floor = s.acc_floor.value_or(fp_acc - s.acc_margin);
    const double mem_floor = s.mem_floor.value_or(uniform4_density(m.dims));
    const std::vector<Trial> filtered = filter_trials(trials, acc_floor, mem_floor);
    log(Level::Info, str(filtered.size()) + " of " + str(trials.size()) + " trials pass the floors");

    std::string log_text;
    for (const Trial& t : trials) log_text += trial_json(t, space, obj) + "\n";

    std::size_t best = 0;
    for (std::size_t i = 1; i < trials.size(); ++i) {
        if (trials[i].score > trials[best].score) best = i;
    }

    JsonWriter w;
    w.begin_object()
        .key("seed").value(c.seed)
        .key("fp_accuracy").value(fp_acc)
        .key("alpha").value(obj.alpha)
        .key("alpha_source").value(cal ? "calibrated" : "fixed");
    if (cal) {
        w.key("calibration").begin_object()
            .key("acc_c").value(cal->acc_c)
            .key("mem_c").value(cal->mem_c)
            .key("trials").value(std::uint64_t{cal->trials})
            .key("converged").value(cal->converged)
            .end_object();
    }
    w.key("acc_floor").value(acc_floor)
        .key("mem_floor").value(mem_floor)
        .key("trials").value(std::uint64_t{trials.size()})
        .key("filtered").value(std::uint64_t{filtered.size()});
    if (!trials.empty()) {
        const Trial& b = trials[best];
        w.key("best").begin_object()
            .key("index").value(std::uint64_t{b.index})
            .key("acc").value(b.acc)
            .key("mem").value(b.mem)
            .key("score").value(b.score)
            .end_object();
    }
    w.key("mean_width").begin_object()
        .key("filtered_activations").value(mean_width(filtered, space, is_activation))
        .key("filtered_weights")
        .value(mean_width(filtered, space, [](const SiteKey& k) { return !is_activation(k); }))
        .end_object();
    w.end_object();

    Outputs out(c.out_dir);
    out.add("trials.jsonl", log_text);
    out.add("histogram.csv", histogram_csv(bitwidth_histogram(filtered, space)));
    out.add("best_config.json",
            (trials.empty() ? std::string("null") : quant_config_to_json(space.to_config(trials[best].choices))) +
                "\n");
    out.add("summary.json", w.str() + "\n");
    out.commit();
    std::cout << w.str() << "\n";
}

// ---------------------------------------------------------------- report

struct LoggedTrials {
    SearchSpace space;
    std::vector<Trial> trials;
};

/// Rebuilds a search space and trial list from a trial log. The space has
/// one dimension per logged site, with the widths and block sizes seen.
LoggedTrials read_trial_log(const std::string& path) {
    const std::string text = read_file(path);
    std::vector<nlohmann::ordered_json> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        try {
            lines.push_back(nlohmann::ordered_json::parse(line));
        } catch (const json::exception&) {
            throw ConfigError("trial log line " + str(lines.size() + 1) + " is not JSON");
        }
    }
    LoggedTrials out;
    if (lines.empty()) return out;

    std::vector<std::string> keys;
    std::map<std::string, std::pair<std::set<int>, std::set<std::size_t>>> seen;
    try {
        for (const auto& [k, v] : lines.front().at("config").items()) keys.push_back(k);
        for (const nlohmann::ordered_json& l : lines) {
            for (const std::string& k : keys) {
                const nlohmann::ordered_json& e = l.at("config").at(k);
                seen[k].first.insert(e.at("width").get<int>());
                seen[k].second.insert(e.at("block").get<std::size_t>());
            }
        }
        for (const std::string& k : keys) {
            const auto key = SiteKey::parse(k);
            if (!key) throw ConfigError("trial log has bad site key '" + k + "'");
            SearchDim d;
            d.key = *key;
            d.widths.assign(seen[k].first.begin(), seen[k].first.end());
            d.block_sizes.assign(seen[k].second.begin(), seen[k].second.end());
            out.space.dims.push_back(std::move(d));
        }
        for (const nlohmann::ordered_json& l : lines) {
            Trial t;
            t.index = l.at("index").get<std::size_t>();
            t.seed = l.at("seed").get<std::uint64_t>();
            t.acc = l.at("acc").get<double>();
            t.mem = l.at("mem").get<double>();
            t.score = l.at("score").get<double>();
            t.status = l.at("status").get<std::string>();
            for (const SearchDim& d : out.space.dims) {
                const nlohmann::ordered_json& e = l.at("config").at(d.key.str());
                const auto wi = std::find(d.widths.begin(), d.widths.end(), e.at("width").get<int>());
                const auto bi =
                    std::find(d.block_sizes.begin(), d.block_sizes.end(), e.at("block").get<std::size_t>());
                t.choices.push_back(static_cast<std::uint32_t>(
                    (wi - d.widths.begin()) * static_cast<std::ptrdiff_t>(d.block_sizes.size()) +
                    (bi - d.block_sizes.begin())));
            }
            out.trials.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed trial log: ") + e.what());
    }
    return out;
}

void cmd_report(const RunConfig& c) {
    if (c.input.empty()) throw ConfigError("report needs a trial log (\"input\" or --input)");
    const LoggedTrials logged = read_trial_log(c.input);
    const SearchSettings& s = c.search;

    double acc_floor = 0.0;
    if (s.acc_floor) {
        acc_floor = *s.acc_floor;
    } else {
        if (!c.model) throw ConfigError("report needs search.acc_floor or a model to measure fp accuracy");
        const ToyModel m = materialize_model(*c.model);
        acc_floor = evaluate(m, dataset_of(c, m.dims),
                             QuantConfig::uniform(m.dims.layers, BlockFormat::identity()), c.workers)
                        .accuracy -
                    s.acc_margin;
    }
    double mem_floor = 0.0;
    if (s.mem_floor) {
        mem_floor = *s.mem_floor;
    } else {
        if (!c.model) throw ConfigError("report needs search.mem_floor or model dims");
        mem_floor = uniform4_density(dims_of(c));
    }

    const std::vector<Trial> filtered = filter_trials(logged.trials, acc_floor, mem_floor);
    const auto rows = bitwidth_histogram(filtered, logged.space);

    JsonWriter w;
    w.begin_object()
        .key("acc_floor").value(acc_floor)
        .key("mem_floor").value(mem_floor)
        .key("trials").value(std::uint64_t{logged.trials.size()})
        .key("filtered").value(std::uint64_t{filtered.size()})
        .key("mean_width").begin_object()
        .key("activations").value(mean_width(filtered, logged.space, is_activation))
        .key("weights").value(mean_width(filtered, logged.space, [](const SiteKey& k) { return !is_activation(k); }))
        .end_object()
        .end_object();

    Outputs out(c.out_dir);
    out.add("report_histogram.csv", histogram_csv(rows));
    out.add("report_summary.json", w.str() + "\n");
    out.commit();

    // Human-facing table, one decimal place.
    std::printf("%-18s %7s", "dimension", "samples");
    for (const char* b : kWidthBuckets) std::printf(" %6s", b);
    std::printf("\n");
    for (const HistogramRow& r : rows) {
        std::printf("%-18s %7zu", r.key.str().c_str(), r.samples);
        for (double f : r.fractions) {
            std::printf(" %6s", r.empty() ? "-" : format_one_decimal(100.0 * f).c_str());
        }
        std::printf("\n");
    }
    std::printf("filtered %zu of %zu trials (acc >= %s, mem >= %s)\n", filtered.size(), logged.trials.size(),
                format_real(acc_floor).c_str(), format_one_decimal(mem_floor).c_str());
}

// ---------------------------------------------------------------- main

int fail(const char* kind, const std::string& message, int code) {
    JsonWriter w;
    w.begin_object()
        .key("error").value(kind)
        .key("message").value(message)
        .key("exit_code").value(code)
        .end_object();
    std::cerr << w.str() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blockquant: block-format quantisation experiments"};
    app.require_subcommand(1);
    Flags flags;

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const RunConfig&);
    };
    const Command commands[] = {
        {"make-model", "generate a toy model file", cmd_make_model},
        {"quantize", "quantise a tensor file and report the error", cmd_quantize},
        {"eval", "evaluate a model under a quantisation config", cmd_eval},
        {"density", "memory and arithmetic density of a config", cmd_density},
        {"profile", "activation variance per layer and site", cmd_profile},
        {"search", "mixed-precision search", cmd_search},
        {"report", "filter a trial log and summarise widths", cmd_report},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const Command& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", flags.config, "JSON config file");
        sub->add_option("--seed", flags.seed, "run seed (overrides the config)");
        sub->add_option("--workers", flags.workers, "worker threads");
        sub->add_option("--out", flags.out, "output directory");
        sub->add_option("--format", flags.format, "report format")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--input", flags.input, "input tensor or trial log");
        subs.emplace_back(sub, &cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", e.what(), 2);
    }

    try {
        for (const auto& [sub, cmd] : subs) {
            if (sub->parsed()) {
                const RunConfig cfg = load_config(flags);
                cmd->run(cfg);
            }
        }
    } catch (const InvalidInput& e) {
        return fail(e.kind(), e.what(), 3);
    } catch (const Error& e) {
        return fail(e.kind(), e.what(), 2);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
