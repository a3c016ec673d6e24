// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include "blockquant/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "blockquant/errors.hpp"
#include "blockquant/rng.hpp"

namespace bq {

BlockFormat SearchDim::format(std::uint32_t choice) const {
    return BlockFormat::bfp_width(width_of(choice), BlockShape{1, block_of(choice)});
}

SearchSpace SearchSpace::per_operand(std::size_t layers, std::vector<int> widths,
                                     bool search_block_size) {
    SearchSpace s;
    for (const SiteKey& key : all_site_keys(layers)) {
        SearchDim d{key, widths, {16}};
        if (search_block_size) {
            d.block_sizes = is_weight_operand(key.site, key.operand)
                                ? std::vector<std::size_t>{16, 32}
                                : std::vector<std::size_t>{8, 16};
        }
        s.dims.push_back(std::move(d));
    }
    return s;
}

void SearchSpace::validate() const {
    if (dims.empty()) throw ConfigError("search space has no dimensions");
    for (const SearchDim& d : dims) {
        if (d.widths.empty() || d.block_sizes.empty()) {
            throw ConfigError("search dimension " + d.key.str() + " has no choices");
        }
        for (int w : d.widths) {
            if (w < 2 || w > 32) throw ConfigError("search widths must be in [2, 32]");
        }
        for (std::size_t b : d.block_sizes) {
            if (b == 0) throw ConfigError("search block sizes must be positive");
        }
    }
}

std::uint64_t SearchSpace::size() const {
    std::uint64_t n = 1;
    for (const SearchDim& d : dims) {
        if (n > UINT64_MAX / d.choices()) return UINT64_MAX;
        n *= d.choices();
    }
    return n;
}

QuantConfig SearchSpace::to_config(const std::vector<std::uint32_t>& choices) const {
    if (choices.size() != dims.size()) throw ConfigError("choice vector does not match the space");
    QuantConfig q;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (choices[i] >= dims[i].choices()) throw ConfigError("choice out of range");
        q.set(dims[i].key, dims[i].format(choices[i]));
    }
    return q;
}

double Objective::score(double acc, double mem, const std::vector<double>& extra_values) const {
    if (extra_values.size() != extras.size()) throw ConfigError("objective extra metric count mismatch");
    double s = acc + alpha * mem;
    for (std::size_t i = 0; i < extras.size(); ++i) s += extras[i].second * extra_values[i];
    return s;
}

namespace {

std::uint32_t sample_categorical(Rng& rng, const std::vector<double>& p) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t c = 0; c + 1 < p.size(); ++c) {
        cum += p[c];
        if (u < cum) return static_cast<std::uint32_t>(c);
    }
    return static_cast<std::uint32_t>(p.size() - 1);
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t index) { return Rng::mix(seed, index); }

}  // namespace

TpeDensities tpe_densities(const std::vector<Trial>& history, const SearchSpace& space,
                           const TpeParams& params) {
    std::vector<std::size_t> order(history.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return history[a].score > history[b].score;
    });
    const std::size_t n = history.size();
    TpeDensities d;
    d.n_good = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.gamma * static_cast<double>(n))));
    d.n_good = std::min(d.n_good, n);
    const std::size_t n_bad = n - d.n_good;
    for (std::size_t k = 0; k < space.dims.size(); ++k) {
        const std::size_t kc = space.dims[k].choices();
        std::vector<double> good(kc, 0.0), bad(kc, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const std::uint32_t c = history[order[r]].choices[k];
            (r < d.n_good ? good : bad)[c] += 1.0;
        }
        const double w = params.prior_weight;
        for (std::size_t c = 0; c < kc; ++c) {
            good[c] = (good[c] + w) / (static_cast<double>(d.n_good) + w * static_cast<double>(kc));
            bad[c] = (bad[c] + w) / (static_cast<double>(n_bad) + w * static_cast<double>(kc));
        }
        d.good.push_back(std::move(good));
        d.bad.push_back(std::move(bad));
    }
    return d;
}

std::vector<std::uint32_t> random_suggest(const SearchSpace& space, std::uint64_t seed) {
    space.validate();
    Rng rng(seed);
    std::vector<std::uint32_t> out;
    for (const SearchDim& d : space.dims) out.push_back(static_cast<std::uint32_t>(rng.below(d.choices())));
    return out;
}

std::vector<std::uint32_t> tpe_suggest(const std::vector<Trial>& history, const SearchSpace& space,
                                       const TpeParams& params, std::uint64_t seed) {
    space.validate();
    if (history.size() < std::max<std::size_t>(params.n_startup, 1)) return random_suggest(space, seed);
    if (!(params.gamma > 0.0 && params.gamma <= 1.0) || params.n_candidates == 0 ||
        !(params.prior_weight > 0.0)) {
        throw ConfigError("tpe parameters out of range");
    }
    const TpeDensities dens = tpe_densities(history, space, params);
    Rng rng(seed);
    std::vector<std::uint32_t> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < params.n_candidates; ++i) {
        std::vector<std::uint32_t> cand;
        double log_ratio = 0.0;
        for (std::size_t k = 0; k < space.dims.size(); ++k) {
            const std::uint32_t c = sample_categorical(rng, dens.good[k]);
            cand.push_back(c);
            log_ratio += std::log(dens.good[k][c]) - std::log(dens.bad[k][c]);
        }
        if (log_ratio > best_score) {
            best_score = log_ratio;
            best = std::move(cand);
        }
    }
    return best;
}

SearchRun::SearchRun(SearchSpace space, Objective objective, Evaluator evaluator, std::uint64_t seed,
                     SearchOptions options)
    : space_(std::move(space)),
      objective_(std::move(objective)),
      evaluator_(std::move(evaluator)),
      seed_(seed),
      options_(options) {
    space_.validate();
    if (options_.batch == 0) throw ConfigError("search batch size must be positive");
}

void SearchRun::step(std::size_t max_trials) {
    const std::size_t start = trials_.size();
    const std::size_t count = std::min(options_.batch, max_trials - std::min(max_trials, start));
    if (count == 0) return;
    std::vector<Trial> batch(count);
    for (std::size_t i = 0; i < count; ++i) {
        Trial& t = batch[i];
        t.index = start + i;
        t.seed = trial_seed(seed_, t.index);
        t.choices = options_.random_only ? random_suggest(space_, t.seed)
                                         : tpe_suggest(trials_, space_, options_.tpe, t.seed);
    }
    auto run_one = [&](Trial& t) {
        try {
            const Metrics m = evaluator_(t.choices);
            t.acc = m.acc;
            t.mem = m.mem;
            t.extras = m.extras;
            t.score = objective_.score(t.acc, t.mem, t.extras);
        } catch (const InvalidInput& e) {
            t.status = "error";
            t.acc = 0.0;
            t.mem = 0.0;
            t.extras.assign(objective_.extras.size(), 0.0);
            t.score = objective_.score(t.acc, t.mem, t.extras);
        }
    };
    const std::size_t threads = std::min(std::max<std::size_t>(options_.workers, 1), count);
    if (threads <= 1) {
        for (Trial& t : batch) run_one(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = next++; i < count; i = next++) run_one(batch[i]);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    for (Trial& t : batch) trials_.push_back(std::move(t));
}

std::size_t SearchRun::best_index() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < trials_.size(); ++i) {
        if (trials_[i].score > trials_[best].score) best = i;
    }
    return best;
}

std::vector<Trial> run_search(const SearchSpace& space, const Objective& objective,
                              const Evaluator& evaluator, std::size_t budget, std::uint64_t seed,
                              const SearchOptions& options) {
    SearchRun run(space, objective, evaluator, seed, options);
    while (run.trials().size() < budget) run.step(budget);
    return run.trials();
}

std::vector<double> best_so_far(const std::vector<Trial>& trials) {
    std::vector<double> out;
    double best = -std::numeric_limits<double>::infinity();
    for (const Trial& t : trials) {
        best = std::max(best, t.score);
        out.push_back(best);
    }
    return out;
}

double alpha_from(double acc_c, double mem_c) {
    if (!(mem_c > 0.0)) throw InvalidInput("memory density must be positive");
    return acc_c / mem_c;
}

AlphaCalibration calibrate_alpha(const SearchSpace& space, const Evaluator& evaluator,
                                 std::size_t budget, std::uint64_t seed,
                                 const SearchOptions& options, std::size_t patience) {
    // calibration scores acc + mem only, so extra metrics are dropped
    const Evaluator plain = [&evaluator](const std::vector<std::uint32_t>& choices) {
        Metrics m = evaluator(choices);
        m.extras.clear();
        return m;
    };
    SearchRun run(space, Objective{1.0, {}}, plain, seed, options);
    AlphaCalibration out;
    std::size_t last_improvement = 0;
    double best = -std::numeric_limits<double>::infinity();
    while (run.trials().size() < budget) {
        const std::size_t before = run.trials().size();
        run.step(budget);
        for (std::size_t i = before; i < run.trials().size(); ++i) {
            if (run.trials()[i].score > best) {
                best = run.trials()[i].score;
                last_improvement = i;
            }
        }
        if (run.trials().size() - 1 - last_improvement >= patience) {
            out.converged = true;
            break;
        }
    }
    const Trial& b = run.trials()[run.best_index()];
    out.acc_c = b.acc;
    out.mem_c = b.mem;
    out.alpha = alpha_from(b.acc, b.mem);
    out.trials = run.trials().size();
    return out;
}

std::vector<Trial> filter_trials(const std::vector<Trial>& trials, double acc_floor, double mem_floor) {
    std::vector<Trial> out;
    for (const Trial& t : trials) {
        if (t.status == "ok" && t.acc >= acc_floor && t.mem >= mem_floor) out.push_back(t);
    }
    return out;
}

std::size_t width_bucket(int width) {
    if (width <= 4) return 0;
    return static_cast<std::size_t>(std::min(width, 8) - 4);
}

std::vector<HistogramRow> bitwidth_histogram(const std::vector<Trial>& filtered, const SearchSpace& space) {
    std::vector<HistogramRow> rows;
    for (std::size_t k = 0; k < space.dims.size(); ++k) {
        HistogramRow row;
        row.key = space.dims[k].key;
        std::array<std::size_t, 5> counts{};
        for (const Trial& t : filtered) ++counts[width_bucket(space.dims[k].width_of(t.choices[k]))];
        row.samples = filtered.size();
        for (std::size_t b = 0; b < counts.size(); ++b) {
            row.fractions[b] = row.samples == 0 ? 0.0
                                                : static_cast<double>(counts[b]) / static_cast<double>(row.samples);
        }
        rows.push_back(row);
    }
    return rows;
}

double mean_width(const std::vector<Trial>& trials, const SearchSpace& space,
                  const std::function<bool(const SiteKey&)>& select) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Trial& t : trials) {
        for (std::size_t k = 0; k < space.dims.size(); ++k) {
            if (!select(space.dims[k].key)) continue;
            sum += space.dims[k].width_of(t.choices[k]);
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

}  // namespace bq
