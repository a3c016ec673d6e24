// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "blockquant/errors.hpp"
#include "blockquant/rng.hpp"
#include "blockquant/search.hpp"

using namespace bq;

namespace {

Trial make_trial(std::size_t index, std::vector<std::uint32_t> choices, double score) {
    Trial t;
    t.index = index;
    t.choices = std::move(choices);
    t.score = score;
    t.acc = score;
    return t;
}

// Planted separable objective: one point per dimension at its target.
Evaluator planted(const SearchSpace& space, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint32_t> target;
    for (const SearchDim& d : space.dims) target.push_back(static_cast<std::uint32_t>(rng.below(d.choices())));
    return [target](const std::vector<std::uint32_t>& c) {
        Metrics m;
        for (std::size_t i = 0; i < c.size(); ++i) m.acc += c[i] == target[i] ? 1.0 : 0.0;
        return m;
    };
}

// Smooth toy trade-off: wider formats raise accuracy and lower density.
Metrics tradeoff(const SearchSpace& space, const std::vector<std::uint32_t>& c) {
    double bits = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const int w = space.dims[i].width_of(c[i]);
        bits += w;
        acc += 1.0 - std::ldexp(1.0, -w);
    }
    Metrics m;
    m.acc = acc / static_cast<double>(c.size());
    m.mem = 32.0 * static_cast<double>(c.size()) / bits;
    return m;
}

void check_same_trials(const std::vector<Trial>& a, const std::vector<Trial>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].index == b[i].index);
        CHECK(a[i].choices == b[i].choices);
        CHECK(a[i].score == b[i].score);
        CHECK(a[i].acc == b[i].acc);
        CHECK(a[i].mem == b[i].mem);
        CHECK(a[i].seed == b[i].seed);
    }
}

}  // namespace

TEST_CASE("search space") {
    const SearchSpace s = SearchSpace::per_operand(6);
    CHECK(s.dims.size() == 96);
    CHECK(s.dims[0].choices() == 5);
    CHECK(s.dims[0].format(0) == BlockFormat::bfp(3));
    CHECK(s.dims[0].format(4) == BlockFormat::bfp(7));
    const QuantConfig q = s.to_config(std::vector<std::uint32_t>(96, 2));
    CHECK(q.at({4, GemmSite::FC1, Operand::A}) == BlockFormat::bfp(5));

    const SearchSpace b = SearchSpace::per_operand(1, {4, 8}, true);
    for (const SearchDim& d : b.dims) {
        const bool weight = is_weight_operand(d.key.site, d.key.operand);
        CHECK(d.block_sizes == (weight ? std::vector<std::size_t>{16, 32} : std::vector<std::size_t>{8, 16}));
        CHECK(d.choices() == 4);
        CHECK(d.width_of(3) == 8);
        CHECK(d.format(3).block.cols == d.block_sizes[1]);
    }

    SearchSpace bad = SearchSpace::per_operand(1, {4});
    bad.dims[2].widths.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(SearchSpace::per_operand(1, {1}).validate(), ConfigError);
    CHECK(SearchSpace::per_operand(6).size() == UINT64_MAX);
    CHECK(SearchSpace::per_operand(1, {4, 5}).size() == 65536);
}

TEST_CASE("objective") {
    const Objective o{0.15, {{"arithmetic_density", 0.01}}};
    CHECK(o.score(0.9, 4.0, {20.0}) == 0.9 + 0.15 * 4.0 + 0.01 * 20.0);
    CHECK(Objective{2.0, {}}.score(0.5, 3.0, {}) == 6.5);
    CHECK(alpha_from(0.6, 4.0) == 0.15);
    CHECK(alpha_from(1.0, 1.0) == 1.0);
}

TEST_CASE("startup suggestions are seeded random") {
    const SearchSpace s = SearchSpace::per_operand(2);
    const auto a = tpe_suggest({}, s, {}, 7);
    CHECK(a == tpe_suggest({}, s, {}, 7));
    CHECK(a != tpe_suggest({}, s, {}, 8));
    CHECK(a == random_suggest(s, 7));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] < s.dims[i].choices());
}

TEST_CASE("a choice seen only in good trials is favoured") {
    const SearchSpace s = SearchSpace::per_operand(1, {4, 5, 6, 7, 8});
    std::vector<Trial> history;
    Rng rng(1);
    for (std::size_t i = 0; i < 20; ++i) {
        std::vector<std::uint32_t> c(s.dims.size());
        for (auto& x : c) x = static_cast<std::uint32_t>(rng.below(4));
        const bool good = i % 4 == 0;  // 5 good trials
        if (good) c[0] = 4;
        history.push_back(make_trial(i, c, good ? 2.0 : 1.0));
    }
    const TpeParams p;
    const TpeDensities d = tpe_densities(history, s, p);
    CHECK(d.n_good == 5);
    CHECK(d.good[0][4] == doctest::Approx(6.0 / 10.0));
    CHECK(d.bad[0][4] == doctest::Approx(1.0 / 20.0));
    for (std::size_t i = 0; i < s.dims.size(); ++i) {
        CHECK(std::accumulate(d.good[i].begin(), d.good[i].end(), 0.0) == doctest::Approx(1.0));
        CHECK(std::accumulate(d.bad[i].begin(), d.bad[i].end(), 0.0) == doctest::Approx(1.0));
    }
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) hits += tpe_suggest(history, s, p, seed)[0] == 4 ? 1 : 0;
    CHECK(hits > 200 / 5);
    CHECK(hits > 150);
}

TEST_CASE("equal scores split by index") {
    const SearchSpace s = SearchSpace::per_operand(1, {4, 8});
    std::vector<Trial> history;
    for (std::size_t i = 0; i < 13; ++i) {
        history.push_back(make_trial(i, std::vector<std::uint32_t>(s.dims.size(), i < 4 ? 1u : 0u), 1.0));
    }
    const TpeDensities d = tpe_densities(history, s, {});
    CHECK(d.n_good == 4);
    // the first four trials (all choice 1) form the good set
    CHECK(d.good[0][1] == doctest::Approx(5.0 / 6.0));
    const auto c = tpe_suggest(history, s, {}, 3);
    REQUIRE(c.size() == s.dims.size());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] < 2);
}

TEST_CASE("run_search is deterministic, independent of workers, and scores recompute exactly") {
    const SearchSpace s = SearchSpace::per_operand(2, {3, 4, 5, 6, 7, 8});
    const Objective o{0.05, {}};
    const Evaluator ev = [&](const std::vector<std::uint32_t>& c) { return tradeoff(s, c); };
    const auto a = run_search(s, o, ev, 60, 11);
    CHECK(a.size() == 60);
    SearchOptions four;
    four.workers = 4;
    check_same_trials(a, run_search(s, o, ev, 60, 11, four));
    check_same_trials(a, run_search(s, o, ev, 60, 11));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].index == i);
        CHECK(a[i].score == o.score(a[i].acc, a[i].mem, a[i].extras));
    }
    const auto best = best_so_far(a);
    for (std::size_t i = 1; i < best.size(); ++i) CHECK(best[i] >= best[i - 1]);

    // budgets that are not a multiple of the batch
    CHECK(run_search(s, o, ev, 7, 11).size() == 7);
    // a different seed changes the trial list
    CHECK(run_search(s, o, ev, 20, 12)[0].choices != a[0].choices);
}

TEST_CASE("incremental runs match one-shot runs") {
    const SearchSpace s = SearchSpace::per_operand(1, {4, 6, 8});
    const Evaluator ev = [&](const std::vector<std::uint32_t>& c) { return tradeoff(s, c); };
    SearchRun run(s, Objective{0.1, {}}, ev, 5);
    // one batch per step, capped at the budget
    run.step(30);
    CHECK(run.trials().size() == 4);
    while (run.trials().size() < 30) run.step(30);
    run.step(30);
    CHECK(run.trials().size() == 30);
    check_same_trials(run.trials(), run_search(s, Objective{0.1, {}}, ev, 30, 5));
    const auto& t = run.trials();
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i].score > t[best].score) best = i;
    }
    CHECK(run.best_index() == best);
}

TEST_CASE("TPE beats random sampling on a planted objective") {
    const SearchSpace s = SearchSpace::per_operand(1, {4, 5, 6, 7, 8});
    double tpe = 0.0, rnd = 0.0;
    SearchOptions random_only;
    random_only.random_only = true;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const Evaluator ev = planted(s, seed * 100);
        const auto a = run_search(s, Objective{0.0, {}}, ev, 120, seed);
        const auto b = run_search(s, Objective{0.0, {}}, ev, 120, seed, random_only);
        tpe += best_so_far(a).back();
        rnd += best_so_far(b).back();
    }
    CHECK(tpe > rnd);
}

TEST_CASE("alpha calibration") {
    const SearchSpace s = SearchSpace::per_operand(1, {4, 6, 8});
    const Evaluator ev = [&](const std::vector<std::uint32_t>& c) { return tradeoff(s, c); };
    const AlphaCalibration a = calibrate_alpha(s, ev, 400, 7, {}, 30);
    const AlphaCalibration b = calibrate_alpha(s, ev, 400, 7, {}, 30);
    CHECK(a.alpha == b.alpha);
    CHECK(a.trials == b.trials);
    CHECK(a.converged);
    CHECK(a.trials < 400);
    CHECK(a.alpha == alpha_from(a.acc_c, a.mem_c));
    const AlphaCalibration capped = calibrate_alpha(s, ev, 12, 7, {}, 1000);
    CHECK_FALSE(capped.converged);
    CHECK(capped.trials == 12);
}

TEST_CASE("filter_trials") {
    std::vector<Trial> t;
    for (std::size_t i = 0; i < 5; ++i) {
        Trial x = make_trial(i, {0}, 0.0);
        x.acc = 0.5 + 0.1 * static_cast<double>(i);
        x.mem = 8.0 - static_cast<double>(i);
        t.push_back(x);
    }
    CHECK(filter_trials(t, 0.0, 0.0).size() == 5);
    CHECK(filter_trials(t, 2.0, 0.0).empty());
    const auto f = filter_trials(t, 0.7, 5.0);
    REQUIRE(f.size() == 2);
    CHECK(f[0].index == 2);
    CHECK(f[1].index == 3);
}

TEST_CASE("width buckets, histogram and mean width") {
    CHECK(width_bucket(2) == 0);
    CHECK(width_bucket(4) == 0);
    CHECK(width_bucket(5) == 1);
    CHECK(width_bucket(8) == 4);
    CHECK(width_bucket(12) == 4);

    const SearchSpace s = SearchSpace::per_operand(1, {2, 4, 5, 6, 7, 8});
    Rng rng(3);
    std::vector<Trial> t;
    for (std::size_t i = 0; i < 37; ++i) {
        std::vector<std::uint32_t> c(s.dims.size());
        for (auto& x : c) x = static_cast<std::uint32_t>(rng.below(6));
        t.push_back(make_trial(i, c, 0.0));
    }
    const auto h = bitwidth_histogram(t, s);
    REQUIRE(h.size() == s.dims.size());
    for (const HistogramRow& r : h) {
        CHECK(r.samples == 37);
        CHECK(std::fabs(std::accumulate(r.fractions.begin(), r.fractions.end(), 0.0) - 1.0) <= 1e-12);
    }
    const auto empty = bitwidth_histogram({}, s);
    for (const HistogramRow& r : empty) CHECK(r.empty());

    double sum = 0.0;
    std::size_t n = 0;
    for (const Trial& x : t) {
        sum += s.dims[3].width_of(x.choices[3]);
        ++n;
    }
    const SiteKey k3 = s.dims[3].key;
    CHECK(mean_width(t, s, [&](const SiteKey& k) { return k == k3; }) == doctest::Approx(sum / static_cast<double>(n)));
    CHECK(std::isnan(mean_width({}, s, [](const SiteKey&) { return true; })));
}
