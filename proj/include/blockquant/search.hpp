// Copyright (C) 2026 The blockquant authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "blockquant/block_format.hpp"
#include "blockquant/transformer.hpp"

namespace bq {

/// One searched GEMM operand: candidate BFP element widths (sign +
/// width-1 mantissa bits, 8-bit shared exponent) times candidate block
/// lengths along the reduction axis.
struct SearchDim {
    SiteKey key;
    std::vector<int> widths;
    std::vector<std::size_t> block_sizes{16};

    std::size_t choices() const { return widths.size() * block_sizes.size(); }
    int width_of(std::uint32_t choice) const { return widths[choice / block_sizes.size()]; }
    std::size_t block_of(std::uint32_t choice) const { return block_sizes[choice % block_sizes.size()]; }
    BlockFormat format(std::uint32_t choice) const;
};

struct SearchSpace {
    std::vector<SearchDim> dims;

    /// Every operand of every layer with the given widths. With
    /// `search_block_size`, weight operands choose blocks from {16, 32}
    /// and activation operands from {8, 16}.
    static SearchSpace per_operand(std::size_t layers, std::vector<int> widths = {4, 5, 6, 7, 8},
                                   bool search_block_size = false);

    /// Throws ConfigError when a dimension has no choices or a width is
    /// outside [2, 32].
    void validate() const;
    /// Product of choice counts (saturates at UINT64_MAX).
    std::uint64_t size() const;
    QuantConfig to_config(const std::vector<std::uint32_t>& choices) const;
};

/// score = acc + alpha * mem + sum_i weight_i * extra_i, evaluated left to
/// right in that order.
struct Objective {
    double alpha = 1.0;
    std::vector<std::pair<std::string, double>> extras;

    double score(double acc, double mem, const std::vector<double>& extra_values) const;
};

struct Metrics {
    double acc = 0.0;
    double mem = 0.0;
    std::vector<double> extras;  // same order as Objective::extras
};

struct Trial {
    std::size_t index = 0;
    std::vector<std::uint32_t> choices;
    double acc = 0.0;
    double mem = 0.0;
    std::vector<double> extras;
    double score = 0.0;
    std::uint64_t seed = 0;
    std::string status = "ok";
};

struct TpeParams {
    double gamma = 0.25;
    std::size_t n_startup = 10;
    std::size_t n_candidates = 24;
    double prior_weight = 1.0;
};

/// Per-dimension smoothed category probabilities of the good and bad sets.
struct TpeDensities {
    std::vector<std::vector<double>> good;
    std::vector<std::vector<double>> bad;
    std::size_t n_good = 0;
};

/// Splits `history` by score (descending, earlier index first on ties)
/// into the top max(1, ceil(gamma * n)) trials and the rest, then builds
/// (count + prior_weight) / (n + prior_weight * choices) estimates.
TpeDensities tpe_densities(const std::vector<Trial>& history, const SearchSpace& space,
                           const TpeParams& params);

/// Uniform random choice per dimension.
std::vector<std::uint32_t> random_suggest(const SearchSpace& space, std::uint64_t seed);

/// Random below n_startup trials, otherwise the best of n_candidates draws
/// from the good density ranked by the product of good/bad ratios.
std::vector<std::uint32_t> tpe_suggest(const std::vector<Trial>& history, const SearchSpace& space,
                                       const TpeParams& params, std::uint64_t seed);

using Evaluator = std::function<Metrics(const std::vector<std::uint32_t>& choices)>;

struct SearchOptions {
    TpeParams tpe;
    std::size_t workers = 1;
    /// Suggestions made per round against the same history. Fixed
    /// independently of `workers` so results do not depend on it.
    std::size_t batch = 4;
    /// Skip the model and sample every configuration uniformly.
    bool random_only = false;
};

/// Incremental search: each step suggests one batch, evaluates it (in
/// parallel when workers > 1) and appends trials in index order.
class SearchRun {
public:
    SearchRun(SearchSpace space, Objective objective, Evaluator evaluator, std::uint64_t seed,
              SearchOptions options = {});

    void step(std::size_t max_trials);
    const std::vector<Trial>& trials() const { return trials_; }
    /// Index of the best trial (first among equal scores).
    std::size_t best_index() const;

private:
    SearchSpace space_;
    Objective objective_;
    Evaluator evaluator_;
    std::uint64_t seed_;
    SearchOptions options_;
    std::vector<Trial> trials_;
};

std::vector<Trial> run_search(const SearchSpace& space, const Objective& objective,
                              const Evaluator& evaluator, std::size_t budget, std::uint64_t seed,
                              const SearchOptions& options = {});

/// Best score after each trial.
std::vector<double> best_so_far(const std::vector<Trial>& trials);

double alpha_from(double acc_c, double mem_c);

struct AlphaCalibration {
    double alpha = 0.0;
    double acc_c = 0.0;
    double mem_c = 0.0;
    std::size_t trials = 0;
    bool converged = false;
};

/// Searches with alpha = 1 until the best score has not changed for
/// `patience` trials (or `budget` trials ran), then returns acc_c / mem_c
/// of the best trial. Extra metrics returned by the evaluator are ignored.
AlphaCalibration calibrate_alpha(const SearchSpace& space, const Evaluator& evaluator,
                                 std::size_t budget, std::uint64_t seed,
                                 const SearchOptions& options = {}, std::size_t patience = 50);

std::vector<Trial> filter_trials(const std::vector<Trial>& trials, double acc_floor, double mem_floor);

inline constexpr std::array<const char*, 5> kWidthBuckets = {"<=4", "5", "6", "7", "8"};

/// Bucket of a width: 0 for <= 4, then 5..8 map to 1..4. Widths above 8
/// fall in the last bucket.
std::size_t width_bucket(int width);

struct HistogramRow {
    SiteKey key;
    std::array<double, 5> fractions{};
    std::size_t samples = 0;
    bool empty() const { return samples == 0; }
};

std::vector<HistogramRow> bitwidth_histogram(const std::vector<Trial>& filtered, const SearchSpace& space);

/// Mean chosen width over the given trials and every dimension accepted by
/// `select`. NaN when nothing matches.
double mean_width(const std::vector<Trial>& trials, const SearchSpace& space,
                  const std::function<bool(const SiteKey&)>& select);

}  // namespace bq
