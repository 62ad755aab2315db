#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "svtn/emissions.hpp"
#include "svtn/metrics.hpp"
#include "svtn/pipeline.hpp"

namespace svtn::metrics {

struct VariantSpec {
    pipeline::Variant variant = pipeline::Variant::svtn;
    int k = 1;

    std::string label() const;  // e.g. "svtn(1)", "transformer_only"
};

// "svtn", "svtn:5", "sv_raw:3", "transformer_only"
VariantSpec parse_variant(const std::string& text);

// One generate/split/fit/eval run; returns recall, precision, f1 (defined ones
// only) plus confusion counts.
std::map<std::string, double> single_trial(const emissions::SynthSpec& generator,
                                           const emissions::SplitSpec& split,
                                           const pipeline::PipelineConfig& config,
                                           std::uint64_t seed);

struct SweepSpec {
    emissions::SynthSpec generator;  // positive_rate is overridden per ratio
    emissions::SplitSpec split;
    pipeline::PipelineConfig base;  // variant/k overridden per entry
    std::vector<double> ratios;     // normal : high-emission, all > 1
    std::vector<VariantSpec> variants;
    int trials = 20;
    std::uint64_t seed = 0;
};

// Fig.-5 style robustness protocol: per ratio, regenerate the long-tailed
// dataset (positive rate 1/(1+ratio)), fit every variant on the same derived
// trial seeds, and aggregate recall/f1. Two rows (recall, f1) per
// (ratio, variant).
std::vector<SweepRow> ratio_sweep(const SweepSpec& spec);

}  // namespace svtn::metrics
