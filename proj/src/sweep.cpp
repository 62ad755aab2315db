#include "svtn/sweep.hpp"

#include <cmath>

#include "svtn/errors.hpp"
#include "svtn/rng.hpp"

namespace svtn::metrics {

using emissions::MicroTrip;

std::string VariantSpec::label() const {
    if (variant == pipeline::Variant::transformer_only) return "transformer_only";
    return pipeline::to_string(variant) + "(" + std::to_string(k) + ")";
}

VariantSpec parse_variant(const std::string& text) {
    VariantSpec spec;
    const auto colon = text.find(':');
    const std::string name = colon == std::string::npos ? text : text.substr(0, colon);
    spec.variant = pipeline::variant_from_string(name);
    if (colon != std::string::npos) {
        try {
            spec.k = std::stoi(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad variant spec '" + text + "'");
        }
        if (spec.k < 1) throw ConfigError("bad variant spec '" + text + "': k must be >= 1");
    }
    return spec;
}

std::map<std::string, double> single_trial(const emissions::SynthSpec& generator,
                                           const emissions::SplitSpec& split,
                                           const pipeline::PipelineConfig& config,
                                           std::uint64_t seed) {
    emissions::SynthSpec gen = generator;
    gen.seed = seed;
    const std::vector<MicroTrip> trips = emissions::synth_generate(gen);

    emissions::SplitSpec sp = split;
    sp.seed = derive_seed(seed, 1);
    auto [train, test] = emissions::stratified_split(trips, sp);

    pipeline::PipelineConfig pc = config;
    pc.encoder.seed = derive_seed(seed, 2);
    pc.train.seed = derive_seed(seed, 3);
    const pipeline::FittedPipeline fitted = pipeline::fit_pipeline(train, pc);
    const pipeline::Predictions pred = pipeline::predict_pipeline(fitted, test);

    std::vector<int> truth;
    truth.reserve(test.size());
    for (const MicroTrip& t : test) truth.push_back(t.label);
    const ConfusionMatrix cm = confusion(truth, pred.labels);

    std::map<std::string, double> out;
    out["n_tp"] = static_cast<double>(cm.n_tp);
    out["n_fp"] = static_cast<double>(cm.n_fp);
    out["n_fn"] = static_cast<double>(cm.n_fn);
    out["n_tn"] = static_cast<double>(cm.n_tn);
    if (const auto r = recall(cm)) out["recall"] = *r;
    if (const auto p = precision(cm)) out["precision"] = *p;
    if (const auto f = f1(cm)) out["f1"] = *f;
    return out;
}

std::vector<SweepRow> ratio_sweep(const SweepSpec& spec) {
    if (spec.ratios.empty()) throw ConfigError("ratio_sweep: empty ratio list");
    if (spec.variants.empty()) throw ConfigError("ratio_sweep: empty variant list");
    if (spec.trials < 1) throw ConfigError("ratio_sweep: trials must be >= 1");

    std::vector<SweepRow> rows;
    for (std::size_t ri = 0; ri < spec.ratios.size(); ++ri) {
        const double ratio = spec.ratios[ri];
        if (!(ratio > 1.0))
            throw ConfigError("ratio_sweep: emission ratio must exceed 1");
        const double rate = 1.0 / (1.0 + ratio);
        const auto n_pos =
            std::llround(rate * static_cast<double>(spec.generator.n_samples));
        const auto train_pos =
            std::llround(spec.split.train_fraction * static_cast<double>(n_pos));
        if (train_pos < 2)
            throw DataError("ratio_sweep: ratio " + std::to_string(ratio) +
                            " leaves fewer than 2 positives in train");

        // same trial seeds for every variant: paired comparison
        const std::uint64_t ratio_seed = derive_seed(spec.seed, ri);
        for (const VariantSpec& vs : spec.variants) {
            emissions::SynthSpec gen = spec.generator;
            gen.positive_rate = rate;
            pipeline::PipelineConfig pc = spec.base;
            pc.variant = vs.variant;
            pc.k = vs.k;
            const RepeatedResult res = repeated_trials(
                [&](std::uint64_t seed) { return single_trial(gen, spec.split, pc, seed); },
                spec.trials, ratio_seed);
            for (const char* metric : {"recall", "f1"}) {
                const auto it = res.stats.find(metric);
                if (it == res.stats.end()) continue;
                SweepRow row;
                row.ratio = ratio;
                row.variant = vs.label();
                row.metric = metric;
                row.mean = it->second.mean;
                row.stddev = it->second.stddev;
                row.n_trials = it->second.trials;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

}  // namespace svtn::metrics
