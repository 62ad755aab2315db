#include "svtn/metrics.hpp"

#include <cmath>
#include <sstream>

#include "svtn/errors.hpp"
#include "svtn/rng.hpp"

namespace svtn::metrics {

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) throw DataError("confusion: length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if ((t != 0 && t != 1) || (p != 0 && p != 1))
            throw DataError("confusion: labels must be 0 or 1");
        if (t == 1)
            (p == 1 ? cm.n_tp : cm.n_fn)++;
        else
            (p == 1 ? cm.n_fp : cm.n_tn)++;
    }
    return cm;
}

std::optional<double> recall(const ConfusionMatrix& cm) {
    const long denom = cm.n_tp + cm.n_fn;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(cm.n_tp) / static_cast<double>(denom);
}

std::optional<double> precision(const ConfusionMatrix& cm) {
    const long denom = cm.n_tp + cm.n_fp;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(cm.n_tp) / static_cast<double>(denom);
}

std::optional<double> f1(const ConfusionMatrix& cm) {
    const auto p = precision(cm);
    const auto r = recall(cm);
    if (!p || !r) return std::nullopt;
    if (*p + *r == 0.0) return 0.0;
    return 2.0 * *p * *r / (*p + *r);
}

TrialStats aggregate(const std::string& metric, const std::vector<double>& values) {
    if (values.empty()) throw DataError("aggregate: no values for metric " + metric);
    TrialStats st;
    st.metric = metric;
    st.values = values;
    st.trials = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - st.mean) * (v - st.mean);
        st.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return st;
}

RepeatedResult repeated_trials(const Experiment& experiment, int n_trials,
                               std::uint64_t root_seed) {
    if (n_trials < 1) throw ConfigError("repeated_trials: n_trials must be >= 1");
    RepeatedResult result;
    std::map<std::string, std::vector<double>> collected;
    for (int t = 0; t < n_trials; ++t) {
        try {
            const auto metrics = experiment(derive_seed(root_seed, static_cast<std::uint64_t>(t)));
            for (const auto& [name, value] : metrics) collected[name].push_back(value);
        } catch (const std::exception&) {
            ++result.failures;
        }
    }
    for (const auto& [name, values] : collected) result.stats[name] = aggregate(name, values);
    return result;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "ratio,variant,metric,mean,std,n_trials\n";
    out.precision(17);
    for (const SweepRow& r : rows) {
        out << r.ratio << ',' << r.variant << ',' << r.metric << ',' << r.mean << ','
            << r.stddev << ',' << r.n_trials << "\n";
    }
    return out.str();
}

}  // namespace svtn::metrics
