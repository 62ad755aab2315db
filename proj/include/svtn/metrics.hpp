#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace svtn::metrics {

// Positive = high-emission; all derived metrics are for that class.
struct ConfusionMatrix {
    long n_tp = 0;
    long n_fp = 0;
    long n_fn = 0;
    long n_tn = 0;

    long total() const { return n_tp + n_fp + n_fn + n_tn; }
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred);

// Each returns nullopt where the denominator is empty (never a silent 0);
// f1 is 0 when both P and R are defined and P + R = 0.
std::optional<double> recall(const ConfusionMatrix& cm);
std::optional<double> precision(const ConfusionMatrix& cm);
std::optional<double> f1(const ConfusionMatrix& cm);

struct TrialStats {
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1) standard deviation; 0 for a single trial
    std::vector<double> values;
    int trials = 0;
};

TrialStats aggregate(const std::string& metric, const std::vector<double>& values);

using Experiment = std::function<std::map<std::string, double>(std::uint64_t seed)>;

struct RepeatedResult {
    std::map<std::string, TrialStats> stats;
    int failures = 0;
};

// Runs `experiment` n_trials times with seeds derived from root_seed (stable
// under any execution order); throwing trials are counted as failures and
// excluded from the stats.
RepeatedResult repeated_trials(const Experiment& experiment, int n_trials,
                               std::uint64_t root_seed);

struct SweepRow {
    double ratio = 0.0;
    std::string variant;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;
    int n_trials = 0;
};

// CSV with header ratio,variant,metric,mean,std,n_trials
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace svtn::metrics
