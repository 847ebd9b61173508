#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedmeta/csv.hpp"
#include "fedmeta/error.hpp"
#include "fedmeta/nn.hpp"
#include "fedmeta/param_vector.hpp"
#include "fedmeta/random.hpp"
#include "fedmeta/tasks.hpp"

namespace fedmeta {

struct FinetuneSettings {
    std::size_t shots = 40;
    std::size_t steps = 32;
    double lr = 0.01;
    std::size_t batch_size = 1000;
};

struct EvalRecord {
    std::size_t trial = 0;
    std::string task;
    double loss = 0.0;
    /// NaN for regression tasks.
    double accuracy = std::numeric_limits<double>::quiet_NaN();
};

inline EvalRecord finetune_and_eval(const MlpSpec& spec, const ParamVector& theta, const TaskDataset& task,
                                    const FinetuneSettings& ft, Rng& rng) {
    require(task.train.size >= 1 && task.test.size >= 1, errc::empty_input, "fine-tune task has an empty split");
    const ParamVector tuned = sgd(spec, theta, task.train, ft.steps, ft.lr, ft.batch_size, rng);
    EvalRecord r;
    r.task = task.descriptor;
    r.loss = loss(spec, tuned, task.test);
    if (task.test.is_classification()) r.accuracy = accuracy(spec, tuned, task.test);
    return r;
}

/// Trial i draws its task and its fine-tune mini-batches from
/// derive_seed(master, trial, i) alone, so every algorithm evaluated with the
/// same master seed sees the same task sequence.
inline std::vector<EvalRecord> evaluate_trials(const MlpSpec& spec, const ParamVector& theta,
                                               const FinetuneSource& source, const FinetuneSettings& ft,
                                               std::size_t trials, std::uint64_t master_seed) {
    std::vector<EvalRecord> out;
    out.reserve(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        Rng rng(derive_seed(master_seed, stream::trial, i));
        const TaskDataset task = sample_finetune_task(rng, source, ft.shots);
        EvalRecord r = finetune_and_eval(spec, theta, task, ft, rng);
        r.trial = i;
        out.push_back(std::move(r));
    }
    return out;
}

enum class Metric { loss, accuracy };

inline std::string to_string(Metric m) { return m == Metric::loss ? "loss" : "accuracy"; }

inline std::vector<double> metric_values(std::span<const EvalRecord> records, Metric metric) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(metric == Metric::loss ? r.loss : r.accuracy);
    return v;
}

struct CdfPoint {
    double value = 0.0;
    double fraction = 0.0;
};

/// Empirical CDF: i-th smallest value paired with i/n. Ties stay as separate
/// points, so a duplicated value forms a step of height 2/n.
inline std::vector<CdfPoint> emit_cdf(std::span<const EvalRecord> records, Metric metric) {
    require(!records.empty(), errc::empty_input, "CDF of zero records");
    auto values = metric_values(records, metric);
    for (double v : values) require(!std::isnan(v), errc::invalid_argument, "CDF over a missing " + to_string(metric));
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    std::vector<CdfPoint> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out.push_back({values[i], static_cast<double>(i + 1) / n});
    out.back().fraction = 1.0;
    return out;
}

inline double median(std::vector<double> v) {
    require(!v.empty(), errc::empty_input, "median of nothing");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean_of(std::span<const double> v) {
    require(!v.empty(), errc::empty_input, "mean of nothing");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct Interval {
    double low = 0.0;
    double high = 0.0;
    bool contains(double x) const { return low <= x && x <= high; }
};

/// Normal approximation p +- 1.96 sqrt(p(1-p)/n) around a mean rate p over n trials.
inline Interval binomial_normal_ci95(double p, std::size_t n) {
    require(n >= 1, errc::invalid_argument, "confidence interval over zero trials");
    const double half = 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    return {p - half, p + half};
}

inline void write_eval_csv(std::ostream& os, std::span<const EvalRecord> records) {
    const bool classification = !records.empty() && !std::isnan(records.front().accuracy);
    os << (classification ? "trial,task,loss,accuracy\n" : "trial,task,loss\n");
    for (const auto& r : records) {
        os << r.trial << ',' << r.task << ',' << format_double(r.loss);
        if (classification) os << ',' << format_double(r.accuracy);
        os << '\n';
    }
}

struct CdfSeries {
    std::string name;
    std::vector<CdfPoint> points;
};

inline void write_cdf_csv(std::ostream& os, std::span<const CdfSeries> series) {
    os << "value,fraction,algorithm\n";
    for (const auto& s : series)
        for (const auto& p : s.points) os << format_double(p.value) << ',' << format_double(p.fraction) << ',' << s.name << '\n';
}

} // namespace fedmeta
