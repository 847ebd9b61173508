#pragma once

// End-to-end runs: build the meta-training tasks, produce a meta-model with
// one of the algorithms, fine-tune it on freshly sampled tasks and write the
// CSV/SVG artifacts.
//
// Output layout for one algorithm (directory `dir`):
//   eval.csv        trial,task,loss[,accuracy]
//   cdf.csv         value,fraction,algorithm
//   costs.csv       deterministic cost ledger (see CostLedger::write_costs_csv)
//   timing.csv      measured wall-clock time and compute energy
//   trajectory.csv  Meta-Backward only
//   theta.txt       the meta-model, one parameter per line
//   plots/cdf_loss.svg (+ cdf_accuracy.svg for classification)
//
// compare() writes one such directory per algorithm plus a combined cdf.csv,
// summary.csv and plots/ at the top level.

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedmeta/config.hpp"
#include "fedmeta/cost_model.hpp"
#include "fedmeta/csv.hpp"
#include "fedmeta/evaluation.hpp"
#include "fedmeta/imaml.hpp"
#include "fedmeta/meta_backward.hpp"
#include "fedmeta/svg.hpp"
#include "fedmeta/tasks.hpp"

namespace fedmeta {

inline void write_params(std::ostream& os, const ParamVector& p) {
    for (double v : p) os << format_double(v) << '\n';
}

inline ParamVector read_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), errc::missing_data, "cannot open model file " + path.string());
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        values.push_back(detail::parse_number<double>("model value", text));
    }
    return ParamVector(std::move(values));
}

/// Data shared by every algorithm of one experiment.
struct ExperimentData {
    MlpSpec spec;
    std::vector<TaskDataset> meta_tasks;
    std::shared_ptr<const MnistCorpus> finetune_corpus;
    FinetuneSource source;
};

inline ExperimentData prepare_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentData data;
    data.spec = cfg.model();
    if (cfg.experiment == ExperimentKind::sinusoid) {
        Rng phase_rng(derive_seed(cfg.seed, stream::task, 1000));
        for (std::size_t i = 0; i < cfg.amplitudes.size(); ++i) {
            SinusoidTask t;
            t.amplitude = cfg.amplitudes[i];
            t.phase = cfg.sinusoid.fixed_phase;
            if (cfg.sinusoid.phase_mode == PhaseMode::random)
                t.phase = std::uniform_real_distribution<double>(0.0, std::numbers::pi)(phase_rng);
            t.x_min = cfg.sinusoid.x_min;
            t.x_max = cfg.sinusoid.x_max;
            t.train_size = cfg.sinusoid.train_size;
            t.test_size = cfg.sinusoid.test_size;
            t.seed = derive_seed(cfg.seed, stream::task, i);
            data.meta_tasks.push_back(sample_sinusoid(t));
        }
        data.source.kind = TaskKind::sinusoid;
        data.source.sinusoid = cfg.sinusoid;
        data.source.min_amplitude = cfg.finetune_min_amplitude;
        data.source.max_amplitude = cfg.finetune_max_amplitude;
    } else {
        const MnistCorpus train = load_mnist(cfg.data_dir, Split::train);
        for (std::size_t i = 0; i < cfg.mnist_tasks.size(); ++i) {
            const auto task = ClassificationTask{cfg.mnist_tasks[i], cfg.mnist_train_size, cfg.mnist_test_size,
                                                 derive_seed(cfg.seed, stream::task, i)};
            data.meta_tasks.push_back(build_classification_task(train, task));
        }
        // New tasks are drawn from the held-out split so fine-tuning never sees
        // an image used in meta-training.
        data.finetune_corpus = std::make_shared<const MnistCorpus>(load_mnist(cfg.data_dir, Split::test));
        data.source.kind = TaskKind::classification;
        data.source.corpus = data.finetune_corpus.get();
        data.source.ways = cfg.finetune_ways;
        data.source.test_per_class = cfg.finetune_test_per_class;
    }
    return data;
}

struct MetaModel {
    Algorithm algorithm = Algorithm::meta_backward;
    ParamVector theta;
    CostLedger ledger;
    std::vector<TrajectoryPoint> trajectory;
};

/// Meta-Backward's offline phase and upload round, shared by the baselines
/// that start from the averaged local optima.
inline MetaBackwardResult local_phase(const ExperimentConfig& cfg, const ExperimentData& data) {
    BackwardConfig bc = cfg.backward;
    bc.seed = cfg.seed;
    return run_meta_backward(data.meta_tasks, data.spec, bc, cfg.costs);
}

inline MetaModel meta_train(const ExperimentConfig& cfg, const ExperimentData& data, Algorithm algorithm) {
    MetaModel out;
    out.algorithm = algorithm;
    switch (algorithm) {
    case Algorithm::meta_backward: {
        auto r = local_phase(cfg, data);
        out.theta = std::move(r.theta);
        out.ledger = std::move(r.ledger);
        out.trajectory = std::move(r.trajectory);
        break;
    }
    case Algorithm::avg_init: {
        auto r = local_phase(cfg, data);
        out.theta = std::move(r.average_of_local_optima);
        out.ledger = r.ledger.prefix(1);
        break;
    }
    case Algorithm::imaml: {
        const auto r = local_phase(cfg, data);
        ImamlConfig ic = cfg.imaml;
        ic.seed = cfg.seed;
        auto im = run_imaml(data.meta_tasks, data.spec, ic, r.average_of_local_optima, cfg.costs);
        out.theta = std::move(im.theta);
        out.ledger = r.ledger.prefix(1);
        for (const auto& rec : im.ledger.rounds()) out.ledger.append(rec);
        break;
    }
    case Algorithm::random_init: {
        Rng rng(derive_seed(cfg.seed, stream::random_init));
        out.theta = init_params(data.spec, rng);
        break;
    }
    }
    return out;
}

struct AlgorithmOutcome {
    MetaModel model;
    std::vector<EvalRecord> records;
};

inline std::vector<EvalRecord> evaluate_model(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const ParamVector& theta) {
    require(theta.size() == param_count(data.spec), errc::dimension_mismatch,
            "model has " + std::to_string(theta.size()) + " parameters, experiment needs " +
                std::to_string(param_count(data.spec)));
    return evaluate_trials(data.spec, theta, data.source, cfg.finetune(), cfg.trial_count(), cfg.seed);
}

inline bool is_classification(const ExperimentConfig& cfg) { return cfg.experiment == ExperimentKind::mnist; }

inline std::vector<Metric> reported_metrics(const ExperimentConfig& cfg) {
    if (is_classification(cfg)) return {Metric::loss, Metric::accuracy};
    return {Metric::loss};
}

inline void write_cdf_outputs(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                              std::span<const std::string> names,
                              std::span<const std::vector<EvalRecord>> records) {
    std::vector<CdfSeries> loss_series;
    for (std::size_t i = 0; i < names.size(); ++i) loss_series.push_back({names[i], emit_cdf(records[i], Metric::loss)});
    {
        auto os = open_output(dir / "cdf.csv");
        write_cdf_csv(os, loss_series);
    }
    for (auto metric : reported_metrics(cfg)) {
        std::vector<svg::LineSeries> lines;
        for (std::size_t i = 0; i < names.size(); ++i) {
            svg::LineSeries s{names[i], {}};
            for (const auto& p : emit_cdf(records[i], metric)) s.points.push_back({p.value, p.fraction});
            lines.push_back(std::move(s));
        }
        const std::string m = to_string(metric);
        svg::write_svg(dir / "plots" / ("cdf_" + m + ".svg"),
                       svg::cdf_lines(lines, "CDF of fine-tuned test " + m, m, metric == Metric::loss));
    }
    if (is_classification(cfg)) {
        std::vector<CdfSeries> acc_series;
        for (std::size_t i = 0; i < names.size(); ++i)
            acc_series.push_back({names[i], emit_cdf(records[i], Metric::accuracy)});
        auto os = open_output(dir / "cdf_accuracy.csv");
        write_cdf_csv(os, acc_series);
    }
}

inline void write_model_outputs(const std::filesystem::path& dir, const MetaModel& model) {
    {
        auto os = open_output(dir / "theta.txt");
        write_params(os, model.theta);
    }
    {
        auto os = open_output(dir / "costs.csv");
        model.ledger.write_costs_csv(os);
    }
    {
        auto os = open_output(dir / "timing.csv");
        model.ledger.write_timing_csv(os);
    }
    if (!model.trajectory.empty()) {
        auto os = open_output(dir / "trajectory.csv");
        write_trajectory_csv(os, model.trajectory);
    }
}

inline void write_eval_outputs(const ExperimentConfig& cfg, const std::filesystem::path& dir, Algorithm algorithm,
                               const std::vector<EvalRecord>& records) {
    {
        auto os = open_output(dir / "eval.csv");
        write_eval_csv(os, records);
    }
    const std::string name = to_string(algorithm);
    write_cdf_outputs(cfg, dir, std::span<const std::string>(&name, 1),
                      std::span<const std::vector<EvalRecord>>(&records, 1));
}

/// Meta-trains `cfg.algorithm`, evaluates it and writes every artifact to cfg.output_dir.
inline AlgorithmOutcome run_experiment(const ExperimentConfig& cfg) {
    const auto data = prepare_experiment(cfg);
    AlgorithmOutcome out{meta_train(cfg, data, cfg.algorithm), {}};
    out.records = evaluate_model(cfg, data, out.model.theta);
    write_model_outputs(cfg.output_dir, out.model);
    write_eval_outputs(cfg, cfg.output_dir, cfg.algorithm, out.records);
    return out;
}

struct SummaryRow {
    Algorithm algorithm;
    double median_loss = 0.0;
    double mean_accuracy = std::numeric_limits<double>::quiet_NaN();
    RoundRecord totals;
};

inline void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
    os << "algorithm,median_loss,mean_accuracy,grad_evals,comm_time_s,comm_j,uplinks,downlinks\n";
    for (const auto& r : rows)
        os << to_string(r.algorithm) << ',' << format_double(r.median_loss) << ','
           << (std::isnan(r.mean_accuracy) ? std::string() : format_double(r.mean_accuracy)) << ','
           << r.totals.grad_evals << ',' << format_double(r.totals.comm_time_s) << ','
           << format_double(r.totals.comm_energy_j) << ',' << r.totals.uplinks << ',' << r.totals.downlinks << '\n';
}

/// Runs every algorithm in `algorithms` on the same tasks and trial seeds.
inline std::vector<SummaryRow> compare(const ExperimentConfig& cfg, std::span<const Algorithm> algorithms) {
    require(!algorithms.empty(), errc::invalid_argument, "nothing to compare");
    const auto data = prepare_experiment(cfg);
    std::vector<std::string> names;
    std::vector<std::vector<EvalRecord>> all_records;
    std::vector<SummaryRow> rows;
    for (auto algorithm : algorithms) {
        const MetaModel model = meta_train(cfg, data, algorithm);
        auto records = evaluate_model(cfg, data, model.theta);
        const auto dir = cfg.output_dir / to_string(algorithm);
        write_model_outputs(dir, model);
        write_eval_outputs(cfg, dir, algorithm, records);

        SummaryRow row{algorithm, median(metric_values(records, Metric::loss)),
                       std::numeric_limits<double>::quiet_NaN(), model.ledger.totals()};
        if (is_classification(cfg)) row.mean_accuracy = mean_of(metric_values(records, Metric::accuracy));
        rows.push_back(row);
        names.push_back(to_string(algorithm));
        all_records.push_back(std::move(records));
    }
    write_cdf_outputs(cfg, cfg.output_dir, names, all_records);
    {
        auto os = open_output(cfg.output_dir / "summary.csv");
        write_summary_csv(os, rows);
    }
    svg::BarChart chart;
    chart.series_names = names;
    svg::BarGroup evals{"gradient evaluations", {}}, comm_time{"comm time (s)", {}}, comm_energy{"comm energy (J)", {}};
    for (const auto& r : rows) {
        evals.values.push_back(static_cast<double>(r.totals.grad_evals));
        comm_time.values.push_back(r.totals.comm_time_s);
        comm_energy.values.push_back(r.totals.comm_energy_j);
    }
    chart.groups = {evals, comm_time, comm_energy};
    svg::write_svg(cfg.output_dir / "plots" / "costs.svg", svg::grouped_bars(chart, "Meta-training cost"));
    return rows;
}

} // namespace fedmeta
