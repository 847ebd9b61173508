#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedmeta/fedmeta.hpp"

#ifndef FEDMETA_MNIST_DIR
#define FEDMETA_MNIST_DIR "data/mnist"
#endif

using namespace fedmeta;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> algorithm;
    std::optional<std::size_t> trials;
    std::optional<std::string> data_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key = value configuration file");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--algorithm", f.algorithm, "meta_backward | imaml | avg_init | random_init");
    cmd->add_option("--trials", f.trials, "number of fine-tune trials");
    cmd->add_option("--data-dir", f.data_dir, "directory with the MNIST IDX files");
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig cfg;
    cfg.data_dir = FEDMETA_MNIST_DIR;
    if (!f.config.empty()) cfg = load_config(f.config, cfg);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.output_dir = *f.out;
    if (f.algorithm) cfg.algorithm = parse_algorithm(*f.algorithm);
    if (f.trials) cfg.trials = *f.trials;
    if (f.data_dir) cfg.data_dir = *f.data_dir;
    cfg.validate();
    return cfg;
}

void print_ledger(const CostLedger& ledger) {
    const auto t = ledger.totals();
    std::cout << "rounds " << ledger.size() << ", uplinks " << t.uplinks << ", downlinks " << t.downlinks
              << ", grad evals " << t.grad_evals << ", comm " << format_double(t.comm_time_s) << " s / "
              << format_double(t.comm_energy_j) << " J\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated meta-learning simulator: Meta-Backward and iMAML"};
    app.require_subcommand(1);

    CommonFlags train_flags, eval_flags, compare_flags;
    std::string model_path;
    std::vector<std::string> compare_algorithms;

    auto* train = app.add_subcommand("train", "meta-train one algorithm and write theta.txt and its cost ledger");
    add_common(train, train_flags);

    auto* eval = app.add_subcommand("eval", "fine-tune and evaluate a meta-model (trained on the fly unless --model)");
    add_common(eval, eval_flags);
    eval->add_option("--model", model_path, "theta.txt from a previous train run");

    auto* cmp = app.add_subcommand("compare", "run several algorithms on identical tasks and trial seeds");
    add_common(cmp, compare_flags);
    cmp->add_option("--algorithms", compare_algorithms, "subset to compare (default: all)")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto cfg = resolve(train_flags);
            const auto data = prepare_experiment(cfg);
            const auto model = meta_train(cfg, data, cfg.algorithm);
            write_model_outputs(cfg.output_dir, model);
            std::cout << to_string(cfg.algorithm) << ": " << model.theta.size() << " parameters -> "
                      << (cfg.output_dir / "theta.txt").string() << '\n';
            print_ledger(model.ledger);
        } else if (*eval) {
            const auto cfg = resolve(eval_flags);
            std::vector<EvalRecord> records;
            if (model_path.empty()) {
                records = run_experiment(cfg).records;
            } else {
                const auto data = prepare_experiment(cfg);
                records = evaluate_model(cfg, data, read_params(model_path));
                write_eval_outputs(cfg, cfg.output_dir, cfg.algorithm, records);
            }
            std::cout << to_string(cfg.algorithm) << ": " << records.size() << " trials, median loss "
                      << format_double(median(metric_values(records, Metric::loss)));
            if (is_classification(cfg))
                std::cout << ", mean accuracy " << format_double(mean_of(metric_values(records, Metric::accuracy)));
            std::cout << '\n';
        } else if (*cmp) {
            const auto cfg = resolve(compare_flags);
            std::vector<Algorithm> algorithms;
            for (const auto& name : compare_algorithms) algorithms.push_back(parse_algorithm(name));
            if (algorithms.empty()) algorithms.assign(std::begin(all_algorithms), std::end(all_algorithms));
            std::ostringstream summary;
            write_summary_csv(summary, compare(cfg, algorithms));
            std::cout << summary.str();
        }
    } catch (const error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.message() << '\n';
        return 2;
    }
    return 0;
}
