// Meta-Backward on three sinusoids, then fine-tunes the result on one new
// amplitude and compares it with the plain average of the local models.
#include <iostream>

#include "fedmeta/fedmeta.hpp"

using namespace fedmeta;

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
    ExperimentConfig cfg;
    cfg.seed = seed;
    const auto data = prepare_experiment(cfg);

    BackwardConfig bc = cfg.backward;
    bc.seed = seed;
    const auto run = run_meta_backward(data.meta_tasks, data.spec, bc, cfg.costs);
    for (std::size_t i = 0; i < run.local_optima.size(); ++i)
        std::cout << "task " << data.meta_tasks[i].descriptor << ": local loss "
                  << loss(data.spec, run.local_optima[i].params, data.meta_tasks[i].train) << " after "
                  << run.local_optima[i].steps << " steps\n";
    std::cout << "|theta - average| = " << std::sqrt(distance_sq(run.theta, run.average_of_local_optima)) << '\n';

    Rng rng(derive_seed(seed, stream::trial, 0));
    const auto task = sample_finetune_task(rng, data.source, 40);
    for (const auto& [name, theta] : {std::pair{"meta_backward", &run.theta}, std::pair{"avg_init", &run.average_of_local_optima}}) {
        Rng ft_rng(seed);
        const auto r = finetune_and_eval(data.spec, *theta, task, cfg.finetune(), ft_rng);
        std::cout << name << " on " << r.task << ": test MSE " << r.loss << '\n';
    }

    const auto t = run.ledger.totals();
    std::cout << "ledger: " << t.uplinks << " uplinks, " << t.downlinks << " downlinks, " << t.comm_energy_j
              << " J\n";
}
