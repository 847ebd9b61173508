#pragma once

// Meta-Backward: backward projected stochastic gradient ascent from per-task
// optima to a shared initializer.
//
//   offline   each agent i trains phi_i^K ~ its own optimum and uploads it
//   PS        Phi^K = mean_i phi_i^K
//   k = K-1..0:
//     agent   phi_i^{k,0} = phi_i^{k+1} + alpha * grad L_i(phi_i^{k+1})
//             phi_i^k     = projection of phi_i^{k,0} onto
//                           {x : |x - Phi^{k+1}|^2 <= delta_k}
//     PS      Phi^k = mean_i phi_i^k
//   result    theta = Phi^0
//
// Agents only ever receive (Phi^{k+1}, delta_k) and only ever send phi_i^k.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedmeta/cost_model.hpp"
#include "fedmeta/csv.hpp"
#include "fedmeta/error.hpp"
#include "fedmeta/nn.hpp"
#include "fedmeta/param_vector.hpp"
#include "fedmeta/projection.hpp"
#include "fedmeta/random.hpp"
#include "fedmeta/tasks.hpp"

namespace fedmeta {

struct LocalSolverConfig {
    std::size_t steps = 2000;
    double lr = 0.01;
    /// Stop once the full-batch gradient norm is at or below this.
    double grad_tol = 1e-3;
    std::size_t batch_size = 100;
    /// Full-batch gradient norm is checked before step 0 and every this many steps.
    std::size_t check_every = 100;
};

enum class StopReason { gradient_tolerance, step_budget };

struct LocalOptimum {
    ParamVector params;
    std::size_t steps = 0;
    StopReason reason = StopReason::step_budget;
    double grad_norm = 0.0;
    std::uint64_t grad_evals = 0;
};

/// SGD on one task's training data until the full-batch gradient norm drops
/// to `grad_tol` or the step budget runs out. Throws Divergence if the
/// iterate or loss stops being finite.
inline LocalOptimum train_local_optimum(const MlpSpec& spec, const ParamVector& init, const Batch& train,
                                        const LocalSolverConfig& cfg, Rng& rng) {
    require(cfg.steps >= 1, errc::invalid_argument, "local solver needs at least one step");
    require(cfg.lr > 0.0, errc::invalid_argument, "local learning rate must be positive");
    require(cfg.check_every >= 1, errc::invalid_argument, "check interval must be >= 1");

    LocalOptimum out;
    out.params = init;
    MinibatchSampler sampler(train.size, cfg.batch_size);
    auto full_grad_norm = [&] {
        ++out.grad_evals;
        const double n = norm(grad(spec, out.params, train));
        if (!std::isfinite(n) || !std::isfinite(loss(spec, out.params, train)))
            fail(errc::divergence, "local training diverged after " + std::to_string(out.steps) + " steps");
        return n;
    };

    for (std::size_t t = 0; t < cfg.steps; ++t) {
        if (t % cfg.check_every == 0) {
            out.grad_norm = full_grad_norm();
            if (out.grad_norm <= cfg.grad_tol) {
                out.reason = StopReason::gradient_tolerance;
                return out;
            }
        }
        const auto g = sampler.full_batch() ? grad(spec, out.params, train)
                                            : grad(spec, out.params, train.gather(sampler.next(rng)));
        ++out.grad_evals;
        out.params.axpy(-cfg.lr, g);
        ++out.steps;
        if (!out.params.all_finite())
            fail(errc::divergence, "local training diverged after " + std::to_string(out.steps) + " steps");
    }
    out.grad_norm = full_grad_norm();
    out.reason = out.grad_norm <= cfg.grad_tol ? StopReason::gradient_tolerance : StopReason::step_budget;
    return out;
}

/// phi + alpha * grad L(phi; batch): one step back along the descent path.
inline ParamVector ascent_step(const MlpSpec& spec, const ParamVector& phi, double alpha, const Batch& batch) {
    require(alpha > 0.0, errc::invalid_argument, "ascent step size must be positive");
    ParamVector out = phi;
    out.axpy(alpha, grad(spec, phi, batch));
    return out;
}

/// delta_k = delta_max * gamma^(K-1-k) for k = 0..K-1 (non-decreasing in k).
inline std::vector<double> geometric_delta_schedule(std::size_t rounds, double delta_max, double gamma) {
    require(delta_max > 0.0 && std::isfinite(delta_max), errc::invalid_argument, "delta_max must be positive");
    require(gamma > 0.0 && gamma <= 1.0, errc::invalid_argument, "gamma must be in (0, 1]");
    std::vector<double> out(rounds);
    for (std::size_t k = 0; k < rounds; ++k)
        out[k] = delta_max * std::pow(gamma, static_cast<double>(rounds - 1 - k));
    return out;
}

inline void validate_delta_schedule(std::span<const double> deltas, std::size_t rounds) {
    require(deltas.size() == rounds, errc::invalid_config,
            "delta schedule has " + std::to_string(deltas.size()) + " entries for " + std::to_string(rounds) +
                " rounds");
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        require(deltas[k] > 0.0 && std::isfinite(deltas[k]), errc::non_positive_radius,
                "delta_" + std::to_string(k) + " must be positive");
        if (k > 0)
            require(deltas[k - 1] <= deltas[k], errc::invalid_config, "delta schedule must be non-decreasing in k");
    }
}

struct BackwardConfig {
    std::size_t rounds = 50; // K
    double alpha = 0.01;
    /// Explicit delta_0..delta_{K-1}; empty selects the geometric default.
    std::vector<double> delta_schedule;
    double gamma = 0.85;
    /// Geometric schedule ceiling; 0 derives it from the spread of the local optima,
    /// which lets the ascent drag the average far from every optimum.
    double delta_max = 1e-4;
    std::size_t batch_size = 100;
    /// Ascent gradients on the whole training split instead of mini-batches.
    bool full_batch = false;
    LocalSolverConfig local;
    std::uint64_t seed = 0;

    void validate() const {
        require(rounds >= 1, errc::invalid_config, "backward rounds must be >= 1");
        require(alpha > 0.0, errc::invalid_config, "alpha must be positive");
        require(batch_size >= 1, errc::invalid_config, "batch size must be >= 1");
        require(delta_max >= 0.0, errc::invalid_config, "delta_max must be >= 0");
        if (!delta_schedule.empty()) validate_delta_schedule(delta_schedule, rounds);
    }
};

/// One agent of the federation. Holds its dataset privately; the backward
/// step takes only the server's broadcast (center, radius) and returns only
/// the new local iterate.
class Agent {
public:
    struct StepOutcome {
        ParamVector phi;
        double multiplier = 0.0;
    };

    Agent(std::size_t id, MlpSpec spec, TaskDataset data, std::uint64_t seed, double alpha, std::size_t batch_size,
          bool full_batch)
        : id_(id), spec_(std::move(spec)), data_(std::move(data)), rng_(seed), alpha_(alpha),
          sampler_(data_.train.size, full_batch ? data_.train.size : batch_size) {}

    std::size_t id() const noexcept { return id_; }
    const ParamVector& phi() const noexcept { return phi_; }

    /// Offline phase: train to the local optimum, which becomes phi^K.
    LocalOptimum train_offline(const ParamVector& init, const LocalSolverConfig& cfg) {
        auto result = train_local_optimum(spec_, init, data_.train, cfg, rng_);
        phi_ = result.params;
        return result;
    }

    void set_phi(ParamVector phi) { phi_ = std::move(phi); }

    StepOutcome backward_step(const ParamVector& center, double radius_sq) {
        const ParamVector ascended = sampler_.full_batch()
                                         ? ascent_step(spec_, phi_, alpha_, data_.train)
                                         : ascent_step(spec_, phi_, alpha_, data_.train.gather(sampler_.next(rng_)));
        auto projected = project(ascended, BallConstraint{center, radius_sq});
        phi_ = std::move(projected.point);
        return {phi_, projected.multiplier};
    }

    double training_loss() const { return loss(spec_, phi_, data_.train); }

private:
    std::size_t id_;
    MlpSpec spec_;
    TaskDataset data_;
    Rng rng_;
    double alpha_;
    MinibatchSampler sampler_;
    ParamVector phi_;
};

struct ServerState {
    ParamVector phi_avg;
    long round = 0;

    /// Mean of the uploads, summed in ascending agent order.
    void aggregate(std::span<const ParamVector> uploads, long k) {
        phi_avg = mean(uploads);
        round = k;
    }
};

struct TrajectoryPoint {
    long round = 0;
    std::size_t agent = 0;
    double loss = 0.0;
    /// |phi_i^k - Phi^{k+1}|^2; at k = K, distance to Phi^K.
    double dist_sq = 0.0;
    /// delta_k; NaN for the k = K row.
    double delta = std::numeric_limits<double>::quiet_NaN();
    double multiplier = 0.0;
};

inline void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryPoint> points) {
    os << "round,agent,loss,dist_to_avg,delta,mu\n";
    for (const auto& p : points)
        os << p.round << ',' << p.agent << ',' << format_double(p.loss) << ',' << format_double(std::sqrt(p.dist_sq))
           << ',' << (std::isnan(p.delta) ? std::string() : format_double(p.delta)) << ','
           << format_double(p.multiplier) << '\n';
}

struct MetaBackwardResult {
    ParamVector theta;
    ParamVector average_of_local_optima;
    std::vector<LocalOptimum> local_optima;
    /// phi_i^0, the iterates theta was averaged from.
    std::vector<ParamVector> final_iterates;
    std::vector<double> deltas;
    std::vector<TrajectoryPoint> trajectory;
    CostLedger ledger;
    std::uint64_t offline_grad_evals = 0;
    double offline_wall_time_s = 0.0;
};

/// (max pairwise distance between local optima)^2 / 4; 1 when they coincide.
inline double spread_delta_max(std::span<const ParamVector> optima) {
    double widest = 0.0;
    for (std::size_t i = 0; i < optima.size(); ++i)
        for (std::size_t j = i + 1; j < optima.size(); ++j) widest = std::max(widest, distance_sq(optima[i], optima[j]));
    return widest > 0.0 ? widest / 4.0 : 1.0;
}

/// One backward round k: broadcast (Phi^{k+1}, delta_k), every agent ascends
/// and projects, the server averages. Appends trajectory rows and a ledger record.
inline void backward_round(std::span<Agent> agents, ServerState& server, long k, double delta_k,
                           const CostSettings& costs, std::size_t model_size, CostLedger& ledger,
                           std::vector<TrajectoryPoint>* trajectory = nullptr) {
    require(!agents.empty(), errc::invalid_argument, "backward round without agents");
    require(server.round == k + 1, errc::invalid_argument, "server average is not from round k+1");
    Stopwatch clock;
    const ParamVector center = server.phi_avg;
    std::vector<ParamVector> uploads;
    std::vector<double> multipliers;
    uploads.reserve(agents.size());
    for (auto& agent : agents) {
        auto step = agent.backward_step(center, delta_k);
        uploads.push_back(std::move(step.phi));
        multipliers.push_back(step.multiplier);
    }
    server.aggregate(uploads, k);
    const double wall = clock.seconds();

    const std::size_t n = agents.size();
    record_round(ledger, k, n, costs.channel.downlink_transfers(n), model_size, costs.channel, n, wall,
                 costs.device_watts);

    if (trajectory) {
        for (std::size_t i = 0; i < n; ++i)
            trajectory->push_back({k, agents[i].id(), agents[i].training_loss(), distance_sq(uploads[i], center),
                                   delta_k, multipliers[i]});
    }
}

/// Full protocol. All agents start offline training from one shared seeded
/// initialization so their optima (and averages of them) live in a common
/// parameterization.
inline MetaBackwardResult run_meta_backward(std::span<const TaskDataset> tasks, const MlpSpec& spec,
                                            const BackwardConfig& cfg, const CostSettings& costs = {},
                                            std::optional<ParamVector> init = std::nullopt) {
    require(!tasks.empty(), errc::invalid_argument, "Meta-Backward needs at least one task");
    cfg.validate();
    costs.channel.validate();
    const std::size_t d = param_count(spec);
    const std::size_t n = tasks.size();
    const auto K = static_cast<long>(cfg.rounds);

    ParamVector start;
    if (init) {
        require(init->size() == d, errc::dimension_mismatch, "initial parameters do not match the model");
        start = *init;
    } else {
        Rng init_rng(derive_seed(cfg.seed, stream::init));
        start = init_params(spec, init_rng);
    }

    std::vector<Agent> agents;
    agents.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        agents.emplace_back(i, spec, tasks[i], derive_seed(cfg.seed, stream::agent, i), cfg.alpha, cfg.batch_size,
                            cfg.full_batch);

    MetaBackwardResult result;
    Stopwatch offline_clock;
    std::vector<ParamVector> uploads;
    for (auto& agent : agents) {
        auto opt = agent.train_offline(start, cfg.local);
        result.offline_grad_evals += opt.grad_evals;
        uploads.push_back(agent.phi());
        result.local_optima.push_back(std::move(opt));
    }
    result.offline_wall_time_s = offline_clock.seconds();

    Stopwatch upload_clock;
    ServerState server;
    server.aggregate(uploads, K);
    result.average_of_local_optima = server.phi_avg;
    record_round(result.ledger, K, n, 0, d, costs.channel, 0, upload_clock.seconds(), costs.device_watts);
    for (std::size_t i = 0; i < n; ++i)
        result.trajectory.push_back({K, i, agents[i].training_loss(), distance_sq(uploads[i], server.phi_avg),
                                     std::numeric_limits<double>::quiet_NaN(), 0.0});

    result.deltas = cfg.delta_schedule;
    if (result.deltas.empty()) {
        const double ceiling = cfg.delta_max > 0.0 ? cfg.delta_max : spread_delta_max(uploads);
        result.deltas = geometric_delta_schedule(cfg.rounds, ceiling, cfg.gamma);
    }
    validate_delta_schedule(result.deltas, cfg.rounds);

    for (long k = K - 1; k >= 0; --k)
        backward_round(agents, server, k, result.deltas[static_cast<std::size_t>(k)], costs, d, result.ledger,
                       &result.trajectory);

    result.theta = server.phi_avg;
    for (const auto& agent : agents) result.final_iterates.push_back(agent.phi());
    return result;
}

} // namespace fedmeta
