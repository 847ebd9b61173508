#pragma once

// iMAML baseline, run as iMAML-X-Y: X outer rounds, Y proximal inner steps.
//
// Per round, every agent gets theta, then
//   phi   ~ argmin L(phi, D_tr) + lambda/2 |phi - theta|^2      (Y SGD steps)
//   g     = (I + H/lambda)^{-1} grad L(phi, D_test)            (CG, H = hessian of L(., D_tr) at phi)
// and the server applies theta <- theta - eta * mean_i g_i.
//
// The solvers are written against plain callables so they can be checked on
// toy quadratics; the MLP wrappers below bind them to nn.hpp.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fedmeta/cost_model.hpp"
#include "fedmeta/error.hpp"
#include "fedmeta/nn.hpp"
#include "fedmeta/param_vector.hpp"
#include "fedmeta/random.hpp"
#include "fedmeta/tasks.hpp"

namespace fedmeta {

struct ImamlConfig {
    std::size_t outer_steps = 50; // X
    std::size_t inner_steps = 50; // Y
    std::size_t cg_steps = 5;
    double lambda = 2.0;
    double inner_lr = 0.01;
    double outer_lr = 0.01;
    std::size_t batch_size = 100;
    std::uint64_t seed = 0;

    void validate() const {
        require(cg_steps >= 1, errc::invalid_config, "cg_steps must be >= 1");
        require(lambda > 0.0 && std::isfinite(lambda), errc::invalid_config, "lambda must be positive");
        require(inner_lr > 0.0, errc::invalid_config, "inner_lr must be positive");
        require(outer_lr > 0.0, errc::invalid_config, "outer_lr must be positive");
        require(batch_size >= 1, errc::invalid_config, "batch size must be >= 1");
    }

    /// Gradient evaluations one agent spends in one outer round.
    std::uint64_t grad_evals_per_agent_round() const { return inner_steps + 2 * cg_steps + 1; }
};

/// `steps` gradient steps on L(phi) + lambda/2 |phi - theta|^2 starting at theta.
/// `loss_grad(phi, t)` returns the (possibly stochastic) gradient of L at step t.
template <class LossGrad>
ParamVector proximal_descent(LossGrad&& loss_grad, const ParamVector& theta, std::size_t steps, double lambda,
                             double lr) {
    ParamVector phi = theta;
    for (std::size_t t = 0; t < steps; ++t) {
        ParamVector g = loss_grad(static_cast<const ParamVector&>(phi), t);
        g.axpy(lambda, phi - theta);
        phi.axpy(-lr, g);
        require(phi.all_finite(), errc::divergence, "inner iMAML solve diverged at step " + std::to_string(t));
    }
    return phi;
}

struct CgResult {
    ParamVector x;
    std::size_t iterations = 0;
    double residual_norm = 0.0;
    bool truncated = false; // stopped on non-positive curvature
};

/// Conjugate gradient on A x = b from x = 0. Stops after `steps` iterations or
/// once |r| <= 1e-10 |b|. One call of apply_A per iteration. On a direction
/// with p^T A p <= 0 it stops and returns the current iterate, or b itself if
/// no step was taken yet (A treated as the identity). Any non-finite quantity
/// throws BreakdownNonFinite.
template <class ApplyA>
CgResult cg_solve(ApplyA&& apply_A, const ParamVector& b, std::size_t steps) {
    require(steps >= 1, errc::invalid_argument, "CG needs at least one step");
    CgResult out{ParamVector(b.size()), 0, norm(b)};
    const double stop = 1e-10 * out.residual_norm;
    if (out.residual_norm == 0.0) return out;

    ParamVector r = b;
    ParamVector p = b;
    double rr = norm_sq(r);
    for (std::size_t i = 0; i < steps; ++i) {
        const ParamVector Ap = apply_A(static_cast<const ParamVector&>(p));
        const double pAp = dot(p, Ap);
        require(std::isfinite(pAp), errc::breakdown_non_finite,
                "CG breakdown: p^T A p is not finite at iteration " + std::to_string(i));
        if (pAp <= 0.0) {
            if (out.iterations == 0) out.x = b;
            out.truncated = true;
            break;
        }
        const double a = rr / pAp;
        out.x.axpy(a, p);
        r.axpy(-a, Ap);
        ++out.iterations;
        const double rr_next = norm_sq(r);
        require(out.x.all_finite() && std::isfinite(rr_next), errc::breakdown_non_finite,
                "CG produced a non-finite iterate at iteration " + std::to_string(i));
        out.residual_norm = std::sqrt(rr_next);
        if (out.residual_norm <= stop) break;
        p *= rr_next / rr;
        p += r;
        rr = rr_next;
    }
    return out;
}

/// (I + H/lambda)^{-1} g by CG, with H supplied as a Hessian-vector product.
template <class Hvp>
CgResult implicit_meta_gradient(Hvp&& hessian_times, const ParamVector& test_grad, double lambda,
                                std::size_t cg_steps) {
    require(lambda > 0.0, errc::invalid_argument, "lambda must be positive");
    auto apply = [&](const ParamVector& v) {
        ParamVector out = hessian_times(v);
        out *= 1.0 / lambda;
        out += v;
        return out;
    };
    return cg_solve(apply, test_grad, cg_steps);
}

// MLP bindings

inline ParamVector inner_solve(const MlpSpec& spec, const ParamVector& theta, const TaskDataset& task,
                               const ImamlConfig& cfg, Rng& rng) {
    cfg.validate();
    MinibatchSampler sampler(task.train.size, cfg.batch_size);
    auto loss_grad = [&](const ParamVector& phi, std::size_t) {
        return sampler.full_batch() ? grad(spec, phi, task.train) : grad(spec, phi, task.train.gather(sampler.next(rng)));
    };
    return proximal_descent(loss_grad, theta, cfg.inner_steps, cfg.lambda, cfg.inner_lr);
}

/// Curvature is taken on `hessian_batch` (a slice of D_tr); the right-hand
/// side is the full D_test gradient at phi.
inline ParamVector meta_gradient(const MlpSpec& spec, const ParamVector& phi, const TaskDataset& task,
                                 const Batch& hessian_batch, const ImamlConfig& cfg) {
    cfg.validate();
    const ParamVector g = grad(spec, phi, task.test);
    auto h = [&](const ParamVector& v) { return hvp(spec, phi, hessian_batch, v); };
    // CG may stop early on a tiny residual; the ledger still charges the full
    // cg_steps so per-round costs stay a fixed function of the configuration.
    return implicit_meta_gradient(h, g, cfg.lambda, cfg.cg_steps).x;
}

struct ImamlResult {
    ParamVector theta;
    /// theta after each requested snapshot round, in the order requested.
    std::vector<ParamVector> snapshots;
    CostLedger ledger;
};

/// X = cfg.outer_steps rounds from `init`. Ledger record r (1-based) covers
/// round r, so a prefix of r records is the cost of running iMAML-r-Y.
inline ImamlResult run_imaml(std::span<const TaskDataset> tasks, const MlpSpec& spec, const ImamlConfig& cfg,
                             const ParamVector& init, const CostSettings& costs = {},
                             std::span<const std::size_t> snapshot_rounds = {}) {
    require(!tasks.empty(), errc::invalid_argument, "iMAML needs at least one task");
    cfg.validate();
    costs.channel.validate();
    const std::size_t d = param_count(spec);
    require(init.size() == d, errc::dimension_mismatch, "initial parameters do not match the model");
    for (auto r : snapshot_rounds)
        require(r <= cfg.outer_steps, errc::invalid_argument, "snapshot round beyond the outer step budget");

    const std::size_t n = tasks.size();
    std::vector<Rng> rngs;
    std::vector<MinibatchSampler> hessian_samplers;
    for (std::size_t i = 0; i < n; ++i) {
        rngs.emplace_back(derive_seed(cfg.seed, stream::imaml, i));
        hessian_samplers.emplace_back(tasks[i].train.size, cfg.batch_size);
    }

    ImamlResult result;
    result.theta = init;
    result.snapshots.resize(snapshot_rounds.size());
    auto take_snapshots = [&](std::size_t round) {
        for (std::size_t s = 0; s < snapshot_rounds.size(); ++s)
            if (snapshot_rounds[s] == round) result.snapshots[s] = result.theta;
    };
    take_snapshots(0);

    for (std::size_t round = 1; round <= cfg.outer_steps; ++round) {
        Stopwatch clock;
        std::vector<ParamVector> grads;
        grads.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const ParamVector phi = inner_solve(spec, result.theta, tasks[i], cfg, rngs[i]);
            const Batch curvature = hessian_samplers[i].full_batch()
                                        ? tasks[i].train
                                        : tasks[i].train.gather(hessian_samplers[i].next(rngs[i]));
            grads.push_back(meta_gradient(spec, phi, tasks[i], curvature, cfg));
        }
        result.theta.axpy(-cfg.outer_lr, mean(grads));
        require(result.theta.all_finite(), errc::divergence, "iMAML meta-model diverged at round " + std::to_string(round));
        record_round(result.ledger, static_cast<long>(round), n, costs.channel.downlink_transfers(n), d, costs.channel,
                     n * cfg.grad_evals_per_agent_round(), clock.seconds(), costs.device_watts);
        take_snapshots(round);
    }
    return result;
}

} // namespace fedmeta
