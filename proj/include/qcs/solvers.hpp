// SPDX-License-Identifier: Apache-2.0
//
// qcs: simulation library for quantized corrupted sensing
// Copyright (C) 2026 The qcs authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
#pragma once

#include "ensemble.hpp"
#include "errors.hpp"
#include "generative.hpp"
#include "linalg.hpp"
#include "priors.hpp"
#include "quantizer.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qcs {

enum class StepRule { FixedInverseLipschitz, Backtracking };

struct SolverConfig {
    int max_iters = 5000;    // per restart for the generative solver
    double grad_tol = 1e-8;  // relative size of the proximal-gradient step
    StepRule step_rule = StepRule::FixedInverseLipschitz;
    double lipschitz_estimate = 0.0; // ||[phi | sqrt(m) I]||_op^2; <= 0 means "estimate it"
    bool accelerated = true;         // monotone FISTA; false gives plain proximal gradient
    int restarts = 10;               // generative only
    std::uint64_t seed = 0;

    void validate() const
    {
        if (max_iters < 1)
            throw config_error("SolverConfig: max_iters must be >= 1");
        if (!(grad_tol > 0.0))
            throw config_error("SolverConfig: grad_tol must be > 0");
        if (restarts < 1)
            throw config_error("SolverConfig: restarts must be >= 1");
    }
};

struct LambdaPair {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

struct RecoveryResult {
    Vector x_hat;
    Vector v_hat;
    double err_x = std::numeric_limits<double>::quiet_NaN();
    double err_v = std::numeric_limits<double>::quiet_NaN();
    double err_joint = std::numeric_limits<double>::quiet_NaN();
    int iters_used = 0;
    std::vector<double> objective_trace;
    bool converged = false;
    // Latent estimates; only set by the generative solver.
    Vector latent_x;
    Vector latent_v;
};

/// Fills the error fields against the ground truth.
inline RecoveryResult &score(RecoveryResult &res, const Vector &x_star, const Vector &v_star)
{
    require_shape(res.x_hat.size() == x_star.size() && res.v_hat.size() == v_star.size(),
                  "score: dimension mismatch");
    res.err_x = (res.x_hat - x_star).norm();
    res.err_v = (res.v_hat - v_star).norm();
    res.err_joint = std::hypot(res.err_x, res.err_v);
    return res;
}

/// Largest eigenvalue of A A^T for the stacked operator A = [phi | sqrt(m) I], by power iteration
/// on phi phi^T + m I.
inline double operator_norm_sq(const SensingEnsemble &e, int iterations = 50)
{
    const double m = e.m();
    Vector u = Vector::Ones(e.m()) / std::sqrt(m);
    double lambda = m;
    for (int it = 0; it < iterations; ++it) {
        Vector w = e.phi * (e.phi.transpose() * u);
        w += m * u;
        lambda = w.norm();
        if (lambda == 0.0)
            return m;
        u = w / lambda;
    }
    return lambda;
}

namespace detail {

// Iterate of the joint problem over (x, v) together with its image A(x, v).
struct Joint {
    Vector x;
    Vector v;
    Vector image;
};

inline Vector apply_stacked(const SensingEnsemble &e, const Vector &x, const Vector &v)
{
    Vector out = e.phi * x;
    out.noalias() += std::sqrt(static_cast<double>(e.m())) * v;
    return out;
}

// Composite minimisation of  c * ||y - A(x, v)||^2 + penalty(x, v)  where "prox" handles the
// nonsmooth part (a projection for the constrained program, a separable prox for the penalised
// one). Accelerated runs use the monotone variant of FISTA: a candidate that raises the
// objective is rejected and the momentum is reset, so the objective trace never increases.
template <typename Prox, typename Penalty>
RecoveryResult proximal_descent(const Vector &y, const SensingEnsemble &e, double c, Prox &&prox,
                                Penalty &&penalty, Joint start, const SolverConfig &cfg)
{
    cfg.validate();
    const double sqrt_m = std::sqrt(static_cast<double>(e.m()));
    const double lip = cfg.lipschitz_estimate > 0.0 ? cfg.lipschitz_estimate : operator_norm_sq(e);
    double step = 1.0 / (1.1 * 2.0 * c * lip);

    auto smooth = [&](const Vector &image) { return c * (y - image).squaredNorm(); };

    RecoveryResult res;
    Joint cur = std::move(start);
    double f_cur = smooth(cur.image) + penalty(cur.x, cur.v);
    if (!std::isfinite(f_cur))
        throw numerical_error("proximal_descent: non-finite objective at the starting point");
    Joint prev = cur;
    Joint ext = cur; // extrapolated point
    double t = 1.0;
    res.objective_trace.reserve(static_cast<std::size_t>(std::min(cfg.max_iters, 20000)) + 1);
    res.objective_trace.push_back(f_cur);

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const Vector resid = y - ext.image;
        const double f_ext_smooth = c * resid.squaredNorm();
        const Vector gx = -2.0 * c * (e.phi.transpose() * resid);
        const Vector gv = -2.0 * c * sqrt_m * resid;

        Joint cand;
        for (;;) {
            auto [nx, nv] = prox(Vector(ext.x - step * gx), Vector(ext.v - step * gv), step);
            cand.x = std::move(nx);
            cand.v = std::move(nv);
            cand.image = apply_stacked(e, cand.x, cand.v);
            if (cfg.step_rule != StepRule::Backtracking)
                break;
            const double dx2 = (cand.x - ext.x).squaredNorm() + (cand.v - ext.v).squaredNorm();
            const double lin = gx.dot(cand.x - ext.x) + gv.dot(cand.v - ext.v);
            if (smooth(cand.image) <= f_ext_smooth + lin + dx2 / (2.0 * step) + 1e-12 * std::abs(f_ext_smooth))
                break;
            step *= 0.5;
            if (step < 1e-300)
                throw numerical_error("proximal_descent: backtracking collapsed");
        }

        const double f_cand = smooth(cand.image) + penalty(cand.x, cand.v);
        if (!std::isfinite(f_cand))
            throw numerical_error("proximal_descent: non-finite objective");
        const double move = std::sqrt((cand.x - ext.x).squaredNorm() + (cand.v - ext.v).squaredNorm());
        const double scale = std::max(1.0, std::sqrt(cand.x.squaredNorm() + cand.v.squaredNorm()));

        res.iters_used = it;
        if (!cfg.accelerated) {
            cur = std::move(cand);
            f_cur = f_cand;
            ext = cur;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            prev = std::move(cur);
            const bool accept = f_cand <= f_cur;
            if (accept) {
                cur = cand;
                f_cur = f_cand;
            } else {
                cur = prev;
            }
            // y = x_k + (t_k / t_{k+1}) (z - x_k) + ((t_k - 1) / t_{k+1}) (x_k - x_{k-1})
            const double a = t / t_next;
            const double b = (t - 1.0) / t_next;
            ext.x = cur.x + a * (cand.x - cur.x) + b * (cur.x - prev.x);
            ext.v = cur.v + a * (cand.v - cur.v) + b * (cur.v - prev.v);
            ext.image = cur.image + a * (cand.image - cur.image) + b * (cur.image - prev.image);
            t = accept ? t_next : 1.0;
            if (!accept)
                ext = cur;
        }
        res.objective_trace.push_back(f_cur);
        if (move <= cfg.grad_tol * scale) {
            res.converged = true;
            break;
        }
    }
    res.x_hat = std::move(cur.x);
    res.v_hat = std::move(cur.v);
    return res;
}

inline void check_observation(const QuantizedObservation &obs, const SensingEnsemble &e)
{
    require_shape(obs.y_dot.size() == e.m(), "solver: observation length != m");
    if (!all_finite(obs.y_dot))
        throw std::domain_error("solver: non-finite observation");
}

inline void check_structured(const PriorModel &x_prior, const PriorModel &v_prior,
                             const SensingEnsemble &e)
{
    if (x_prior.norm_tag() == NormTag::None || v_prior.norm_tag() == NormTag::None)
        throw unsupported_error("solver: structured priors required");
    require_shape(x_prior.dim() == e.n(), "solver: signal prior dimension != n");
    require_shape(v_prior.dim() == e.m(), "solver: corruption prior dimension != m");
}

inline Joint zero_start(const SensingEnsemble &e)
{
    return {Vector::Zero(e.n()), Vector::Zero(e.m()), Vector::Zero(e.m())};
}

} // namespace detail

/// Constrained Lasso: min 1/2 ||y_dot - phi x - sqrt(m) v||^2 s.t. f(x) <= radius_x,
/// g(v) <= radius_v, by projected gradient from (0, 0). The feasible set is a product, so the
/// joint projection is the pair of block projections.
inline RecoveryResult solve_constrained(const QuantizedObservation &obs, const SensingEnsemble &e,
                                        const PriorModel &x_prior, const PriorModel &v_prior,
                                        double radius_x, double radius_v, const SolverConfig &cfg = {})
{
    detail::check_observation(obs, e);
    detail::check_structured(x_prior, v_prior, e);
    if (!(radius_x >= 0.0) || !(radius_v >= 0.0))
        throw std::domain_error("solve_constrained: radii must be >= 0");
    auto prox = [&](Vector x, Vector v, double) {
        return std::pair{project_norm_ball(x_prior, x, radius_x), project_norm_ball(v_prior, v, radius_v)};
    };
    auto penalty = [](const Vector &, const Vector &) { return 0.0; };
    return detail::proximal_descent(obs.y_dot, e, 0.5, prox, penalty, detail::zero_start(e), cfg);
}

/// Unconstrained Lasso: min ||y_dot - phi x - sqrt(m) v||^2 + lambda1 f(x) + lambda2 g(v),
/// by proximal gradient with the separable prox.
inline RecoveryResult solve_unconstrained(const QuantizedObservation &obs, const SensingEnsemble &e,
                                          const PriorModel &x_prior, const PriorModel &v_prior,
                                          const LambdaPair &lambdas, const SolverConfig &cfg = {})
{
    detail::check_observation(obs, e);
    detail::check_structured(x_prior, v_prior, e);
    if (!(lambdas.lambda1 >= 0.0) || !(lambdas.lambda2 >= 0.0))
        throw std::domain_error("solve_unconstrained: lambdas must be >= 0");
    auto prox = [&](Vector x, Vector v, double step) {
        return std::pair{prox_norm(x_prior, x, step * lambdas.lambda1),
                         prox_norm(v_prior, v, step * lambdas.lambda2)};
    };
    auto penalty = [&](const Vector &x, const Vector &v) {
        double p = 0.0;
        if (lambdas.lambda1 > 0.0)
            p += lambdas.lambda1 * norm_f(x_prior, x);
        if (lambdas.lambda2 > 0.0)
            p += lambdas.lambda2 * norm_f(v_prior, v);
        return p;
    };
    return detail::proximal_descent(obs.y_dot, e, 1.0, prox, penalty, detail::zero_start(e), cfg);
}

namespace detail {

// log with its argument clamped below at e, so every log factor is >= 1.
inline double clamped_log(double a)
{
    return std::log(std::max(a, std::exp(1.0)));
}

// delta * sqrt(term), with the delta -> 0 limit taken as 0 (delta sits inside the logs).
inline double delta_sqrt(double delta, double term)
{
    return delta > 0.0 ? delta * std::sqrt(term) : 0.0;
}

} // namespace detail

/// Regularisation parameters for the penalised program, with c1, c2 standing in for the
/// unspecified absolute constants and the noise standard deviation standing in for the
/// sub-Gaussian norm of the noise. Sparse signal or low-rank signal, sparse corruption.
inline LambdaPair default_lambdas(const PriorModel &x_prior, const PriorModel &v_prior, int m_count,
                                  double noise, const Quantizer &q, double c1, double c2)
{
    const auto *vk = v_prior.as<SparsePrior>();
    if (!vk)
        throw unsupported_error("default_lambdas: corruption prior must be sparse");
    if (!(c1 >= 0.0) || !(c2 >= 0.0))
        throw std::domain_error("default_lambdas: constants must be >= 0");
    if (m_count < 1 || !(noise >= 0.0))
        throw std::domain_error("default_lambdas: need m >= 1 and noise >= 0");
    const double m = m_count;
    const double delta = q.is_unquantized() ? 0.0 : q.delta();
    const double k = vk->s;

    using detail::clamped_log;
    const double corruption_term =
        delta > 0.0 ? m * k * clamped_log(std::pow(m, 2.5) / (std::pow(k, 2.5) * delta)) : 0.0;
    const double v_tail = (noise + delta) * std::sqrt(m * std::log(m));

    if (const auto *sp = x_prior.as<SparsePrior>()) {
        const double n = sp->n, s = sp->s;
        const double signal_term =
            delta > 0.0 ? m * s * clamped_log(n * std::pow(m, 1.5) / (std::pow(s, 2.5) * delta)) : 0.0;
        const double head = detail::delta_sqrt(delta, signal_term + corruption_term);
        return {c1 * (head + (noise + delta) * std::sqrt(m * std::log(n))), c2 * (head + v_tail)};
    }
    if (const auto *lr = x_prior.as<LowRankPrior>()) {
        const double dof = static_cast<double>(lr->r) * (lr->p + lr->q);
        const double signal_term =
            delta > 0.0 ? m * dof * clamped_log(std::pow(m, 1.5) / (delta * std::pow(dof, 1.5))) : 0.0;
        const double head = detail::delta_sqrt(delta, signal_term + corruption_term);
        return {c1 * (head + (noise + delta) * std::sqrt(m * (lr->p + lr->q))), c2 * (head + v_tail)};
    }
    throw unsupported_error("default_lambdas: generative priors have no regularisation parameters");
}

inline LambdaPair default_lambdas(const PriorModel &x_prior, const PriorModel &v_prior,
                                  const SensingEnsemble &e, const Quantizer &q, double c1, double c2)
{
    return default_lambdas(x_prior, v_prior, e.m(), e.config.noise_sigma, q, c1, c2);
}

/// Projected back-projection x = P_K(phi^T y_dot / m) for K = B_1(l1_radius) ∩ B_2(l2_radius),
/// in the corruption-free model. The projection onto the intersection is computed by Dykstra's
/// algorithm (tolerance 1e-9, at most 500 sweeps).
inline RecoveryResult solve_pbp(const QuantizedObservation &obs, const SensingEnsemble &e,
                                const L1L2Ball &set, const SolverConfig & = {})
{
    detail::check_observation(obs, e);
    if (!(set.l1_radius >= 0.0) || !(set.l2_radius >= 0.0))
        throw std::domain_error("solve_pbp: set radii must be >= 0");
    const Vector back = e.phi.transpose() * obs.y_dot / static_cast<double>(e.m());
    auto proj = project_l1l2_dykstra(back, set, 1e-9, 500);
    RecoveryResult res;
    res.x_hat = std::move(proj.point);
    res.v_hat = Vector::Zero(e.m());
    res.iters_used = proj.iterations;
    res.converged = proj.converged;
    return res;
}

inline RecoveryResult solve_pbp(const QuantizedObservation &obs, const SensingEnsemble &e,
                                const PriorModel &prior, const SolverConfig &cfg = {})
{
    const auto *sp = prior.as<SparsePrior>();
    if (!sp)
        throw unsupported_error("solve_pbp: needs a sparse prior (effectively sparse set)");
    return solve_pbp(obs, e, L1L2Ball::effectively_sparse(sp->s), cfg);
}

struct LatentPair {
    Vector z;
    Vector z_prime;
};

/// Latent gradient descent for min 1/2 ||y_dot - phi G(z) - sqrt(m) H(z')||^2 over
/// (z, z') in the two latent balls. Each restart starts from a uniform point of the balls
/// (or from a supplied warm start), takes cfg.max_iters projected steps with Armijo
/// backtracking, and the restart with the smallest final residual wins.
inline RecoveryResult solve_generative(const QuantizedObservation &obs, const SensingEnsemble &e,
                                       const GenerativeMap &g_x, const GenerativeMap &g_v,
                                       const SolverConfig &cfg = {},
                                       std::span<const LatentPair> warm_starts = {})
{
    cfg.validate();
    detail::check_observation(obs, e);
    require_shape(g_x.output_dim() == e.n(), "solve_generative: signal map output != n");
    require_shape(g_v.output_dim() == e.m(), "solve_generative: corruption map output != m");
    const double sqrt_m = std::sqrt(static_cast<double>(e.m()));
    const Vector &y = obs.y_dot;

    auto residual = [&](const Vector &z, const Vector &zp) {
        Vector r = y - e.phi * g_x.forward(z);
        r.noalias() -= sqrt_m * g_v.forward(zp);
        return r;
    };

    auto uniform_ball = [](int dim, double radius, Engine &rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vector d(dim);
        for (int i = 0; i < dim; ++i)
            d[i] = normal(rng);
        const double rad = radius * std::pow(unit(rng), 1.0 / dim);
        return Vector(d * (rad / d.norm()));
    };

    RecoveryResult best;
    double best_loss = std::numeric_limits<double>::infinity();
    int total_iters = 0;

    const int runs = std::max<int>(cfg.restarts, static_cast<int>(warm_starts.size()));
    for (int run = 0; run < runs; ++run) {
        Vector z, zp;
        if (run < static_cast<int>(warm_starts.size())) {
            z = g_x.clamp_latent(warm_starts[static_cast<std::size_t>(run)].z);
            zp = g_v.clamp_latent(warm_starts[static_cast<std::size_t>(run)].z_prime);
        } else {
            auto rng = make_engine(cfg.seed, "restart", {static_cast<std::uint64_t>(run)});
            z = uniform_ball(g_x.input_dim(), g_x.latent_radius(), rng);
            zp = uniform_ball(g_v.input_dim(), g_v.latent_radius(), rng);
        }

        Vector r = residual(z, zp);
        double loss = 0.5 * r.squaredNorm();
        std::vector<double> trace{loss};
        double step = 1.0 / (e.m() * 4.0);
        bool failed = !std::isfinite(loss);
        bool converged = false;
        int it = 0;
        for (; it < cfg.max_iters && !failed; ++it) {
            const Vector gz = -g_x.backward(z, e.phi.transpose() * r);
            const Vector gzp = -sqrt_m * g_v.backward(zp, r);
            step *= 2.0;
            Vector z_new, zp_new, r_new;
            double loss_new = loss;
            for (;;) {
                z_new = g_x.clamp_latent(z - step * gz);
                zp_new = g_v.clamp_latent(zp - step * gzp);
                r_new = residual(z_new, zp_new);
                loss_new = 0.5 * r_new.squaredNorm();
                const double decrease = gz.dot(z - z_new) + gzp.dot(zp - zp_new);
                if (std::isfinite(loss_new) && loss_new <= loss - 1e-4 * decrease)
                    break;
                step *= 0.5;
                if (step < 1e-16) {
                    z_new = z;
                    zp_new = zp;
                    r_new = r;
                    loss_new = loss;
                    break;
                }
            }
            if (!std::isfinite(loss_new)) {
                failed = true;
                break;
            }
            const double move = std::sqrt((z_new - z).squaredNorm() + (zp_new - zp).squaredNorm());
            z = std::move(z_new);
            zp = std::move(zp_new);
            r = std::move(r_new);
            loss = loss_new;
            trace.push_back(loss);
            if (move <= cfg.grad_tol * std::max(1.0, std::sqrt(z.squaredNorm() + zp.squaredNorm()))) {
                converged = true;
                ++it;
                break;
            }
        }
        total_iters += it;
        if (failed)
            continue;
        if (loss < best_loss) {
            best_loss = loss;
            best.latent_x = z;
            best.latent_v = zp;
            best.objective_trace = std::move(trace);
            best.converged = converged;
        }
    }
    if (!std::isfinite(best_loss))
        throw numerical_error("solve_generative: every restart diverged");
    best.x_hat = g_x.forward(best.latent_x);
    best.v_hat = g_v.forward(best.latent_v);
    best.iters_used = total_iters;
    return best;
}

} // namespace qcs
