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
#include "geometry.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "priors.hpp"
#include "quantizer.hpp"
#include "rng.hpp"
#include "solvers.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <locale>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace qcs {

enum class Scenario {
    SparseSparseConstrained,
    SparseSparseUnconstrained,
    LowRankSparseConstrained,
    LowRankSparseUnconstrained,
    PBP,
    Generative,
};

NLOHMANN_JSON_SERIALIZE_ENUM(Scenario, {{Scenario::SparseSparseConstrained, "sparse-sparse-constrained"},
                                        {Scenario::SparseSparseUnconstrained, "sparse-sparse-unconstrained"},
                                        {Scenario::LowRankSparseConstrained, "lowrank-sparse-constrained"},
                                        {Scenario::LowRankSparseUnconstrained, "lowrank-sparse-unconstrained"},
                                        {Scenario::PBP, "pbp"},
                                        {Scenario::Generative, "generative"}})

inline std::string to_string(Scenario s)
{
    return nlohmann::json(s).get<std::string>();
}

inline bool is_low_rank(Scenario s)
{
    return s == Scenario::LowRankSparseConstrained || s == Scenario::LowRankSparseUnconstrained;
}

inline bool is_unconstrained(Scenario s)
{
    return s == Scenario::SparseSparseUnconstrained || s == Scenario::LowRankSparseUnconstrained;
}

inline bool is_structured(Scenario s)
{
    return s != Scenario::PBP && s != Scenario::Generative;
}

// How the penalised scenarios pick their (lambda1, lambda2).
//   per_m:     evaluate the regularisation formula at each grid point; one pair per test set.
//   largest_m: evaluate once at the largest grid point and reuse it everywhere.
enum class LambdaPolicy { PerM, LargestM };

NLOHMANN_JSON_SERIALIZE_ENUM(LambdaPolicy, {{LambdaPolicy::PerM, "per_m"}, {LambdaPolicy::LargestM, "largest_m"}})

struct GenerativeSettings {
    int latent_x = 2;
    int latent_v = 2;
    int hidden = 32;
    double latent_radius = 1.0;
    double bias_scale = 0.1;
};

/// Default constant for the regularisation formula, from a pilot sweep at n = 256, s = k = 2,
/// delta = 0.1 (the constant minimising the averaged max-error curve over a grid of candidates).
inline constexpr double kDefaultLambdaConstant = 0.15;

struct ExperimentPlan {
    Scenario scenario = Scenario::SparseSparseConstrained;
    std::vector<int> m_grid{150, 200, 300, 400, 500};
    int testset_size = 100;
    int trials = 10;
    int n = 256;
    int s = 2;
    int k = 2;
    int p = 16;
    int q = 16;
    int r = 1;
    double delta = 0.1; // 0 means unquantized
    double sigma = 0.0;
    MatrixKind matrix_kind = MatrixKind::Gaussian;
    std::uint64_t seed = 1;
    int max_iters = 5000;
    double grad_tol = 1e-8;
    bool accelerated = true;
    int restarts = 10;
    double lambda_c1 = kDefaultLambdaConstant;
    double lambda_c2 = kDefaultLambdaConstant;
    LambdaPolicy lambda_policy = LambdaPolicy::PerM;
    GenerativeSettings generative;

    /// Ambient signal dimension (p q for low-rank scenarios).
    int signal_dim() const { return is_low_rank(scenario) ? p * q : n; }

    void validate() const
    {
        if (m_grid.empty())
            throw config_error("plan.m_grid: must be nonempty");
        for (std::size_t i = 0; i < m_grid.size(); ++i) {
            if (m_grid[i] < 1)
                throw config_error("plan.m_grid: entries must be >= 1");
            if (i > 0 && m_grid[i] <= m_grid[i - 1])
                throw config_error("plan.m_grid: must be strictly increasing");
        }
        if (testset_size < 1)
            throw config_error("plan.testset_size: must be >= 1");
        if (trials < 1)
            throw config_error("plan.trials: must be >= 1");
        if (!(delta >= 0.0) || !std::isfinite(delta))
            throw config_error("plan.delta: must be >= 0");
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw config_error("plan.sigma: must be >= 0");
        if (max_iters < 1)
            throw config_error("plan.max_iters: must be >= 1");
        if (!(grad_tol > 0.0))
            throw config_error("plan.grad_tol: must be > 0");
        if (restarts < 1)
            throw config_error("plan.restarts: must be >= 1");
        if (!(lambda_c1 >= 0.0) || !(lambda_c2 >= 0.0))
            throw config_error("plan.lambda_c1/lambda_c2: must be >= 0");
        if (is_low_rank(scenario)) {
            if (p < 1 || q < 1 || r < 1 || r > std::min(p, q))
                throw config_error("plan.r: need 1 <= r <= min(p, q)");
        } else if (scenario != Scenario::Generative) {
            if (n < 1 || s < 1 || s > n)
                throw config_error("plan.s: need 1 <= s <= n");
        } else {
            const auto &g = generative;
            if (n < 1 || g.latent_x < 1 || g.latent_v < 1 || g.hidden < 1 || !(g.latent_radius > 0.0))
                throw config_error("plan.generative: dimensions and radius must be positive");
        }
        if (is_structured(scenario) && (k < 1 || k > m_grid.front()))
            throw config_error("plan.k: need 1 <= k <= min(m_grid)");
    }

    SolverConfig solver_config(std::uint64_t solve_seed = 0) const
    {
        SolverConfig cfg;
        cfg.max_iters = max_iters;
        cfg.grad_tol = grad_tol;
        cfg.accelerated = accelerated;
        cfg.restarts = restarts;
        cfg.seed = solve_seed;
        if (scenario == Scenario::Generative)
            cfg.step_rule = StepRule::Backtracking;
        return cfg;
    }
};

// ---------------------------------------------------------------------------------------------
// Plan (de)serialisation. Unknown keys and wrongly typed values are reported by name.

namespace detail {

template <typename T>
void read_key(const nlohmann::json &j, const char *key, T &dst, const std::string &prefix)
{
    if (!j.contains(key))
        return;
    try {
        j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception &ex) {
        throw config_error("invalid value for key '" + prefix + key + "': " + ex.what());
    }
}

inline void reject_unknown(const nlohmann::json &j, const std::set<std::string> &known, const std::string &prefix)
{
    if (!j.is_object())
        throw config_error("'" + prefix + "' must be a JSON object");
    for (const auto &[key, _] : j.items())
        if (!known.count(key))
            throw config_error("unknown key '" + prefix + key + "'");
}

} // namespace detail

inline void to_json(nlohmann::json &j, const GenerativeSettings &g)
{
    j = nlohmann::json{{"latent_x", g.latent_x},
                       {"latent_v", g.latent_v},
                       {"hidden", g.hidden},
                       {"latent_radius", g.latent_radius},
                       {"bias_scale", g.bias_scale}};
}

inline void to_json(nlohmann::json &j, const ExperimentPlan &p)
{
    j = nlohmann::json{{"scenario", p.scenario},
                       {"m_grid", p.m_grid},
                       {"testset_size", p.testset_size},
                       {"trials", p.trials},
                       {"n", p.n},
                       {"s", p.s},
                       {"k", p.k},
                       {"p", p.p},
                       {"q", p.q},
                       {"r", p.r},
                       {"delta", p.delta},
                       {"sigma", p.sigma},
                       {"matrix_kind", p.matrix_kind},
                       {"seed", p.seed},
                       {"max_iters", p.max_iters},
                       {"grad_tol", p.grad_tol},
                       {"accelerated", p.accelerated},
                       {"restarts", p.restarts},
                       {"lambda_c1", p.lambda_c1},
                       {"lambda_c2", p.lambda_c2},
                       {"lambda_policy", p.lambda_policy},
                       {"generative", p.generative}};
}

/// Parses a plan object on top of the defaults.
inline ExperimentPlan plan_from_json(const nlohmann::json &j, const std::string &prefix = "plan.")
{
    using detail::read_key;
    detail::reject_unknown(j,
                           {"scenario", "m_grid", "testset_size", "trials", "n", "s", "k", "p", "q", "r",
                            "delta", "sigma", "matrix_kind", "seed", "max_iters", "grad_tol", "accelerated",
                            "restarts", "lambda_c1", "lambda_c2", "lambda_policy", "generative"},
                           prefix);
    ExperimentPlan p;
    if (j.contains("scenario")) {
        const auto &v = j.at("scenario");
        p.scenario = v.get<Scenario>();
        if (!v.is_string() || nlohmann::json(p.scenario) != v)
            throw config_error("invalid value for key '" + prefix + "scenario'");
    }
    if (j.contains("matrix_kind")) {
        const auto &v = j.at("matrix_kind");
        p.matrix_kind = v.get<MatrixKind>();
        if (!v.is_string() || nlohmann::json(p.matrix_kind) != v)
            throw config_error("invalid value for key '" + prefix + "matrix_kind'");
    }
    if (j.contains("lambda_policy")) {
        const auto &v = j.at("lambda_policy");
        p.lambda_policy = v.get<LambdaPolicy>();
        if (!v.is_string() || nlohmann::json(p.lambda_policy) != v)
            throw config_error("invalid value for key '" + prefix + "lambda_policy'");
    }
    read_key(j, "m_grid", p.m_grid, prefix);
    read_key(j, "testset_size", p.testset_size, prefix);
    read_key(j, "trials", p.trials, prefix);
    read_key(j, "n", p.n, prefix);
    read_key(j, "s", p.s, prefix);
    read_key(j, "k", p.k, prefix);
    read_key(j, "p", p.p, prefix);
    read_key(j, "q", p.q, prefix);
    read_key(j, "r", p.r, prefix);
    read_key(j, "delta", p.delta, prefix);
    read_key(j, "sigma", p.sigma, prefix);
    read_key(j, "seed", p.seed, prefix);
    read_key(j, "max_iters", p.max_iters, prefix);
    read_key(j, "grad_tol", p.grad_tol, prefix);
    read_key(j, "accelerated", p.accelerated, prefix);
    read_key(j, "restarts", p.restarts, prefix);
    read_key(j, "lambda_c1", p.lambda_c1, prefix);
    read_key(j, "lambda_c2", p.lambda_c2, prefix);
    if (j.contains("generative")) {
        const auto &g = j.at("generative");
        const std::string gp = prefix + "generative.";
        detail::reject_unknown(g, {"latent_x", "latent_v", "hidden", "latent_radius", "bias_scale"}, gp);
        read_key(g, "latent_x", p.generative.latent_x, gp);
        read_key(g, "latent_v", p.generative.latent_v, gp);
        read_key(g, "hidden", p.generative.hidden, gp);
        read_key(g, "latent_radius", p.generative.latent_radius, gp);
        read_key(g, "bias_scale", p.generative.bias_scale, gp);
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------------------------
// Test sets

struct GroundTruthPair {
    Vector x_star;
    Vector v_star;
    // Latent codes, generative scenario only.
    Vector latent_x;
    Vector latent_v;
};

/// The two generative maps of one (trial, m) cell. The signal map is shared across m within a
/// trial; the corruption map has output dimension m and is drawn per grid point.
struct GenerativePair {
    std::shared_ptr<const GenerativeMap> signal;
    std::shared_ptr<const GenerativeMap> corruption;
};

inline GenerativePair draw_generative_maps(const ExperimentPlan &plan, int trial, int m)
{
    const auto &g = plan.generative;
    auto rng_x = make_engine(plan.seed, "gmap-x", {static_cast<std::uint64_t>(trial)});
    auto rng_v = make_engine(plan.seed, "gmap-v", {static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(m)});
    GenerativePair maps;
    maps.signal = std::make_shared<const GenerativeMap>(
        random_generative_map(g.latent_x, g.hidden, plan.n, g.latent_radius, rng_x, g.bias_scale));
    maps.corruption = std::make_shared<const GenerativeMap>(
        random_generative_map(g.latent_v, g.hidden, m, g.latent_radius, rng_v, g.bias_scale));
    return maps;
}

/// Structure priors of the scenario at measurement count m.
inline std::pair<PriorModel, PriorModel> plan_priors(const ExperimentPlan &plan, int m,
                                                     const GenerativePair *maps = nullptr)
{
    switch (plan.scenario) {
    case Scenario::SparseSparseConstrained:
    case Scenario::SparseSparseUnconstrained:
        return {PriorModel::sparse(plan.n, plan.s), PriorModel::sparse(m, plan.k)};
    case Scenario::LowRankSparseConstrained:
    case Scenario::LowRankSparseUnconstrained:
        return {PriorModel::low_rank(plan.p, plan.q, plan.r), PriorModel::sparse(m, plan.k)};
    case Scenario::PBP:
        return {PriorModel::sparse(plan.n, plan.s), PriorModel::sparse(m, 1)};
    case Scenario::Generative:
        if (!maps)
            throw std::invalid_argument("plan_priors: generative scenario needs its maps");
        return {PriorModel::generative(maps->signal), PriorModel::generative(maps->corruption)};
    }
    throw std::logic_error("plan_priors: unknown scenario");
}

namespace detail {

template <typename Rng>
Vector uniform_in_ball(int dim, double radius, Rng &rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector d(dim);
    for (int i = 0; i < dim; ++i)
        d[i] = normal(rng);
    return d * (radius * std::pow(unit(rng), 1.0 / dim) / d.norm());
}

inline Vector unit_normalized(Vector x)
{
    const double nrm = x.norm();
    return nrm > 0.0 ? Vector(x / nrm) : x;
}

} // namespace detail

/// Test pairs for cell (trial, m). Pair i is drawn from streams keyed by (seed, trial, i), so a
/// smaller test set is a prefix of a larger one. Signals do not depend on m; sparse corruptions
/// live in R^m and are keyed by m as well.
///
/// Sparse signals and corruptions are scaled to unit l2 norm; low-rank signals U V^T are scaled to
/// unit Frobenius norm; generative pairs are G(z), H(z') at latents uniform in the latent balls.
inline std::vector<GroundTruthPair> build_testset(const ExperimentPlan &plan, int trial, int m,
                                                  const GenerativePair *maps = nullptr)
{
    plan.validate();
    const auto t = static_cast<std::uint64_t>(trial);
    const auto mm = static_cast<std::uint64_t>(m);
    std::vector<GroundTruthPair> pairs(static_cast<std::size_t>(plan.testset_size));
    for (int i = 0; i < plan.testset_size; ++i) {
        const auto ii = static_cast<std::uint64_t>(i);
        auto rng_x = make_engine(plan.seed, "testset-x", {t, ii});
        auto rng_v = make_engine(plan.seed, "testset-v", {t, ii, mm});
        auto &pair = pairs[static_cast<std::size_t>(i)];
        switch (plan.scenario) {
        case Scenario::SparseSparseConstrained:
        case Scenario::SparseSparseUnconstrained:
            pair.x_star = detail::unit_normalized(sample_sparse(plan.n, plan.s, rng_x));
            pair.v_star = detail::unit_normalized(sample_sparse(m, plan.k, rng_v));
            break;
        case Scenario::LowRankSparseConstrained:
        case Scenario::LowRankSparseUnconstrained: {
            const Matrix lr = sample_lowrank(plan.p, plan.q, plan.r, rng_x) / std::sqrt(static_cast<double>(plan.r));
            pair.x_star = Eigen::Map<const Vector>(lr.data(), lr.size());
            pair.v_star = detail::unit_normalized(sample_sparse(m, plan.k, rng_v));
            break;
        }
        case Scenario::PBP:
            pair.x_star = detail::unit_normalized(sample_sparse(plan.n, plan.s, rng_x));
            pair.v_star = Vector::Zero(m);
            break;
        case Scenario::Generative: {
            if (!maps)
                throw std::invalid_argument("build_testset: generative scenario needs its maps");
            pair.latent_x = detail::uniform_in_ball(maps->signal->input_dim(), maps->signal->latent_radius(), rng_x);
            pair.latent_v =
                detail::uniform_in_ball(maps->corruption->input_dim(), maps->corruption->latent_radius(), rng_v);
            pair.x_star = maps->signal->forward(pair.latent_x);
            pair.v_star = maps->corruption->forward(pair.latent_v);
            break;
        }
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------------------------
// Sweeps

struct CellRecord {
    int m = 0;
    int trial = 0;
    std::uint64_t fingerprint = 0;
    double max_err = 0.0;
    double mean_err = 0.0;
    std::vector<double> pair_errors; // +inf for flagged pairs
    std::vector<int> flagged;        // indices of pairs whose solve failed
    double max_rel_x = std::numeric_limits<double>::quiet_NaN();
    double max_rel_v = std::numeric_limits<double>::quiet_NaN();
    double lambda1 = std::numeric_limits<double>::quiet_NaN();
    double lambda2 = std::numeric_limits<double>::quiet_NaN();
    long long iterations = 0;
};

struct AggregatePoint {
    int m = 0;
    double mean_max_err = 0.0;
    double mean_mean_err = 0.0;
    double predicted_error = std::numeric_limits<double>::quiet_NaN();
};

struct SweepReport {
    ExperimentPlan plan;
    std::vector<CellRecord> cells; // ordered by (trial, m)
    std::vector<AggregatePoint> aggregate;
    double fitted_slope = std::numeric_limits<double>::quiet_NaN();
    std::vector<BoundReport> overlays;

    bool any_flagged() const
    {
        return std::any_of(cells.begin(), cells.end(), [](const CellRecord &c) { return !c.flagged.empty(); });
    }

    const CellRecord &cell(int trial, int m) const
    {
        for (const auto &c : cells)
            if (c.trial == trial && c.m == m)
                return c;
        throw std::out_of_range("SweepReport::cell: no such cell");
    }
};

struct RunOptions {
    unsigned jobs = default_jobs();
    std::function<void(const CellRecord &)> on_cell;
};

/// Least-squares slope of log(err) against log(m). Points whose error is below the floor (the
/// exact-recovery regime) or non-finite are skipped; NaN when fewer than two points remain.
inline double fit_loglog_slope(const std::vector<int> &ms, const std::vector<double> &errs, double floor = 1e-6)
{
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < ms.size() && i < errs.size(); ++i) {
        if (!std::isfinite(errs[i]) || errs[i] < floor)
            continue;
        lx.push_back(std::log(static_cast<double>(ms[i])));
        ly.push_back(std::log(errs[i]));
    }
    if (lx.size() < 2)
        return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

inline EnsembleConfig cell_ensemble_config(const ExperimentPlan &plan, int trial, int m)
{
    EnsembleConfig cfg;
    cfg.m = m;
    cfg.n = plan.signal_dim();
    cfg.matrix_kind = plan.matrix_kind;
    cfg.noise_sigma = plan.sigma;
    cfg.delta = plan.delta;
    cfg.seed = derive_seed(plan.seed, "ensemble", {static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(m)});
    return cfg;
}

inline Quantizer plan_quantizer(const ExperimentPlan &plan)
{
    return plan.delta > 0.0 ? Quantizer(plan.delta) : Quantizer::unquantized();
}

inline std::optional<BoundReport> plan_overlay(const ExperimentPlan &plan, int m)
{
    if (!is_structured(plan.scenario))
        return std::nullopt;
    BoundParams b;
    b.m = m;
    b.n = plan.signal_dim();
    b.s = plan.s;
    b.k = plan.k;
    b.p = plan.p;
    b.q = plan.q;
    b.r = plan.r;
    b.delta = plan.delta;
    b.sigma = plan.sigma;
    return make_bound_report(is_low_rank(plan.scenario) ? BoundSetting::LowRankSparse : BoundSetting::SparseSparse, b);
}

/// Regularisation pair used for every test pair of a cell at measurement count m.
inline LambdaPair plan_lambdas(const ExperimentPlan &plan, int m)
{
    const int m_eval = plan.lambda_policy == LambdaPolicy::LargestM ? plan.m_grid.back() : m;
    auto [xp, vp] = plan_priors(plan, m_eval);
    return default_lambdas(xp, vp, m_eval, plan.sigma, plan_quantizer(plan), plan.lambda_c1, plan.lambda_c2);
}

/// Runs one (trial, m) cell: one ensemble draw serves every pair of the test set.
inline CellRecord run_cell(const ExperimentPlan &plan, int trial, int m, const RunOptions &opts = {})
{
    const auto ens = draw_ensemble(cell_ensemble_config(plan, trial, m));
    const auto q = plan_quantizer(plan);
    std::optional<GenerativePair> maps;
    if (plan.scenario == Scenario::Generative)
        maps = draw_generative_maps(plan, trial, m);
    const auto pairs = build_testset(plan, trial, m, maps ? &*maps : nullptr);
    const auto [x_prior, v_prior] = plan_priors(plan, m, maps ? &*maps : nullptr);

    CellRecord cell;
    cell.m = m;
    cell.trial = trial;
    cell.fingerprint = ens.fingerprint();

    SolverConfig base_cfg = plan.solver_config();
    base_cfg.lipschitz_estimate = operator_norm_sq(ens);
    LambdaPair lambdas;
    if (is_unconstrained(plan.scenario)) {
        lambdas = plan_lambdas(plan, m);
        cell.lambda1 = lambdas.lambda1;
        cell.lambda2 = lambdas.lambda2;
    }

    const std::size_t count = pairs.size();
    std::vector<double> errs(count, std::numeric_limits<double>::infinity());
    std::vector<double> rel_x(count, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> rel_v(count, std::numeric_limits<double>::quiet_NaN());
    std::vector<int> iters(count, 0);
    std::vector<char> failed(count, 0);

    parallel_for(count, opts.jobs, [&](std::size_t i) {
        const auto &pair = pairs[i];
        try {
            const auto obs = observe(ens, q, pair.x_star, pair.v_star);
            SolverConfig cfg = base_cfg;
            cfg.seed = derive_seed(plan.seed, "solve", {static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(m), i});
            RecoveryResult res;
            switch (plan.scenario) {
            case Scenario::SparseSparseConstrained:
            case Scenario::LowRankSparseConstrained:
                res = solve_constrained(obs, ens, x_prior, v_prior, norm_f(x_prior, pair.x_star),
                                        norm_f(v_prior, pair.v_star), cfg);
                break;
            case Scenario::SparseSparseUnconstrained:
            case Scenario::LowRankSparseUnconstrained:
                res = solve_unconstrained(obs, ens, x_prior, v_prior, lambdas, cfg);
                break;
            case Scenario::PBP:
                res = solve_pbp(obs, ens, L1L2Ball::effectively_sparse(plan.s), cfg);
                break;
            case Scenario::Generative:
                res = solve_generative(obs, ens, *maps->signal, *maps->corruption, cfg);
                break;
            }
            score(res, pair.x_star, pair.v_star);
            iters[i] = res.iters_used;
            if (!std::isfinite(res.err_joint)) {
                failed[i] = 1;
                return;
            }
            errs[i] = res.err_joint;
            if (plan.scenario == Scenario::Generative) {
                rel_x[i] = res.err_x / pair.x_star.norm();
                rel_v[i] = res.err_v / pair.v_star.norm();
            }
        } catch (const numerical_error &) {
            failed[i] = 1;
        }
    });

    if (ens.fingerprint() != cell.fingerprint)
        throw std::logic_error("run_cell: ensemble changed while solving");

    double sum = 0.0;
    int ok = 0;
    cell.max_err = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        cell.iterations += iters[i];
        if (failed[i]) {
            cell.flagged.push_back(static_cast<int>(i));
            cell.max_err = std::numeric_limits<double>::infinity();
            continue;
        }
        sum += errs[i];
        ++ok;
        cell.max_err = std::max(cell.max_err, errs[i]);
        if (plan.scenario == Scenario::Generative) {
            cell.max_rel_x = std::isnan(cell.max_rel_x) ? rel_x[i] : std::max(cell.max_rel_x, rel_x[i]);
            cell.max_rel_v = std::isnan(cell.max_rel_v) ? rel_v[i] : std::max(cell.max_rel_v, rel_v[i]);
        }
    }
    cell.pair_errors = std::move(errs);
    cell.mean_err = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    if (opts.on_cell)
        opts.on_cell(cell);
    return cell;
}

/// Recomputes the per-m aggregates and the fitted slope from the cell records.
inline void aggregate_report(SweepReport &rep)
{
    rep.aggregate.clear();
    std::vector<double> curve;
    for (std::size_t gi = 0; gi < rep.plan.m_grid.size(); ++gi) {
        const int m = rep.plan.m_grid[gi];
        AggregatePoint pt;
        pt.m = m;
        int count = 0;
        for (const auto &c : rep.cells) {
            if (c.m != m)
                continue;
            pt.mean_max_err += c.max_err;
            pt.mean_mean_err += c.mean_err;
            ++count;
        }
        if (count > 0) {
            pt.mean_max_err /= count;
            pt.mean_mean_err /= count;
        }
        if (gi < rep.overlays.size())
            pt.predicted_error = rep.overlays[gi].predicted_error;
        curve.push_back(pt.mean_max_err);
        rep.aggregate.push_back(pt);
    }
    rep.fitted_slope = fit_loglog_slope(rep.plan.m_grid, curve);
}

/// Uniform-recovery sweep: for every trial and every m, one ensemble draw recovers the whole test
/// set; the maximum joint error per cell is averaged over trials and fitted on a log-log scale.
inline SweepReport run_sweep(const ExperimentPlan &plan, const RunOptions &opts = {})
{
    plan.validate();
    SweepReport rep;
    rep.plan = plan;
    for (int m : plan.m_grid)
        if (auto ov = plan_overlay(plan, m))
            rep.overlays.push_back(*ov);
    for (int trial = 0; trial < plan.trials; ++trial)
        for (int m : plan.m_grid)
            rep.cells.push_back(run_cell(plan, trial, m, opts));
    aggregate_report(rep);
    return rep;
}

struct StudyCurve {
    double sigma = 0.0;
    double delta = 0.0;
    SweepReport report;
};

/// The four (sigma, delta) cases of the noise/resolution study, ordered by delta then sigma.
inline std::vector<std::pair<double, double>> default_study_cases()
{
    return {{0.02, 0.1}, {0.04, 0.1}, {0.02, 0.2}, {0.04, 0.2}};
}

inline std::vector<StudyCurve> run_delta_sigma_study(const ExperimentPlan &base,
                                                     std::vector<std::pair<double, double>> cases = default_study_cases(),
                                                     const RunOptions &opts = {})
{
    std::sort(cases.begin(), cases.end(), [](const auto &a, const auto &b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    std::vector<StudyCurve> out;
    for (const auto &[sigma, delta] : cases) {
        ExperimentPlan plan = base;
        plan.sigma = sigma;
        plan.delta = delta;
        out.push_back({sigma, delta, run_sweep(plan, opts)});
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Report output

namespace detail {

inline nlohmann::json finite_or_null(double v)
{
    if (std::isfinite(v))
        return v;
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return nullptr;
}

inline std::string csv_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace detail

inline nlohmann::json report_to_json(const SweepReport &rep)
{
    using detail::finite_or_null;
    nlohmann::json j;
    j["plan"] = rep.plan;
    j["fitted_slope"] = finite_or_null(rep.fitted_slope);
    auto &cells = j["cells"] = nlohmann::json::array();
    for (const auto &c : rep.cells) {
        nlohmann::json jc{{"m", c.m},
                          {"trial", c.trial},
                          {"ensemble_fingerprint", c.fingerprint},
                          {"max_err", finite_or_null(c.max_err)},
                          {"mean_err", finite_or_null(c.mean_err)},
                          {"flagged", c.flagged},
                          {"iterations", c.iterations}};
        auto &pe = jc["pair_errors"] = nlohmann::json::array();
        for (double e : c.pair_errors)
            pe.push_back(finite_or_null(e));
        if (rep.plan.scenario == Scenario::Generative) {
            jc["max_rel_err_x"] = finite_or_null(c.max_rel_x);
            jc["max_rel_err_v"] = finite_or_null(c.max_rel_v);
        }
        if (is_unconstrained(rep.plan.scenario)) {
            jc["lambda1"] = c.lambda1;
            jc["lambda2"] = c.lambda2;
        }
        cells.push_back(std::move(jc));
    }
    auto &agg = j["aggregate"] = nlohmann::json::array();
    for (const auto &a : rep.aggregate)
        agg.push_back({{"m", a.m},
                       {"mean_max_err", finite_or_null(a.mean_max_err)},
                       {"mean_mean_err", finite_or_null(a.mean_mean_err)},
                       {"predicted_error", finite_or_null(a.predicted_error)}});
    j["overlays"] = rep.overlays;
    return j;
}

inline constexpr const char *kCurvesHeader = "scenario,m,trial,max_err,mean_err,predicted_error";

/// CSV rows (no header) for one report: one row per (m, trial) cell.
inline void write_curves_rows(std::ostream &os, const SweepReport &rep, const std::string &label)
{
    using detail::csv_number;
    for (const auto &c : rep.cells) {
        double predicted = std::numeric_limits<double>::quiet_NaN();
        for (const auto &a : rep.aggregate)
            if (a.m == c.m)
                predicted = a.predicted_error;
        os << label << ',' << c.m << ',' << c.trial << ',' << csv_number(c.max_err) << ',' << csv_number(c.mean_err)
           << ',' << csv_number(predicted) << '\n';
    }
}

inline void write_curves_csv(std::ostream &os, const SweepReport &rep)
{
    os << kCurvesHeader << '\n';
    write_curves_rows(os, rep, to_string(rep.plan.scenario));
}

// ---------------------------------------------------------------------------------------------
// Quantized product embedding diagnostic over sparse nets

struct QpeConfig {
    int n = 64;
    int m = 512;
    int s = 2;
    int k = 2;
    double delta = 0.2;
    double sigma = 0.0;
    MatrixKind matrix_kind = MatrixKind::Gaussian;
    int samples = 200;            // size of each of the three sample lists
    std::vector<int> growth{25, 50, 100, 200}; // nested prefix sizes checked for monotonicity
    int seeds = 10;
    int width_trials = 2000;
    double bound_constant = 10.0;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (n < 1 || m < 1 || s < 1 || s > n || k < 1 || k > m)
            throw config_error("qpe: need 1 <= s <= n and 1 <= k <= m");
        if (!(delta > 0.0) || !std::isfinite(delta))
            throw config_error("qpe.delta: must be > 0");
        if (!(sigma >= 0.0))
            throw config_error("qpe.sigma: must be >= 0");
        if (samples < 1 || seeds < 1 || width_trials < 1)
            throw config_error("qpe: samples, seeds and width_trials must be >= 1");
        for (std::size_t i = 0; i < growth.size(); ++i)
            if (growth[i] < 1 || growth[i] > samples || (i > 0 && growth[i] <= growth[i - 1]))
                throw config_error("qpe.growth: must be strictly increasing within [1, samples]");
    }
};

inline void to_json(nlohmann::json &j, const QpeConfig &c)
{
    j = nlohmann::json{{"n", c.n},
                       {"m", c.m},
                       {"s", c.s},
                       {"k", c.k},
                       {"delta", c.delta},
                       {"sigma", c.sigma},
                       {"matrix_kind", c.matrix_kind},
                       {"samples", c.samples},
                       {"growth", c.growth},
                       {"seeds", c.seeds},
                       {"width_trials", c.width_trials},
                       {"bound_constant", c.bound_constant},
                       {"seed", c.seed}};
}

inline QpeConfig qpe_from_json(const nlohmann::json &j, const std::string &prefix = "qpe.")
{
    using detail::read_key;
    detail::reject_unknown(j,
                           {"n", "m", "s", "k", "delta", "sigma", "matrix_kind", "samples", "growth", "seeds",
                            "width_trials", "bound_constant", "seed"},
                           prefix);
    QpeConfig c;
    read_key(j, "n", c.n, prefix);
    read_key(j, "m", c.m, prefix);
    read_key(j, "s", c.s, prefix);
    read_key(j, "k", c.k, prefix);
    read_key(j, "delta", c.delta, prefix);
    read_key(j, "sigma", c.sigma, prefix);
    if (j.contains("matrix_kind")) {
        const auto &v = j.at("matrix_kind");
        c.matrix_kind = v.get<MatrixKind>();
        if (!v.is_string() || nlohmann::json(c.matrix_kind) != v)
            throw config_error("invalid value for key '" + prefix + "matrix_kind'");
    }
    read_key(j, "samples", c.samples, prefix);
    read_key(j, "growth", c.growth, prefix);
    read_key(j, "seeds", c.seeds, prefix);
    read_key(j, "width_trials", c.width_trials, prefix);
    read_key(j, "bound_constant", c.bound_constant, prefix);
    read_key(j, "seed", c.seed, prefix);
    c.validate();
    return c;
}

struct QpeSeedResult {
    std::uint64_t seed = 0;
    std::vector<double> statistics; // one per prefix size in the growth list
    double bound = 0.0;             // bound_constant * (width + sqrt(entropy))
    bool monotone = true;
    bool within_bound = true;
};

struct QpeReport {
    QpeConfig config;
    double width = 0.0;   // Monte-Carlo width of the unit (c, d) pairs
    double entropy = 0.0; // entropy of the signal net plus the corruption net
    std::vector<QpeSeedResult> seeds;
};

namespace detail {

// Sparse vector with norm uniform in [0, 1].
template <typename Rng>
Vector sparse_in_ball(int dim, int s, Rng &rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return unit_normalized(sample_sparse(dim, s, rng)) * unit(rng);
}

} // namespace detail

/// For each seed: one ensemble, three sample lists (signal points a, corruption points b, unit
/// pairs (c, d)), and the normalised statistic over nested prefixes of the lists. The bound is
/// C (w(E) + sqrt(H_x + H_v)) with the entropies at the default covering radii.
inline QpeReport run_qpe_check(const QpeConfig &cfg, const RunOptions &opts = {})
{
    cfg.validate();
    QpeReport rep;
    rep.config = cfg;
    auto wrng = make_engine(cfg.seed, "qpe-width", {});
    rep.width = width_sparse_pair_mc(cfg.n, cfg.s, cfg.m, cfg.k, cfg.width_trials, wrng).mean;
    BoundParams bp;
    bp.m = cfg.m;
    bp.n = cfg.n;
    bp.s = cfg.s;
    bp.k = cfg.k;
    bp.delta = cfg.delta;
    bp.sigma = cfg.sigma;
    const auto overlay = make_bound_report(BoundSetting::SparseSparse, bp);
    rep.entropy = overlay.entropy_x + overlay.entropy_v;
    const double bound = cfg.bound_constant * (rep.width + std::sqrt(rep.entropy));

    rep.seeds.resize(static_cast<std::size_t>(cfg.seeds));
    parallel_for(rep.seeds.size(), opts.jobs, [&](std::size_t t) {
        EnsembleConfig ec;
        ec.m = cfg.m;
        ec.n = cfg.n;
        ec.matrix_kind = cfg.matrix_kind;
        ec.noise_sigma = cfg.sigma;
        ec.delta = cfg.delta;
        ec.seed = derive_seed(cfg.seed, "qpe-ensemble", {t});
        const auto ens = draw_ensemble(ec);
        const Quantizer q(cfg.delta);

        auto rng = make_engine(cfg.seed, "qpe-samples", {t});
        std::vector<Vector> as, bs;
        std::vector<std::pair<Vector, Vector>> es;
        for (int i = 0; i < cfg.samples; ++i) {
            as.push_back(detail::sparse_in_ball(cfg.n, cfg.s, rng));
            bs.push_back(detail::sparse_in_ball(cfg.m, cfg.k, rng));
            Vector c = sample_sparse(cfg.n, cfg.s, rng);
            Vector d = sample_sparse(cfg.m, cfg.k, rng);
            const double nrm = std::sqrt(c.squaredNorm() + d.squaredNorm());
            es.emplace_back(c / nrm, d / nrm);
        }

        auto &res = rep.seeds[t];
        res.seed = ec.seed;
        res.bound = bound;
        for (int size : cfg.growth) {
            const auto n = static_cast<std::ptrdiff_t>(size);
            const std::vector<Vector> a(as.begin(), as.begin() + n), b(bs.begin(), bs.begin() + n);
            const std::vector<std::pair<Vector, Vector>> e(es.begin(), es.begin() + n);
            const double stat = qpe_statistic(ens, q, a, b, e);
            if (!res.statistics.empty() && stat < res.statistics.back())
                res.monotone = false;
            res.statistics.push_back(stat);
            res.within_bound = res.within_bound && stat <= bound;
        }
    });
    return rep;
}

inline nlohmann::json qpe_report_to_json(const QpeReport &rep)
{
    nlohmann::json j{{"config", rep.config}, {"width", rep.width}, {"entropy", rep.entropy}};
    auto &seeds = j["seeds"] = nlohmann::json::array();
    for (const auto &s : rep.seeds)
        seeds.push_back({{"ensemble_seed", s.seed},
                         {"statistics", s.statistics},
                         {"bound", s.bound},
                         {"monotone", s.monotone},
                         {"within_bound", s.within_bound}});
    return j;
}

} // namespace qcs
