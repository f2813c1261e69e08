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
#include "linalg.hpp"
#include "quantizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qcs {

// Theoretical overlays. Every bound here is evaluated with its absolute constant set to 1, so the
// values describe the shape of a curve, not its level.

/// Covering-entropy bound for s-sparse vectors in the unit ball: s log(9n / (eps s)).
/// Returns 0 (with a warning) when the log would be negative.
inline double entropy_sparse(int n, int s, double eps)
{
    if (!(eps > 0.0) || s < 1 || s > n)
        throw std::domain_error("entropy_sparse: need eps > 0 and 1 <= s <= n");
    const double h = s * std::log(9.0 * n / (eps * s));
    if (h < 0.0) {
        std::clog << "qcs: entropy_sparse: covering radius too large, returning 0\n";
        return 0.0;
    }
    return h;
}

/// Covering-entropy bound for rank-r p x q matrices in the unit Frobenius ball: 2r(p+q) log(9/eps).
inline double entropy_lowrank(int p, int q, int r, double eps)
{
    if (!(eps > 0.0) || r < 1 || r > std::min(p, q))
        throw std::domain_error("entropy_lowrank: need eps > 0 and 1 <= r <= min(p, q)");
    const double h = 2.0 * r * (p + q) * std::log(9.0 / eps);
    if (h < 0.0) {
        std::clog << "qcs: entropy_lowrank: covering radius too large, returning 0\n";
        return 0.0;
    }
    return h;
}

struct WidthEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int trials = 0;
};

namespace detail {

// ||top-s(|g|)||_2^2, the exact sup of <g, x> over s-sparse unit x, squared.
inline double top_s_sq(std::vector<double> &mag, int s)
{
    auto mid = mag.begin() + s;
    if (s < static_cast<int>(mag.size()))
        std::nth_element(mag.begin(), mid - 1, mag.end(), std::greater<>());
    double acc = 0.0;
    for (auto it = mag.begin(); it != mid; ++it)
        acc += *it * *it;
    return acc;
}

inline WidthEstimate summarize(const std::vector<double> &samples)
{
    WidthEstimate w;
    w.trials = static_cast<int>(samples.size());
    double sum = 0.0, sum2 = 0.0;
    for (double v : samples) {
        sum += v;
        sum2 += v * v;
    }
    const double n = static_cast<double>(samples.size());
    w.mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum2 - n * w.mean * w.mean) / (n - 1)) : 0.0;
    w.std_error = std::sqrt(var / n);
    return w;
}

} // namespace detail

/// Monte-Carlo Gaussian width of the s-sparse unit vectors: mean of ||top-s(|g|)||_2 over
/// g ~ N(0, I_n).
template <typename Rng>
WidthEstimate width_sparse_cone_mc(int n, int s, int trials, Rng &rng)
{
    if (trials < 1 || s < 1 || s > n)
        throw std::domain_error("width_sparse_cone_mc: need trials >= 1 and 1 <= s <= n");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> mag(static_cast<std::size_t>(n));
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        for (auto &v : mag)
            v = std::abs(normal(rng));
        samples.push_back(std::sqrt(detail::top_s_sq(mag, s)));
    }
    return detail::summarize(samples);
}

/// Monte-Carlo Gaussian width of the unit-norm pairs (c, d) with c s-sparse in R^n and
/// d k-sparse in R^m: the per-draw sup is sqrt(||top-s(g1)||^2 + ||top-k(g2)||^2).
template <typename Rng>
WidthEstimate width_sparse_pair_mc(int n, int s, int m, int k, int trials, Rng &rng)
{
    if (trials < 1 || s < 1 || s > n || k < 1 || k > m)
        throw std::domain_error("width_sparse_pair_mc: bad sizes");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> gx(static_cast<std::size_t>(n)), gv(static_cast<std::size_t>(m));
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        for (auto &v : gx)
            v = std::abs(normal(rng));
        for (auto &v : gv)
            v = std::abs(normal(rng));
        samples.push_back(std::sqrt(detail::top_s_sq(gx, s) + detail::top_s_sq(gv, k)));
    }
    return detail::summarize(samples);
}

enum class BoundSetting { SparseSparse, LowRankSparse };

NLOHMANN_JSON_SERIALIZE_ENUM(BoundSetting, {{BoundSetting::SparseSparse, "sparse-sparse"},
                                            {BoundSetting::LowRankSparse, "lowrank-sparse"}})

struct BoundParams {
    int m = 1;
    int n = 1;
    int s = 1;
    int k = 1;
    int p = 0;
    int q = 0;
    int r = 0;
    double delta = 0.0;
    double sigma = 0.0;
};

inline void to_json(nlohmann::json &j, const BoundParams &b)
{
    j = nlohmann::json{{"m", b.m}, {"n", b.n}, {"s", b.s},         {"k", b.k},        {"p", b.p},
                       {"q", b.q}, {"r", b.r}, {"delta", b.delta}, {"sigma", b.sigma}};
}

namespace detail {

inline double clog_e(double a)
{
    return std::log(std::max(a, std::exp(1.0)));
}

} // namespace detail

/// Uniform error bound for the constrained program, absolute constant 1, log arguments clamped
/// at e:
///   sparse/sparse:   [sigma sqrt(s log(en/s) + k log(em/k))
///                     + delta sqrt(s log(n m^1.5 / (s^2.5 delta)) + k log(m^2.5 / (k^2.5 delta)))] / sqrt(m)
///   low-rank/sparse: [sigma sqrt(r(p+q) + k log(em/k))
///                     + delta sqrt(r(p+q) log(m^1.5 / (delta (r(p+q))^1.5)) + k log(m^2.5 / (k^2.5 delta)))] / sqrt(m)
inline double predicted_uniform_error(BoundSetting setting, const BoundParams &b)
{
    using detail::clog_e;
    const double m = b.m, k = b.k, delta = b.delta;
    if (b.m < 1 || b.k < 1 || b.k > b.m || !(delta >= 0.0) || !(b.sigma >= 0.0))
        throw std::domain_error("predicted_uniform_error: invalid parameters");
    const double corr_noise = k * clog_e(std::exp(1.0) * m / k);
    const double corr_quant = delta > 0.0 ? k * clog_e(std::pow(m, 2.5) / (std::pow(k, 2.5) * delta)) : 0.0;
    double noise_part = 0.0, quant_part = 0.0;
    if (setting == BoundSetting::SparseSparse) {
        if (b.s < 1 || b.s > b.n)
            throw std::domain_error("predicted_uniform_error: need 1 <= s <= n");
        const double n = b.n, s = b.s;
        noise_part = s * clog_e(std::exp(1.0) * n / s) + corr_noise;
        quant_part = delta > 0.0 ? s * clog_e(n * std::pow(m, 1.5) / (std::pow(s, 2.5) * delta)) + corr_quant : 0.0;
    } else {
        if (b.r < 1 || b.r > std::min(b.p, b.q))
            throw std::domain_error("predicted_uniform_error: need 1 <= r <= min(p, q)");
        const double dof = static_cast<double>(b.r) * (b.p + b.q);
        noise_part = dof + corr_noise;
        quant_part = delta > 0.0 ? dof * clog_e(std::pow(m, 1.5) / (delta * std::pow(dof, 1.5))) + corr_quant : 0.0;
    }
    const double quant = delta > 0.0 ? delta * std::sqrt(quant_part) : 0.0;
    return (b.sigma * std::sqrt(noise_part) + quant) / std::sqrt(m);
}

/// Overlay for one sweep point: covering entropies at the default radii
/// rho1 = c delta (s/m)^1.5 (or c delta (r(p+q)/m)^1.5), rho2 = c delta (k/m)^1.5, descent-cone
/// width bounds, zeta = 4 delta (H_x + H_v) / m and the predicted uniform error.
struct BoundReport {
    BoundSetting setting = BoundSetting::SparseSparse;
    BoundParams params;
    double rho1 = 0.0;
    double rho2 = 0.0;
    double entropy_x = 0.0;
    double entropy_v = 0.0;
    double width_x = 0.0;
    double width_v = 0.0;
    double zeta = 0.0;
    double predicted_error = 0.0;
};

inline void to_json(nlohmann::json &j, const BoundReport &b)
{
    j = nlohmann::json{{"setting", b.setting},     {"params", b.params},       {"rho1", b.rho1},
                       {"rho2", b.rho2},           {"entropy_x", b.entropy_x}, {"entropy_v", b.entropy_v},
                       {"width_x", b.width_x},     {"width_v", b.width_v},     {"zeta", b.zeta},
                       {"predicted_error", b.predicted_error}, {"label", "shape only"}};
}

inline BoundReport make_bound_report(BoundSetting setting, const BoundParams &b, double rho_constant = 0.1)
{
    BoundReport rep;
    rep.setting = setting;
    rep.params = b;
    const double m = b.m;
    // With delta = 0 the radii are evaluated at delta = 1 so the entropies stay finite;
    // zeta is 0 either way.
    const double d_eff = b.delta > 0.0 ? b.delta : 1.0;
    rep.rho2 = rho_constant * d_eff * std::pow(b.k / m, 1.5);
    rep.entropy_v = entropy_sparse(b.m, b.k, rep.rho2);
    rep.width_v = 2.0 * std::sqrt(b.k * std::log(std::exp(1.0) * m / b.k));
    if (setting == BoundSetting::SparseSparse) {
        rep.rho1 = rho_constant * d_eff * std::pow(b.s / m, 1.5);
        rep.entropy_x = entropy_sparse(b.n, b.s, rep.rho1);
        rep.width_x = 2.0 * std::sqrt(b.s * std::log(std::exp(1.0) * b.n / b.s));
    } else {
        const double dof = static_cast<double>(b.r) * (b.p + b.q);
        rep.rho1 = rho_constant * d_eff * std::pow(dof / m, 1.5);
        rep.entropy_x = entropy_lowrank(b.p, b.q, b.r, rep.rho1);
        rep.width_x = std::sqrt(3.0 * dof);
    }
    rep.zeta = 4.0 * b.delta * (rep.entropy_x + rep.entropy_v) / m;
    rep.predicted_error = predicted_uniform_error(setting, b);
    return rep;
}

/// Empirical quantized-product-embedding statistic
///   max_{a, b, (c, d)} |<xi_{a,b}, phi c + sqrt(m) d>| / (delta sqrt(m)),
/// where xi_{a,b} is the quantization noise of observe(e, q, a, b).
inline double qpe_statistic(const SensingEnsemble &e, const Quantizer &q, const std::vector<Vector> &a_samples,
                            const std::vector<Vector> &b_samples,
                            const std::vector<std::pair<Vector, Vector>> &e_samples)
{
    if (q.is_unquantized())
        throw std::domain_error("qpe_statistic: undefined without quantization");
    if (a_samples.empty() || b_samples.empty() || e_samples.empty())
        throw std::invalid_argument("qpe_statistic: sample lists must be nonempty");
    const Eigen::Index m = e.m();
    const double sqrt_m = std::sqrt(static_cast<double>(m));

    Matrix w(m, static_cast<Eigen::Index>(e_samples.size()));
    for (std::size_t j = 0; j < e_samples.size(); ++j) {
        const auto &[c, d] = e_samples[j];
        require_shape(c.size() == e.n() && d.size() == m, "qpe_statistic: (c, d) dimension mismatch");
        w.col(static_cast<Eigen::Index>(j)) = e.phi * c + sqrt_m * d;
    }

    Matrix xi(m, static_cast<Eigen::Index>(b_samples.size()));
    double best = 0.0;
    for (const auto &a : a_samples) {
        require_shape(a.size() == e.n(), "qpe_statistic: a dimension mismatch");
        const Vector base = e.phi * a + e.eps;
        for (std::size_t i = 0; i < b_samples.size(); ++i) {
            require_shape(b_samples[i].size() == m, "qpe_statistic: b dimension mismatch");
            const Vector y = base + sqrt_m * b_samples[i];
            xi.col(static_cast<Eigen::Index>(i)) = dithered_quantize(q, y, e.tau).xi;
        }
        const Matrix prod = w.transpose() * xi;
        best = std::max(best, prod.cwiseAbs().maxCoeff());
    }
    return best / (q.delta() * sqrt_m);
}

} // namespace qcs
