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

#include "errors.hpp"
#include "generative.hpp"
#include "linalg.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qcs {

// Structure descriptors. Low-rank signals are p x q matrices handled as column-major
// vectors of length p * q.
struct SparsePrior {
    int n = 1;
    int s = 1;
};

struct LowRankPrior {
    int p = 1;
    int q = 1;
    int r = 1;
};

struct GenerativePrior {
    std::shared_ptr<const GenerativeMap> map;
};

enum class NormTag { L1, Nuclear, None };

class PriorModel {
public:
    using Kind = std::variant<SparsePrior, LowRankPrior, GenerativePrior>;

    static PriorModel sparse(int n, int s)
    {
        if (n < 1 || s < 1 || s > n)
            throw std::domain_error("sparse prior requires 1 <= s <= n");
        return PriorModel(SparsePrior{n, s}, NormTag::L1);
    }

    static PriorModel low_rank(int p, int q, int r)
    {
        if (p < 1 || q < 1 || r < 1 || r > std::min(p, q))
            throw std::domain_error("low-rank prior requires 1 <= r <= min(p, q)");
        return PriorModel(LowRankPrior{p, q, r}, NormTag::Nuclear);
    }

    static PriorModel generative(std::shared_ptr<const GenerativeMap> map)
    {
        if (!map)
            throw std::invalid_argument("generative prior requires a map");
        return PriorModel(GenerativePrior{std::move(map)}, NormTag::None);
    }

    const Kind &kind() const { return kind_; }
    NormTag norm_tag() const { return tag_; }

    template <typename T>
    const T *as() const
    {
        return std::get_if<T>(&kind_);
    }

    int dim() const
    {
        return std::visit(
            [](const auto &k) -> int {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, SparsePrior>)
                    return k.n;
                else if constexpr (std::is_same_v<K, LowRankPrior>)
                    return k.p * k.q;
                else
                    return k.map->output_dim();
            },
            kind_);
    }

    // Compatibility constant sup f(x)/||x||_2 over the model subspace: sqrt(s) for
    // s-sparse, sqrt(2r) for rank-r.
    double compatibility() const
    {
        if (const auto *sp = as<SparsePrior>())
            return std::sqrt(static_cast<double>(sp->s));
        if (const auto *lr = as<LowRankPrior>())
            return std::sqrt(2.0 * lr->r);
        throw unsupported_error("compatibility constant undefined for generative priors");
    }

private:
    PriorModel(Kind k, NormTag t) : kind_(std::move(k)), tag_(t) {}

    Kind kind_;
    NormTag tag_;
};

// ---------------------------------------------------------------------------------------------
// Sampling

/// s-sparse vector with support uniform over all size-s subsets and N(0,1) nonzeros.
template <typename Rng>
Vector sample_sparse(int n, int s, Rng &rng)
{
    if (n < 1 || s < 1 || s > n)
        throw std::domain_error("sample_sparse: need 1 <= s <= n");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> support;
    support.reserve(static_cast<std::size_t>(s));
    std::sample(idx.begin(), idx.end(), std::back_inserter(support), s, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x = Vector::Zero(n);
    for (int i : support) {
        double g = 0.0;
        while (g == 0.0)
            g = normal(rng);
        x[i] = g;
    }
    return x;
}

/// U V^T with U (p x r), V (q x r) having orthonormal columns taken from thin SVDs of Gaussian
/// matrices. All nonzero singular values equal 1.
template <typename Rng>
Matrix sample_lowrank(int p, int q, int r, Rng &rng)
{
    if (p < 1 || q < 1 || r < 1 || r > std::min(p, q))
        throw std::domain_error("sample_lowrank: need 1 <= r <= min(p, q)");
    std::normal_distribution<double> normal(0.0, 1.0);
    auto orthonormal = [&](int rows) {
        Matrix g(rows, r);
        for (Eigen::Index i = 0; i < g.size(); ++i)
            g.data()[i] = normal(rng);
        Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU);
        return Matrix(svd.matrixU());
    };
    const Matrix u = orthonormal(p);
    const Matrix v = orthonormal(q);
    return u * v.transpose();
}

// ---------------------------------------------------------------------------------------------
// l1 machinery

inline Vector soft_threshold(const Vector &x, double t)
{
    if (!(t >= 0.0))
        throw std::domain_error("soft_threshold: t must be >= 0");
    return x.unaryExpr([t](double a) {
        const double mag = std::abs(a) - t;
        return mag > 0.0 ? std::copysign(mag, a) : 0.0;
    });
}

/// Euclidean projection onto {z : ||z||_1 <= radius} by the sort-and-threshold rule.
inline Vector project_l1_ball(const Vector &x, double radius)
{
    if (!(radius >= 0.0))
        throw std::domain_error("project_l1_ball: negative radius");
    const double norm1 = x.lpNorm<1>();
    if (norm1 <= radius)
        return x;
    if (radius == 0.0)
        return Vector::Zero(x.size());

    std::vector<double> u(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        u[static_cast<std::size_t>(i)] = std::abs(x[i]);
    std::sort(u.begin(), u.end(), std::greater<>());

    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0)
            theta = candidate;
        else
            break;
    }
    return soft_threshold(x, theta);
}

// Nonnegative singular values are projected on the l1 ball the same way; the projection keeps
// them nonnegative.
inline Vector project_nonneg_l1(const Vector &sv, double radius)
{
    return project_l1_ball(sv, radius);
}

// ---------------------------------------------------------------------------------------------
// Nuclear-norm machinery on column-major vectorised p x q matrices.

namespace detail {

inline Eigen::Map<const Matrix> as_matrix(const Vector &x, int p, int q)
{
    require_shape(x.size() == static_cast<Eigen::Index>(p) * q, "vector length != p * q");
    return Eigen::Map<const Matrix>(x.data(), p, q);
}

template <typename ShrinkFn>
Vector spectral_apply(const Vector &x, int p, int q, ShrinkFn &&shrink)
{
    const Matrix a = as_matrix(x, p, q);
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sv = shrink(Vector(svd.singularValues()));
    const Matrix out = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
    return Eigen::Map<const Vector>(out.data(), out.size());
}

} // namespace detail

inline double nuclear_norm(const Vector &x, int p, int q)
{
    Eigen::JacobiSVD<Matrix> svd(detail::as_matrix(x, p, q));
    return svd.singularValues().sum();
}

inline Vector singular_value_threshold(const Vector &x, int p, int q, double t)
{
    return detail::spectral_apply(x, p, q, [t](const Vector &sv) { return soft_threshold(sv, t); });
}

inline Vector project_nuclear_ball(const Vector &x, int p, int q, double radius)
{
    if (!(radius >= 0.0))
        throw std::domain_error("project_nuclear_ball: negative radius");
    Eigen::JacobiSVD<Matrix> svd(detail::as_matrix(x, p, q), Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues().sum() <= radius)
        return x;
    const Vector shrunk = project_nonneg_l1(svd.singularValues(), radius);
    const Matrix out = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    return Eigen::Map<const Vector>(out.data(), out.size());
}

// ---------------------------------------------------------------------------------------------
// Prior-dispatched operations

/// Structure-promoting norm: l1 for sparse priors, nuclear for low-rank priors.
inline double norm_f(const PriorModel &prior, const Vector &x)
{
    require_shape(x.size() == prior.dim(), "norm_f: dimension mismatch");
    switch (prior.norm_tag()) {
    case NormTag::L1:
        return x.lpNorm<1>();
    case NormTag::Nuclear: {
        const auto &lr = *prior.as<LowRankPrior>();
        return nuclear_norm(x, lr.p, lr.q);
    }
    case NormTag::None:
        break;
    }
    throw unsupported_error("norm_f: generative priors have no structure norm");
}

/// Euclidean projection onto {z : f(z) <= radius}.
inline Vector project_norm_ball(const PriorModel &prior, const Vector &x, double radius)
{
    require_shape(x.size() == prior.dim(), "project_norm_ball: dimension mismatch");
    if (!(radius >= 0.0))
        throw std::domain_error("project_norm_ball: negative radius");
    switch (prior.norm_tag()) {
    case NormTag::L1:
        return project_l1_ball(x, radius);
    case NormTag::Nuclear: {
        const auto &lr = *prior.as<LowRankPrior>();
        return project_nuclear_ball(x, lr.p, lr.q, radius);
    }
    case NormTag::None:
        break;
    }
    throw unsupported_error("project_norm_ball: generative priors have no norm ball");
}

/// prox of t * f: soft thresholding (l1) or singular value thresholding (nuclear).
inline Vector prox_norm(const PriorModel &prior, const Vector &x, double t)
{
    require_shape(x.size() == prior.dim(), "prox_norm: dimension mismatch");
    if (!(t >= 0.0))
        throw std::domain_error("prox_norm: t must be >= 0");
    switch (prior.norm_tag()) {
    case NormTag::L1:
        return soft_threshold(x, t);
    case NormTag::Nuclear: {
        const auto &lr = *prior.as<LowRankPrior>();
        return singular_value_threshold(x, lr.p, lr.q, t);
    }
    case NormTag::None:
        break;
    }
    throw unsupported_error("prox_norm: generative priors have no prox");
}

// ---------------------------------------------------------------------------------------------
// Effectively sparse set B_1(l1_radius) ∩ B_2(l2_radius), used by projected back-projection.

struct L1L2Ball {
    double l1_radius = 1.0;
    double l2_radius = 1.0;

    static L1L2Ball effectively_sparse(int s) { return {std::sqrt(static_cast<double>(s)), 1.0}; }
};

inline Vector project_l2_ball(const Vector &x, double radius)
{
    const double nrm = x.norm();
    return nrm <= radius ? x : Vector(x * (radius / nrm));
}

struct DykstraResult {
    Vector point;
    int iterations = 0;
    bool converged = false;
};

/// Euclidean projection onto an intersection of an l1 ball and an l2 ball by Dykstra's
/// alternating projections (the correction terms make the limit the exact projection).
inline DykstraResult project_l1l2_dykstra(const Vector &x, const L1L2Ball &set, double tol = 1e-9,
                                          int max_iter = 500)
{
    if (!(set.l1_radius >= 0.0) || !(set.l2_radius >= 0.0))
        throw std::domain_error("project_l1l2_dykstra: negative radius");
    DykstraResult res;
    Vector cur = x;
    Vector p = Vector::Zero(x.size());
    Vector q = Vector::Zero(x.size());
    for (int it = 1; it <= max_iter; ++it) {
        const Vector y = project_l1_ball(cur + p, set.l1_radius);
        p = cur + p - y;
        Vector next = project_l2_ball(y + q, set.l2_radius);
        q = y + q - next;
        const double change = (next - cur).norm();
        const double gap = (next - y).norm();
        cur = std::move(next);
        res.iterations = it;
        if (change <= tol && gap <= tol) {
            res.converged = true;
            break;
        }
    }
    res.point = std::move(cur);
    return res;
}

} // namespace qcs
