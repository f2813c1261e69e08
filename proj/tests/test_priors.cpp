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

#include "oracles.hpp"

#include <catch_amalgamated.hpp>
#include <qcs/priors.hpp>
#include <qcs/rng.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <random>

using namespace qcs;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

Vector flatten(const Matrix &m)
{
    return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix symmetric(int d, Engine &rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a.data()[i] = normal(rng);
    return 0.5 * (a + a.transpose());
}

int nnz(const Vector &x)
{
    return static_cast<int>((x.array() != 0.0).count());
}

} // namespace

TEST_CASE("priors - Sparse sampling")
{
    auto rng = make_engine(1, "priors-sparse", {});
    CHECK(nnz(sample_sparse(5, 5, rng)) == 5);
    for (int t = 0; t < 100; ++t)
        CHECK(nnz(sample_sparse(3, 1, rng)) == 1);

    std::vector<int> hits(6, 0);
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
        const Vector x = sample_sparse(6, 2, rng);
        for (int i = 0; i < 6; ++i)
            hits[static_cast<std::size_t>(i)] += x[i] != 0.0;
    }
    for (int h : hits)
        CHECK(std::abs(static_cast<double>(h) / draws - 2.0 / 6.0) <= 0.01);

    CHECK_THROWS_AS(sample_sparse(3, 4, rng), std::domain_error);
    CHECK_THROWS_AS(sample_sparse(3, 0, rng), std::domain_error);
}

TEST_CASE("priors - Low-rank sampling")
{
    auto rng = make_engine(2, "priors-lowrank", {});
    const Matrix one = sample_lowrank(1, 1, 1, rng);
    CHECK(std::abs(one.norm() - 1.0) <= 1e-12);

    const Matrix x = sample_lowrank(6, 5, 2, rng);
    Eigen::JacobiSVD<Matrix> svd(x);
    const Vector sv = svd.singularValues();
    CHECK(std::abs(sv[0] - 1.0) <= 1e-10);
    CHECK(std::abs(sv[1] - 1.0) <= 1e-10);
    for (int i = 2; i < 5; ++i)
        CHECK(sv[i] <= 1e-10);

    for (int r = 1; r <= 4; ++r)
        CHECK(std::abs(sample_lowrank(8, 7, r, rng).norm() - std::sqrt(r)) <= 1e-10);
}

TEST_CASE("priors - Structure norms")
{
    const auto l1 = PriorModel::sparse(3, 1);
    CHECK(norm_f(l1, vec({1, -2, 0})) == 3.0);

    const auto nuc = PriorModel::low_rank(2, 2, 1);
    CHECK(std::abs(norm_f(nuc, vec({1, 0, 0, 1})) - 2.0) <= 1e-12);

    auto rng = make_engine(3, "priors-nuclear", {});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        Matrix a(4, 3);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            a.data()[i] = normal(rng);
        CHECK(std::abs(nuclear_norm(flatten(a), 4, 3) - oracle::nuclear_norm(a)) <= 1e-10);
    }

    CHECK_THROWS_AS(norm_f(l1, Vector::Zero(4)), shape_error);
}

TEST_CASE("priors - Compatibility constants")
{
    CHECK(PriorModel::sparse(10, 4).compatibility() == 2.0);
    CHECK(std::abs(PriorModel::low_rank(5, 5, 2).compatibility() - 2.0) <= 1e-15);
}

TEST_CASE("priors - l1 ball projection")
{
    const auto prior = PriorModel::sparse(2, 1);
    CHECK(project_norm_ball(prior, vec({0.2, -0.3}), 1.0) == vec({0.2, -0.3}));
    CHECK(project_norm_ball(prior, vec({3, 0}), 1.0) == vec({1, 0}));
    CHECK(project_l1_ball(vec({2, -2}), 0.0).isZero(0.0));
    CHECK_THROWS_AS(project_l1_ball(vec({1}), -1.0), std::domain_error);

    auto rng = make_engine(4, "priors-l1proj", {});
    std::normal_distribution<double> normal(0.0, 1.5);
    std::uniform_real_distribution<double> radius(0.05, 3.0);
    std::uniform_int_distribution<int> dim(1, 5);
    for (int t = 0; t < 1000; ++t) {
        Vector x(dim(rng));
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x[i] = normal(rng);
        const double r = radius(rng);
        CHECK((project_l1_ball(x, r) - oracle::project_l1(x, r)).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("priors - l1 prox")
{
    const auto prior = PriorModel::sparse(2, 1);
    CHECK(prox_norm(prior, vec({2, -0.5}), 1.0) == vec({1, 0}));
    CHECK(prox_norm(prior, vec({2, -0.5}), 0.0) == vec({2, -0.5}));
    CHECK_THROWS_AS(soft_threshold(vec({1}), -0.1), std::domain_error);

    auto rng = make_engine(5, "priors-prox", {});
    std::normal_distribution<double> normal(0.0, 2.0);
    std::uniform_real_distribution<double> thresh(0.0, 2.0);
    for (int t = 0; t < 1000; ++t) {
        Vector x(4);
        for (Eigen::Index i = 0; i < 4; ++i)
            x[i] = normal(rng);
        const double th = thresh(rng);
        CHECK((soft_threshold(x, th) - oracle::prox_l1(x, th)).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("priors - Nuclear prox and projection")
{
    const auto prior = PriorModel::low_rank(3, 3, 1);
    auto rng = make_engine(6, "priors-svt", {});
    for (int t = 0; t < 50; ++t) {
        const Matrix a = symmetric(3, rng);
        const Matrix ref = oracle::symmetric_svt(a, 0.5);
        CHECK((prox_norm(prior, flatten(a), 0.5) - flatten(ref)).cwiseAbs().maxCoeff() <= 1e-8);
    }

    const Matrix a = symmetric(3, rng);
    const double nuc = nuclear_norm(flatten(a), 3, 3);
    CHECK(project_norm_ball(prior, flatten(a), nuc + 1.0) == flatten(a));
    const Vector p = project_norm_ball(prior, flatten(a), 0.5 * nuc);
    CHECK(std::abs(nuclear_norm(p, 3, 3) - 0.5 * nuc) <= 1e-9);

    // A rank-one input is projected by shrinking its single singular value.
    Vector u(3);
    u << 1, 2, 2;
    const Matrix rank_one = u * u.transpose(); // singular value 9
    const Vector shrunk = project_nuclear_ball(flatten(rank_one), 3, 3, 3.0);
    CHECK((shrunk - flatten(rank_one) / 3.0).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("priors - Generative priors have no norm")
{
    auto rng = make_engine(7, "priors-gen", {});
    const auto map = std::make_shared<const GenerativeMap>(random_generative_map(2, 4, 3, 1.0, rng));
    const auto prior = PriorModel::generative(map);
    CHECK(prior.dim() == 3);
    CHECK_THROWS_AS(norm_f(prior, Vector::Zero(3)), unsupported_error);
    CHECK_THROWS_AS(prox_norm(prior, Vector::Zero(3), 1.0), unsupported_error);
    CHECK_THROWS_AS(project_norm_ball(prior, Vector::Zero(3), 1.0), unsupported_error);
    CHECK_THROWS_AS(prior.compatibility(), unsupported_error);
}

TEST_CASE("priors - Intersection of l1 and l2 balls")
{
    auto rng = make_engine(8, "priors-dykstra", {});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.1, 3.0);
    for (int t = 0; t < 500; ++t) {
        Vector x(5);
        for (Eigen::Index i = 0; i < 5; ++i)
            x[i] = normal(rng);
        x *= scale(rng);
        const auto res = project_l1l2_dykstra(x, {1.0, 1.0});
        CHECK(res.converged);
        CHECK((res.point - oracle::project_l1_l2(x, 1.0, 1.0)).cwiseAbs().maxCoeff() <= 1e-5);
    }

    // Only the l2 constraint is active when the l1 radius is at least sqrt(n).
    Vector x(4);
    x << 3, -1, 2, 0.5;
    const auto res = project_l1l2_dykstra(x, {2.0, 1.0});
    CHECK((res.point - x / x.norm()).cwiseAbs().maxCoeff() <= 1e-9);
}
