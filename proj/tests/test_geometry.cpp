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

#include <catch_amalgamated.hpp>
#include <qcs/ensemble.hpp>
#include <qcs/geometry.hpp>
#include <qcs/priors.hpp>
#include <qcs/rng.hpp>

#include <cmath>
#include <random>

using namespace qcs;

namespace {

BoundParams sparse_params(int m, double delta, double sigma)
{
    BoundParams b;
    b.m = m;
    b.n = 256;
    b.s = 2;
    b.k = 2;
    b.delta = delta;
    b.sigma = sigma;
    return b;
}

SensingEnsemble ensemble(int m, int n, double delta, std::uint64_t seed)
{
    EnsembleConfig c;
    c.m = m;
    c.n = n;
    c.delta = delta;
    c.noise_sigma = 0.01;
    c.seed = seed;
    return draw_ensemble(c);
}

} // namespace

TEST_CASE("geometry - Sparse entropy")
{
    CHECK(std::abs(entropy_sparse(9, 1, 9.0) - std::log(9.0)) <= 1e-15);
    CHECK(std::abs(entropy_sparse(256, 2, 0.1) - 18.703679868499764) <= 1e-12);
    CHECK(entropy_sparse(4, 4, 9.0) == 0.0);
    CHECK(entropy_sparse(4, 4, 20.0) == 0.0);
    CHECK_THROWS_AS(entropy_sparse(4, 5, 0.1), std::domain_error);
    CHECK_THROWS_AS(entropy_sparse(4, 2, 0.0), std::domain_error);
}

TEST_CASE("geometry - Low-rank entropy")
{
    CHECK(std::abs(entropy_lowrank(16, 16, 1, 0.1) - 64.0 * std::log(90.0)) <= 1e-12);
    CHECK(entropy_lowrank(3, 3, 1, 9.0) == 0.0);
    CHECK_THROWS_AS(entropy_lowrank(3, 3, 4, 0.1), std::domain_error);
}

TEST_CASE("geometry - Width of the full sphere")
{
    auto rng = make_engine(1, "width-full", {});
    for (int n : {16, 64, 200}) {
        const auto w = width_sparse_cone_mc(n, n, 4000, rng);
        CHECK(w.mean <= std::sqrt(static_cast<double>(n)));
        CHECK(w.mean >= std::sqrt(static_cast<double>(n)) - 1.0);
    }
}

TEST_CASE("geometry - Width of sparse vectors")
{
    auto rng = make_engine(2, "width-sparse", {});
    const auto w = width_sparse_cone_mc(100, 5, 10000, rng);
    const double ref = std::sqrt(5.0 * std::log(std::exp(1.0) * 100.0 / 5.0));
    CHECK(w.mean >= 0.5 * ref);
    CHECK(w.mean <= 2.0 * ref);
    CHECK(w.std_error <= 2.0 * w.mean / std::sqrt(10000.0));
    CHECK(w.trials == 10000);
}

TEST_CASE("geometry - Width of one-sparse vectors is the expected maximum")
{
    const int n = 10000, trials = 1000;
    auto rng = make_engine(3, "width-one", {});
    const auto w = width_sparse_cone_mc(n, 1, trials, rng);

    auto sim = make_engine(4, "width-one-direct", {});
    std::normal_distribution<double> normal(0.0, 1.0);
    double acc = 0.0;
    for (int t = 0; t < trials; ++t) {
        double best = 0.0;
        for (int i = 0; i < n; ++i)
            best = std::max(best, std::abs(normal(sim)));
        acc += best;
    }
    const double direct = acc / trials;
    CHECK(std::abs(w.mean - direct) <= 0.1 * direct);
    const double asymptotic = std::sqrt(2.0 * std::log(static_cast<double>(n)));
    CHECK(w.mean >= 0.8 * asymptotic);
    CHECK(w.mean <= 1.2 * asymptotic);
}

TEST_CASE("geometry - Width estimates are reproducible")
{
    auto a = make_engine(5, "width-repro", {});
    auto b = make_engine(5, "width-repro", {});
    CHECK(width_sparse_pair_mc(50, 3, 40, 2, 200, a).mean == width_sparse_pair_mc(50, 3, 40, 2, 200, b).mean);
    CHECK_THROWS_AS(width_sparse_cone_mc(5, 6, 10, a), std::domain_error);
}

TEST_CASE("geometry - Predicted error")
{
    CHECK(predicted_uniform_error(BoundSetting::SparseSparse, sparse_params(400, 0.0, 0.0)) == 0.0);
    CHECK(std::abs(predicted_uniform_error(BoundSetting::SparseSparse, sparse_params(400, 0.1, 0.0)) -
                   0.039147458356897102) <= 1e-14);

    BoundParams lr;
    lr.m = 600;
    lr.p = 16;
    lr.q = 16;
    lr.r = 1;
    lr.k = 5;
    lr.delta = 0.1;
    lr.sigma = 0.02;
    CHECK(std::abs(predicted_uniform_error(BoundSetting::LowRankSparse, lr) - 0.075383022257918179) <= 1e-14);

    for (double delta : {0.05, 0.1, 0.2})
        for (double sigma : {0.0, 0.02}) {
            for (int m : {100, 400, 1000}) {
                const double a = predicted_uniform_error(BoundSetting::SparseSparse, sparse_params(m, delta, sigma));
                const double b = predicted_uniform_error(BoundSetting::SparseSparse, sparse_params(4 * m, delta, sigma));
                CHECK(b / a >= 0.5);
                CHECK(b / a < 0.6);
            }
        }

    CHECK_THROWS_AS(predicted_uniform_error(BoundSetting::SparseSparse, sparse_params(1, 0.1, 0.0)), std::domain_error);
}

TEST_CASE("geometry - Bound report")
{
    const auto rep = make_bound_report(BoundSetting::SparseSparse, sparse_params(400, 0.1, 0.0));
    CHECK(std::abs(rep.rho1 - 0.1 * 0.1 * std::pow(2.0 / 400.0, 1.5)) <= 1e-18);
    CHECK(rep.rho2 == rep.rho1);
    CHECK(rep.entropy_x == entropy_sparse(256, 2, rep.rho1));
    CHECK(rep.entropy_v == entropy_sparse(400, 2, rep.rho2));
    CHECK(std::abs(rep.zeta - 4.0 * 0.1 * (rep.entropy_x + rep.entropy_v) / 400.0) <= 1e-15);
    CHECK(std::abs(rep.width_x - 2.0 * std::sqrt(2.0 * std::log(std::exp(1.0) * 128.0))) <= 1e-12);

    const nlohmann::json j = rep;
    CHECK(j.at("label") == "shape only");
    CHECK(j.at("setting") == "sparse-sparse");

    const auto zero = make_bound_report(BoundSetting::SparseSparse, sparse_params(400, 0.0, 0.0));
    CHECK(zero.zeta == 0.0);
    CHECK(std::isfinite(zero.entropy_x));
}

TEST_CASE("geometry - Product embedding statistic")
{
    const auto e = ensemble(40, 10, 0.2, 1);
    const Quantizer q(0.2);
    auto rng = make_engine(6, "qpe-unit", {});
    const Vector a = sample_sparse(10, 2, rng), b = sample_sparse(40, 2, rng);
    Vector c = sample_sparse(10, 2, rng), d = sample_sparse(40, 2, rng);
    const double nrm = std::sqrt(c.squaredNorm() + d.squaredNorm());
    c /= nrm;
    d /= nrm;

    const std::vector<std::pair<Vector, Vector>> zeros{{Vector::Zero(10), Vector::Zero(40)}};
    CHECK(qpe_statistic(e, q, {a}, {b}, zeros) == 0.0);

    const Vector xi = observe(e, q, a, b).xi;
    const double direct = std::abs(xi.dot(e.phi * c + std::sqrt(40.0) * d)) / (0.2 * std::sqrt(40.0));
    CHECK(std::abs(qpe_statistic(e, q, {a}, {b}, {{c, d}}) - direct) <= 1e-12);

    CHECK_THROWS_AS(qpe_statistic(e, Quantizer::unquantized(), {a}, {b}, {{c, d}}), std::domain_error);
    CHECK_THROWS_AS(qpe_statistic(e, q, {}, {b}, {{c, d}}), std::invalid_argument);
}

TEST_CASE("geometry - Product embedding statistic grows with the sample lists")
{
    const auto e = ensemble(64, 16, 0.2, 2);
    const Quantizer q(0.2);
    auto rng = make_engine(7, "qpe-grow", {});
    std::vector<Vector> as, bs;
    std::vector<std::pair<Vector, Vector>> es;
    double last = 0.0;
    for (int i = 0; i < 12; ++i) {
        as.push_back(sample_sparse(16, 2, rng));
        bs.push_back(sample_sparse(64, 2, rng));
        Vector c = sample_sparse(16, 2, rng), d = sample_sparse(64, 2, rng);
        const double nrm = std::sqrt(c.squaredNorm() + d.squaredNorm());
        es.emplace_back(c / nrm, d / nrm);
        const double stat = qpe_statistic(e, q, as, bs, es);
        CHECK(stat >= last);
        last = stat;
    }
}
