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
#include <qcs/ensemble.hpp>

#include <cmath>
#include <sstream>

using namespace qcs;
using Catch::Approx;

namespace {

EnsembleConfig config(int m, int n, MatrixKind kind = MatrixKind::Gaussian, double sigma = 0.0,
                      double delta = 0.1, std::uint64_t seed = 11)
{
    EnsembleConfig c;
    c.m = m;
    c.n = n;
    c.matrix_kind = kind;
    c.noise_sigma = sigma;
    c.delta = delta;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("ensemble - Rademacher entries")
{
    const auto e = draw_ensemble(config(4, 3, MatrixKind::Rademacher));
    for (Eigen::Index i = 0; i < e.phi.size(); ++i)
        CHECK(std::abs(e.phi.data()[i]) == 1.0);
}

TEST_CASE("ensemble - Zero resolution gives zero dither")
{
    const auto e = draw_ensemble(config(20, 5, MatrixKind::Gaussian, 0.1, 0.0));
    CHECK(e.tau.isZero(0.0));
    CHECK_FALSE(e.eps.isZero(0.0));
}

TEST_CASE("ensemble - Dither and noise ranges")
{
    const auto e = draw_ensemble(config(2000, 2, MatrixKind::Gaussian, 0.0, 0.3));
    CHECK(e.tau.cwiseAbs().maxCoeff() <= 0.15);
    CHECK(e.eps.isZero(0.0));
}

TEST_CASE("ensemble - Gaussian entry moments")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto e = draw_ensemble(config(2000, 50, MatrixKind::Gaussian, 0.0, 0.1, seed));
        const double count = static_cast<double>(e.phi.size());
        const double mean = e.phi.sum() / count;
        const double var = (e.phi.array() - mean).square().sum() / (count - 1);
        CHECK(std::abs(mean) <= 4.0 / std::sqrt(count));
        CHECK(std::abs(var - 1.0) <= 0.05);
    }
}

TEST_CASE("ensemble - Config validation")
{
    CHECK_THROWS_AS(draw_ensemble(config(0, 3)), config_error);
    CHECK_THROWS_AS(draw_ensemble(config(3, 0)), config_error);
    CHECK_THROWS_AS(draw_ensemble(config(3, 3, MatrixKind::Gaussian, -1.0)), config_error);
    CHECK_THROWS_AS(draw_ensemble(config(3, 3, MatrixKind::Gaussian, 0.0, -0.1)), config_error);
}

TEST_CASE("ensemble - Measurement")
{
    auto e = draw_ensemble(config(5, 3, MatrixKind::Gaussian, 0.2));
    CHECK(measure(e, Vector::Zero(3), Vector::Zero(5)) == e.eps);

    Vector x(3), v(5);
    x << 0.5, -1.0, 2.0;
    v << 0.1, 0.0, -0.3, 0.0, 0.7;
    const Vector expected = oracle::matvec(e.phi, x) + std::sqrt(5.0) * v + e.eps;
    CHECK((measure(e, x, v) - expected).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK_THROWS_AS(measure(e, Vector::Zero(2), Vector::Zero(5)), shape_error);
    CHECK_THROWS_AS(measure(e, Vector::Zero(3), Vector::Zero(4)), shape_error);
}

TEST_CASE("ensemble - Identity design picks a column")
{
    auto e = draw_ensemble(config(4, 4, MatrixKind::Gaussian, 0.0));
    const Matrix phi = e.phi;
    Vector e1 = Vector::Zero(4);
    e1[0] = 1.0;
    CHECK(measure(e, e1, Vector::Zero(4)) == Vector(phi.col(0)));
}

TEST_CASE("ensemble - Observation")
{
    const auto e = draw_ensemble(config(8, 4, MatrixKind::Gaussian, 0.05, 0.1));
    Vector x = Vector::Zero(4);
    x[2] = 1.0;
    const Vector v = Vector::Zero(8);

    const auto a = observe(e, Quantizer(0.1), x, v);
    const auto b = observe(e, Quantizer(0.1), x, v);
    CHECK(a.y_dot == b.y_dot);
    CHECK(a.xi.cwiseAbs().maxCoeff() <= 0.1);

    CHECK_THROWS_AS(observe(e, Quantizer(0.2), x, v), config_error);

    const auto eu = draw_ensemble(config(8, 4, MatrixKind::Gaussian, 0.05, 0.0));
    const auto u = observe(eu, Quantizer::unquantized(), x, v);
    CHECK(u.y_dot == u.y_clean);
    CHECK(u.xi.isZero(0.0));
}

TEST_CASE("ensemble - Determinism and independence of streams")
{
    const auto a = draw_ensemble(config(30, 10, MatrixKind::Gaussian, 0.1, 0.1, 5));
    const auto b = draw_ensemble(config(30, 10, MatrixKind::Gaussian, 0.1, 0.1, 5));
    CHECK(a.fingerprint() == b.fingerprint());

    // Changing the noise level does not move the matrix or the dither.
    const auto c = draw_ensemble(config(30, 10, MatrixKind::Gaussian, 0.2, 0.1, 5));
    CHECK(a.phi == c.phi);
    CHECK(a.tau == c.tau);
    CHECK(a.fingerprint() != c.fingerprint());

    const auto d = draw_ensemble(config(30, 10, MatrixKind::Gaussian, 0.1, 0.1, 6));
    CHECK(a.fingerprint() != d.fingerprint());
}

TEST_CASE("ensemble - Text round trip")
{
    const auto e = draw_ensemble(config(6, 3, MatrixKind::Gaussian, 0.1, 0.2));
    std::stringstream ss;
    write_ensemble(ss, e);
    const auto back = read_ensemble(ss);
    CHECK(back.fingerprint() == e.fingerprint());
    CHECK(back.config.delta == e.config.delta);

    std::stringstream bad("{\"m\": 2}\n");
    CHECK_THROWS(read_ensemble(bad));
}
