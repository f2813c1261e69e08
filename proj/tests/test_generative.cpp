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
#include <qcs/generative.hpp>
#include <qcs/rng.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <random>

using namespace qcs;

namespace {

Matrix gaussian(int rows, int cols, Engine &rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a.data()[i] = normal(rng);
    return a;
}

Vector in_ball(int dim, double radius, Engine &rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector z(dim);
    for (int i = 0; i < dim; ++i)
        z[i] = normal(rng);
    return z * (radius * unit(rng) / z.norm());
}

GenerativeMap linear_map(const Matrix &w, double radius = 10.0)
{
    return GenerativeMap({{w, Vector::Zero(w.rows())}}, radius);
}

} // namespace

TEST_CASE("generative - Zero weights")
{
    GenerativeMap g({{Matrix::Zero(5, 2), Vector::Zero(5)}, {Matrix::Zero(3, 5), Vector::Zero(3)}}, 1.0);
    auto rng = make_engine(1, "gen-zero", {});
    for (int t = 0; t < 10; ++t)
        CHECK(g.forward(in_ball(2, 1.0, rng)).isZero(0.0));
    CHECK(g.lipschitz_bound() == 0.0);
}

TEST_CASE("generative - Single linear layer")
{
    auto rng = make_engine(2, "gen-linear", {});
    const Matrix w = gaussian(6, 3, rng);
    const auto g = linear_map(w);
    const Vector z = in_ball(3, 1.0, rng);
    CHECK((g.forward(z) - w * z).cwiseAbs().maxCoeff() <= 1e-14);

    Vector c(6);
    for (int i = 0; i < 6; ++i)
        c[i] = 0.5 * i - 1.0;
    CHECK((g.backward(z, c) - w.transpose() * c).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(g.backward(z, Vector::Zero(6)).isZero(0.0));

    Eigen::JacobiSVD<Matrix> svd(w);
    CHECK(std::abs(g.lipschitz_bound() - svd.singularValues()[0]) <= 1e-9);
}

TEST_CASE("generative - Lipschitz bound holds on random pairs")
{
    auto rng = make_engine(3, "gen-lipschitz", {});
    const auto g = random_generative_map(2, 16, 30, 1.0, rng);
    for (int t = 0; t < 1000; ++t) {
        const Vector a = in_ball(2, 1.0, rng), b = in_ball(2, 1.0, rng);
        CHECK((g.forward(a) - g.forward(b)).norm() <= g.lipschitz_bound() * (a - b).norm() * (1.0 + 1e-9));
    }
}

TEST_CASE("generative - Backward agrees with central differences")
{
    auto rng = make_engine(4, "gen-fd", {});
    const auto g = random_generative_map(3, 12, 8, 2.0, rng);
    const double h = 1e-5;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const Vector z = in_ball(3, 1.0, rng);
        Vector c(8), dir(3);
        for (int i = 0; i < 8; ++i)
            c[i] = normal(rng);
        for (int i = 0; i < 3; ++i)
            dir[i] = normal(rng);
        const double fd = (c.dot(g.forward(z + h * dir)) - c.dot(g.forward(z - h * dir))) / (2 * h);
        CHECK(std::abs(g.backward(z, c).dot(dir) - fd) <= 1e-4);
    }
}

TEST_CASE("generative - Latent domain")
{
    auto rng = make_engine(5, "gen-domain", {});
    const auto g = random_generative_map(2, 8, 4, 1.0, rng);
    Vector far(2);
    far << 3.0, 4.0;
    CHECK(std::abs(g.clamp_latent(far).norm() - 1.0) <= 1e-15);
    CHECK((g.forward(far) - g.forward(far / 5.0)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK_THROWS_AS(g.forward(Vector::Zero(3)), shape_error);
    CHECK_THROWS_AS(g.backward(Vector::Zero(2), Vector::Zero(3)), shape_error);
    CHECK_THROWS_AS(random_generative_map(0, 8, 4, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(GenerativeMap({}, 1.0), std::invalid_argument);
}

TEST_CASE("generative - JSON round trip")
{
    auto rng = make_engine(6, "gen-json", {});
    const auto g = random_generative_map(2, 5, 4, 1.5, rng);
    const auto back = nlohmann::json(g).get<GenerativeMap>();
    CHECK(back.latent_radius() == 1.5);
    const Vector z = in_ball(2, 1.0, rng);
    CHECK(back.forward(z) == g.forward(z));
}
