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
#include "linalg.hpp"
#include "quantizer.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace qcs {

enum class MatrixKind { Gaussian, Rademacher };

NLOHMANN_JSON_SERIALIZE_ENUM(MatrixKind, {{MatrixKind::Gaussian, "gaussian"},
                                          {MatrixKind::Rademacher, "rademacher"}})

struct EnsembleConfig {
    int m = 1;
    int n = 1;
    MatrixKind matrix_kind = MatrixKind::Gaussian;
    double noise_sigma = 0.0; // std dev of the Gaussian measurement noise
    double delta = 0.0;       // dither range [-delta/2, delta/2]; 0 disables the dither
    std::uint64_t seed = 0;

    void validate() const
    {
        if (m < 1 || n < 1)
            throw config_error("EnsembleConfig: m and n must be >= 1");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
            throw config_error("EnsembleConfig: noise_sigma must be >= 0");
        if (!(delta >= 0.0) || !std::isfinite(delta))
            throw config_error("EnsembleConfig: delta must be >= 0");
    }
};

inline void to_json(nlohmann::json &j, const EnsembleConfig &c)
{
    j = nlohmann::json{{"m", c.m},
                       {"n", c.n},
                       {"matrix_kind", c.matrix_kind},
                       {"noise_sigma", c.noise_sigma},
                       {"delta", c.delta},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json &j, EnsembleConfig &c)
{
    j.at("m").get_to(c.m);
    j.at("n").get_to(c.n);
    j.at("matrix_kind").get_to(c.matrix_kind);
    j.at("noise_sigma").get_to(c.noise_sigma);
    j.at("delta").get_to(c.delta);
    j.at("seed").get_to(c.seed);
}

/// One fixed draw of the sensing matrix, the measurement noise and the dither.
/// Immutable after construction; a single instance serves every test pair of a sweep cell.
struct SensingEnsemble {
    RowMatrix phi; // m x n
    Vector eps;    // m
    Vector tau;    // m
    EnsembleConfig config;

    int m() const { return config.m; }
    int n() const { return config.n; }

    std::uint64_t fingerprint() const
    {
        auto h = fnv1a({phi.data(), static_cast<std::size_t>(phi.size())});
        h = fnv1a({eps.data(), static_cast<std::size_t>(eps.size())}, h);
        return fnv1a({tau.data(), static_cast<std::size_t>(tau.size())}, h);
    }
};

inline SensingEnsemble draw_ensemble(const EnsembleConfig &cfg)
{
    cfg.validate();
    SensingEnsemble e;
    e.config = cfg;
    e.phi.resize(cfg.m, cfg.n);
    e.eps.resize(cfg.m);
    e.tau.resize(cfg.m);

    auto phi_rng = make_engine(cfg.seed, "phi");
    if (cfg.matrix_kind == MatrixKind::Gaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < e.phi.size(); ++i)
            e.phi.data()[i] = normal(phi_rng);
    } else {
        std::bernoulli_distribution coin(0.5);
        for (Eigen::Index i = 0; i < e.phi.size(); ++i)
            e.phi.data()[i] = coin(phi_rng) ? 1.0 : -1.0;
    }

    // Noise and dither are drawn as standard variates and scaled, so ensembles that differ
    // only in (sigma, delta) share their underlying randomness.
    auto eps_rng = make_engine(cfg.seed, "eps");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < cfg.m; ++i)
        e.eps[i] = cfg.noise_sigma * normal(eps_rng);

    auto tau_rng = make_engine(cfg.seed, "tau");
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    for (Eigen::Index i = 0; i < cfg.m; ++i)
        e.tau[i] = cfg.delta * unit(tau_rng);
    return e;
}

/// y = phi x + sqrt(m) v + eps.
inline Vector measure(const SensingEnsemble &e, const Vector &x, const Vector &v)
{
    require_shape(x.size() == e.n(), "measure: x has wrong length");
    require_shape(v.size() == e.m(), "measure: v has wrong length");
    Vector y = e.phi * x;
    y += std::sqrt(static_cast<double>(e.m())) * v;
    y += e.eps;
    return y;
}

/// y_dot = Q(phi x + sqrt(m) v + eps + tau).
inline QuantizedObservation observe(const SensingEnsemble &e, const Quantizer &q, const Vector &x,
                                    const Vector &v)
{
    if (!q.is_unquantized() && q.delta() != e.config.delta)
        throw config_error("observe: quantizer delta does not match the ensemble dither range");
    const Vector y = measure(e, x, v);
    if (!all_finite(y))
        throw numerical_error("observe: non-finite measurements");
    return dithered_quantize(q, y, e.tau);
}

/// Text dump for cross-implementation replay:
///   line 1: config JSON
///   next m lines: rows of phi, comma separated
///   then one line eps, one line tau.
/// Values are written with 17 significant digits so the round trip is exact.
inline void write_ensemble(std::ostream &os, const SensingEnsemble &e)
{
    os << nlohmann::json(e.config).dump() << '\n';
    os << std::setprecision(17);
    auto row = [&os](const auto &r) {
        for (Eigen::Index j = 0; j < r.size(); ++j) {
            if (j)
                os << ',';
            os << r[j];
        }
        os << '\n';
    };
    for (Eigen::Index i = 0; i < e.phi.rows(); ++i)
        row(e.phi.row(i));
    row(e.eps);
    row(e.tau);
}

inline SensingEnsemble read_ensemble(std::istream &is)
{
    std::string line;
    if (!std::getline(is, line))
        throw config_error("read_ensemble: missing header");
    SensingEnsemble e;
    try {
        e.config = nlohmann::json::parse(line).get<EnsembleConfig>();
    } catch (const nlohmann::json::exception &ex) {
        throw config_error(std::string("read_ensemble: bad header: ") + ex.what());
    }
    e.config.validate();
    const int m = e.config.m, n = e.config.n;
    auto parse_row = [&](auto &&dst, Eigen::Index len) {
        if (!std::getline(is, line))
            throw config_error("read_ensemble: truncated file");
        std::istringstream ss(line);
        std::string cell;
        Eigen::Index j = 0;
        while (std::getline(ss, cell, ',')) {
            if (j >= len)
                throw shape_error("read_ensemble: row too long");
            dst[j++] = std::stod(cell);
        }
        if (j != len)
            throw shape_error("read_ensemble: row too short");
    };
    e.phi.resize(m, n);
    e.eps.resize(m);
    e.tau.resize(m);
    for (int i = 0; i < m; ++i)
        parse_row(e.phi.row(i), n);
    parse_row(e.eps, m);
    parse_row(e.tau, m);
    return e;
}

} // namespace qcs
