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
#include "rng.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>
#include <vector>

namespace qcs {

/// Fixed-weight feed-forward map z -> W_L relu(... relu(W_1 z + b_1) ...) + b_L.
///
/// The positive part is applied after every layer except the last. The map is Lipschitz with
/// constant at most the product of the layer spectral norms, which is stored alongside the
/// weights. Its domain is the latent ball of radius latent_radius.
class GenerativeMap {
public:
    struct Layer {
        Matrix weight; // out x in
        Vector bias;   // out
    };

    GenerativeMap() = default;

    GenerativeMap(std::vector<Layer> layers, double latent_radius)
        : layers_(std::move(layers)), latent_radius_(latent_radius)
    {
        if (layers_.empty())
            throw std::invalid_argument("GenerativeMap: at least one layer");
        if (!(latent_radius_ > 0.0))
            throw std::invalid_argument("GenerativeMap: latent radius must be positive");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto &ly = layers_[l];
            require_shape(ly.bias.size() == ly.weight.rows(), "GenerativeMap: bias length");
            if (l > 0)
                require_shape(ly.weight.cols() == layers_[l - 1].weight.rows(),
                              "GenerativeMap: layer sizes do not chain");
        }
        lipschitz_ = 1.0;
        for (const auto &ly : layers_)
            lipschitz_ *= spectral_norm(ly.weight);
    }

    int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
    int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
    double latent_radius() const { return latent_radius_; }
    double lipschitz_bound() const { return lipschitz_; }
    const std::vector<Layer> &layers() const { return layers_; }

    /// Radial projection onto the latent ball.
    Vector clamp_latent(const Vector &z) const
    {
        const double nrm = z.norm();
        return nrm <= latent_radius_ ? z : Vector(z * (latent_radius_ / nrm));
    }

    Vector forward(const Vector &z) const
    {
        require_shape(z.size() == input_dim(), "GenerativeMap::forward: latent dimension mismatch");
        if (z.norm() > latent_radius_ * (1.0 + 1e-12)) {
            static std::atomic<bool> warned{false};
            if (!warned.exchange(true))
                std::clog << "qcs: latent outside the generative domain; clamping radially\n";
            return propagate(clamp_latent(z), nullptr);
        }
        return propagate(z, nullptr);
    }

    /// Vector-Jacobian product cotangent^T dG(z). The positive-part derivative is 1 on strictly
    /// positive pre-activations and 0 otherwise.
    Vector backward(const Vector &z, const Vector &cotangent) const
    {
        require_shape(z.size() == input_dim(), "GenerativeMap::backward: latent dimension mismatch");
        require_shape(cotangent.size() == output_dim(),
                      "GenerativeMap::backward: cotangent dimension mismatch");
        std::vector<Vector> pre;
        propagate(clamp_latent(z), &pre);
        Vector g = cotangent;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            if (l + 1 < layers_.size()) {
                const Vector &a = pre[l];
                for (Eigen::Index i = 0; i < g.size(); ++i)
                    if (!(a[i] > 0.0))
                        g[i] = 0.0;
            }
            g = layers_[l].weight.transpose() * g;
        }
        return g;
    }

    static double spectral_norm(const Matrix &w, int iterations = 300)
    {
        if (w.size() == 0)
            return 0.0;
        Vector v = Vector::Ones(w.cols()) / std::sqrt(static_cast<double>(w.cols()));
        double sigma = 0.0;
        for (int it = 0; it < iterations; ++it) {
            Vector u = w.transpose() * (w * v);
            const double nrm = u.norm();
            if (nrm == 0.0)
                return 0.0;
            v = u / nrm;
            sigma = std::sqrt(nrm);
        }
        return sigma;
    }

private:
    // Forward pass; optionally records the pre-activations of every hidden layer.
    Vector propagate(const Vector &z, std::vector<Vector> *pre) const
    {
        Vector h = z;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Vector a = layers_[l].weight * h + layers_[l].bias;
            if (l + 1 < layers_.size()) {
                if (pre)
                    pre->push_back(a);
                h = a.cwiseMax(0.0);
            } else {
                h = std::move(a);
            }
        }
        return h;
    }

    std::vector<Layer> layers_;
    double latent_radius_ = 1.0;
    double lipschitz_ = 0.0;
};

inline Vector generative_forward(const GenerativeMap &g, const Vector &z)
{
    return g.forward(z);
}

inline Vector generative_backward(const GenerativeMap &g, const Vector &z, const Vector &cotangent)
{
    return g.backward(z, cotangent);
}

/// Random two-layer map latent -> hidden -> output. Weights are scaled so that
/// E||G(z)||_2 is about ||z||_2: hidden weights N(0, 2/hidden), output weights N(0, 1/output).
template <typename Rng>
GenerativeMap random_generative_map(int latent, int hidden, int output, double latent_radius,
                                    Rng &rng, double bias_scale = 0.1)
{
    if (latent < 1 || hidden < 1 || output < 1)
        throw std::invalid_argument("random_generative_map: dimensions must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](Eigen::Index rows, Eigen::Index cols, double scale) {
        Matrix w(rows, cols);
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w.data()[i] = scale * normal(rng);
        return w;
    };
    std::vector<GenerativeMap::Layer> layers(2);
    layers[0].weight = fill(hidden, latent, std::sqrt(2.0 / hidden));
    layers[0].bias = fill(hidden, 1, bias_scale);
    layers[1].weight = fill(output, hidden, std::sqrt(1.0 / output));
    layers[1].bias = Vector::Zero(output);
    return GenerativeMap(std::move(layers), latent_radius);
}

// JSON weights: {"latent_radius": r, "layers": [{"weight": [[row], ...], "bias": [...]}, ...]}.
inline void to_json(nlohmann::json &j, const GenerativeMap &g)
{
    j = nlohmann::json::object();
    j["latent_radius"] = g.latent_radius();
    j["lipschitz_bound"] = g.lipschitz_bound();
    auto &layers = j["layers"] = nlohmann::json::array();
    for (const auto &ly : g.layers()) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < ly.weight.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(ly.weight.cols()));
            for (Eigen::Index k = 0; k < ly.weight.cols(); ++k)
                row[static_cast<std::size_t>(k)] = ly.weight(i, k);
            rows.push_back(row);
        }
        layers.push_back({{"weight", rows},
                          {"bias", std::vector<double>(ly.bias.data(), ly.bias.data() + ly.bias.size())}});
    }
}

inline void from_json(const nlohmann::json &j, GenerativeMap &g)
{
    std::vector<GenerativeMap::Layer> layers;
    for (const auto &jl : j.at("layers")) {
        const auto rows = jl.at("weight").get<std::vector<std::vector<double>>>();
        const auto bias = jl.at("bias").get<std::vector<double>>();
        GenerativeMap::Layer ly;
        const auto cols = rows.empty() ? 0 : rows.front().size();
        ly.weight.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            require_shape(rows[i].size() == cols, "GenerativeMap JSON: ragged weight matrix");
            for (std::size_t k = 0; k < cols; ++k)
                ly.weight(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
        ly.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()));
        layers.push_back(std::move(ly));
    }
    g = GenerativeMap(std::move(layers), j.at("latent_radius").get<double>());
}

} // namespace qcs
