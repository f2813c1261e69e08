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

#include <cmath>
#include <stdexcept>

namespace qcs {

/// Uniform mid-rise quantizer Q(a) = delta * (floor(a / delta) + 1/2).
///
/// The output grid is delta * (Z + 1/2). A point exactly on a cell boundary a = k * delta belongs
/// to cell k and maps to delta * (k + 1/2), so Q(a) - a lies in (-delta/2, delta/2].
/// The unquantized mode passes values through untouched and stands in for the limit delta -> 0.
class Quantizer {
public:
    explicit Quantizer(double delta) : delta_(delta)
    {
        if (!(delta > 0.0) || !std::isfinite(delta))
            throw std::domain_error("Quantizer: delta must be positive and finite");
    }

    static Quantizer unquantized() { return Quantizer(); }

    double delta() const { return unquantized_ ? 0.0 : delta_; }
    bool is_unquantized() const { return unquantized_; }

    double operator()(double a) const
    {
        if (!std::isfinite(a))
            throw std::domain_error("Quantizer: non-finite input");
        if (unquantized_)
            return a;
        return delta_ * (std::floor(a / delta_) + 0.5);
    }

private:
    Quantizer() : delta_(0.0), unquantized_(true) {}

    double delta_;
    bool unquantized_ = false;
};

inline double quantize_scalar(const Quantizer &q, double a)
{
    return q(a);
}

/// Quantized measurements together with the pre-quantization values and the quantization noise.
struct QuantizedObservation {
    Vector y_dot;   // Q(y + tau)
    Vector xi;      // y_dot - y_clean
    Vector y_clean; // y
};

/// Dithered quantization y_dot = Q(y + tau), xi = y_dot - y. With tau in [-delta/2, delta/2]
/// every |xi_i| <= delta.
inline QuantizedObservation dithered_quantize(const Quantizer &q, const Vector &y, const Vector &tau)
{
    require_shape(y.size() == tau.size(), "dithered_quantize: len(y) != len(tau)");
    QuantizedObservation obs;
    obs.y_clean = y;
    obs.y_dot.resize(y.size());
    obs.xi.resize(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (q.is_unquantized()) {
            obs.y_dot[i] = y[i];
        } else {
            obs.y_dot[i] = q(y[i] + tau[i]);
        }
        obs.xi[i] = obs.y_dot[i] - y[i];
    }
    return obs;
}

} // namespace qcs
