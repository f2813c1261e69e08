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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

namespace qcs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Sensing matrices are dense and row-major; rows are the sensing vectors.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool all_finite(const Vector &v)
{
    return v.allFinite();
}

inline double l1_norm(const Vector &v)
{
    return v.lpNorm<1>();
}

// 64-bit FNV-1a over a run of doubles. Used for ensemble fingerprints.
inline std::uint64_t fnv1a(std::span<const double> data, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    const auto *bytes = reinterpret_cast<const unsigned char *>(data.data());
    const std::size_t n = data.size_bytes();
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace qcs
