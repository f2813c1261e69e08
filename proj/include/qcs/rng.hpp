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

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace qcs {

// Purpose-keyed random streams.
//
// Every random quantity (sensing matrix, noise, dither, test pairs, generative weights, solver
// restarts) is drawn from its own engine whose seed is a hash of (base seed, purpose tag,
// indices). Changing m therefore never perturbs the test-set draws, and two runs with the same
// plan seed are bit-identical.
using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                    std::initializer_list<std::uint64_t> indices = {})
{
    std::uint64_t h = splitmix64(seed ^ splitmix64(hash_tag(tag)));
    for (std::uint64_t i : indices)
        h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
    return h;
}

inline Engine make_engine(std::uint64_t seed, std::string_view tag,
                          std::initializer_list<std::uint64_t> indices = {})
{
    return Engine(derive_seed(seed, tag, indices));
}

} // namespace qcs
