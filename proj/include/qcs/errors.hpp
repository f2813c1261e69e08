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

#include <stdexcept>
#include <string>

namespace qcs {

// Vector/matrix dimensions disagree.
struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A plan, config file or override could not be interpreted. The CLI maps this to exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A solver produced non-finite values or otherwise failed numerically (CLI exit code 3).
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation is not defined for the given prior (e.g. a norm of a generative prior).
struct unsupported_error : std::logic_error {
    using std::logic_error::logic_error;
};

inline void require_shape(bool ok, const std::string &what)
{
    if (!ok)
        throw shape_error(what);
}

} // namespace qcs
