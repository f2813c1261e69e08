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

#include "cli.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "generative.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "plan_io.hpp"
#include "priors.hpp"
#include "quantizer.hpp"
#include "rng.hpp"
#include "solvers.hpp"
