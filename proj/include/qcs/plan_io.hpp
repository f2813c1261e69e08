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
#include "experiments.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qcs {

/// A parsed configuration file. Every section is optional; absent sections take defaults.
///
///   { "plan":  { ...ExperimentPlan... },
///     "study": { "cases": [[sigma, delta], ...] },
///     "qpe":   { ...QpeConfig... } }
struct RunConfig {
    ExperimentPlan plan;
    std::vector<std::pair<double, double>> study_cases = default_study_cases();
    QpeConfig qpe;
};

inline nlohmann::json config_to_json(const RunConfig &c)
{
    nlohmann::json cases = nlohmann::json::array();
    for (const auto &[sigma, delta] : c.study_cases)
        cases.push_back({sigma, delta});
    return {{"plan", c.plan}, {"study", {{"cases", cases}}}, {"qpe", c.qpe}};
}

/// Sets a dotted path such as "plan.generative.hidden" to a value. The value text is read as JSON
/// when it parses, otherwise as a plain string.
inline void apply_override(nlohmann::json &root, const std::string &assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("override '" + assignment + "' is not of the form key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;

    nlohmann::json *node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty())
            throw config_error("override key '" + path + "' has an empty component");
        if (!node->is_object()) {
            if (!node->is_null())
                throw config_error("override key '" + path + "' descends into a non-object");
            *node = nlohmann::json::object();
        }
        node = &(*node)[part];
        if (dot == std::string::npos)
            break;
        start = dot + 1;
    }
    *node = std::move(value);
}

inline RunConfig config_from_json(const nlohmann::json &root)
{
    detail::reject_unknown(root, {"plan", "study", "qpe"}, "");
    RunConfig cfg;
    if (root.contains("plan"))
        cfg.plan = plan_from_json(root.at("plan"));
    if (root.contains("study")) {
        const auto &st = root.at("study");
        detail::reject_unknown(st, {"cases"}, "study.");
        if (st.contains("cases")) {
            cfg.study_cases.clear();
            const auto &cases = st.at("cases");
            if (!cases.is_array() || cases.empty())
                throw config_error("invalid value for key 'study.cases': expected a nonempty array");
            for (const auto &c : cases) {
                if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
                    throw config_error("invalid value for key 'study.cases': entries are [sigma, delta]");
                const double sigma = c[0].get<double>(), delta = c[1].get<double>();
                if (!(sigma >= 0.0) || !(delta >= 0.0))
                    throw config_error("invalid value for key 'study.cases': sigma and delta must be >= 0");
                cfg.study_cases.emplace_back(sigma, delta);
            }
        }
    }
    if (root.contains("qpe"))
        cfg.qpe = qpe_from_json(root.at("qpe"));
    return cfg;
}

inline nlohmann::json read_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error &ex) {
        throw config_error("malformed JSON in '" + path + "': " + ex.what());
    }
}

/// Loads a config: file contents, then the QCS_SEED environment variable (plan and qpe seeds),
/// then the command-line overrides in order.
inline RunConfig load_config(const std::optional<std::string> &path, const std::vector<std::string> &overrides,
                             const char *env_seed = std::getenv("QCS_SEED"))
{
    nlohmann::json root = path ? read_json_file(*path) : nlohmann::json::object();
    if (!root.is_object())
        throw config_error("config root must be a JSON object");
    if (env_seed && *env_seed) {
        char *end = nullptr;
        const unsigned long long seed = std::strtoull(env_seed, &end, 10);
        if (*end != '\0')
            throw config_error("QCS_SEED must be a non-negative integer");
        apply_override(root, "plan.seed=" + std::to_string(seed));
        apply_override(root, "qpe.seed=" + std::to_string(seed));
    }
    for (const auto &o : overrides)
        apply_override(root, o);
    return config_from_json(root);
}

} // namespace qcs
