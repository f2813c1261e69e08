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
#include "plan_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace qcs {

enum class Subcommand { Sweep, DeltaStudy, QpeCheck, Pbp, Generative, Bounds };

struct CliInvocation {
    Subcommand subcommand = Subcommand::Sweep;
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    unsigned jobs = default_jobs();
    bool quiet = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

namespace detail {

inline void write_text(const std::filesystem::path &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw config_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out)
        throw config_error("failed writing '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path &path, const nlohmann::json &j)
{
    write_text(path, j.dump(2) + "\n");
}

inline std::filesystem::path prepare_out_dir(const std::string &dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw config_error("cannot create output directory '" + dir + "'");
    return dir;
}

inline std::string study_label(const ExperimentPlan &plan, double sigma, double delta)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << to_string(plan.scenario) << "[sigma=" << sigma << ";delta=" << delta << "]";
    return os.str();
}

inline nlohmann::json bounds_json(const ExperimentPlan &plan)
{
    if (!is_structured(plan.scenario))
        throw config_error("bounds: plan.scenario '" + to_string(plan.scenario) +
                           "' has no closed-form error bound");
    nlohmann::json arr = nlohmann::json::array();
    for (int m : plan.m_grid)
        arr.push_back(*plan_overlay(plan, m));
    return arr;
}

inline int run_invocation(const CliInvocation &inv, std::ostream &log)
{
    std::vector<std::string> overrides;
    if (inv.subcommand == Subcommand::Pbp)
        overrides.push_back("plan.scenario=\"pbp\"");
    if (inv.subcommand == Subcommand::Generative)
        overrides.push_back("plan.scenario=\"generative\"");
    overrides.insert(overrides.end(), inv.overrides.begin(), inv.overrides.end());
    const RunConfig cfg = load_config(inv.config_path, overrides);
    if (inv.subcommand == Subcommand::Pbp && cfg.plan.scenario != Scenario::PBP)
        throw config_error("pbp: plan.scenario must be 'pbp'");
    if (inv.subcommand == Subcommand::Generative && cfg.plan.scenario != Scenario::Generative)
        throw config_error("generative: plan.scenario must be 'generative'");

    const auto out = prepare_out_dir(inv.out_dir);

    if (inv.subcommand == Subcommand::Bounds) {
        write_json(out / "bounds.json", bounds_json(cfg.plan));
        return kExitOk;
    }

    RunOptions opts;
    opts.jobs = inv.jobs;
    if (!inv.quiet)
        opts.on_cell = [&log](const CellRecord &c) {
            log << "m=" << c.m << " trial=" << c.trial << " max_err=" << c.max_err << " mean_err=" << c.mean_err
                << (c.flagged.empty() ? "" : " (flagged pairs)") << std::endl;
        };

    write_json(out / "resolved-config.json", config_to_json(cfg));

    nlohmann::json report;
    bool flagged = false;
    std::ostringstream csv;
    csv << kCurvesHeader << '\n';
    switch (inv.subcommand) {
    case Subcommand::Sweep:
    case Subcommand::Pbp:
    case Subcommand::Generative: {
        const auto rep = run_sweep(cfg.plan, opts);
        flagged = rep.any_flagged();
        report = report_to_json(rep);
        write_curves_rows(csv, rep, to_string(rep.plan.scenario));
        break;
    }
    case Subcommand::DeltaStudy: {
        const auto curves = run_delta_sigma_study(cfg.plan, cfg.study_cases, opts);
        report["curves"] = nlohmann::json::array();
        for (const auto &c : curves) {
            flagged = flagged || c.report.any_flagged();
            report["curves"].push_back({{"sigma", c.sigma}, {"delta", c.delta}, {"report", report_to_json(c.report)}});
            write_curves_rows(csv, c.report, study_label(c.report.plan, c.sigma, c.delta));
        }
        break;
    }
    case Subcommand::QpeCheck: {
        report = qpe_report_to_json(run_qpe_check(cfg.qpe, opts));
        break;
    }
    case Subcommand::Bounds:
        break;
    }
    write_json(out / "report.json", report);
    write_text(out / "curves.csv", csv.str());
    if (flagged) {
        log << "qcs: numerical failure: some pairs could not be recovered (see 'flagged' in report.json)\n";
        return kExitNumerical;
    }
    return kExitOk;
}

} // namespace detail

/// Entry point of the qcs command-line tool. Returns the process exit code.
inline int run_cli(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr)
{
    CLI::App app{"qcs: uniform-recovery experiments for quantized corrupted sensing", "qcs"};
    app.require_subcommand(1, 1);

    CliInvocation inv;
    const struct {
        const char *name;
        Subcommand cmd;
        const char *help;
    } commands[] = {
        {"sweep", Subcommand::Sweep, "Fixed-ensemble sweep over the m grid"},
        {"delta-study", Subcommand::DeltaStudy, "Sweeps for each (sigma, delta) case"},
        {"qpe-check", Subcommand::QpeCheck, "Quantized product embedding statistic over sparse nets"},
        {"pbp", Subcommand::Pbp, "Projected back-projection sweep"},
        {"generative", Subcommand::Generative, "Generative-prior sweep"},
        {"bounds", Subcommand::Bounds, "Write the theoretical error overlays only (no solves)"},
    };
    std::string config_path;
    for (const auto &c : commands) {
        auto *sub = app.add_subcommand(c.name, c.help);
        sub->add_option("-c,--config", config_path, "JSON config file");
        sub->add_option("-o,--out", inv.out_dir, "Output directory")->capture_default_str();
        sub->add_option("-j,--jobs", inv.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_flag("-q,--quiet", inv.quiet, "No progress output");
        sub->add_option("overrides", inv.overrides, "Dotted-path overrides, e.g. plan.delta=0.2");
        sub->callback([&inv, cmd = c.cmd] { inv.subcommand = cmd; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, err, err);
        err << app.help();
        return kExitConfig;
    }
    if (!config_path.empty())
        inv.config_path = config_path;

    try {
        return detail::run_invocation(inv, err);
    } catch (const config_error &e) {
        err << "qcs: config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const numerical_error &e) {
        err << "qcs: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception &e) {
        err << "qcs: error: " << e.what() << '\n';
        return kExitFailure;
    }
}

} // namespace qcs
