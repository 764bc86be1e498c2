#pragma once

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "../verify.hpp"
#include "artifacts.hpp"
#include "config.hpp"
#include "export.hpp"
#include "runner.hpp"

namespace harmocont::cli {

inline constexpr const char* log_env = "HARMOCONT_LOG";

/// Log output goes to stderr; the level comes from HARMOCONT_LOG (trace, debug, info, warn,
/// err, critical, off), default warn.
inline void init_logging() {
    static const bool once = [] {
        auto logger = spdlog::stderr_color_mt("harmocont");
        spdlog::set_default_logger(logger);
        spdlog::set_level(spdlog::level::warn);
        if (const char* v = std::getenv(log_env)) spdlog::set_level(spdlog::level::from_str(v));
        return true;
    }();
    (void)once;
}

struct VerifyOutcome {
    int exit_code = exit_code::ok;
    VerifyReport report;
};

inline VerifyOutcome verify_file(const std::filesystem::path& path, std::ostream& out, const VerifyOptions& opts = {}) {
    const SolutionFile sf = read_solution(path);
    const Model model = make_model(sf.model, sf.parameters, sf.circuit);
    VerifyOutcome o;
    o.report = verify_orbit(model.system, sf.orbit, sf.coefficients, opts);
    const auto& r = o.report;
    out << "file: " << path.string() << '\n'
        << "model: " << sf.model << "  label: " << sf.label << (sf.label_info.empty() ? "" : " " + sf.label_info) << '\n'
        << "period: " << format_number(sf.orbit.period) << '\n'
        << "return_map_error: " << format_number(r.return_map_error) << " (tol " << format_number(opts.return_map_tol) << ")\n"
        << "leading_multiplier: " << format_number(r.leading_multiplier) << (r.diverges ? " (diverges)" : "") << '\n';
    if (r.coefficients_checked)
        out << "coefficient_error: " << format_number(r.coefficient_error) << " over " << r.coefficients_compared
            << " coefficients (tol " << format_number(opts.coefficient_tol) << ")\n";
    else
        out << "coefficient_error: skipped (unstable orbit)\n";
    out << "status: " << to_string(r.status) << '\n';
    o.exit_code = r.status == VerifyStatus::Fail ? exit_code::numerical : exit_code::ok;
    return o;
}

/// Entry point of the `harmocont` executable.
inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    init_logging();
    CLI::App app{"Continuation of periodic orbits with harmonic constraints"};
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path, chart_path, solution_path;
    bool validate_only = false;

    auto* run_cmd = app.add_subcommand("run", "Run the stages of a scenario configuration");
    run_cmd->add_option("config", config_path, "Scenario configuration (YAML)")->required();
    run_cmd->add_option("--out-dir", ov.out_dir, "Output directory (overrides the config)");
    run_cmd->add_option("--mesh", ov.mesh, "Number of mesh intervals")->check(CLI::PositiveNumber);
    run_cmd->add_option("--degree", ov.degree, "Collocation degree")->check(CLI::Range(1, 10));
    run_cmd->add_option("--max-steps", ov.max_steps, "Continuation steps per branch")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--validate-only", validate_only, "Check the configuration and exit");

    auto* export_cmd = app.add_subcommand("export", "Export chart data from branch files");
    export_cmd->add_option("manifest", chart_path, "Chart definition (YAML)")->required();
    std::optional<std::string> chart_out;
    export_cmd->add_option("--out-dir", chart_out, "Directory for the chart outputs");

    auto* verify_cmd = app.add_subcommand("verify", "Check a labeled solution by time integration and FFT");
    verify_cmd->add_option("solution", solution_path, "Labeled-solution file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_code::ok : exit_code::config;
    }

    try {
        if (*run_cmd) {
            RunConfig cfg = load_config(config_path);
            if (validate_only) {
                apply_overrides(cfg, ov);
                validate(cfg);
                out << "valid: " << cfg.stages.size() << " stages\n";
                return exit_code::ok;
            }
            RunOptions ro;
            ro.overrides = ov;
            ro.default_out_dir = std::filesystem::path(config_path).stem();
            const RunResult rr = run(std::move(cfg), ro);
            if (rr.exit_code != exit_code::ok) {
                err << "harmocont: " << rr.status << ": " << rr.message << '\n';
                return rr.exit_code;
            }
            for (const auto& s : rr.stages)
                for (const auto& b : s.branches) out << (rr.out_dir / b.file).string() << '\n';
            return exit_code::ok;
        }
        if (*export_cmd) {
            ChartSpec spec = load_chart_spec(chart_path);
            if (chart_out) spec.output = std::filesystem::path(*chart_out) / spec.output.filename();
            const auto [csv, manifest] = write_chart(collect_chart(spec));
            out << csv.string() << '\n' << manifest.string() << '\n';
            return exit_code::ok;
        }
        if (*verify_cmd) return verify_file(solution_path, out).exit_code;
    } catch (const ConfigError& e) {
        err << "harmocont: " << e.what() << '\n';
        return exit_code::config;
    } catch (const IoError& e) {
        err << "harmocont: " << e.what() << '\n';
        return exit_code::config;
    } catch (const Error& e) {
        err << "harmocont: " << e.what() << '\n';
        return exit_code::numerical;
    }
    return exit_code::ok;
}

}  // namespace harmocont::cli
