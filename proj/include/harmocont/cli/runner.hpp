#pragma once

#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "../equilibria.hpp"
#include "../harmonic.hpp"
#include "artifacts.hpp"
#include "config.hpp"

namespace harmocont::cli {

/// One branch of a stage: its table plus what is needed to restart or reverse it.
struct BranchRecord {
    std::string stage;
    StageType type = StageType::Cycle;
    std::string file;  // table file name inside the output directory
    BranchTable table;
    std::vector<std::string> solutions;

    // Periodic stages.
    FourierSpec spec;
    std::vector<std::string> free;
    FamilyOptions options;
    std::optional<HarmonicRun> run;

    // Equilibrium stages.
    std::optional<EquilibriumBranch> equilibria;
    int eq_free = -1;
    Vector eq_params;
    EquilibriumOptions eq_options;
    std::vector<HopfPoint> hopf_curve;
};

struct StageResult {
    StageConfig config;
    std::vector<BranchRecord> branches;
    std::string status = "ok";
};

struct RunResult {
    int exit_code = exit_code::ok;
    std::string status = "ok";
    std::string message;
    RunConfig config;
    std::optional<Model> model;
    std::filesystem::path out_dir;
    std::string hash;
    std::vector<StageResult> stages;

    const StageResult* stage(const std::string& name) const {
        for (const auto& s : stages)
            if (s.config.name == name) return &s;
        return nullptr;
    }
};

struct RunOptions {
    Overrides overrides;
    bool write = true;
    std::filesystem::path default_out_dir = "harmocont-out";
};

namespace detail {

inline std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string two_digits(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", i);
    return buf;
}

/// Value after '=' in a label_info string such as "K=7".
inline std::optional<std::pair<std::string, double>> split_info(const std::string& info) {
    const auto eq = info.find('=');
    if (eq == std::string::npos) return std::nullopt;
    try {
        return std::pair{info.substr(0, eq), std::stod(info.substr(eq + 1))};
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline bool matches(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

inline StepConfig stage_step(const RunConfig& cfg, const StageConfig& st) {
    StepConfig s = cfg.solver.step;
    if (st.max_steps) s.max_steps = *st.max_steps;
    if (st.max_step) s.max_step = *st.max_step;
    return s;
}

inline BranchTable new_table(const RunResult& rr, const StageConfig& st, std::vector<std::string> columns) {
    BranchTable t;
    t.header = {{"model", rr.model->name},
                {"config_hash", rr.hash},
                {"stage", st.name},
                {"type", to_string(st.type)}};
    t.columns = std::move(columns);
    return t;
}

inline void append_derived(const Model& model, const Vector& p, std::vector<std::string>& row) {
    for (double v : model.derived(p)) row.push_back(format_number(v));
}

inline const char* equilibrium_tag(EquilibriumLabel l) {
    switch (l) {
        case EquilibriumLabel::None: return "";
        case EquilibriumLabel::Start: return "ST";
        case EquilibriumLabel::Hopf: return "HB";
        case EquilibriumLabel::End: return "EP";
    }
    return "";
}

inline std::vector<std::string> equilibrium_columns(const Model& model) {
    std::vector<std::string> cols{"point", "label"};
    for (const auto& n : model.system.param_names()) cols.push_back(n);
    for (const auto& n : model.system.state_names()) cols.push_back(n);
    for (const auto& c : {"hopf_test", "omega", "T"}) cols.push_back(c);
    for (const auto& n : model.derived_names) cols.push_back(n);
    return cols;
}

inline std::vector<std::string> equilibrium_row(const Model& model, int index, const std::string& label,
                                                const EquilibriumPoint& e, double test,
                                                const std::optional<HopfPoint>& h) {
    std::vector<std::string> row{std::to_string(index), label};
    for (Eigen::Index i = 0; i < e.p.size(); ++i) row.push_back(format_number(e.p[i]));
    for (Eigen::Index i = 0; i < e.x.size(); ++i) row.push_back(format_number(e.x[i]));
    row.push_back(format_number(test));
    row.push_back(h ? format_number(h->omega) : "");
    row.push_back(h ? format_number(h->period()) : "");
    append_derived(model, e.p, row);
    return row;
}

struct StartPoint {
    PeriodicOrbit orbit;
    std::string source;     // description for logs and headers
    std::string quantity;   // labeled quantity, if any
    double value = 0.0;
};

inline std::vector<StartPoint> resolve_starts(const RunResult& rr, const StageConfig& st) {
    const Model& model = *rr.model;
    std::vector<StartPoint> out;
    if (!st.start.file.empty()) {
        SolutionFile sf = read_solution(st.start.file);
        if (sf.model != model.name) throw ConfigError("stage '" + st.name + "': start file is for model '" + sf.model + "'");
        StartPoint sp{sf.orbit, st.start.file, "", 0.0};
        if (auto kv = split_info(sf.label_info)) std::tie(sp.quantity, sp.value) = *kv;
        out.push_back(std::move(sp));
        return out;
    }
    const StageResult* from = rr.stage(st.start.stage);
    if (!from) throw ConfigError("stage '" + st.name + "': start stage '" + st.start.stage + "' did not run");
    if (st.start.label == "HB") {
        StarterOptions so;
        so.intervals = rr.config.solver.mesh;
        so.degree = rr.config.solver.degree;
        so.component = st.start.component;
        so.newton = stage_step(rr.config, st);
        int index = 0;
        for (const auto& b : from->branches) {
            if (!b.equilibria) continue;
            for (const auto& h : b.equilibria->hopf_points) {
                ++index;
                if (!st.start.values.empty() &&
                    std::none_of(st.start.values.begin(), st.start.values.end(),
                                 [&](double v) { return matches(h.equilibrium.p[h.free_param], v); }))
                    continue;
                StarterResult sr = hopf_starter(h, model.system, st.start.epsilon, so);
                spdlog::info("stage {}: Hopf starter at {} = {:.10g}, {} Newton iterations", st.name,
                             model.system.param_names()[h.free_param], h.equilibrium.p[h.free_param], sr.iterations);
                out.push_back({sr.orbit, "HB" + std::to_string(index), "", 0.0});
            }
        }
        if (out.empty()) throw StarterFailure("stage '" + st.name + "': no Hopf point in stage '" + from->config.name + "'");
        return out;
    }
    for (const auto& b : from->branches) {
        if (!b.run) continue;
        for (const auto& pt : b.run->branch.points) {
            if (pt.label != st.start.label) continue;
            StartPoint sp{pt.orbit, st.start.label + ":" + pt.label_info, "", 0.0};
            if (auto kv = split_info(pt.label_info)) std::tie(sp.quantity, sp.value) = *kv;
            if (!st.start.values.empty()) {
                if (sp.quantity.empty() ||
                    std::none_of(st.start.values.begin(), st.start.values.end(),
                                 [&](double v) { return matches(sp.value, v); }))
                    continue;
            }
            out.push_back(std::move(sp));
        }
    }
    if (out.empty())
        throw InvalidStartError("stage '" + st.name + "': no '" + st.start.label + "' points in stage '" +
                                from->config.name + "'");
    return out;
}

inline std::vector<std::string> periodic_columns(const Model& model, const HarmonicRun& run) {
    std::vector<std::string> cols{"point", "label", "label_info"};
    for (const auto& n : run.branch.parameter_names) cols.push_back(n);
    for (const auto& n : run.branch.monitor_names) cols.push_back(n);
    cols.push_back("arclength");
    for (const auto& n : model.derived_names) cols.push_back(n);
    cols.push_back("solution");
    return cols;
}

inline bool saved_label(const std::string& l) { return l == "ST" || l == "UZ" || l == "LP" || l == "EP"; }

/// Builds the table (and solution files when `dir` is set) of a periodic branch.
inline void tabulate_periodic(const RunResult& rr, const StageConfig& st, BranchRecord& rec,
                              const std::filesystem::path* dir) {
    const Model& model = *rr.model;
    const std::string stem = rec.file.substr(0, rec.file.size() - 4);
    int index = 0;
    for (const auto& pt : rec.run->branch.points) {
        std::vector<std::string> row{std::to_string(index), pt.label, pt.label_info};
        for (Eigen::Index i = 0; i < pt.parameters.size(); ++i) row.push_back(format_number(pt.parameters[i]));
        for (double m : pt.monitors) row.push_back(format_number(m));
        row.push_back(format_number(pt.arclength));
        append_derived(model, pt.orbit.params, row);
        std::string sol;
        if (saved_label(pt.label)) {
            sol = stem + "-pt" + std::to_string(index) + ".json";
            rec.solutions.push_back(sol);
            if (dir) write_json(solution_json(make_solution(model, rr.config, st.name, pt, rec.free, rec.spec)), *dir / sol);
        }
        row.push_back(sol);
        rec.table.add_row(std::move(row));
        ++index;
    }
}

inline BranchRecord run_equilibrium(const RunResult& rr, const StageConfig& st) {
    const Model& model = *rr.model;
    const DynSystem& sys = model.system;
    BranchRecord rec;
    rec.stage = st.name;
    rec.type = st.type;
    rec.file = st.name + ".csv";
    rec.eq_free = sys.param_index(st.free[0]);
    rec.eq_params = sys.default_params();
    rec.eq_options.step = stage_step(rr.config, st);
    rec.eq_options.direction = st.direction;
    for (const auto& b : st.bounds) {
        rec.eq_options.lower = b.lower;
        rec.eq_options.upper = b.upper;
    }
    const Vector x0 = st.state.empty() ? Vector::Zero(sys.dim())
                                       : Vector(Eigen::Map<const Vector>(st.state.data(), sys.dim()));
    rec.table = new_table(rr, st, equilibrium_columns(model));
    if (st.type == StageType::Equilibrium) {
        rec.equilibria = continue_equilibria(sys, rec.eq_params, rec.eq_free, x0, rec.eq_options);
        int i = 0;
        for (const auto& p : rec.equilibria->points)
            rec.table.add_row(equilibrium_row(model, i++, equilibrium_tag(p.label), p.point, p.hopf_value, p.hopf));
        spdlog::info("stage {}: {} equilibria, {} Hopf points", st.name, rec.equilibria->points.size(),
                     rec.equilibria->hopf_points.size());
    } else {
        const int scan = sys.param_index(st.scan_parameter);
        rec.table.header.emplace_back("scan", st.scan_parameter);
        int i = 0;
        for (double v : st.scan_values) {
            Vector p = rec.eq_params;
            p[scan] = v;
            const EquilibriumBranch b = continue_equilibria(sys, p, rec.eq_free, x0, rec.eq_options);
            if (b.hopf_points.empty()) spdlog::warn("stage {}: no Hopf point at {} = {}", st.name, st.scan_parameter, v);
            for (const auto& h : b.hopf_points) {
                rec.hopf_curve.push_back(h);
                rec.table.add_row(equilibrium_row(model, i++, "HB", h.equilibrium, hopf_test(h.equilibrium.spectrum), h));
            }
        }
        spdlog::info("stage {}: {} Hopf points over {} scan values", st.name, rec.hopf_curve.size(),
                     st.scan_values.size());
    }
    return rec;
}

inline BranchRecord run_periodic(const RunResult& rr, const StageConfig& st, const StartPoint& sp,
                                 std::string file) {
    const Model& model = *rr.model;
    BranchRecord rec;
    rec.stage = st.name;
    rec.type = st.type;
    rec.file = std::move(file);
    rec.spec = st.fourier;
    rec.free = st.free;
    auto& o = rec.options;
    o.branch.step = stage_step(rr.config, st);
    o.branch.direction = st.direction;
    for (const auto& b : st.bounds) o.branch.bounds.push_back({b.name, b.lower, b.upper});
    for (const auto& l : st.labels) o.branch.labels.push_back({l.name, l.values});
    o.branch.detect_folds = st.detect_folds;
    o.branch.adapt_every = st.adapt_every.value_or(rr.config.solver.adapt_every);
    o.branch.stop_at_labels = st.stop_at_labels;
    o.both_directions = st.both_directions;
    std::string constant;
    if (st.type == StageType::Iso) {
        double target = 0.0;
        if (sp.quantity == st.pin) {
            target = sp.value;
        } else {
            const HarmonicSetup hs = harmonic_setup(model.system, sp.orbit, st.fourier);
            target = hs.params.values[hs.params.index(st.pin)];
        }
        o.pins[st.pin] = target;
        std::ostringstream os;
        os << st.pin << "=" << target;
        constant = os.str();
    }
    rec.run = continue_family(sp.orbit, model.system, st.fourier, st.free, o);
    rec.table = new_table(rr, st, periodic_columns(model, *rec.run));
    rec.table.header.emplace_back("start", sp.source);
    if (!constant.empty()) rec.table.header.emplace_back("constant", constant);
    rec.table.header.emplace_back("termination", rec.run->branch.termination);
    spdlog::info("stage {} [{}]: {} points, {}", st.name, rec.file, rec.run->branch.points.size(),
                 rec.run->branch.termination);
    return rec;
}

inline void finish_table(const RunResult& rr, BranchRecord& rec) {
    rec.table.header.emplace_back("units", units_line(*rr.model, rec.table.columns));
}

inline Json summary_json(const RunResult& rr, const std::string& started) {
    Json j;
    j["model"] = rr.model ? rr.model->name : rr.config.model;
    j["config_hash"] = rr.hash;
    j["started"] = started;
    j["finished"] = timestamp();
    j["status"] = rr.status;
    j["exit_code"] = rr.exit_code;
    j["message"] = rr.message;
    Json stages = Json::array();
    for (const auto& s : rr.stages) {
        Json sj;
        sj["name"] = s.config.name;
        sj["type"] = to_string(s.config.type);
        sj["status"] = s.status;
        Json branches = Json::array();
        for (const auto& b : s.branches) {
            Json bj;
            bj["file"] = b.file;
            bj["rows"] = b.table.rows.size();
            if (b.run) {
                bj["termination"] = b.run->branch.termination;
                bj["stalled"] = b.run->branch.stalled;
            }
            if (b.equilibria) bj["stalled"] = b.equilibria->stalled;
            bj["solutions"] = b.solutions;
            branches.push_back(std::move(bj));
        }
        sj["branches"] = std::move(branches);
        stages.push_back(std::move(sj));
    }
    j["stages"] = std::move(stages);
    return j;
}

}  // namespace detail

/// Executes the stages of a configuration in order. Config errors return exit code 2 before
/// any computation; numerical failures stop the run with exit code 3 and keep the artifacts
/// written so far.
inline RunResult run(RunConfig cfg, const RunOptions& ro = {}) {
    RunResult rr;
    const std::string started = detail::timestamp();
    try {
        apply_overrides(cfg, ro.overrides);
        validate(cfg);
        rr.config = cfg;
        rr.hash = config_hash(cfg, ro.overrides);
        rr.model = make_model(cfg.model, cfg.parameters, cfg.circuit);
    } catch (const ConfigError& e) {
        rr.config = cfg;
        rr.exit_code = exit_code::config;
        rr.status = "config error";
        rr.message = e.what();
        return rr;
    }
    rr.out_dir = cfg.output_dir.empty() ? ro.default_out_dir : std::filesystem::path(cfg.output_dir);
    const std::filesystem::path* dir = ro.write ? &rr.out_dir : nullptr;
    auto fail = [&](int code, const std::string& status, const std::string& msg) {
        rr.exit_code = code;
        rr.status = status;
        rr.message = msg;
        if (!rr.stages.empty()) rr.stages.back().status = "failed";
        spdlog::error("{}", msg);
    };
    try {
        if (dir) {
            std::error_code ec;
            std::filesystem::create_directories(*dir, ec);
            if (ec) throw IoError("cannot create output directory '" + dir->string() + "': " + ec.message());
        }
        for (const auto& st : cfg.stages) {
            rr.stages.push_back({st, {}, "ok"});
            auto emit = [&](BranchRecord rec) {
                detail::finish_table(rr, rec);
                if (dir) write_table(rec.table, *dir / rec.file);
                rr.stages.back().branches.push_back(std::move(rec));
            };
            if (st.type == StageType::Equilibrium || st.type == StageType::HopfCurve) {
                emit(detail::run_equilibrium(rr, st));
                continue;
            }
            const auto starts = detail::resolve_starts(rr, st);
            const bool numbered = st.type == StageType::Iso || starts.size() > 1;
            std::vector<std::future<BranchRecord>> jobs;
            for (std::size_t i = 0; i < starts.size(); ++i) {
                std::string file = numbered ? st.name + "-" + detail::two_digits(static_cast<int>(i) + 1) + ".csv"
                                            : st.name + ".csv";
                jobs.push_back(std::async(std::launch::async, [&rr, &st, &starts, i, file]() {
                    return detail::run_periodic(rr, st, starts[i], file);
                }));
            }
            std::vector<BranchRecord> done;
            std::optional<std::string> error;
            int code = exit_code::ok;
            for (auto& j : jobs) {
                try {
                    done.push_back(j.get());
                } catch (const ConfigError& e) {
                    if (!error) error = e.what(), code = exit_code::config;
                } catch (const Error& e) {
                    if (!error) error = e.what(), code = exit_code::numerical;
                }
            }
            for (auto& rec : done) {
                detail::tabulate_periodic(rr, st, rec, dir);
                emit(std::move(rec));
            }
            if (error) {
                if (code == exit_code::config) throw ConfigError(*error);
                throw NumericalFailure(*error);
            }
        }
    } catch (const ConfigError& e) {
        fail(exit_code::config, "config error", e.what());
    } catch (const IoError& e) {
        fail(exit_code::config, "io error", e.what());
    } catch (const Error& e) {
        fail(exit_code::numerical, "numerical failure", e.what());
    }
    if (dir) {
        try {
            write_json(detail::summary_json(rr, started), *dir / "summary.json");
        } catch (const IoError& e) {
            if (rr.exit_code == exit_code::ok) fail(exit_code::config, "io error", e.what());
        }
    }
    return rr;
}

}  // namespace harmocont::cli
