#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../harmonic.hpp"
#include "../models.hpp"

namespace harmocont::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int numerical = 3;
}

// ---------------------------------------------------------------------------
// Model catalog.

/// A catalog model: the system plus model-specific columns appended to branch files.
struct Model {
    std::string name;
    DynSystem system;
    models::ColpittsParams circuit;  // Colpitts only
    std::vector<std::string> derived_names;
    std::function<std::vector<double>(const Vector& p)> derived;
    std::map<std::string, std::string> units;
};

inline std::vector<std::string> model_names() { return {"colpitts", "ndo"}; }

inline Model make_model(const std::string& name, const std::map<std::string, double>& params = {},
                        const std::map<std::string, double>& circuit = {}) {
    auto take = [](const std::map<std::string, double>& src, const std::string& key, double& dst) {
        if (auto it = src.find(key); it != src.end()) dst = it->second;
    };
    auto reject_unknown = [](const std::map<std::string, double>& src, const std::vector<std::string>& known,
                             const std::string& what) {
        for (const auto& [k, v] : src)
            if (std::find(known.begin(), known.end(), k) == known.end())
                throw ConfigError("unknown " + what + " '" + k + "' for model");
    };
    if (name == "colpitts") {
        models::ColpittsParams c;
        reject_unknown(params, {"Q", "G", "gamma", "alphaF"}, "parameter");
        reject_unknown(circuit, {"C1", "C2", "L", "VT"}, "circuit constant");
        take(circuit, "C1", c.C1);
        take(circuit, "C2", c.C2);
        take(circuit, "L", c.L);
        take(circuit, "VT", c.VT);
        c.gamma = c.gamma_from_capacitors();
        take(params, "Q", c.Q);
        take(params, "G", c.G);
        take(params, "gamma", c.gamma);
        take(params, "alphaF", c.alphaF);
        std::optional<DynSystem> sys;
        try {
            sys = models::colpitts_system(c);
        } catch (const ParameterDomainError& e) {
            throw ConfigError(e.what());
        }
        Model m{name, *sys, c, {"R", "I0"}, {}, {}};
        m.derived = [c](const Vector& p) {
            const double Q = p[models::colpitts_index::Q], G = p[models::colpitts_index::G];
            if (!(Q > 0.0) || !(G > 0.0)) return std::vector<double>{std::nan(""), std::nan("")};
            const auto rp = models::colpitts_to_circuit_plane(Q, G, c);
            return std::vector<double>{rp.R, rp.I0};
        };
        m.units = {{"R", "ohm"}, {"I0", "A"}, {"T", "T0"}, {"x", "V_T"}, {"y", "V_T"}, {"z", "I0"}};
        return m;
    }
    if (name == "ndo") {
        models::NDOParams n;
        if (!circuit.empty()) throw ConfigError("model 'ndo' takes no circuit constants");
        reject_unknown(params, {"m", "c1", "c2", "c3", "k", "A", "alpha", "omega"}, "parameter");
        take(params, "m", n.m);
        take(params, "c1", n.c1);
        take(params, "c2", n.c2);
        take(params, "c3", n.c3);
        take(params, "k", n.k);
        take(params, "A", n.A);
        take(params, "omega", n.omega);
        double alpha = 1.0;
        take(params, "alpha", alpha);
        std::optional<DynSystem> sys;
        try {
            sys = models::ndo_autonomous_system(n, alpha);
        } catch (const ParameterDomainError& e) {
            throw ConfigError(e.what());
        }
        Model m{name, *sys, {}, {"omega_over_omega0"}, {}, {}};
        m.derived = [](const Vector& p) {
            const double w0 = std::sqrt(p[models::ndo_index::k] / p[models::ndo_index::m]);
            return std::vector<double>{p[models::ndo_index::omega] / w0};
        };
        return m;
    }
    throw ConfigError("unknown model '" + name + "' (known: colpitts, ndo)");
}

// ---------------------------------------------------------------------------
// Run configuration.

enum class StageType { Equilibrium, HopfCurve, Cycle, Iso };

inline const char* to_string(StageType t) {
    switch (t) {
        case StageType::Equilibrium: return "equilibrium";
        case StageType::HopfCurve: return "hopf_curve";
        case StageType::Cycle: return "cycle";
        case StageType::Iso: return "iso";
    }
    return "?";
}

struct Bound {
    std::string name;
    double lower;
    double upper;
};

struct Labels {
    std::string name;
    std::vector<double> values;
};

/// Where a cycle or iso stage starts.
struct StartSpec {
    std::string stage;
    std::string label;             // HB (Hopf point of an equilibrium stage), UZ, LP, EP, ST
    std::vector<double> values;    // restrict to labels with these values (empty: all)
    double epsilon = 0.05;         // Hopf starter amplitude
    int component = -1;            // Hopf starter pinned component (0-based), -1: automatic
    std::string file;              // restart from a labeled-solution file instead
};

struct SolverSettings {
    int mesh = collocation_defaults::intervals;
    int degree = collocation_defaults::degree;
    StepConfig step;
    int adapt_every = 0;
};

struct StageConfig {
    std::string name;
    StageType type = StageType::Cycle;
    std::vector<std::string> free;
    StartSpec start;
    std::vector<double> state;  // equilibrium start
    FourierSpec fourier;
    std::vector<Bound> bounds;
    std::vector<Labels> labels;
    int direction = 1;
    bool detect_folds = false;
    bool stop_at_labels = false;
    bool both_directions = false;
    std::string pin;  // iso: quantity held at the start label's value
    std::string scan_parameter;
    std::vector<double> scan_values;
    std::optional<int> max_steps;
    std::optional<double> max_step;
    std::optional<int> adapt_every;
};

struct RunConfig {
    std::string source;  // raw text, hashed into artifacts
    std::string model;
    std::map<std::string, double> parameters;
    std::map<std::string, double> circuit;
    SolverSettings solver;
    std::string output_dir;
    std::vector<StageConfig> stages;

    const StageConfig* stage(const std::string& name) const {
        for (const auto& s : stages)
            if (s.name == name) return &s;
        return nullptr;
    }
};

struct Overrides {
    std::optional<std::string> out_dir;
    std::optional<int> mesh;
    std::optional<int> degree;
    std::optional<int> max_steps;

    std::string canonical() const {
        std::ostringstream os;
        if (mesh) os << "mesh=" << *mesh << ";";
        if (degree) os << "degree=" << *degree << ";";
        if (max_steps) os << "max_steps=" << *max_steps << ";";
        return os.str();
    }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const RunConfig& cfg, const Overrides& ov) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg.source + '\0' + ov.canonical())));
    return buf;
}

namespace detail {

template <class T>
T scalar(const YAML::Node& n, const std::string& where) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where + ": malformed value");
    }
}

inline std::map<std::string, double> number_map(const YAML::Node& n, const std::string& where) {
    std::map<std::string, double> out;
    if (!n) return out;
    if (!n.IsMap()) throw ConfigError(where + ": expected a mapping");
    for (const auto& kv : n) out[kv.first.as<std::string>()] = scalar<double>(kv.second, where);
    return out;
}

inline std::vector<double> number_list(const YAML::Node& n, const std::string& where) {
    std::vector<double> out;
    if (!n) return out;
    if (n.IsScalar()) return {scalar<double>(n, where)};
    if (n.IsMap()) {
        // {from, to, step}
        const double a = scalar<double>(n["from"], where), b = scalar<double>(n["to"], where),
                     h = scalar<double>(n["step"], where);
        if (!(h > 0.0) || b < a) throw ConfigError(where + ": need from <= to and step > 0");
        const int count = static_cast<int>(std::floor((b - a) / h + 1e-9)) + 1;
        for (int i = 0; i < count; ++i) out.push_back(a + i * h);
        return out;
    }
    if (!n.IsSequence()) throw ConfigError(where + ": expected a list of numbers");
    for (const auto& v : n) out.push_back(scalar<double>(v, where));
    return out;
}

inline std::vector<HarmonicIndex> index_list(const YAML::Node& n, const std::string& where) {
    std::vector<HarmonicIndex> out;
    if (!n) return out;
    if (!n.IsSequence()) throw ConfigError(where + ": expected a list of [k, j] pairs");
    for (const auto& e : n) {
        if (!e.IsSequence() || e.size() != 2) throw ConfigError(where + ": each entry must be [k, j]");
        out.push_back({scalar<int>(e[0], where), scalar<int>(e[1], where) - 1});
    }
    return out;
}

inline FourierSpec fourier_spec(const YAML::Node& n, const std::string& where) {
    FourierSpec spec;
    if (!n) return spec;
    spec.sin_terms = index_list(n["sin"], where + ".sin");
    spec.cos_terms = index_list(n["cos"], where + ".cos");
    if (const auto k = n["kref"]) {
        KRef kr;
        const std::string kind = scalar<std::string>(k["kind"], where + ".kref.kind");
        if (kind == "harmonic") kr.kind = KRefKind::Harmonic;
        else if (kind == "ratio") kr.kind = KRefKind::Ratio;
        else if (kind == "energy") kr.kind = KRefKind::Energy;
        else throw ConfigError(where + ".kref.kind: expected harmonic, ratio or energy");
        kr.component = scalar<int>(k["component"], where + ".kref.component") - 1;
        kr.harmonics.clear();
        for (double h : number_list(k["harmonics"], where + ".kref.harmonics")) kr.harmonics.push_back(static_cast<int>(h));
        spec.kref = kr;
    }
    return spec;
}

inline StageType stage_type(const std::string& s, const std::string& where) {
    if (s == "equilibrium") return StageType::Equilibrium;
    if (s == "hopf_curve") return StageType::HopfCurve;
    if (s == "cycle") return StageType::Cycle;
    if (s == "iso") return StageType::Iso;
    throw ConfigError(where + ": unknown stage type '" + s + "'");
}

}  // namespace detail

/// Parses the YAML text of a run configuration (no validation beyond syntax and types).
inline RunConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: YAML syntax error: ") + e.what());
    }
    if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
    RunConfig cfg;
    cfg.source = text;
    if (!root["model"]) throw ConfigError("config: missing 'model'");
    cfg.model = detail::scalar<std::string>(root["model"], "model");
    cfg.parameters = detail::number_map(root["parameters"], "parameters");
    cfg.circuit = detail::number_map(root["circuit"], "circuit");
    if (const auto s = root["solver"]) {
        auto& sv = cfg.solver;
        if (s["mesh"]) sv.mesh = detail::scalar<int>(s["mesh"], "solver.mesh");
        if (s["degree"]) sv.degree = detail::scalar<int>(s["degree"], "solver.degree");
        if (s["max_steps"]) sv.step.max_steps = detail::scalar<int>(s["max_steps"], "solver.max_steps");
        if (s["max_step"]) sv.step.max_step = detail::scalar<double>(s["max_step"], "solver.max_step");
        if (s["initial_step"]) sv.step.initial_step = detail::scalar<double>(s["initial_step"], "solver.initial_step");
        if (s["newton_tol"]) sv.step.newton_tol = detail::scalar<double>(s["newton_tol"], "solver.newton_tol");
        if (s["adapt_every"]) sv.adapt_every = detail::scalar<int>(s["adapt_every"], "solver.adapt_every");
    }
    if (root["output"]) cfg.output_dir = detail::scalar<std::string>(root["output"], "output");
    const auto stages = root["stages"];
    if (!stages || !stages.IsSequence() || stages.size() == 0) throw ConfigError("config: 'stages' must be a non-empty list");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto n = stages[i];
        StageConfig st;
        const std::string where = "stages[" + std::to_string(i) + "]";
        st.name = n["name"] ? detail::scalar<std::string>(n["name"], where + ".name") : "stage" + std::to_string(i + 1);
        if (!n["type"]) throw ConfigError(where + ": missing 'type'");
        st.type = detail::stage_type(detail::scalar<std::string>(n["type"], where + ".type"), where);
        if (n["free"]) {
            if (!n["free"].IsSequence()) throw ConfigError(where + ".free: expected a list of names");
            for (const auto& f : n["free"]) st.free.push_back(detail::scalar<std::string>(f, where + ".free"));
        }
        if (const auto s = n["start"]) {
            if (s["stage"]) st.start.stage = detail::scalar<std::string>(s["stage"], where + ".start.stage");
            if (s["label"]) st.start.label = detail::scalar<std::string>(s["label"], where + ".start.label");
            st.start.values = detail::number_list(s["values"], where + ".start.values");
            if (s["epsilon"]) st.start.epsilon = detail::scalar<double>(s["epsilon"], where + ".start.epsilon");
            if (s["component"]) st.start.component = detail::scalar<int>(s["component"], where + ".start.component") - 1;
            if (s["file"]) st.start.file = detail::scalar<std::string>(s["file"], where + ".start.file");
        }
        st.state = detail::number_list(n["state"], where + ".state");
        st.fourier = detail::fourier_spec(n["fourier"], where + ".fourier");
        if (const auto b = n["bounds"]) {
            if (!b.IsMap()) throw ConfigError(where + ".bounds: expected name: [lower, upper]");
            for (const auto& kv : b) {
                const auto v = detail::number_list(kv.second, where + ".bounds");
                if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError(where + ".bounds: need [lower, upper] with lower < upper");
                st.bounds.push_back({kv.first.as<std::string>(), v[0], v[1]});
            }
        }
        if (const auto l = n["labels"]) {
            if (!l.IsMap()) throw ConfigError(where + ".labels: expected name: [values]");
            for (const auto& kv : l) st.labels.push_back({kv.first.as<std::string>(), detail::number_list(kv.second, where + ".labels")});
        }
        if (n["direction"]) st.direction = detail::scalar<int>(n["direction"], where + ".direction") < 0 ? -1 : 1;
        if (n["detect_folds"]) st.detect_folds = detail::scalar<bool>(n["detect_folds"], where + ".detect_folds");
        if (n["stop_at_labels"]) st.stop_at_labels = detail::scalar<bool>(n["stop_at_labels"], where + ".stop_at_labels");
        st.both_directions = st.type == StageType::Iso;
        if (n["both_directions"]) st.both_directions = detail::scalar<bool>(n["both_directions"], where + ".both_directions");
        if (n["pin"]) st.pin = detail::scalar<std::string>(n["pin"], where + ".pin");
        if (const auto s = n["scan"]) {
            st.scan_parameter = detail::scalar<std::string>(s["parameter"], where + ".scan.parameter");
            st.scan_values = detail::number_list(s["values"], where + ".scan.values");
        }
        if (n["max_steps"]) st.max_steps = detail::scalar<int>(n["max_steps"], where + ".max_steps");
        if (n["max_step"]) st.max_step = detail::scalar<double>(n["max_step"], where + ".max_step");
        if (n["adapt_every"]) st.adapt_every = detail::scalar<int>(n["adapt_every"], where + ".adapt_every");
        cfg.stages.push_back(std::move(st));
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

inline void apply_overrides(RunConfig& cfg, const Overrides& ov) {
    if (ov.out_dir) cfg.output_dir = *ov.out_dir;
    if (ov.mesh) cfg.solver.mesh = *ov.mesh;
    if (ov.degree) cfg.solver.degree = *ov.degree;
    if (ov.max_steps) {
        cfg.solver.step.max_steps = *ov.max_steps;
        for (auto& s : cfg.stages) s.max_steps = *ov.max_steps;
    }
}

/// Names of the BVP parameters a periodic stage may free or pin.
inline std::vector<std::string> bvp_parameter_names(const DynSystem& sys, const FourierSpec& spec) {
    std::vector<std::string> names = sys.param_names();
    for (auto& n : harmonic_free_names(spec)) names.push_back(std::move(n));
    return names;
}

/// Checks every stage before any computation: model, names, starts, and the free-parameter
/// count against the constraint set.
inline void validate(const RunConfig& cfg) {
    const Model model = make_model(cfg.model, cfg.parameters, cfg.circuit);
    const DynSystem& sys = model.system;
    if (cfg.solver.mesh < 1) throw ConfigError("solver.mesh must be >= 1");
    if (cfg.solver.degree < 1 || cfg.solver.degree > 10) throw ConfigError("solver.degree must lie in 1..10");
    std::vector<std::string> seen;
    for (const auto& st : cfg.stages) {
        const std::string ctx = "stage '" + st.name + "' (" + to_string(st.type) + ")";
        if (std::find(seen.begin(), seen.end(), st.name) != seen.end())
            throw ConfigError(ctx + ": duplicate stage name");
        auto check_bounds_and_labels = [&](const std::vector<std::string>& known) {
            for (const auto& b : st.bounds)
                if (std::find(known.begin(), known.end(), b.name) == known.end())
                    throw ConfigError(ctx + ": bound on unknown quantity '" + b.name + "'");
        };
        switch (st.type) {
            case StageType::Equilibrium:
            case StageType::HopfCurve: {
                check_counts(1, st.free.size(), false, ctx);
                sys.find_param(st.free[0]) ? void() : throw ConfigError(ctx + ": unknown parameter '" + st.free[0] + "'");
                if (!st.state.empty() && static_cast<int>(st.state.size()) != sys.dim())
                    throw ConfigError(ctx + ": state needs " + std::to_string(sys.dim()) + " entries");
                for (const auto& b : st.bounds)
                    if (b.name != st.free[0]) throw ConfigError(ctx + ": bounds apply to the free parameter only");
                if (st.type == StageType::HopfCurve) {
                    if (!sys.find_param(st.scan_parameter))
                        throw ConfigError(ctx + ": unknown scan parameter '" + st.scan_parameter + "'");
                    if (st.scan_parameter == st.free[0]) throw ConfigError(ctx + ": scan parameter must differ from the free one");
                    if (st.scan_values.empty()) throw ConfigError(ctx + ": empty scan");
                }
                break;
            }
            case StageType::Cycle:
            case StageType::Iso: {
                try {
                    st.fourier.validate(sys.dim());
                } catch (const ConfigError& e) {
                    throw ConfigError(ctx + ": " + e.what());
                }
                check_counts(static_cast<std::size_t>(st.fourier.constraint_count()), st.free.size(), true, ctx);
                const auto known = bvp_parameter_names(sys, st.fourier);
                for (std::size_t i = 0; i < st.free.size(); ++i) {
                    if (std::find(known.begin(), known.end(), st.free[i]) == known.end())
                        throw ConfigError(ctx + ": unknown free parameter '" + st.free[i] + "'");
                    for (std::size_t j = 0; j < i; ++j)
                        if (st.free[i] == st.free[j]) throw ConfigError(ctx + ": '" + st.free[i] + "' listed twice");
                }
                if (!sys.find_param(st.free[0]))
                    throw ConfigError(ctx + ": the first free parameter must be a system parameter");
                check_bounds_and_labels(known);
                for (const auto& l : st.labels) {
                    bool ok = std::find(known.begin(), known.end(), l.name) != known.end();
                    for (const auto& t : st.fourier.sin_terms) ok = ok || l.name == amplitude_name(t.k, t.j);
                    if (!ok) throw ConfigError(ctx + ": label on unknown quantity '" + l.name + "'");
                }
                if (st.type == StageType::Iso) {
                    if (st.pin.empty()) throw ConfigError(ctx + ": iso stage needs 'pin'");
                    if (std::find(known.begin(), known.end(), st.pin) == known.end())
                        throw ConfigError(ctx + ": unknown pinned quantity '" + st.pin + "'");
                    if (std::find(st.free.begin(), st.free.end(), st.pin) != st.free.end())
                        throw ConfigError(ctx + ": pinned quantity '" + st.pin + "' is also free");
                }
                if (st.start.file.empty()) {
                    const StageConfig* from = cfg.stage(st.start.stage);
                    if (!from || std::find(seen.begin(), seen.end(), st.start.stage) == seen.end())
                        throw ConfigError(ctx + ": start stage '" + st.start.stage + "' is not an earlier stage");
                    if (st.start.label == "HB") {
                        if (from->type != StageType::Equilibrium)
                            throw ConfigError(ctx + ": HB starts need an equilibrium stage");
                        if (!(st.start.epsilon > 0.0)) throw ConfigError(ctx + ": start.epsilon must be positive");
                    } else if (from->type != StageType::Cycle && from->type != StageType::Iso) {
                        throw ConfigError(ctx + ": label '" + st.start.label + "' needs a periodic-orbit stage");
                    }
                }
                break;
            }
        }
        seen.push_back(st.name);
    }
}

}  // namespace harmocont::cli
