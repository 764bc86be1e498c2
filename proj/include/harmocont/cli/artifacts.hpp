#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../harmonic.hpp"
#include "config.hpp"

namespace harmocont::cli {

using Json = nlohmann::ordered_json;

namespace artifact_defaults {
inline constexpr int solution_kmax = 8;
}

/// Round-trip formatting (17 significant digits).
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// In-memory branch file: '#'-prefixed header lines, then a CSV table with a fixed column set.
/// Text cells (label, label_info, solution) and numeric cells share one row type.
struct BranchTable {
    std::vector<std::pair<std::string, std::string>> header;  // "# key: value"
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }
    std::string header_value(const std::string& key) const {
        for (const auto& [k, v] : header)
            if (k == key) return v;
        return {};
    }
    void add_row(std::vector<std::string> row) {
        if (row.size() != columns.size())
            throw ContractViolation("branch table: row has " + std::to_string(row.size()) + " cells, expected " +
                                    std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }
};

inline void write_table(const BranchTable& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (const auto& [k, v] : t.header) out << "# " << k << ": " << v << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline BranchTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read branch file '" + path.string() + "'");
    BranchTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(": ");
            if (colon == std::string::npos) continue;
            t.header.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
            continue;
        }
        if (t.columns.empty()) {
            t.columns = split(line);
            continue;
        }
        auto cells = split(line);
        if (cells.size() != t.columns.size())
            throw IoError("branch file '" + path.string() + "': ragged row");
        t.rows.push_back(std::move(cells));
    }
    if (t.columns.empty()) throw IoError("branch file '" + path.string() + "' has no column line");
    return t;
}

/// "name=unit" list for the units header line.
inline std::string units_line(const Model& model, const std::vector<std::string>& columns) {
    std::string out;
    for (const auto& c : columns)
        if (auto it = model.units.find(c); it != model.units.end()) out += (out.empty() ? "" : " ") + c + "=" + it->second;
    return out.empty() ? "dimensionless" : out;
}

inline std::map<std::string, std::string> parse_units(const std::string& line) {
    std::map<std::string, std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (ss >> tok)
        if (auto eq = tok.find('='); eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    return out;
}

// ---------------------------------------------------------------------------
// Labeled-solution files.

struct SolutionFile {
    std::string model;
    std::map<std::string, double> parameters;  // model parameters by name
    std::map<std::string, double> circuit;
    std::string stage;
    std::string label;
    std::string label_info;
    std::vector<std::string> free;
    FourierSpec fourier;
    PeriodicOrbit orbit;
    std::map<HarmonicIndex, std::pair<double, double>> coefficients;
    Vector means;
};

inline Json spec_json(const FourierSpec& spec) {
    Json j;
    auto pairs = [](const std::vector<HarmonicIndex>& v) {
        Json a = Json::array();
        for (const auto& t : v) a.push_back({t.k, t.j + 1});
        return a;
    };
    j["sin"] = pairs(spec.sin_terms);
    j["cos"] = pairs(spec.cos_terms);
    if (spec.kref) {
        static const char* kinds[] = {"harmonic", "ratio", "energy"};
        j["kref"] = {{"kind", kinds[static_cast<int>(spec.kref->kind)]},
                     {"component", spec.kref->component + 1},
                     {"harmonics", spec.kref->harmonics}};
    }
    return j;
}

inline FourierSpec spec_from_json(const Json& j) {
    FourierSpec spec;
    for (const auto& p : j.at("sin")) spec.sin_terms.push_back({p.at(0).get<int>(), p.at(1).get<int>() - 1});
    for (const auto& p : j.at("cos")) spec.cos_terms.push_back({p.at(0).get<int>(), p.at(1).get<int>() - 1});
    if (j.contains("kref")) {
        const auto& k = j["kref"];
        const std::string kind = k.at("kind").get<std::string>();
        KRef kr;
        kr.kind = kind == "ratio" ? KRefKind::Ratio : kind == "energy" ? KRefKind::Energy : KRefKind::Harmonic;
        kr.component = k.at("component").get<int>() - 1;
        kr.harmonics = k.at("harmonics").get<std::vector<int>>();
        spec.kref = kr;
    }
    return spec;
}

inline Json solution_json(const SolutionFile& s) {
    Json j;
    j["model"] = s.model;
    j["stage"] = s.stage;
    j["label"] = s.label;
    j["label_info"] = s.label_info;
    j["parameters"] = s.parameters;
    j["circuit"] = s.circuit;
    j["period"] = s.orbit.period;
    j["free"] = s.free;
    j["fourier"] = spec_json(s.fourier);
    j["mesh"] = {{"degree", s.orbit.mesh.degree()}, {"breaks", s.orbit.mesh.breaks()}};
    Json states = Json::array();
    for (int g = 0; g < s.orbit.mesh.points(); ++g) {
        std::vector<double> col(s.orbit.states.col(g).data(), s.orbit.states.col(g).data() + s.orbit.dim());
        states.push_back(col);
    }
    j["states"] = std::move(states);
    j["means"] = std::vector<double>(s.means.data(), s.means.data() + s.means.size());
    Json coeffs = Json::array();
    for (const auto& [idx, ab] : s.coefficients)
        coeffs.push_back({{"k", idx.k}, {"j", idx.j + 1}, {"a", ab.first}, {"b", ab.second}});
    j["coefficients"] = std::move(coeffs);
    return j;
}

inline SolutionFile make_solution(const Model& model, const RunConfig& cfg, const std::string& stage,
                                  const OrbitBranchPoint& pt, const std::vector<std::string>& free,
                                  const FourierSpec& spec) {
    SolutionFile s;
    s.model = model.name;
    const auto& names = model.system.param_names();
    for (std::size_t i = 0; i < names.size(); ++i) s.parameters[names[i]] = pt.orbit.params[static_cast<Eigen::Index>(i)];
    s.circuit = cfg.circuit;
    s.stage = stage;
    s.label = pt.label;
    s.label_info = pt.label_info;
    s.free = free;
    s.fourier = spec;
    s.orbit = pt.orbit;
    const HarmonicCoefficients hc = harmonic_coefficients(pt.orbit, artifact_defaults::solution_kmax);
    s.coefficients = hc.terms;
    s.means = hc.mean;
    return s;
}

inline void write_json(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline SolutionFile read_solution(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read solution file '" + path.string() + "'");
    SolutionFile s;
    try {
        const Json j = Json::parse(in);
        s.model = j.at("model").get<std::string>();
        s.stage = j.value("stage", "");
        s.label = j.value("label", "");
        s.label_info = j.value("label_info", "");
        s.parameters = j.at("parameters").get<std::map<std::string, double>>();
        s.circuit = j.value("circuit", std::map<std::string, double>{});
        s.free = j.value("free", std::vector<std::string>{});
        s.fourier = spec_from_json(j.at("fourier"));
        s.orbit.mesh = Mesh(j.at("mesh").at("breaks").get<std::vector<double>>(), j.at("mesh").at("degree").get<int>());
        const auto& states = j.at("states");
        if (states.empty() || static_cast<int>(states.size()) != s.orbit.mesh.points())
            throw IoError("solution file '" + path.string() + "': state count does not match the mesh");
        const int n = static_cast<int>(states.at(0).size());
        s.orbit.states.resize(n, s.orbit.mesh.points());
        for (int g = 0; g < s.orbit.mesh.points(); ++g) {
            const auto col = states.at(g).get<std::vector<double>>();
            if (static_cast<int>(col.size()) != n) throw IoError("solution file '" + path.string() + "': ragged states");
            for (int r = 0; r < n; ++r) s.orbit.states(r, g) = col[r];
        }
        s.orbit.period = j.at("period").get<double>();
        const auto means = j.value("means", std::vector<double>{});
        s.means = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
        for (const auto& c : j.at("coefficients"))
            s.coefficients[{c.at("k").get<int>(), c.at("j").get<int>() - 1}] = {c.at("a").get<double>(),
                                                                               c.at("b").get<double>()};
    } catch (const Json::exception& e) {
        throw IoError("solution file '" + path.string() + "' is malformed: " + e.what());
    } catch (const ContractViolation& e) {
        throw IoError("solution file '" + path.string() + "' is malformed: " + e.what());
    }
    const Model model = make_model(s.model, s.parameters, s.circuit);
    s.orbit.params = model.system.default_params();
    if (s.orbit.params.size() != static_cast<Eigen::Index>(s.parameters.size()))
        throw IoError("solution file '" + path.string() + "': parameter set does not match model '" + s.model + "'");
    return s;
}

}  // namespace harmocont::cli
