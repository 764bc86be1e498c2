#pragma once

#include <fnmatch.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "artifacts.hpp"
#include "config.hpp"

namespace harmocont::cli {

struct ChartAxis {
    std::string column;
    std::string label;
    std::string unit;
};

struct ChartCurveSource {
    std::string file;   // single branch file
    std::string files;  // or a glob on the file name
    std::string id;
};

struct ChartSpec {
    std::string chart;
    std::string title;
    std::vector<ChartAxis> axes;
    std::vector<ChartCurveSource> curves;
    std::filesystem::path base;    // directory of branch files
    std::filesystem::path output;  // stem of the .csv/.json outputs
};

struct ChartCurve {
    std::string id;
    std::string file;
    std::map<std::string, std::string> constants;
    std::vector<std::vector<std::string>> points;  // axis cells
};

struct ChartData {
    ChartSpec spec;
    std::vector<ChartCurve> curves;
};

/// Parses a chart spec; relative `base` and `output` resolve against `dir`.
inline ChartSpec parse_chart_spec(const std::string& text, const std::filesystem::path& dir = {}) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("chart spec: YAML syntax error: ") + e.what());
    }
    if (!root.IsMap()) throw ConfigError("chart spec: top level must be a mapping");
    ChartSpec c;
    c.chart = root["chart"] ? detail::scalar<std::string>(root["chart"], "chart") : "chart";
    c.title = root["title"] ? detail::scalar<std::string>(root["title"], "title") : c.chart;
    const auto axes = root["axes"];
    if (!axes || !axes.IsSequence() || axes.size() < 2) throw ConfigError("chart spec: need at least two axes");
    for (const auto& a : axes) {
        ChartAxis ax;
        ax.column = detail::scalar<std::string>(a["column"], "axes.column");
        ax.label = a["label"] ? detail::scalar<std::string>(a["label"], "axes.label") : ax.column;
        if (a["unit"]) ax.unit = detail::scalar<std::string>(a["unit"], "axes.unit");
        c.axes.push_back(std::move(ax));
    }
    if (const auto curves = root["curves"]) {
        if (!curves.IsSequence()) throw ConfigError("chart spec: 'curves' must be a list");
        for (const auto& n : curves) {
            ChartCurveSource s;
            if (n["file"]) s.file = detail::scalar<std::string>(n["file"], "curves.file");
            if (n["files"]) s.files = detail::scalar<std::string>(n["files"], "curves.files");
            if (s.file.empty() == s.files.empty()) throw ConfigError("chart spec: each curve needs exactly one of file, files");
            if (n["id"]) s.id = detail::scalar<std::string>(n["id"], "curves.id");
            c.curves.push_back(std::move(s));
        }
    }
    c.base = root["base"] ? std::filesystem::path(detail::scalar<std::string>(root["base"], "base")) : ".";
    c.output = root["output"] ? std::filesystem::path(detail::scalar<std::string>(root["output"], "output"))
                              : std::filesystem::path(c.chart);
    if (c.base.is_relative()) c.base = dir / c.base;
    if (c.output.is_relative()) c.output = dir / c.output;
    return c;
}

inline ChartSpec load_chart_spec(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read chart spec '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_chart_spec(os.str(), path.parent_path());
}

namespace detail {

inline std::vector<std::filesystem::path> expand(const std::filesystem::path& base, const ChartCurveSource& s) {
    if (!s.file.empty()) return {base / s.file};
    const std::filesystem::path pattern = base / s.files;
    const std::filesystem::path dir = pattern.parent_path();
    const std::string name = pattern.filename().string();
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && fnmatch(name.c_str(), e.path().filename().c_str(), 0) == 0) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Collects the axis columns of every curve. A missing column is a ConfigError naming it.
inline ChartData collect_chart(const ChartSpec& spec) {
    ChartData data{spec, {}};
    for (const auto& src : spec.curves) {
        for (const auto& path : detail::expand(spec.base, src)) {
            const BranchTable t = read_table(path);
            ChartCurve c;
            c.file = path.filename().string();
            const std::string constant = t.header_value("constant");
            if (!constant.empty()) {
                const auto eq = constant.find('=');
                c.constants[constant.substr(0, eq)] = eq == std::string::npos ? "" : constant.substr(eq + 1);
            }
            const std::string stem = path.stem().string();
            const std::string tail = constant.empty() ? stem : constant;
            c.id = src.id.empty() ? tail : (src.file.empty() ? src.id + ":" + tail : src.id);
            std::vector<int> cols;
            for (const auto& ax : spec.axes) {
                const int i = t.column(ax.column);
                if (i < 0) throw ConfigError("export: column '" + ax.column + "' missing in '" + path.string() + "'");
                cols.push_back(i);
            }
            for (const auto& r : t.rows) {
                std::vector<std::string> cells;
                for (int i : cols) cells.push_back(r[i]);
                if (std::any_of(cells.begin(), cells.end(), [](const std::string& s) { return s.empty(); })) continue;
                c.points.push_back(std::move(cells));
            }
            data.curves.push_back(std::move(c));
        }
    }
    // Axis units default to those recorded in the first branch file that has them.
    for (auto& ax : data.spec.axes) {
        if (!ax.unit.empty()) continue;
        for (const auto& src : spec.curves) {
            for (const auto& path : detail::expand(spec.base, src)) {
                const auto units = parse_units(read_table(path).header_value("units"));
                if (auto it = units.find(ax.column); it != units.end()) ax.unit = it->second;
                break;
            }
            if (!ax.unit.empty()) break;
        }
    }
    return data;
}

/// Writes `<output>.csv` (curve, axis columns) and `<output>.json` (manifest); returns their paths.
inline std::pair<std::filesystem::path, std::filesystem::path> write_chart(const ChartData& data) {
    std::filesystem::path csv = data.spec.output, manifest = data.spec.output;
    csv += ".csv";
    manifest += ".json";
    if (csv.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(csv.parent_path(), ec);
        if (ec) throw IoError("cannot create '" + csv.parent_path().string() + "': " + ec.message());
    }
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw IoError("cannot write '" + csv.string() + "'");
    out << "curve";
    for (const auto& ax : data.spec.axes) out << "," << ax.column;
    out << '\n';
    for (const auto& c : data.curves)
        for (const auto& p : c.points) {
            out << c.id;
            for (const auto& v : p) out << "," << v;
            out << '\n';
        }
    if (!out) throw IoError("write failed for '" + csv.string() + "'");

    Json j;
    j["chart"] = data.spec.chart;
    j["title"] = data.spec.title;
    j["data"] = csv.filename().string();
    Json axes = Json::array();
    for (const auto& ax : data.spec.axes) axes.push_back({{"column", ax.column}, {"label", ax.label}, {"unit", ax.unit}});
    j["axes"] = std::move(axes);
    Json curves = Json::array();
    for (const auto& c : data.curves)
        curves.push_back({{"id", c.id}, {"file", c.file}, {"points", c.points.size()}, {"constants", c.constants}});
    j["curves"] = std::move(curves);
    write_json(j, manifest);
    return {csv, manifest};
}

}  // namespace harmocont::cli
