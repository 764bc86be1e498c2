// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <unistd.h>
#include <unsupported/Eigen/FFT>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "harmocont/cli/app.hpp"
#include "oracles.hpp"

using namespace harmocont;
using namespace harmocont::cli;
namespace fs = std::filesystem;
namespace hm = harmocont::models;
constexpr double pi = std::numbers::pi;

namespace {

const fs::path scenario_dir = HARMOCONT_SCENARIO_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string num(double v, const char* f = "%.3g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Scenario {
    std::string name;
    RunResult result;
    double seconds = 0.0;
};

fs::path work_dir() {
    static const fs::path p = [] {
        const fs::path d = fs::temp_directory_path() / ("harmocont-acceptance-" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

const std::vector<std::string> scenario_names{"colpitts-hopf",      "colpitts-cycle",     "colpitts-iso-a1",
                                              "colpitts-iso-a2",    "colpitts-iso-period", "colpitts-iso-ratio",
                                              "ndo-freq-response"};

std::map<std::string, Scenario>& scenarios() {
    static std::map<std::string, Scenario> all = [] {
        std::map<std::string, Scenario> out;
        for (const auto& name : scenario_names) {
            Scenario s{name, {}, 0.0};
            RunOptions ro;
            ro.overrides.out_dir = (work_dir() / name).string();
            const auto t0 = std::chrono::steady_clock::now();
            s.result = run(load_config(scenario_dir / (name + ".cfg")), ro);
            s.seconds = seconds_since(t0);
            if (s.result.exit_code != exit_code::ok)
                std::fprintf(stderr, "scenario %s: %s: %s\n", name.c_str(), s.result.status.c_str(),
                             s.result.message.c_str());
            out.emplace(name, std::move(s));
        }
        return out;
    }();
    return all;
}

const RunResult& scenario(const std::string& name) { return scenarios().at(name).result; }

void require_ok(const RunResult& r, const std::string& name) {
    if (r.exit_code != exit_code::ok) throw std::runtime_error("scenario " + name + " failed: " + r.message);
}

/// n x count matrix of interpolant values at s = i / count.
Matrix dense_samples(const PeriodicOrbit& orbit, int count) {
    Matrix out(orbit.dim(), count);
    for (int i = 0; i < count; ++i) out.col(i) = eval_orbit(orbit, static_cast<double>(i) / count);
    return out;
}

/// (a_k, b_k), k = 0..kmax, of one sampled row by FFT.
std::vector<std::pair<double, double>> fft_row(const Eigen::RowVectorXd& row, int kmax) {
    const int M = static_cast<int>(row.size());
    std::vector<double> x(row.data(), row.data() + M);
    std::vector<std::complex<double>> X;
    Eigen::FFT<double> fft;
    fft.fwd(X, x);
    std::vector<std::pair<double, double>> out{{X[0].real() / M, 0.0}};
    for (int k = 1; k <= kmax; ++k) out.emplace_back(-2.0 * X[k].imag() / M, 2.0 * X[k].real() / M);
    return out;
}

/// K_REF from amplitudes, written out independently of the library.
double kref_formula(const KRef& kr, const std::function<double(int)>& amp) {
    switch (kr.kind) {
        case KRefKind::Harmonic: return amp(kr.harmonics[0]);
        case KRefKind::Ratio: return amp(kr.harmonics[0]) / amp(kr.harmonics[1]);
        case KRefKind::Energy: {
            double s = 0.0;
            for (int k : kr.harmonics) s += amp(k) * amp(k);
            return s;
        }
    }
    return 0.0;
}

std::vector<const BranchRecord*> periodic_branches(const RunResult& r) {
    std::vector<const BranchRecord*> out;
    for (const auto& s : r.stages)
        for (const auto& b : s.branches)
            if (b.run) out.push_back(&b);
    return out;
}

const HopfPoint& only_hopf(const RunResult& r, const std::string& stage) {
    const auto& hs = r.stage(stage)->branches.at(0).equilibria->hopf_points;
    if (hs.size() != 1) throw std::runtime_error("expected one Hopf point in " + stage + ", found " + std::to_string(hs.size()));
    return hs.front();
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    RunOptions ro;
    ro.write = false;
    const RunResult r = run(load_config(scenario_dir / "colpitts-hopf.cfg"), ro);
    const double secs = seconds_since(t0);
    require_ok(r, "colpitts-hopf");
    const HopfPoint& h = only_hopf(r, "eq");
    const double G = h.equilibrium.p[hm::colpitts_index::G];
    Outcome o;
    o.pass = std::abs(G - 1.0) <= 1e-6 && secs <= 1.0;
    o.detail = "G_H = " + num(G, "%.12f") + ", |dG| = " + num(std::abs(G - 1.0)) + " (tol 1e-6), run " + num(secs) +
               " s (limit 1 s)";
    return o;
}

Outcome criterion2() {
    const RunResult& r = scenario("ndo-freq-response");
    require_ok(r, "ndo-freq-response");
    const HopfPoint& h = only_hopf(r, "eq");
    const double alpha = h.equilibrium.p[hm::ndo_index::alpha];
    const double beta = h.equilibrium.p[hm::ndo_index::omega];
    Outcome o;
    o.pass = std::abs(alpha) <= 1e-8 && std::abs(h.omega - beta) <= 1e-8;
    o.detail = "alpha_H = " + num(alpha) + ", |omega_H - beta| = " + num(std::abs(h.omega - beta)) + " (tol 1e-8)";
    return o;
}

double starter_error(const HopfPoint& h, const DynSystem& sys, double eps) {
    StarterOptions so;
    so.kmax = 2;
    const StarterResult s = hopf_starter(h, sys, eps, so);
    double e = (s.guess_coefficients.mean - s.coefficients.mean).cwiseAbs().maxCoeff();
    for (const auto& [idx, ab] : s.coefficients.terms) {
        const auto& g = s.guess_coefficients.terms.at(idx);
        e = std::max({e, std::abs(g.first - ab.first), std::abs(g.second - ab.second)});
    }
    return e;
}

Outcome criterion3() {
    Outcome o;
    const std::vector<std::pair<std::string, const RunResult*>> cases{
        {"colpitts", &scenario("colpitts-cycle")}, {"ndo", &scenario("ndo-freq-response")}};
    for (const auto& [name, r] : cases) {
        require_ok(*r, name);
        const HopfPoint& h = only_hopf(*r, "eq");
        const double e2 = starter_error(h, r->model->system, 1e-2), e3 = starter_error(h, r->model->system, 1e-3);
        const double ratio = e2 / e3;
        o.pass = o.pass && ratio >= 50.0 && ratio <= 200.0;
        o.detail += (o.detail.empty() ? "" : "; ") + name + " err(1e-2) = " + num(e2) + ", err(1e-3) = " + num(e3) +
                    ", ratio " + num(ratio, "%.1f");
    }
    o.detail += " (window [50, 200])";
    return o;
}

Outcome criterion4() {
    constexpr int kmax = 8, samples = 4096;
    double worst = 0.0;
    std::size_t orbits = 0;
    std::vector<std::future<std::pair<double, std::size_t>>> jobs;
    for (const auto& name : scenario_names) {
        const RunResult& r = scenario(name);
        require_ok(r, name);
        for (const BranchRecord* b : periodic_branches(r))
            jobs.push_back(std::async(std::launch::async, [b] {
                double w = 0.0;
                for (const auto& pt : b->run->branch.points) {
                    const HarmonicCoefficients hc = harmonic_coefficients(pt.orbit, kmax);
                    const Matrix x = dense_samples(pt.orbit, samples);
                    for (int j = 0; j < pt.orbit.dim(); ++j) {
                        const auto ref = fft_row(x.row(j), kmax);
                        w = std::max(w, std::abs(hc.mean[j] - ref[0].first));
                        for (int k = 1; k <= kmax; ++k) {
                            const auto& ab = hc.terms.at({k, j});
                            w = std::max({w, std::abs(ab.first - ref[k].first), std::abs(ab.second - ref[k].second)});
                        }
                    }
                }
                return std::pair{w, b->run->branch.points.size()};
            }));
    }
    for (auto& j : jobs) {
        const auto [w, n] = j.get();
        worst = std::max(worst, w);
        orbits += n;
    }
    Outcome o;
    o.pass = orbits > 0 && worst < 1e-6;
    o.detail = std::to_string(orbits) + " orbits, max |quadrature - FFT| = " + num(worst) + " (tol 1e-6)";
    return o;
}

Outcome criterion5() {
    int checked = 0, unstable = 0;
    double worst = 0.0;
    std::string worst_file;
    std::vector<std::pair<fs::path, std::future<VerifyReport>>> jobs;
    for (const auto& name : scenario_names) {
        const RunResult& r = scenario(name);
        require_ok(r, name);
        for (const BranchRecord* b : periodic_branches(r))
            for (const auto& sol : b->solutions) {
                const fs::path p = r.out_dir / sol;
                jobs.emplace_back(p, std::async(std::launch::async, [p] {
                                      const SolutionFile s = read_solution(p);
                                      const Model m = make_model(s.model, s.parameters, s.circuit);
                                      return verify_orbit(m.system, s.orbit, s.coefficients);
                                  }));
            }
    }
    for (auto& [path, job] : jobs) {
        const VerifyReport rep = job.get();
        if (rep.status == VerifyStatus::Unstable) {
            ++unstable;
            continue;
        }
        ++checked;
        if (rep.return_map_error > worst) {
            worst = rep.return_map_error;
            worst_file = path.parent_path().filename().string() + "/" + path.filename().string();
        }
    }
    Outcome o;
    o.pass = checked > 0 && worst < 1e-5;
    o.detail = std::to_string(checked) + " stable labeled orbits (" + std::to_string(unstable) +
               " unstable skipped), max return-map error " + num(worst) + " at " + worst_file + " (tol 1e-5)";
    return o;
}

Outcome criterion6() {
    struct Family {
        std::string scenario;
        std::vector<double> expected;
    };
    std::vector<double> a1, period;
    for (int k = 1; k <= 25; k += 3) a1.push_back(k);
    for (int i = 0; i <= 8; ++i) period.push_back(6.3 + 0.3 * i);
    const std::vector<Family> families{
        {"colpitts-iso-a1", a1}, {"colpitts-iso-period", period}, {"colpitts-iso-ratio", {5, 4, 3}}};
    const ParameterBound qbox{"Q", 0.3, 2.5}, gbox{"G", 0.5, 12.0};

    Outcome o;
    double worst_pin = 0.0, worst_oracle = 0.0;
    int curves = 0, crossing = 0, points = 0;
    for (const auto& fam : families) {
        const RunResult& r = scenario(fam.scenario);
        require_ok(r, fam.scenario);
        const auto& iso = r.stage("iso")->branches;
        std::vector<double> got;
        for (const auto& b : iso) {
            const std::string pin = b.options.pins.begin()->first;
            const double target = b.options.pins.begin()->second;
            got.push_back(target);
            ++curves;
            const auto& pts = b.run->branch.points;
            for (const auto& pt : pts) {
                double v = pt.orbit.period;
                if (pin == "K") {
                    const auto& kr = *b.spec.kref;
                    const int kmax = *std::max_element(kr.harmonics.begin(), kr.harmonics.end());
                    v = kref_value(harmonic_coefficients(pt.orbit, kmax), kr);
                }
                worst_pin = std::max(worst_pin, std::abs(v - target));
                ++points;
            }
            // Both ends on the boundary of the charted window.
            auto on_edge = [&](const OrbitBranchPoint& pt) {
                const double Q = pt.orbit.params[hm::colpitts_index::Q], G = pt.orbit.params[hm::colpitts_index::G];
                const bool inside = Q >= qbox.lower - 1e-9 && Q <= qbox.upper + 1e-9 && G >= gbox.lower - 1e-9 &&
                                    G <= gbox.upper + 1e-9;
                const bool edge = std::min({std::abs(Q - qbox.lower), std::abs(Q - qbox.upper), std::abs(G - gbox.lower),
                                            std::abs(G - gbox.upper)}) < 1e-8;
                return inside && edge && pt.label == "EP";
            };
            if (on_edge(pts.front()) && on_edge(pts.back())) ++crossing;
            // Time integration + DFT at three interior points.
            const int comp = pin == "K" ? b.spec.kref->component : 1;
            for (double frac : {0.25, 0.5, 0.75}) {
                const auto& pt = pts[static_cast<std::size_t>(frac * static_cast<double>(pts.size() - 1))];
                const int count = 512;
                const auto traj = oracle::sample(r.model->system, eval_orbit(pt.orbit, 0.0), pt.orbit.params, 0.0,
                                                 pt.orbit.period, count);
                std::vector<double> y(count);
                for (int i = 0; i < count; ++i) y[i] = traj[i][comp];
                auto amp = [&](int k) {
                    const auto [a, bb] = oracle::dft_coefficient(y, k);
                    return std::hypot(a, bb);
                };
                const HarmonicCoefficients hc = harmonic_coefficients(pt.orbit, 2);
                worst_oracle = std::max(worst_oracle, std::abs(amp(1) - hc.amplitude(1, comp)) / hc.amplitude(1, comp));
                if (pin == "K") {
                    const double k_oracle = kref_formula(*b.spec.kref, amp);
                    worst_oracle = std::max(worst_oracle, std::abs(k_oracle - target) / std::abs(target));
                }
            }
        }
        std::sort(got.begin(), got.end());
        std::vector<double> want = fam.expected;
        std::sort(want.begin(), want.end());
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) same = std::abs(got[i] - want[i]) < 1e-9;
        if (!same) {
            o.pass = false;
            o.detail += fam.scenario + ": pinned values differ from the label list; ";
        }
    }
    o.pass = o.pass && worst_pin < 1e-8 && crossing == curves && worst_oracle < 1e-4;
    o.detail += std::to_string(curves) + " curves, " + std::to_string(points) + " points, max pin deviation " +
                num(worst_pin) + " (tol 1e-8), " + std::to_string(crossing) + "/" + std::to_string(curves) +
                " cross the (R, I0) window, oracle amplitude error " + num(worst_oracle) + " (tol 1e-4)";
    return o;
}

Outcome criterion7() {
    const Scenario& s = scenarios().at("ndo-freq-response");
    require_ok(s.result, s.name);
    const auto& branch = s.result.stage("sweep")->branches.at(0).run->branch;
    const int w = s.result.model->system.param_index("omega");
    const double w0 = hm::NDOParams{}.omega0();
    std::vector<double> folds;
    for (const auto* pt : branch.labeled("LP")) folds.push_back(pt->parameters[w] / w0);
    Outcome o;
    if (folds.size() != 2) {
        o.pass = false;
        o.detail = std::to_string(folds.size()) + " fold labels (need exactly 2)";
        return o;
    }
    const double lo = std::min(folds[0], folds[1]), hi = std::max(folds[0], folds[1]);
    // Multivalued: the mid frequency is crossed three times.
    int crossings = 0;
    const double mid = 0.5 * (lo + hi);
    for (std::size_t i = 1; i < branch.points.size(); ++i) {
        const double a = branch.points[i - 1].parameters[w] / w0 - mid, b = branch.points[i].parameters[w] / w0 - mid;
        if (a * b < 0.0) ++crossings;
    }

    hm::NDOParams np;
    const DynSystem forced = hm::ndo_forced_system(np);
    Vector p = forced.default_params();
    std::vector<double> up;
    for (double r = 0.66; r <= 0.76 + 1e-12; r += 0.001) up.push_back(r * w0);
    std::vector<double> down(up.rbegin(), up.rend());
    auto jump_at = [&](const std::vector<double>& omegas) {
        const auto amps = oracle::frequency_sweep(forced, p, 6, 1, omegas);
        std::size_t best = 1;
        for (std::size_t i = 1; i < amps.size(); ++i)
            if (std::abs(amps[i] - amps[i - 1]) > std::abs(amps[best] - amps[best - 1])) best = i;
        return std::pair{0.5 * (omegas[best] + omegas[best - 1]) / w0, std::abs(amps[best] - amps[best - 1])};
    };
    auto fu = std::async(std::launch::async, jump_at, up);
    auto fd = std::async(std::launch::async, jump_at, down);
    const auto [ju, su] = fu.get();
    const auto [jd, sd] = fd.get();
    auto nearest = [&](double x) { return std::min(std::abs(x - lo) / lo, std::abs(x - hi) / hi); };
    const double eu = nearest(ju), ed = nearest(jd);
    o.pass = crossings == 3 && eu <= 0.02 && ed <= 0.02 && ju >= jd && s.seconds <= 60.0;
    o.detail = "folds at omega/omega0 = " + num(lo, "%.5f") + ", " + num(hi, "%.5f") + " (" + std::to_string(crossings) +
               " branch crossings of the midpoint); sweep jumps up at " + num(ju, "%.4f") + " (size " + num(su) +
               ", off " + num(100 * eu, "%.2f") + "%), down at " + num(jd, "%.4f") + " (size " + num(sd) + ", off " +
               num(100 * ed, "%.2f") + "%), limit 2%; scenario " + num(s.seconds) + " s (limit 60 s)";
    return o;
}

Outcome criterion8() {
    // x' = mu x - y, y' = x + mu y; the unit circle with period 2 pi, radius fixed by b_11 = 1.
    DynSystem::Definition def;
    def.name = "rotation";
    def.state_names = {"x", "y"};
    def.param_names = {"mu"};
    def.params = Vector::Zero(1);
    def.rhs = [](ConstVecRef s, double, ConstVecRef p, VecRef d) {
        d[0] = p[0] * s[0] - s[1];
        d[1] = s[0] + p[0] * s[1];
    };
    const DynSystem sys(std::move(def));
    Outcome o;
    for (int m : {3, 4}) {
        std::vector<double> errors;
        for (int N : {4, 8, 16}) {
            const Mesh mesh = Mesh::uniform(N, m);
            BvpParameters bp = BvpParameters::for_system(sys, Vector::Zero(1), 2 * pi * 1.05);
            const int slot = bp.add("b1_1", 1.0);
            PeriodicBvp bvp(sys, mesh, {IntegralConstraint::phase(), IntegralConstraint::fourier_cos(1, 0, slot)}, bp,
                            {0, 1});
            const PeriodicOrbit guess = sample_orbit(mesh, 2, 2 * pi * 1.05, Vector::Zero(1), [](double s) {
                Vector v(2);
                v << 1.1 * std::cos(2 * pi * s) + 0.05 * std::sin(4 * pi * s), 1.1 * std::sin(2 * pi * s);
                return v;
            });
            bvp.set_reference(sample_orbit(mesh, 2, 2 * pi, Vector::Zero(1), [](double s) {
                                  Vector v(2);
                                  v << std::cos(2 * pi * s), std::sin(2 * pi * s);
                                  return v;
                              }).states);
            const CorrectionResult cr = newton_correct(bvp, bvp.pack(guess));
            double e = 0.0;
            for (int i = 0; i <= 4000; ++i) {
                const double s = i / 4000.0;
                const Vector x = eval_orbit(cr.orbit, s);
                e = std::max({e, std::abs(x[0] - std::cos(2 * pi * s)), std::abs(x[1] - std::sin(2 * pi * s))});
            }
            errors.push_back(e);
        }
        std::string orders;
        for (std::size_t i = 1; i < errors.size(); ++i) {
            const double order = std::log2(errors[i - 1] / errors[i]);
            o.pass = o.pass && std::abs(order - (m + 1)) <= 0.5;
            orders += (orders.empty() ? "" : ", ") + num(order, "%.2f");
        }
        o.detail += (o.detail.empty() ? "" : "; ") + std::string("m=") + std::to_string(m) + ": orders " + orders +
                    " (expect " + std::to_string(m + 1) + " +- 0.5)";
    }
    return o;
}

/// Phase-invariant description of an orbit: parameters, period, means, |c_k| for k <= 3.
Vector invariants(const PeriodicOrbit& orbit) {
    const HarmonicCoefficients hc = harmonic_coefficients(orbit, 3);
    std::vector<double> v(orbit.params.data(), orbit.params.data() + orbit.params.size());
    v.push_back(orbit.period);
    for (int j = 0; j < orbit.dim(); ++j) {
        v.push_back(hc.mean[j]);
        for (int k = 1; k <= 3; ++k) v.push_back(hc.amplitude(k, j));
    }
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double scaled_distance(const Vector& a, const Vector& b) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
    return d;
}

/// Reverses a periodic branch from its last point and returns the scaled distance between
/// its start and the point where the reversed run reaches the start's primary value again.
double reverse_periodic(const Model& model, const BranchRecord& rec) {
    const auto& pts = rec.run->branch.points;
    const auto& names = rec.run->branch.parameter_names;
    const int slot = static_cast<int>(std::find(names.begin(), names.end(), rec.free.front()) - names.begin());
    std::size_t st = 0;
    while (pts[st].label != "ST") ++st;
    const double target = pts[st].parameters[slot];
    int between = 0;
    for (std::size_t i = st + 1; i + 1 < pts.size(); ++i)
        if ((pts[i].parameters[slot] - target) * (pts[i + 1].parameters[slot] - target) < 0.0) ++between;
    const double last_move = pts.back().parameters[slot] - pts[pts.size() - 2].parameters[slot];

    FamilyOptions o = rec.options;
    o.both_directions = false;
    o.branch.direction = last_move > 0.0 ? -1 : 1;
    o.branch.labels = {{rec.free.front(), {target}}};
    o.branch.stop_at_labels = false;
    o.branch.detect_folds = false;
    o.branch.step.max_steps = static_cast<int>(pts.size()) * 2 + 50;
    for (auto& b : o.branch.bounds) {
        b.lower -= 1e-6 * std::max(1.0, std::abs(b.lower));
        b.upper += 1e-6 * std::max(1.0, std::abs(b.upper));
    }
    const HarmonicRun back = continue_family(pts.back().orbit, model.system, rec.spec, rec.free, o);
    const auto hits = back.branch.labeled("UZ");
    if (static_cast<int>(hits.size()) <= between) return std::numeric_limits<double>::infinity();
    return scaled_distance(invariants(pts[st].orbit), invariants(hits[between]->orbit));
}

double reverse_equilibrium(const Model& model, const BranchRecord& rec) {
    const auto& pts = rec.equilibria->points;
    const int f = rec.eq_free;
    const double start = pts.front().point.p[f];
    const double last_move = pts.back().point.p[f] - pts[pts.size() - 2].point.p[f];
    EquilibriumOptions o = rec.eq_options;
    o.direction = last_move > 0.0 ? -1 : 1;
    o.detect_hopf = false;
    if (o.direction < 0) o.lower = start;
    else o.upper = start;
    const EquilibriumBranch back = continue_equilibria(model.system, pts.back().point.p, f, pts.back().point.x, o);
    const auto& end = back.points.back().point;
    Vector a(pts.front().point.x.size() + 1), b(a.size());
    a << pts.front().point.x, start;
    b << end.x, end.p[f];
    return scaled_distance(a, b);
}

Outcome criterion9() {
    struct Job {
        std::string what;
        std::future<double> result;
    };
    std::vector<Job> jobs;
    for (const auto& name : scenario_names) {
        const RunResult& r = scenario(name);
        require_ok(r, name);
        for (const auto& s : r.stages)
            for (const auto& b : s.branches) {
                const std::string what = name + "/" + b.file;
                if (b.run)
                    jobs.push_back({what, std::async(std::launch::async, [&r, &b] { return reverse_periodic(*r.model, b); })});
                else if (b.equilibria)
                    jobs.push_back({what, std::async(std::launch::async, [&r, &b] { return reverse_equilibrium(*r.model, b); })});
            }
    }
    double worst = 0.0;
    std::string worst_what;
    int failed = 0;
    for (auto& j : jobs) {
        double d = std::numeric_limits<double>::infinity();
        try {
            d = j.result.get();
        } catch (const std::exception& e) {
            std::fprintf(stderr, "reversal of %s failed: %s\n", j.what.c_str(), e.what());
        }
        if (!(d < 1e-6)) {
            ++failed;
            std::fprintf(stderr, "reversal of %s: scaled distance %.3g\n", j.what.c_str(), d);
        }
        if (!(d <= worst)) {
            worst = d;
            worst_what = j.what;
        }
    }
    Outcome o;
    o.pass = failed == 0 && !jobs.empty();
    o.detail = std::to_string(jobs.size()) + " branches reversed over " + std::to_string(scenario_names.size()) +
               " scenarios, " + std::to_string(failed) + " off; max scaled distance " + num(worst) + " (" + worst_what +
               ", tol 1e-6)";
    return o;
}

Outcome criterion10() {
    int accepted = 0, rejected = 0, wrong = 0;
    for (int na = 0; na <= 3; ++na)
        for (int nb = 0; nb <= 3; ++nb)
            for (bool kref : {false, true}) {
                if (kref && (na == 0 || nb == 0)) continue;
                std::vector<std::string> pool{"G", "T"};
                std::string sin = "[", cos = "[";
                for (int k = 1; k <= na; ++k) {
                    pool.push_back(coefficient_name('a', k, 1));
                    sin += (k > 1 ? ", [" : "[") + std::to_string(k) + ", 2]";
                }
                for (int k = 1; k <= nb; ++k) {
                    pool.push_back(coefficient_name('b', k, 1));
                    cos += (k > 1 ? ", [" : "[") + std::to_string(k) + ", 2]";
                }
                sin += "]";
                cos += "]";
                if (kref) pool.push_back("K");
                for (const char* extra : {"Q", "gamma", "alphaF"}) pool.push_back(extra);
                const std::size_t required = 1 + na + nb + (kref ? 1 : 0) + 1;
                for (std::size_t f = 1; f <= pool.size(); ++f) {
                    std::string free = "[";
                    for (std::size_t i = 0; i < f; ++i) free += (i ? ", " : "") + pool[i];
                    free += "]";
                    const std::string text =
                        "model: colpitts\nparameters: {G: 0.5}\nstages:\n"
                        "  - {name: eq, type: equilibrium, free: [G], bounds: {G: [0.1, 3]}}\n"
                        "  - name: cycle\n    type: cycle\n    start: {stage: eq, label: HB}\n    free: " + free +
                        "\n    fourier: {sin: " + sin + ", cos: " + cos +
                        (kref ? ", kref: {kind: harmonic, component: 2, harmonics: [1]}" : "") + "}\n";
                    bool ok = false;
                    std::string msg;
                    try {
                        validate(parse_config(text));
                        ok = true;
                    } catch (const ConfigError& e) {
                        msg = e.what();
                    }
                    if (f == required) {
                        if (ok) ++accepted;
                        else ++wrong;
                    } else {
                        const bool names_count = msg.find("requires " + std::to_string(required)) != std::string::npos;
                        if (!ok && names_count) ++rejected;
                        else ++wrong;
                    }
                }
            }
    Outcome o;
    o.pass = wrong == 0 && accepted == 25;
    o.detail = std::to_string(accepted) + " valid configurations accepted, " + std::to_string(rejected) +
               " rejected with the required count, " + std::to_string(wrong) + " misclassified";
    return o;
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Hopf location, Colpitts", criterion1},
        {"Hopf location, damped oscillator", criterion2},
        {"Starter correctness", criterion3},
        {"Fourier oracle equivalence", criterion4},
        {"Orbit physical validity", criterion5},
        {"Iso-constraint fidelity", criterion6},
        {"Jump phenomenon", criterion7},
        {"Discretization convergence", criterion8},
        {"Branch reversibility", criterion9},
        {"Counting rule enforcement", criterion10},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s criterion %zu: %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    fs::remove_all(work_dir());
    return failures == 0 ? 0 : 1;
}
