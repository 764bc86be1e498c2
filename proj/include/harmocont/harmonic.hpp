#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "collocation.hpp"
#include "equilibria.hpp"

namespace harmocont {

namespace harmonic_defaults {
inline constexpr double eps_ratio = 1e-8;
}

/// Harmonic k >= 1 of state component j (0-based).
struct HarmonicIndex {
    int k = 1;
    int j = 0;

    auto operator<=>(const HarmonicIndex&) const = default;
};

/// Name of a coefficient slot: 'a' (sine) or 'b' (cosine), harmonic k, 1-based component.
inline std::string coefficient_name(char kind, int k, int j) {
    return std::string(1, kind) + std::to_string(k) + "_" + std::to_string(j + 1);
}
inline std::string amplitude_name(int k, int j) { return "A" + std::to_string(k) + "_" + std::to_string(j + 1); }

enum class KRefKind { Harmonic, Ratio, Energy };

/// Test function on the harmonics of one component:
///   Harmonic {k}: A_k;  Ratio {p, q}: A_p / A_q;  Energy {k...}: sum A_k^2.
struct KRef {
    KRefKind kind = KRefKind::Harmonic;
    int component = 0;
    std::vector<int> harmonics{1};

    static KRef harmonic(int k, int j) { return {KRefKind::Harmonic, j, {k}}; }
    static KRef ratio(int p, int q, int j) { return {KRefKind::Ratio, j, {p, q}}; }
    static KRef energy(std::vector<int> ks, int j) { return {KRefKind::Energy, j, std::move(ks)}; }
};

/// Monitored sine (S_a) and cosine (S_b) coefficients plus an optional K_REF.
struct FourierSpec {
    std::vector<HarmonicIndex> sin_terms;
    std::vector<HarmonicIndex> cos_terms;
    std::optional<KRef> kref;

    int na() const { return static_cast<int>(sin_terms.size()); }
    int nb() const { return static_cast<int>(cos_terms.size()); }
    int constraint_count() const { return 1 + na() + nb() + (kref ? 1 : 0); }

    /// First-harmonic pair of component j with K_REF = A_1.
    static FourierSpec first_harmonic(int j) {
        return {{{1, j}}, {{1, j}}, KRef::harmonic(1, j)};
    }

    void validate(int dim) const {
        auto check_set = [&](const std::vector<HarmonicIndex>& set, const char* what, char kind) {
            for (std::size_t a = 0; a < set.size(); ++a) {
                if (set[a].k < 1)
                    throw ConfigError(std::string(what) + ": harmonic index must be >= 1 (the mean is not a constraint)");
                if (set[a].j < 0 || set[a].j >= dim)
                    throw ConfigError(std::string(what) + ": component " + std::to_string(set[a].j + 1) +
                                      " outside 1.." + std::to_string(dim));
                for (std::size_t b = a + 1; b < set.size(); ++b)
                    if (set[a] == set[b])
                        throw ConfigError(std::string(what) + ": duplicate pair " +
                                          coefficient_name(kind, set[a].k, set[a].j));
            }
        };
        check_set(sin_terms, "S_a", 'a');
        check_set(cos_terms, "S_b", 'b');
        if (!kref) return;
        const auto& h = kref->harmonics;
        const std::size_t need = kref->kind == KRefKind::Ratio ? 2 : 1;
        if (h.size() < need || (kref->kind != KRefKind::Energy && h.size() != need))
            throw ConfigError("K_REF: wrong number of harmonics for its kind");
        for (int k : h) {
            const HarmonicIndex idx{k, kref->component};
            if (std::find(sin_terms.begin(), sin_terms.end(), idx) == sin_terms.end() ||
                std::find(cos_terms.begin(), cos_terms.end(), idx) == cos_terms.end())
                throw ConfigError("K_REF needs " + coefficient_name('a', k, kref->component) + " and " +
                                  coefficient_name('b', k, kref->component) + " in S_a and S_b");
        }
    }
};

/// a_{kj}, b_{kj} by (k, j), component means a_{0j}, and the period.
struct HarmonicCoefficients {
    std::map<HarmonicIndex, std::pair<double, double>> terms;
    Vector mean;
    double period = 0.0;

    double amplitude(int k, int j) const {
        auto it = terms.find({k, j});
        if (it == terms.end())
            throw ContractViolation("harmonic " + coefficient_name('a', k, j).substr(1) + " not available");
        return std::hypot(it->second.first, it->second.second);
    }
};

/// (a_{kj}, b_{kj}) = integral over [0,1] of 2 x_j(s) (sin, cos)(2 pi k s) ds by Gauss
/// quadrature of the interpolant; k = 0 gives (mean, 0).
inline std::pair<double, double> fourier_coefficient(const PeriodicOrbit& orbit, int k, int j) {
    if (k < 0) throw ContractViolation("fourier_coefficient: negative harmonic index");
    if (j < 0 || j >= orbit.dim()) throw ContractViolation("fourier_coefficient: component out of range");
    const auto x = orbit.states.row(j);
    const double a = fourier_projection(orbit.mesh, k, true).dot(x);
    if (k == 0) return {a, 0.0};
    return {a, fourier_projection(orbit.mesh, k, false).dot(x)};
}

inline HarmonicCoefficients harmonic_coefficients(const PeriodicOrbit& orbit, int kmax) {
    HarmonicCoefficients hc;
    hc.period = orbit.period;
    hc.mean.resize(orbit.dim());
    for (int j = 0; j < orbit.dim(); ++j) {
        hc.mean[j] = fourier_coefficient(orbit, 0, j).first;
        for (int k = 1; k <= kmax; ++k) hc.terms[{k, j}] = fourier_coefficient(orbit, k, j);
    }
    return hc;
}

namespace detail {

inline double kref_from_amplitudes(KRefKind kind, const std::vector<double>& amp, bool guard) {
    switch (kind) {
        case KRefKind::Harmonic:
            if (guard && amp[0] < harmonic_defaults::eps_ratio)
                throw DegenerateRatioError("K_REF: harmonic amplitude " + std::to_string(amp[0]) +
                                           " is below the non-degeneracy threshold");
            return amp[0];
        case KRefKind::Ratio:
            if (guard && amp[1] < harmonic_defaults::eps_ratio)
                throw DegenerateRatioError("K_REF: ratio denominator amplitude " + std::to_string(amp[1]) +
                                           " is below the non-degeneracy threshold");
            return amp[0] / amp[1];
        case KRefKind::Energy: {
            double s = 0.0;
            for (double a : amp) s += a * a;
            return s;
        }
    }
    return 0.0;
}

}  // namespace detail

/// K_REF of the given coefficients.
inline double kref_value(const HarmonicCoefficients& coeffs, const KRef& kind) {
    std::vector<double> amp;
    for (int k : kind.harmonics) amp.push_back(coeffs.amplitude(k, kind.component));
    return detail::kref_from_amplitudes(kind.kind, amp, true);
}

// ---------------------------------------------------------------------------
// Extended BVP for a Fourier spec.

/// Parameter layout [system params | T | S_a slots | S_b slots | K] and the matching
/// integral conditions.
struct HarmonicSetup {
    BvpParameters params;
    std::vector<IntegralConstraint> constraints;
    std::vector<int> sin_slots;
    std::vector<int> cos_slots;
    int k_slot = -1;
};

namespace detail {

/// K_REF as a function of the (a, b) slot pairs in kref order.
inline IntegralConstraint kref_constraint(const KRef& kr, int k_slot, std::vector<int> inputs) {
    IntegralConstraint c;
    c.kind = IntegralConstraint::Kind::KRef;
    c.slot = k_slot;
    c.inputs = std::move(inputs);
    const KRefKind kind = kr.kind;
    c.value = [kind](const Vector& ab) {
        std::vector<double> amp;
        for (Eigen::Index i = 0; i + 1 < ab.size(); i += 2) amp.push_back(std::hypot(ab[i], ab[i + 1]));
        return kref_from_amplitudes(kind, amp, false);
    };
    c.gradient = [kind](const Vector& ab) {
        const Eigen::Index h = ab.size() / 2;
        std::vector<double> amp(h);
        for (Eigen::Index i = 0; i < h; ++i) amp[i] = std::max(std::hypot(ab[2 * i], ab[2 * i + 1]), 1e-300);
        Vector g = Vector::Zero(ab.size());
        for (Eigen::Index i = 0; i < h; ++i) {
            double dk = 0.0;  // dK/dA_i
            switch (kind) {
                case KRefKind::Harmonic: dk = 1.0; break;
                case KRefKind::Ratio: dk = i == 0 ? 1.0 / amp[1] : -amp[0] / (amp[1] * amp[1]); break;
                case KRefKind::Energy: dk = 2.0 * amp[i]; break;
            }
            g[2 * i] = dk * ab[2 * i] / amp[i];
            g[2 * i + 1] = dk * ab[2 * i + 1] / amp[i];
        }
        return g;
    };
    return c;
}

}  // namespace detail

/// Slot values are initialized from the orbit's coefficients; K_REF from those.
inline HarmonicSetup harmonic_setup(const DynSystem& sys, const PeriodicOrbit& orbit, const FourierSpec& spec) {
    spec.validate(sys.dim());
    HarmonicSetup hs;
    hs.params = BvpParameters::for_system(sys, orbit.params, orbit.period);
    hs.constraints.push_back(IntegralConstraint::phase());
    for (const auto& t : spec.sin_terms) {
        const int slot = hs.params.add(coefficient_name('a', t.k, t.j), fourier_coefficient(orbit, t.k, t.j).first);
        hs.sin_slots.push_back(slot);
        hs.constraints.push_back(IntegralConstraint::fourier_sin(t.k, t.j, slot));
    }
    for (const auto& t : spec.cos_terms) {
        const int slot = hs.params.add(coefficient_name('b', t.k, t.j), fourier_coefficient(orbit, t.k, t.j).second);
        hs.cos_slots.push_back(slot);
        hs.constraints.push_back(IntegralConstraint::fourier_cos(t.k, t.j, slot));
    }
    if (spec.kref) {
        std::vector<int> inputs;
        for (int k : spec.kref->harmonics) {
            const HarmonicIndex idx{k, spec.kref->component};
            const auto ia = std::find(spec.sin_terms.begin(), spec.sin_terms.end(), idx) - spec.sin_terms.begin();
            const auto ib = std::find(spec.cos_terms.begin(), spec.cos_terms.end(), idx) - spec.cos_terms.begin();
            inputs.push_back(hs.sin_slots[ia]);
            inputs.push_back(hs.cos_slots[ib]);
        }
        auto c = detail::kref_constraint(*spec.kref, -1, inputs);
        Vector ab(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) ab[i] = hs.params.values[inputs[i]];
        hs.k_slot = hs.params.add("K", c.value(ab));
        c.slot = hs.k_slot;
        hs.constraints.push_back(std::move(c));
    }
    return hs;
}

/// Amplitude monitors A{k}_{j} for every (k, j) in both S_a and S_b.
inline std::vector<Monitor> amplitude_monitors(const FourierSpec& spec, const HarmonicSetup& hs) {
    std::vector<Monitor> out;
    for (std::size_t a = 0; a < spec.sin_terms.size(); ++a) {
        auto it = std::find(spec.cos_terms.begin(), spec.cos_terms.end(), spec.sin_terms[a]);
        if (it == spec.cos_terms.end()) continue;
        const int sa = hs.sin_slots[a], sb = hs.cos_slots[it - spec.cos_terms.begin()];
        out.push_back({amplitude_name(spec.sin_terms[a].k, spec.sin_terms[a].j),
                       [sa, sb](const PeriodicBvp& bvp, const Vector& u) {
                           const Vector e = bvp.ext_of(u);
                           return std::hypot(e[sa], e[sb]);
                       }});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hopf starter.

struct StarterOptions {
    int intervals = collocation_defaults::intervals;
    int degree = collocation_defaults::degree;
    int component = -1;  // component whose first-harmonic amplitude is pinned; -1: largest in q
    int kmax = 2;        // harmonics reported in the coefficient sets
    StepConfig newton;
};

struct StarterResult {
    PeriodicOrbit guess;
    PeriodicOrbit orbit;                // after Newton correction
    HarmonicCoefficients guess_coefficients;
    HarmonicCoefficients coefficients;  // of the corrected orbit
    int iterations = 0;
};

/// Small cycle x(s) = x* + eps Re(q e^{2 pi i s}), T = 2 pi / omega, with first-harmonic
/// coefficients a_1j = (J dx(0))_j / omega, b_1j = dx_j(0) and no other harmonics; then a
/// Newton correction with the first-harmonic amplitude of one component pinned.
inline StarterResult hopf_starter(const HopfPoint& hopf, const DynSystem& sys, double eps,
                                  const StarterOptions& opts = {}) {
    if (!(eps > 0.0)) throw ContractViolation("hopf_starter: epsilon must be positive");
    if (!(hopf.omega > 0.0)) throw ContractViolation("hopf_starter: omega must be positive");
    const int n = sys.dim();
    const Vector& xs = hopf.equilibrium.x;
    const Vector& p = hopf.equilibrium.p;
    const Eigen::VectorXcd& q = hopf.eigenvector;
    const double T = hopf.period();
    Mesh mesh = Mesh::uniform(opts.intervals, opts.degree);

    StarterResult res;
    res.guess = sample_orbit(mesh, n, T, p, [&](double s) -> Vector {
        const std::complex<double> e = std::polar(1.0, 2.0 * std::numbers::pi * s);
        return xs + eps * (q * e).real();
    });

    const Vector dx0 = eps * q.real();
    const Vector jdx = jacobian_x(sys, xs, 0.0, p) * dx0;
    res.guess_coefficients.period = T;
    res.guess_coefficients.mean = xs;
    for (int j = 0; j < n; ++j)
        for (int k = 1; k <= opts.kmax; ++k)
            res.guess_coefficients.terms[{k, j}] = k == 1 ? std::pair{jdx[j] / hopf.omega, dx0[j]} : std::pair{0.0, 0.0};

    int jstar = opts.component;
    if (jstar < 0) q.cwiseAbs().maxCoeff(&jstar);
    if (jstar >= n) throw ContractViolation("hopf_starter: component out of range");

    const FourierSpec spec = FourierSpec::first_harmonic(jstar);
    HarmonicSetup hs = harmonic_setup(sys, res.guess, spec);
    const std::vector<int> free{hopf.free_param, sys.num_params(), hs.sin_slots[0], hs.cos_slots[0]};
    PeriodicBvp bvp(sys, mesh, hs.constraints, hs.params, free);
    bvp.set_reference(res.guess.states);
    try {
        CorrectionResult cr = newton_correct(bvp, bvp.pack(res.guess), opts.newton);
        res.orbit = cr.orbit;
        res.iterations = cr.iterations;
    } catch (const NumericalFailure& e) {
        throw StarterFailure(std::string("hopf_starter: correction failed at eps = ") + std::to_string(eps) +
                             "; try a smaller epsilon (" + e.what() + ")");
    }
    res.coefficients = harmonic_coefficients(res.orbit, opts.kmax);
    return res;
}

// ---------------------------------------------------------------------------
// Drivers.

struct HarmonicBranchOptions {
    StepConfig step;
    int direction = 1;
    std::vector<ParameterBound> bounds;
    std::vector<LabelRequest> labels;  // on "K", "T", parameters or amplitude monitors
    std::vector<Monitor> extra_monitors;
    bool detect_folds = false;
    int adapt_every = 0;
    bool stop_at_labels = false;
};

/// Branch with its BVP, for restarts and reversals.
struct HarmonicRun {
    OrbitBranch branch;
    HarmonicSetup setup;
    std::vector<int> free;
};

namespace detail {

inline OrbitBranchOptions orbit_options(const HarmonicBranchOptions& o, std::string primary,
                                        std::vector<Monitor> monitors) {
    OrbitBranchOptions out;
    out.step = o.step;
    out.primary = std::move(primary);
    out.direction = o.direction;
    out.bounds = o.bounds;
    out.labels = o.labels;
    out.monitors = std::move(monitors);
    for (const auto& m : o.extra_monitors) out.monitors.push_back(m);
    out.detect_folds = o.detect_folds;
    out.adapt_every = o.adapt_every;
    out.stop_at_labels = o.stop_at_labels;
    return out;
}

}  // namespace detail

struct FamilyOptions {
    HarmonicBranchOptions branch;
    bool both_directions = false;
    std::map<std::string, double> pins;  // fixed quantities snapped to these values first
};

/// Continues from a converged orbit with the named BVP parameters free; the first name is the
/// primary continuation parameter. Parameters not listed stay fixed at their start values, or
/// at `pins`, in which case the start is corrected with the primary parameter held. With
/// `both_directions` the two legs are merged in arclength order.
inline HarmonicRun continue_family(const PeriodicOrbit& start, const DynSystem& sys, const FourierSpec& spec,
                                   const std::vector<std::string>& free_names, const FamilyOptions& opts = {}) {
    HarmonicRun run;
    run.setup = harmonic_setup(sys, start, spec);
    auto& hs = run.setup;
    if (spec.kref) {
        const int kmax = *std::max_element(spec.kref->harmonics.begin(), spec.kref->harmonics.end());
        kref_value(harmonic_coefficients(start, kmax), *spec.kref);
    }
    for (const auto& name : free_names) {
        const int slot = hs.params.index(name);
        if (std::find(run.free.begin(), run.free.end(), slot) != run.free.end())
            throw ConfigError("free parameter '" + name + "' listed twice");
        run.free.push_back(slot);
    }
    check_counts(hs.constraints.size(), run.free.size(), true, "continuation");
    const std::string& primary = free_names.front();

    PeriodicOrbit corrected = start;
    if (!opts.pins.empty()) {
        for (const auto& [name, value] : opts.pins) {
            const int slot = hs.params.index(name);
            if (std::find(run.free.begin(), run.free.end(), slot) != run.free.end())
                throw ConfigError("pinned quantity '" + name + "' is also free");
            hs.params.values[slot] = value;
        }
        const std::vector<int> square(run.free.begin() + 1, run.free.end());
        PeriodicBvp snap(sys, start.mesh, hs.constraints, hs.params, square);
        snap.set_reference(start.states);
        const CorrectionResult cr = newton_correct(snap, snap.pack(start), opts.branch.step);
        corrected = cr.orbit;
        hs.params.values = cr.parameters;
    }
    const auto monitors = amplitude_monitors(spec, hs);

    auto leg = [&](int direction) {
        PeriodicBvp bvp(sys, corrected.mesh, hs.constraints, hs.params, run.free);
        HarmonicBranchOptions o = opts.branch;
        o.direction = direction;
        return continue_orbits(bvp, bvp.pack(corrected.states, hs.params.values),
                               detail::orbit_options(o, primary, monitors));
    };
    OrbitBranch fwd = leg(opts.branch.direction);
    if (!opts.both_directions) {
        run.branch = std::move(fwd);
        return run;
    }
    OrbitBranch bwd = leg(-opts.branch.direction);
    run.branch.parameter_names = fwd.parameter_names;
    run.branch.monitor_names = fwd.monitor_names;
    for (auto it = bwd.points.rbegin(); it != bwd.points.rend(); ++it) {
        OrbitBranchPoint pt = *it;
        pt.arclength = -pt.arclength;
        pt.step = -pt.step;
        run.branch.points.push_back(std::move(pt));
    }
    run.branch.points.pop_back();  // duplicate start, kept as the forward leg's ST
    for (auto& pt : fwd.points) run.branch.points.push_back(std::move(pt));
    run.branch.stalled = fwd.stalled || bwd.stalled;
    run.branch.termination = bwd.termination + " / " + fwd.termination;
    return run;
}

/// Names of T, the monitored coefficients and K for a spec, in slot order.
inline std::vector<std::string> harmonic_free_names(const FourierSpec& spec, bool with_period = true,
                                                    bool with_k = true) {
    std::vector<std::string> out;
    if (with_period) out.push_back("T");
    for (const auto& t : spec.sin_terms) out.push_back(coefficient_name('a', t.k, t.j));
    for (const auto& t : spec.cos_terms) out.push_back(coefficient_name('b', t.k, t.j));
    if (spec.kref && with_k) out.push_back("K");
    return out;
}

/// Continues a converged orbit in one system parameter with T, the monitored coefficients
/// and K_REF free.
inline HarmonicRun continue_with_harmonics(const PeriodicOrbit& start, const DynSystem& sys,
                                           const FourierSpec& spec, const std::string& free_param,
                                           const HarmonicBranchOptions& opts = {}) {
    std::vector<std::string> names{free_param};
    for (auto& n : harmonic_free_names(spec)) names.push_back(std::move(n));
    FamilyOptions fo;
    fo.branch = opts;
    return continue_family(start, sys, spec, names, fo);
}

struct IsoOptions {
    HarmonicBranchOptions branch;
    bool both_directions = true;
};

/// Two-parameter continuation with one quantity pinned ("K" or "T") at `target`, from an
/// orbit within Newton reach of it. Runs both ways along `p1` by default.
inline HarmonicRun continue_iso(const PeriodicOrbit& start, const DynSystem& sys, const FourierSpec& spec,
                                const std::string& p1, const std::string& p2, const std::string& pinned,
                                double target, const IsoOptions& opts = {}) {
    if (pinned != "K" && pinned != "T") throw ConfigError("continue_iso: pinned quantity must be K or T");
    if (pinned == "K" && !spec.kref) throw ConfigError("continue_iso: K pinned but the Fourier constraints have no K_REF");
    std::vector<std::string> names{p1, p2};
    for (auto& n : harmonic_free_names(spec, pinned != "T", pinned != "K")) names.push_back(std::move(n));
    FamilyOptions fo;
    fo.branch = opts.branch;
    fo.both_directions = opts.both_directions;
    fo.pins[pinned] = target;
    return continue_family(start, sys, spec, names, fo);
}

}  // namespace harmocont
