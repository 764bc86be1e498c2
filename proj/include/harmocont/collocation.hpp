#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "continuation.hpp"
#include "dynsys.hpp"
#include "errors.hpp"
#include "linbord.hpp"
#include "mesh.hpp"

namespace harmocont {

namespace collocation_defaults {
inline constexpr int degree = 4;
inline constexpr int intervals = 40;
inline constexpr double tol_bvp = 1e-10;
}  // namespace collocation_defaults

/// Parameters of the boundary value problem: the system parameters, the period T,
/// then any extra slots (monitored Fourier coefficients, K_REF).
struct BvpParameters {
    std::vector<std::string> names;
    Vector values;

    static BvpParameters for_system(const DynSystem& sys, const Vector& p, double period) {
        BvpParameters bp;
        bp.names = sys.param_names();
        bp.names.push_back("T");
        bp.values.resize(p.size() + 1);
        bp.values << p, period;
        return bp;
    }

    int size() const { return static_cast<int>(values.size()); }

    int add(std::string name, double value) {
        names.push_back(std::move(name));
        values.conservativeResize(values.size() + 1);
        values[values.size() - 1] = value;
        return size() - 1;
    }

    std::optional<int> find(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return std::nullopt;
    }

    int index(const std::string& name) const {
        if (auto i = find(name)) return *i;
        throw ConfigError("unknown continuation parameter '" + name + "'");
    }
};

/// One integral condition of the periodic BVP.
struct IntegralConstraint {
    enum class Kind { Phase, FourierSin, FourierCos, KRef };

    Kind kind = Kind::Phase;
    int harmonic = 0;   // k (Fourier kinds)
    int component = 0;  // j, 0-based (Fourier kinds)
    int slot = -1;      // parameter slot holding the coefficient or K_REF

    // KRef: slot value minus value(inputs) must vanish.
    std::vector<int> inputs;
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;

    static IntegralConstraint phase() { return {}; }
    static IntegralConstraint fourier_sin(int k, int j, int slot) {
        IntegralConstraint c;
        c.kind = Kind::FourierSin;
        c.harmonic = k;
        c.component = j;
        c.slot = slot;
        return c;
    }
    static IntegralConstraint fourier_cos(int k, int j, int slot) {
        auto c = fourier_sin(k, j, slot);
        c.kind = Kind::FourierCos;
        return c;
    }
};

/// Free-parameter count check: constraints + 1 with pseudo-arclength, constraints without.
inline void check_counts(std::size_t constraints, std::size_t free, bool with_arclength,
                         const std::string& context = "periodic BVP") {
    const std::size_t required = constraints + (with_arclength ? 1 : 0);
    if (free != required) throw CountMismatchError(required, free, context);
}

/// Orthogonal-collocation discretization of
///   x' = T g(x; p) on [0, 1],  x(0) = x(1),  plus integral conditions,
/// with unknowns U = (states at all representation points, free parameters).
class PeriodicBvp {
public:
    PeriodicBvp(DynSystem sys, Mesh mesh, std::vector<IntegralConstraint> constraints, BvpParameters params,
                std::vector<int> free)
        : sys_(std::move(sys)),
          mesh_(std::move(mesh)),
          constraints_(std::move(constraints)),
          params_(std::move(params)),
          free_(std::move(free)) {
        if (!sys_.autonomous())
            throw ContractViolation("periodic BVP: system '" + sys_.name() +
                                    "' is non-autonomous; autonomize it first");
        if (params_.size() < sys_.num_params() + 1)
            throw ContractViolation("periodic BVP: parameter vector lacks the period slot");
        for (int f : free_)
            if (f < 0 || f >= params_.size()) throw ContractViolation("periodic BVP: free slot out of range");
        for (std::size_t a = 0; a < free_.size(); ++a)
            for (std::size_t b = a + 1; b < free_.size(); ++b)
                if (free_[a] == free_[b])
                    throw ConfigError("periodic BVP: parameter '" + params_.names[free_[a]] + "' freed twice");
        for (const auto& c : constraints_) {
            if ((c.kind == IntegralConstraint::Kind::FourierSin || c.kind == IntegralConstraint::Kind::FourierCos) &&
                (c.component < 0 || c.component >= sys_.dim() || c.harmonic < 1))
                throw ContractViolation("periodic BVP: Fourier constraint index out of range");
        }
        rebuild_rows();
    }

    // --- problem interface -------------------------------------------------

    Eigen::Index state_size() const { return static_cast<Eigen::Index>(sys_.dim()) * mesh_.points(); }
    Eigen::Index unknowns() const { return state_size() + static_cast<Eigen::Index>(free_.size()); }
    Eigen::Index equations() const { return state_size() + static_cast<Eigen::Index>(constraints_.size()); }

    Vector residual(const Vector& u) const {
        const int n = sys_.dim(), m = mesh_.degree(), N = mesh_.intervals();
        const Vector ext = ext_of(u);
        const Vector p = ext.head(sys_.num_params());
        const double T = ext[period_slot()];
        Vector r(equations());
        Eigen::Map<const Matrix> X(u.data(), n, mesh_.points());
        Vector xc(n), dxc(n), g(n);
        for (int i = 0; i < N; ++i) {
            const auto block = X.middleCols(i * m, m + 1);
            for (int c = 0; c < m; ++c) {
                xc = block * mesh_.basis_at_gauss().row(c).transpose();
                dxc = block * mesh_.dbasis_at_gauss().row(c).transpose() / mesh_.width(i);
                eval_rhs_into(sys_, xc, 0.0, p, g);
                r.segment(static_cast<Eigen::Index>(i * m + c) * n, n) = dxc - T * g;
            }
        }
        const Eigen::Index bc = static_cast<Eigen::Index>(N) * m * n;
        r.segment(bc, n) = X.col(mesh_.points() - 1) - X.col(0);
        const Eigen::Index c0 = state_size();
        const auto states = u.head(state_size());
        for (std::size_t k = 0; k < constraints_.size(); ++k) {
            const auto& c = constraints_[k];
            double val = 0.0;
            switch (c.kind) {
                case IntegralConstraint::Kind::Phase: val = rows_[k].dot(states); break;
                case IntegralConstraint::Kind::FourierSin:
                case IntegralConstraint::Kind::FourierCos: val = rows_[k].dot(states) - ext[c.slot]; break;
                case IntegralConstraint::Kind::KRef: val = ext[c.slot] - c.value(gather(ext, c.inputs)); break;
            }
            r[c0 + static_cast<Eigen::Index>(k)] = val;
        }
        return r;
    }

    void jacobian(const Vector& u, std::vector<Triplet>& t) const {
        const int n = sys_.dim(), m = mesh_.degree(), N = mesh_.intervals();
        const Vector ext = ext_of(u);
        const Vector p = ext.head(sys_.num_params());
        const double T = ext[period_slot()];
        const Eigen::Index sc = state_size();
        Eigen::Map<const Matrix> X(u.data(), n, mesh_.points());
        Vector xc(n), g(n);
        Matrix jx(n, n);
        std::vector<int> sys_free;  // (free column, parameter index)
        for (std::size_t f = 0; f < free_.size(); ++f)
            if (free_[f] < sys_.num_params()) sys_free.push_back(static_cast<int>(f));
        const auto free_T = std::find(free_.begin(), free_.end(), period_slot());

        for (int i = 0; i < N; ++i) {
            const auto block = X.middleCols(i * m, m + 1);
            const double h = mesh_.width(i);
            for (int c = 0; c < m; ++c) {
                xc = block * mesh_.basis_at_gauss().row(c).transpose();
                jx = jacobian_x(sys_, xc, 0.0, p);
                const Eigen::Index row0 = static_cast<Eigen::Index>(i * m + c) * n;
                for (int l = 0; l <= m; ++l) {
                    const double L = mesh_.basis_at_gauss()(c, l);
                    const double dL = mesh_.dbasis_at_gauss()(c, l) / h;
                    const Eigen::Index col0 = static_cast<Eigen::Index>(i * m + l) * n;
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b) {
                            const double v = (a == b ? dL : 0.0) - T * jx(a, b) * L;
                            if (v != 0.0) t.emplace_back(row0 + a, col0 + b, v);
                        }
                }
                if (free_T != free_.end() || !sys_free.empty()) {
                    eval_rhs_into(sys_, xc, 0.0, p, g);
                    if (free_T != free_.end()) {
                        const Eigen::Index col = sc + (free_T - free_.begin());
                        for (int a = 0; a < n; ++a) t.emplace_back(row0 + a, col, -g[a]);
                    }
                    for (int f : sys_free) {
                        const Vector dg = param_derivative(xc, p, free_[f]);
                        for (int a = 0; a < n; ++a)
                            if (dg[a] != 0.0) t.emplace_back(row0 + a, sc + f, -T * dg[a]);
                    }
                }
            }
        }
        const Eigen::Index bc = static_cast<Eigen::Index>(N) * m * n;
        const Eigen::Index last = static_cast<Eigen::Index>(mesh_.points() - 1) * n;
        for (int a = 0; a < n; ++a) {
            t.emplace_back(bc + a, last + a, 1.0);
            t.emplace_back(bc + a, a, -1.0);
        }
        for (std::size_t k = 0; k < constraints_.size(); ++k) {
            const auto& c = constraints_[k];
            const Eigen::Index row = sc + static_cast<Eigen::Index>(k);
            if (c.kind != IntegralConstraint::Kind::KRef) {
                for (Eigen::Index s = 0; s < sc; ++s)
                    if (rows_[k][s] != 0.0) t.emplace_back(row, s, rows_[k][s]);
                if (c.kind != IntegralConstraint::Kind::Phase)
                    if (auto col = free_column(c.slot)) t.emplace_back(row, sc + *col, -1.0);
            } else {
                if (auto col = free_column(c.slot)) t.emplace_back(row, sc + *col, 1.0);
                const Vector grad = c.gradient(gather(ext, c.inputs));
                for (std::size_t q = 0; q < c.inputs.size(); ++q)
                    if (auto col = free_column(c.inputs[q])) t.emplace_back(row, sc + *col, -grad[q]);
            }
        }
    }

    /// Quadrature inner product of the state interpolants plus the Euclidean product of
    /// the free parameters.
    double inner(const Vector& a, const Vector& b) const {
        const int n = sys_.dim();
        Eigen::Map<const Matrix> Xa(a.data(), n, mesh_.points()), Xb(b.data(), n, mesh_.points());
        const Matrix ga = values_at_gauss(mesh_, Xa), gb = values_at_gauss(mesh_, Xb);
        double s = 0.0;
        const int m = mesh_.degree();
        for (int i = 0; i < mesh_.intervals(); ++i)
            for (int c = 0; c < m; ++c) s += mesh_.gauss_weight(i, c) * ga.col(i * m + c).dot(gb.col(i * m + c));
        return s + a.tail(free_.size()).dot(b.tail(free_.size()));
    }

    Vector inner_row(const Vector& v) const {
        const int n = sys_.dim(), m = mesh_.degree();
        Eigen::Map<const Matrix> Xv(v.data(), n, mesh_.points());
        const Matrix gv = values_at_gauss(mesh_, Xv);
        Vector row = Vector::Zero(unknowns());
        Eigen::Map<Matrix> R(row.data(), n, mesh_.points());
        for (int i = 0; i < mesh_.intervals(); ++i)
            for (int c = 0; c < m; ++c) {
                const double w = mesh_.gauss_weight(i, c);
                for (int l = 0; l <= m; ++l)
                    R.col(i * m + l) += w * mesh_.basis_at_gauss()(c, l) * gv.col(i * m + c);
            }
        row.tail(free_.size()) = v.tail(free_.size());
        return row;
    }

    Vector scales(const Vector& u) const {
        const int n = sys_.dim();
        Vector s(unknowns());
        Eigen::Map<const Matrix> X(u.data(), n, mesh_.points());
        Eigen::Map<Matrix> S(s.data(), n, mesh_.points());
        const Vector comp = X.cwiseAbs().rowwise().maxCoeff().cwiseMax(1.0);
        S.colwise() = comp;
        for (std::size_t f = 0; f < free_.size(); ++f)
            s[state_size() + static_cast<Eigen::Index>(f)] = std::max(1.0, std::abs(u[state_size() + f]));
        return s;
    }

    // --- state handling ----------------------------------------------------

    Vector pack(const Matrix& states, const Vector& ext) const {
        if (states.rows() != sys_.dim() || states.cols() != mesh_.points())
            throw ContractViolation("periodic BVP: state matrix does not match the mesh");
        Vector u(unknowns());
        u.head(state_size()) = Eigen::Map<const Vector>(states.data(), state_size());
        for (std::size_t f = 0; f < free_.size(); ++f) u[state_size() + f] = ext[free_[f]];
        return u;
    }

    Vector pack(const PeriodicOrbit& orbit) const {
        Vector ext = params_.values;
        ext.head(sys_.num_params()) = orbit.params;
        ext[period_slot()] = orbit.period;
        return pack(orbit.states, ext);
    }

    Matrix states_of(const Vector& u) const {
        return Eigen::Map<const Matrix>(u.data(), sys_.dim(), mesh_.points());
    }

    Vector ext_of(const Vector& u) const {
        Vector ext = params_.values;
        for (std::size_t f = 0; f < free_.size(); ++f) ext[free_[f]] = u[state_size() + f];
        return ext;
    }

    PeriodicOrbit orbit_of(const Vector& u) const {
        const Vector ext = ext_of(u);
        return PeriodicOrbit{mesh_, states_of(u), ext[period_slot()], ext.head(sys_.num_params())};
    }

    /// Sets x_old for the phase condition.
    void set_reference(const Matrix& states) {
        if (states.rows() != sys_.dim() || states.cols() != mesh_.points())
            throw ContractViolation("periodic BVP: reference orbit does not match the mesh");
        reference_ = states;
        rebuild_rows();
    }

    /// Replaces the fixed parameter values (free entries are taken from U).
    void set_parameters(const Vector& ext) {
        if (ext.size() != params_.values.size()) throw ContractViolation("periodic BVP: parameter size");
        params_.values = ext;
    }

    void set_mesh(Mesh mesh) {
        mesh_ = std::move(mesh);
        if (reference_.size() > 0 && reference_.cols() != mesh_.points()) reference_.resize(0, 0);
        rebuild_rows();
    }

    /// Re-expresses a vector (states + free parameters) given on `old` onto the current mesh.
    Vector transfer(const Vector& u, const Mesh& old) const {
        PeriodicOrbit tmp{old, Eigen::Map<const Matrix>(u.data(), sys_.dim(), old.points()), 0.0, Vector()};
        PeriodicOrbit moved = interpolate_orbit(tmp, mesh_);
        Vector out(unknowns());
        out.head(state_size()) = Eigen::Map<const Vector>(moved.states.data(), state_size());
        out.tail(free_.size()) = u.tail(free_.size());
        return out;
    }

    /// Scaled max-norm residual of each integral condition at U.
    Vector constraint_residuals(const Vector& u) const { return residual(u).tail(constraints_.size()); }

    /// Max collocation/periodicity residual at U.
    double collocation_residual(const Vector& u) const {
        return residual(u).head(state_size()).cwiseAbs().maxCoeff();
    }

    const DynSystem& system() const { return sys_; }
    const Mesh& mesh() const { return mesh_; }
    const std::vector<IntegralConstraint>& constraints() const { return constraints_; }
    const BvpParameters& parameters() const { return params_; }
    const std::vector<int>& free() const { return free_; }
    int period_slot() const { return sys_.num_params(); }

    std::optional<int> free_column(int slot) const {
        for (std::size_t f = 0; f < free_.size(); ++f)
            if (free_[f] == slot) return static_cast<int>(f);
        return std::nullopt;
    }

private:
    static Vector gather(const Vector& ext, const std::vector<int>& idx) {
        Vector v(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) v[i] = ext[idx[i]];
        return v;
    }

    Vector param_derivative(const Vector& x, const Vector& p, int k) const {
        if (sys_.has_analytic_jacobian_p()) return jacobian_p(sys_, x, 0.0, p).col(k);
        const int n = sys_.dim();
        Vector pp = p, fp(n), fm(n);
        const double h = fd_relative_step() * std::max(1.0, std::abs(p[k]));
        pp[k] = p[k] + h;
        eval_rhs_into(sys_, x, 0.0, pp, fp);
        pp[k] = p[k] - h;
        eval_rhs_into(sys_, x, 0.0, pp, fm);
        return (fp - fm) / (2.0 * h);
    }

    // Linear state functionals of the Phase and Fourier conditions.
    void rebuild_rows() {
        const int n = sys_.dim(), m = mesh_.degree(), N = mesh_.intervals();
        rows_.assign(constraints_.size(), Vector());
        Matrix dref;
        if (reference_.size() > 0) dref = derivatives_at_gauss(mesh_, reference_);
        for (std::size_t k = 0; k < constraints_.size(); ++k) {
            const auto& c = constraints_[k];
            if (c.kind == IntegralConstraint::Kind::KRef) continue;
            Vector row = Vector::Zero(state_size());
            if (c.kind != IntegralConstraint::Kind::Phase) {
                const Eigen::RowVectorXd w =
                    fourier_projection(mesh_, c.harmonic, c.kind == IntegralConstraint::Kind::FourierSin);
                for (int g = 0; g < mesh_.points(); ++g) row[g * n + c.component] = w[g];
                rows_[k] = std::move(row);
                continue;
            }
            Eigen::Map<Matrix> R(row.data(), n, mesh_.points());
            for (int i = 0; i < N; ++i)
                for (int cc = 0; cc < m; ++cc) {
                    const double w = mesh_.gauss_weight(i, cc);
                    Vector coef = Vector::Zero(n);
                    if (dref.size() > 0) coef = dref.col(i * m + cc);
                    for (int l = 0; l <= m; ++l) R.col(i * m + l) += w * mesh_.basis_at_gauss()(cc, l) * coef;
                }
            rows_[k] = std::move(row);
        }
    }

    DynSystem sys_;
    Mesh mesh_;
    std::vector<IntegralConstraint> constraints_;
    BvpParameters params_;
    std::vector<int> free_;
    Matrix reference_;
    std::vector<Vector> rows_;
};

/// Newton linear system at U in bordered form: core = d(collocation, periodicity)/d states,
/// border columns = d/d free parameters, border rows = integral conditions (and the
/// pseudo-arclength row when `tangent` is given), rhs = -residual.
inline BorderedSystem discretize(const PeriodicBvp& bvp, const Vector& u, const Vector* tangent = nullptr,
                                 double arclength_rhs = 0.0) {
    check_counts(bvp.constraints().size(), bvp.free().size(), tangent != nullptr, "discretize");
    std::vector<Triplet> trip;
    bvp.jacobian(u, trip);
    const Eigen::Index n = bvp.unknowns(), sc = bvp.state_size();
    Matrix full = Matrix::Zero(n, n);
    for (const auto& tr : trip) full(tr.row(), tr.col()) += tr.value();
    Vector rhs(n);
    rhs.head(bvp.equations()) = -bvp.residual(u);
    if (tangent) {
        full.row(n - 1) = bvp.inner_row(*tangent).transpose();
        rhs[n - 1] = -(bvp.inner(*tangent, u) - arclength_rhs);
    }
    const Eigen::Index m = n - sc;
    BorderedSystem sys;
    sys.core = full.topLeftCorner(sc, sc);
    sys.border_cols = full.topRightCorner(sc, m);
    sys.border_rows = full.bottomLeftCorner(m, sc);
    sys.corner = full.bottomRightCorner(m, m);
    sys.rhs = rhs;
    return sys;
}

struct CorrectionResult {
    PeriodicOrbit orbit;
    Vector parameters;  // full BVP parameter vector
    int iterations = 0;
    double residual = 0.0;
};

/// Newton correction of a square BVP (free parameters = integral conditions).
inline CorrectionResult newton_correct(const PeriodicBvp& bvp, const Vector& u0, const StepConfig& cfg = {}) {
    check_counts(bvp.constraints().size(), bvp.free().size(), false, "newton_correct");
    NewtonResult nr = newton(bvp, u0, LinearRows{Matrix(0, bvp.unknowns()), Vector(0)}, cfg);
    if (!nr.converged)
        throw ConvergenceFailure("newton_correct: no convergence", nr.residual, nr.iterations);
    return {bvp.orbit_of(nr.solution), bvp.ext_of(nr.solution), nr.iterations, nr.residual};
}

/// Max of |x'(s) - T g(x(s))| over `samples` points per interval placed between the
/// collocation nodes; zero at the nodes themselves, so it measures the interpolant's defect.
inline double orbit_defect(const PeriodicOrbit& orbit, const DynSystem& sys, int samples = 5) {
    double worst = 0.0;
    const Mesh& mesh = orbit.mesh;
    for (int i = 0; i < mesh.intervals(); ++i)
        for (int k = 0; k < samples; ++k) {
            const double s = mesh.breaks()[i] + mesh.width(i) * (k + 0.5) / samples;
            const Vector d = eval_orbit_derivative(orbit, s) -
                             orbit.period * eval_rhs(sys, eval_orbit(orbit, s), 0.0, orbit.params);
            worst = std::max(worst, d.cwiseAbs().maxCoeff());
        }
    return worst;
}

struct AdaptResult {
    PeriodicOrbit orbit;
    int iterations = 0;
    double residual = 0.0;  // scaled Newton residual after the correction
};

/// Redistributes the mesh of a converged limit cycle, re-interpolates it and corrects it
/// with the phase condition and T free (system parameters fixed). Repeats until the
/// breakpoints move by less than `settle` of the local interval width.
inline AdaptResult adapt_mesh(const PeriodicOrbit& orbit, const DynSystem& sys, const StepConfig& cfg = {},
                              int max_passes = 4, double settle = 0.05) {
    AdaptResult res{orbit, 0, 0.0};
    for (int pass = 0; pass < max_passes; ++pass) {
        const Mesh& old = res.orbit.mesh;
        Mesh fresh = adapted_mesh(res.orbit);
        double moved = 0.0;
        for (int i = 1; i < fresh.intervals(); ++i)
            moved = std::max(moved, std::abs(fresh.breaks()[i] - old.breaks()[i]) /
                                        std::min({old.width(i - 1), old.width(i), fresh.width(i - 1), fresh.width(i)}));
        if (pass > 0 && moved < settle) break;
        PeriodicOrbit shifted = interpolate_orbit(res.orbit, fresh);
        PeriodicBvp bvp(sys, fresh, {IntegralConstraint::phase()},
                        BvpParameters::for_system(sys, orbit.params, orbit.period), {sys.num_params()});
        bvp.set_reference(shifted.states);
        CorrectionResult cr = newton_correct(bvp, bvp.pack(shifted), cfg);
        res.orbit = std::move(cr.orbit);
        res.iterations += cr.iterations;
        res.residual = cr.residual;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Branch of periodic orbits.

struct Monitor {
    std::string name;
    std::function<double(const PeriodicBvp&, const Vector& u)> eval;
};

struct LabelRequest {
    std::string monitor;  // a monitor name or a parameter name
    std::vector<double> values;
};

struct ParameterBound {
    std::string name;
    double lower;
    double upper;
};

struct OrbitBranchOptions {
    StepConfig step;
    std::string primary;  // parameter orienting the start and tested for folds
    int direction = 1;
    std::vector<ParameterBound> bounds;
    std::vector<LabelRequest> labels;
    std::vector<Monitor> monitors;
    bool detect_folds = false;
    int adapt_every = 0;  // 0: fixed mesh
    double label_tol = 1e-10;
    double fold_tol = 1e-8;
    bool stop_at_labels = false;  // stop at the first user label (used for branch reversal)
};

struct OrbitBranchPoint {
    PeriodicOrbit orbit;
    Vector parameters;             // full BVP parameter vector
    std::vector<double> monitors;  // values of OrbitBranchOptions::monitors
    std::string label;             // "", "ST", "UZ", "LP", "EP"
    std::string label_info;        // e.g. "K=7"
    int step = 0;
    double arclength = 0.0;
    int newton_iterations = 0;
};

struct OrbitBranch {
    std::vector<std::string> parameter_names;
    std::vector<std::string> monitor_names;
    std::vector<OrbitBranchPoint> points;
    bool stalled = false;
    std::string termination;

    std::vector<const OrbitBranchPoint*> labeled(const std::string& tag) const {
        std::vector<const OrbitBranchPoint*> out;
        for (const auto& p : points)
            if (p.label == tag) out.push_back(&p);
        return out;
    }
};

/// Pseudo-arclength continuation of a BVP with one more free parameter than integral
/// conditions, from a converged U0. Fires user labels, folds in the primary parameter and
/// endpoint labels at parameter bounds; optionally re-adapts the mesh.
inline OrbitBranch continue_orbits(PeriodicBvp& bvp, const Vector& u0, const OrbitBranchOptions& opts,
                                   const Vector* orientation = nullptr) {
    check_counts(bvp.constraints().size(), bvp.free().size(), true, "continuation");
    OrbitBranch branch;
    branch.parameter_names = bvp.parameters().names;
    for (const auto& mon : opts.monitors) branch.monitor_names.push_back(mon.name);

    const int primary_slot = bvp.parameters().index(opts.primary);
    const auto primary_col = bvp.free_column(primary_slot);
    if (!primary_col) throw ConfigError("continuation: primary parameter '" + opts.primary + "' is not free");
    const Eigen::Index pcol = bvp.state_size() + *primary_col;

    // Scalar observables by name: monitors first, then BVP parameters.
    auto observable = [&](const std::string& name) -> std::function<double(const Vector&)> {
        for (const auto& mon : opts.monitors)
            if (mon.name == name) {
                auto f = mon.eval;
                return [&bvp, f](const Vector& u) { return f(bvp, u); };
            }
        const int slot = bvp.parameters().index(name);
        return [&bvp, slot](const Vector& u) { return bvp.ext_of(u)[slot]; };
    };
    struct Label {
        std::function<double(const Vector&)> f;
        double value;
        std::string info;
    };
    std::vector<Label> labels;
    for (const auto& req : opts.labels) {
        auto f = observable(req.monitor);
        for (double v : req.values) {
            std::ostringstream os;
            os << req.monitor << "=" << v;
            labels.push_back({f, v, os.str()});
        }
    }
    struct Bound {
        int slot;
        double lo, hi;
    };
    std::vector<Bound> bounds;
    for (const auto& b : opts.bounds) bounds.push_back({bvp.parameters().index(b.name), b.lower, b.upper});

    double arclength = 0.0;
    int stepno = 0;
    auto record = [&](const BranchPoint& bp, std::string label, std::string info) {
        OrbitBranchPoint pt;
        pt.orbit = bvp.orbit_of(bp.u);
        pt.parameters = bvp.ext_of(bp.u);
        for (const auto& mon : opts.monitors) pt.monitors.push_back(mon.eval(bvp, bp.u));
        pt.label = std::move(label);
        pt.label_info = std::move(info);
        pt.step = stepno;
        pt.arclength = arclength;
        pt.newton_iterations = bp.newton_iterations;
        branch.points.push_back(std::move(pt));
    };

    bvp.set_reference(bvp.states_of(u0));
    Continuation cont(bvp, opts.step);
    if (orientation)
        cont.start_along(u0, *orientation);
    else
        cont.start(u0, pcol, opts.direction);
    record(cont.last(), "ST", "");

    for (stepno = 1; stepno <= opts.step.max_steps; ++stepno) {
        auto next = cont.advance();
        if (!next) {
            branch.stalled = true;
            branch.termination = "step underflow";
            break;
        }
        const BranchPoint& prev = cont.last();

        struct Event {
            double frac;
            std::string tag, info;
            std::function<double(const BranchPoint&)> g;
            double g_prev, g_next;
            bool terminal;
            double lo = 0.0, hi = -1.0;
        };
        std::vector<Event> events;
        for (const auto& lab : labels) {
            const double a = lab.f(prev.u) - lab.value, b = lab.f(next->u) - lab.value;
            auto f = lab.f;
            const double v = lab.value;
            auto g = [f, v](const BranchPoint& p) { return f(p.u) - v; };
            if (a != 0.0 && a * b < 0.0) {
                events.push_back({a / (a - b), "UZ", lab.info, g, a, b, opts.stop_at_labels});
                continue;
            }
            if (a * b <= 0.0) continue;
            // A step across a turning point of the label quantity can hold two crossings.
            auto slope = [f](const BranchPoint& p) {
                const double h = 1e-7 * std::max(1.0, p.u.lpNorm<Eigen::Infinity>());
                return (f(p.u + h * p.tangent) - f(p.u - h * p.tangent)) / (2.0 * h);
            };
            const double da = slope(prev), db = slope(*next);
            if (!(da * db < 0.0 && a * da < 0.0)) continue;
            const auto turn = cont.refine(prev, *next, da, db, slope, 0.0, 60);
            if (!turn) continue;
            const double c = g(*turn);
            if (c * a >= 0.0) continue;
            const double s = turn->step / next->step;
            events.push_back({s * a / (a - c), "UZ", lab.info, g, a, c, opts.stop_at_labels, 0.0, turn->step});
            events.push_back({s + (1.0 - s) * c / (c - b), "UZ", lab.info, g, c, b, opts.stop_at_labels, turn->step,
                              next->step});
        }
        if (opts.detect_folds) {
            const double a = prev.tangent[pcol], b = next->tangent[pcol];
            if (stepno > 1 && a * b < 0.0)
                events.push_back({a / (a - b), "LP", opts.primary,
                                  [pcol](const BranchPoint& p) { return p.tangent[pcol]; }, a, b, false});
        }
        for (const auto& bd : bounds) {
            const double v0 = bvp.ext_of(prev.u)[bd.slot], v1 = bvp.ext_of(next->u)[bd.slot];
            for (double edge : {bd.lo, bd.hi}) {
                const double a = v0 - edge, b = v1 - edge;
                if (a == 0.0 || a * b >= 0.0) continue;
                const int slot = bd.slot;
                events.push_back({a / (a - b), "EP", bvp.parameters().names[slot],
                                  [&bvp, slot, edge](const BranchPoint& p) { return bvp.ext_of(p.u)[slot] - edge; },
                                  a, b, true});
            }
        }
        std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) { return x.frac < y.frac; });

        bool stop = false;
        for (const auto& ev : events) {
            const double tol = ev.tag == "LP" ? opts.fold_tol : opts.label_tol;
            auto hit = cont.refine(prev, *next, ev.g_prev, ev.g_next, ev.g, tol, 40, ev.lo, ev.hi);
            if (!hit) continue;
            const double saved = arclength;
            arclength += hit->step;
            record(*hit, ev.tag, ev.info);
            arclength = saved;
            if (ev.terminal) {
                stop = true;
                branch.termination = ev.tag == "EP" ? "parameter bound " + ev.info : "label " + ev.info;
                break;
            }
        }
        if (stop) break;

        arclength += next->step;
        BranchPoint accepted = std::move(*next);
        bvp.set_reference(bvp.states_of(accepted.u));
        record(accepted, "", "");
        cont.commit(std::move(accepted));

        if (opts.adapt_every > 0 && stepno % opts.adapt_every == 0) {
            const BranchPoint cur = cont.last();
            const Mesh old = bvp.mesh();
            Mesh fresh = adapted_mesh(bvp.orbit_of(cur.u));
            bvp.set_mesh(fresh);
            Vector u = bvp.transfer(cur.u, old);
            const Vector tau = bvp.transfer(cur.tangent, old);
            bvp.set_reference(bvp.states_of(u));
            LinearRows pin{bvp.inner_row(tau).transpose(), Vector::Constant(1, bvp.inner(tau, u))};
            NewtonResult nr = newton(bvp, u, pin, opts.step);
            if (!nr.converged) {
                // Keep the old discretization if the transferred point does not correct.
                bvp.set_mesh(old);
                bvp.set_reference(bvp.states_of(cur.u));
                continue;
            }
            bvp.set_reference(bvp.states_of(nr.solution));
            const double step = cont.current_step();
            cont.start_along(nr.solution, tau);
            cont.set_step(step);
            // The stored branch point keeps its original mesh; the next point uses the new one.
        }
    }
    if (branch.termination.empty()) branch.termination = "max steps";
    if (branch.points.back().label.empty()) branch.points.back().label = "EP";
    return branch;
}

}  // namespace harmocont
