#pragma once

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "continuation.hpp"
#include "dynsys.hpp"
#include "linbord.hpp"

namespace harmocont {

namespace equilibria_defaults {
inline constexpr double tol_eq = 1e-10;
inline constexpr double tol_hopf = 1e-10;
inline constexpr double sentinel_cap = 1e3;
}  // namespace equilibria_defaults

struct EquilibriumPoint {
    Vector x;
    Vector p;
    Spectrum spectrum;
};

struct HopfPoint {
    EquilibriumPoint equilibrium;
    int free_param = -1;
    double omega = 0.0;
    Eigen::VectorXcd eigenvector;  // unit norm, largest component real positive

    double period() const { return 2.0 * std::numbers::pi / omega; }
};

/// Whether an eigenvalue has a nonzero imaginary part at working precision.
inline bool is_complex(const std::complex<double>& z) {
    return std::abs(z.imag()) > 1e-10 * std::max(1.0, std::abs(z));
}

inline bool has_complex_pair(const Spectrum& s) {
    for (const auto& z : s.values)
        if (is_complex(z)) return true;
    return false;
}

/// Real part of the complex pair closest to the imaginary axis. Without a complex pair,
/// returns the least-stable real part clipped to +-sentinel_cap.
inline double hopf_test(const Spectrum& s) {
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& z : s.values) {
        if (!is_complex(z) || z.imag() < 0.0) continue;
        if (!found || std::abs(z.real()) < std::abs(best)) best = z.real();
        found = true;
    }
    if (found) return best;
    if (s.values.empty()) return -equilibria_defaults::sentinel_cap;
    const double re = s.values.front().real();
    return std::copysign(std::min(std::abs(re), equilibria_defaults::sentinel_cap), re);
}

/// Equilibrium problem in U = (x, p_free): g(x; p) = 0.
class EquilibriumProblem {
public:
    EquilibriumProblem(DynSystem sys, Vector params, int free_param)
        : sys_(std::move(sys)), params_(std::move(params)), free_(free_param) {
        if (free_ < 0 || free_ >= sys_.num_params())
            throw ContractViolation("equilibria: free parameter index out of range");
        if (params_.size() != sys_.num_params())
            throw ContractViolation("equilibria: parameter vector size mismatch");
    }

    Eigen::Index unknowns() const { return sys_.dim() + 1; }
    Eigen::Index equations() const { return sys_.dim(); }

    Vector params_at(const Vector& u) const {
        Vector p = params_;
        p[free_] = u[sys_.dim()];
        return p;
    }
    Vector state_of(const Vector& u) const { return u.head(sys_.dim()); }
    Vector pack(const Vector& x, double pfree) const {
        Vector u(sys_.dim() + 1);
        u << x, pfree;
        return u;
    }

    Vector residual(const Vector& u) const { return eval_rhs(sys_, u.head(sys_.dim()), 0.0, params_at(u)); }

    void jacobian(const Vector& u, std::vector<Triplet>& t) const {
        const int n = sys_.dim();
        const Vector p = params_at(u);
        const Matrix jx = jacobian_x(sys_, u.head(n), 0.0, p);
        const Matrix jp = jacobian_p(sys_, u.head(n), 0.0, p);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                if (jx(i, j) != 0.0) t.emplace_back(i, j, jx(i, j));
            t.emplace_back(i, n, jp(i, free_));
        }
    }

    double inner(const Vector& a, const Vector& b) const { return a.dot(b); }
    Vector inner_row(const Vector& v) const { return v; }
    Vector scales(const Vector& u) const { return u.cwiseAbs().cwiseMax(1.0); }

    const DynSystem& system() const { return sys_; }
    const Vector& base_params() const { return params_; }
    int free_param() const { return free_; }

private:
    DynSystem sys_;
    Vector params_;
    int free_;
};

enum class EquilibriumLabel { None, Start, Hopf, End };

struct EquilibriumBranchPoint {
    EquilibriumPoint point;
    double hopf_value = 0.0;
    EquilibriumLabel label = EquilibriumLabel::None;
    std::optional<HopfPoint> hopf;
};

struct EquilibriumBranch {
    std::vector<EquilibriumBranchPoint> points;
    std::vector<HopfPoint> hopf_points;
    bool stalled = false;
    int steps = 0;
};

struct EquilibriumOptions {
    StepConfig step;
    int direction = 1;  // sign of the initial change of the free parameter
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool detect_hopf = true;
};

namespace detail {

inline Matrix equilibrium_jacobian(const DynSystem& sys, const Vector& x, const Vector& p) {
    return jacobian_x(sys, x, 0.0, p);
}

inline EquilibriumPoint make_equilibrium(const DynSystem& sys, const Vector& x, const Vector& p) {
    return {x, p, eigenvalues(equilibrium_jacobian(sys, x, p))};
}

/// Newton on g(x; p) = 0 with p fixed.
inline std::optional<Vector> correct_equilibrium(const DynSystem& sys, const Vector& x0, const Vector& p,
                                                 int free_param, const StepConfig& cfg) {
    EquilibriumProblem prob(sys, p, free_param);
    Matrix pin = Matrix::Zero(1, sys.dim() + 1);
    pin(0, sys.dim()) = 1.0;
    LinearRows extra{pin, Vector::Constant(1, p[free_param])};
    auto nr = newton(prob, prob.pack(x0, p[free_param]), extra, cfg);
    if (!nr.converged) return std::nullopt;
    return Vector(nr.solution.head(sys.dim()));
}

inline int unstable_complex_count(const Spectrum& s) {
    int c = 0;
    for (const auto& z : s.values)
        if (is_complex(z) && z.real() > 0.0) ++c;
    return c;
}

}  // namespace detail

/// Refines a Hopf point between two equilibria whose hopf_test values differ in sign.
inline HopfPoint locate_hopf(const DynSystem& sys, const EquilibriumPoint& a, const EquilibriumPoint& b,
                             int free_param, const StepConfig& cfg = {}) {
    using equilibria_defaults::tol_hopf;
    if (!has_complex_pair(a.spectrum) || !has_complex_pair(b.spectrum))
        throw LocalizationFailure("locate_hopf: bracket end without a complex pair");
    const double fa = hopf_test(a.spectrum), fb = hopf_test(b.spectrum);
    if (fa * fb > 0.0) throw LocalizationFailure("locate_hopf: hopf test does not change sign");

    const double pa = a.p[free_param], pb = b.p[free_param];
    Vector p = a.p;
    auto eval = [&](double pv) -> std::pair<double, EquilibriumPoint> {
        p[free_param] = pv;
        const double t = (pb == pa) ? 0.0 : (pv - pa) / (pb - pa);
        const Vector guess = (1.0 - t) * a.x + t * b.x;
        auto x = detail::correct_equilibrium(sys, guess, p, free_param, cfg);
        if (!x) throw LocalizationFailure("locate_hopf: equilibrium correction failed");
        EquilibriumPoint e = detail::make_equilibrium(sys, *x, p);
        if (!has_complex_pair(e.spectrum))
            throw LocalizationFailure("locate_hopf: complex pair lost inside the bracket");
        return {hopf_test(e.spectrum), std::move(e)};
    };

    std::optional<EquilibriumPoint> best;
    double best_f = std::numeric_limits<double>::infinity();
    auto f = [&](double pv) {
        auto [val, e] = eval(pv);
        if (std::abs(val) < std::abs(best_f)) {
            best_f = val;
            best = std::move(e);
        }
        return val;
    };
    auto tol = [&](double lo, double hi) {
        return std::abs(best_f) < 0.1 * tol_hopf || std::abs(hi - lo) <= 4e-16 * std::max(1.0, std::abs(lo));
    };
    if (fa == 0.0) {
        best = a;
        best_f = 0.0;
    } else if (fb == 0.0) {
        best = b;
        best_f = 0.0;
    } else {
        std::uintmax_t max_iter = 200;
        boost::math::tools::toms748_solve(f, std::min(pa, pb), std::max(pa, pb), pa < pb ? fa : fb,
                                          pa < pb ? fb : fa, tol, max_iter);
    }
    if (!best || std::abs(best_f) >= tol_hopf)
        throw LocalizationFailure("locate_hopf: |Re lambda| = " + std::to_string(std::abs(best_f)) +
                                  " above tolerance");

    // Critical pair: the complex pair with the smallest |Re|; a tie is ambiguous.
    const Spectrum& s = best->spectrum;
    std::vector<std::complex<double>> upper;
    for (const auto& z : s.values)
        if (is_complex(z) && z.imag() > 0.0) upper.push_back(z);
    std::sort(upper.begin(), upper.end(),
              [](const auto& x, const auto& y) { return std::abs(x.real()) < std::abs(y.real()); });
    if (upper.size() > 1 && std::abs(upper[1].real()) < 10.0 * tol_hopf)
        throw LocalizationFailure("locate_hopf: two complex pairs equally close to the imaginary axis");
    for (const auto& z : s.values)
        if (!is_complex(z) && std::abs(z.real()) < 10.0 * tol_hopf)
            throw LocalizationFailure("locate_hopf: real eigenvalue at zero next to the critical pair");

    HopfPoint h;
    h.equilibrium = *best;
    h.free_param = free_param;
    h.omega = upper.front().imag();
    const Matrix jac = detail::equilibrium_jacobian(sys, best->x, best->p);
    Eigen::VectorXcd q = eigenvector_near(jac, upper.front());
    Eigen::Index big = 0;
    q.cwiseAbs().maxCoeff(&big);
    q *= std::conj(q[big]) / std::abs(q[big]);
    h.eigenvector = q / q.norm();
    return h;
}

/// Pseudo-arclength continuation of equilibria in one parameter with Hopf monitoring.
inline EquilibriumBranch continue_equilibria(const DynSystem& sys, const Vector& p0, int free_param,
                                             const Vector& x0, const EquilibriumOptions& opts = {}) {
    EquilibriumBranch branch;
    auto x_start = detail::correct_equilibrium(sys, x0, p0, free_param, opts.step);
    if (!x_start) throw InvalidStartError("continue_equilibria: Newton failed at the start point");

    EquilibriumProblem prob(sys, p0, free_param);
    Continuation cont(prob, opts.step);
    const int n = sys.dim();
    cont.start(prob.pack(*x_start, p0[free_param]), n, opts.direction);

    auto make_point = [&](const Vector& u, EquilibriumLabel label) {
        EquilibriumBranchPoint bp;
        bp.point = detail::make_equilibrium(sys, prob.state_of(u), prob.params_at(u));
        bp.hopf_value = hopf_test(bp.point.spectrum);
        bp.label = label;
        return bp;
    };
    branch.points.push_back(make_point(cont.last().u, EquilibriumLabel::Start));

    for (int stepno = 0; stepno < opts.step.max_steps; ++stepno) {
        auto next = cont.advance();
        if (!next) {
            branch.stalled = true;
            break;
        }
        ++branch.steps;
        const double pv = next->u[n];
        std::optional<BranchPoint> end;
        if (pv < opts.lower || pv > opts.upper) {
            const double bound = pv < opts.lower ? opts.lower : opts.upper;
            const double g_from = cont.last().u[n] - bound, g_to = pv - bound;
            end = cont.refine(cont.last(), *next, g_from, g_to,
                              [&](const BranchPoint& b) { return b.u[n] - bound; }, 1e-12);
            if (!end) break;
        }
        EquilibriumBranchPoint cand = make_point(end ? end->u : next->u, EquilibriumLabel::None);
        const EquilibriumBranchPoint& prev = branch.points.back();

        // A pair switch (another pair becoming closest to the axis) flips the test sign
        // without a crossing; the count of unstable complex eigenvalues tells them apart.
        if (opts.detect_hopf && prev.hopf_value * cand.hopf_value < 0.0 &&
            has_complex_pair(prev.point.spectrum) && has_complex_pair(cand.point.spectrum) &&
            detail::unstable_complex_count(prev.point.spectrum) !=
                detail::unstable_complex_count(cand.point.spectrum)) {
            HopfPoint h = locate_hopf(sys, prev.point, cand.point, free_param, opts.step);
            EquilibriumBranchPoint hp;
            hp.point = h.equilibrium;
            hp.hopf_value = hopf_test(hp.point.spectrum);
            hp.label = EquilibriumLabel::Hopf;
            hp.hopf = h;
            branch.hopf_points.push_back(h);
            branch.points.push_back(std::move(hp));
        }
        if (end) {
            cand.label = EquilibriumLabel::End;
            branch.points.push_back(std::move(cand));
            break;
        }
        branch.points.push_back(std::move(cand));
        cont.commit(std::move(*next));
    }
    if (branch.points.back().label == EquilibriumLabel::None)
        branch.points.back().label = EquilibriumLabel::End;
    return branch;
}

}  // namespace harmocont
