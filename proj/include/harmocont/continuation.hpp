#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <optional>
#include <vector>

#include "dynsys.hpp"
#include "errors.hpp"
#include "linbord.hpp"

namespace harmocont {

/// Step-size and Newton policy shared by all continuations.
struct StepConfig {
    double initial_step = 1e-2;
    double max_step = 0.5;
    double min_step = 0.0;  // 0: initial_step / 2^max_halvings
    int max_halvings = 10;
    double growth = 1.3;
    int fast_newton_iterations = 3;  // grow the step when Newton needs at most this many
    int max_steps = 200;
    double newton_tol = 1e-10;
    int newton_max_iterations = 10;
};

/// A nonlinear system F(U) = 0 with one more unknown than equations.
///
/// `jacobian` appends triplets of dF/dU; `inner` is the (semi-)inner product used for
/// arclength; `inner_row(v)` is the row vector w with w . u = inner(v, u); `scales`
/// holds per-unknown magnitudes for relative norms.
template <class P>
concept ContinuationProblem = requires(P& p, const P& cp, const Vector& u, std::vector<Triplet>& t) {
    { cp.unknowns() } -> std::convertible_to<Eigen::Index>;
    { cp.equations() } -> std::convertible_to<Eigen::Index>;
    { cp.residual(u) } -> std::convertible_to<Vector>;
    { cp.jacobian(u, t) };
    { cp.inner(u, u) } -> std::convertible_to<double>;
    { cp.inner_row(u) } -> std::convertible_to<Vector>;
    { cp.scales(u) } -> std::convertible_to<Vector>;
};

struct NewtonResult {
    Vector solution;
    int iterations = 0;
    double residual = 0.0;  // scaled max-norm of the final residual
    bool converged = false;
};

/// Extra linear rows  rows * U = rhs  closing a problem's equation count.
struct LinearRows {
    Matrix rows;  // k x unknowns
    Vector rhs;   // k
};

namespace detail {

inline double scaled_max(const Vector& v, const Vector& scales) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i]) / scales[i]);
    return m;
}

template <ContinuationProblem P>
SparseMatrix augmented_matrix(const P& problem, const Vector& u, const LinearRows& extra) {
    const auto n = problem.unknowns();
    const auto neq = problem.equations();
    if (neq + extra.rows.rows() != n)
        throw ContractViolation("newton: " + std::to_string(neq) + " equations plus " +
                                std::to_string(extra.rows.rows()) + " extra rows do not match " +
                                std::to_string(n) + " unknowns");
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(n) * 16);
    problem.jacobian(u, trip);
    for (Eigen::Index r = 0; r < extra.rows.rows(); ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            if (extra.rows(r, c) != 0.0) trip.emplace_back(neq + r, c, extra.rows(r, c));
    SparseMatrix a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
}

template <ContinuationProblem P>
Vector augmented_residual(const P& problem, const Vector& u, const LinearRows& extra) {
    Vector r(problem.unknowns());
    r.head(problem.equations()) = problem.residual(u);
    if (extra.rows.rows() > 0) r.tail(extra.rows.rows()) = extra.rows * u - extra.rhs;
    return r;
}

}  // namespace detail

/// Newton iteration on F(U) = 0 closed by `extra`. Never throws on non-convergence;
/// inspect `converged`. Divergence = residual growth over two consecutive iterations.
template <ContinuationProblem P>
NewtonResult newton(const P& problem, Vector u, const LinearRows& extra, const StepConfig& cfg) {
    NewtonResult res;
    Vector scales = problem.scales(u);
    Vector r = detail::augmented_residual(problem, u, extra);
    double rnorm = detail::scaled_max(r, scales);
    int growth_streak = 0;
    for (int it = 1; it <= cfg.newton_max_iterations; ++it) {
        Vector delta;
        try {
            SparseFactorization lu(detail::augmented_matrix(problem, u, extra));
            delta = lu.solve(r);
        } catch (const SingularMatrixError&) {
            res.solution = u;
            res.iterations = it;
            res.residual = rnorm;
            return res;
        }
        u -= delta;
        if (!u.allFinite()) break;
        scales = problem.scales(u);
        const double step = detail::scaled_max(delta, scales);
        r = detail::augmented_residual(problem, u, extra);
        const double rnew = detail::scaled_max(r, scales);
        res.iterations = it;
        if (step < cfg.newton_tol && rnew < cfg.newton_tol) {
            res.solution = std::move(u);
            res.residual = rnew;
            res.converged = true;
            return res;
        }
        growth_streak = rnew > rnorm ? growth_streak + 1 : 0;
        rnorm = rnew;
        if (growth_streak >= 2 || !std::isfinite(rnew)) break;
    }
    res.solution = std::move(u);
    res.residual = rnorm;
    return res;
}

/// Unit tangent of the solution curve at u: F_U tau = 0, oriented so that
/// <tau, reference> > 0 (reference is also used to close the system).
template <ContinuationProblem P>
Vector curve_tangent(const P& problem, const Vector& u, const Vector& reference) {
    LinearRows extra{problem.inner_row(reference).transpose(), Vector::Ones(1)};
    SparseFactorization lu(detail::augmented_matrix(problem, u, extra));
    Vector rhs = Vector::Zero(problem.unknowns());
    rhs[problem.unknowns() - 1] = 1.0;
    Vector tau = lu.solve(rhs);
    const double nrm = std::sqrt(problem.inner(tau, tau));
    if (!(nrm > 0.0)) throw NumericalFailure("tangent: degenerate null vector");
    return tau / nrm;
}

/// Initial tangent with the component `index` oriented along sign(direction).
template <ContinuationProblem P>
Vector initial_tangent(const P& problem, const Vector& u, Eigen::Index index, int direction) {
    // Close the system with e_index first; fall back to other unit vectors if the curve is
    // locally orthogonal to that coordinate (e.g. at a fold in the chosen parameter).
    const auto n = problem.unknowns();
    std::vector<Eigen::Index> candidates{index};
    for (Eigen::Index k = n - 1; k >= 0 && candidates.size() < 8; --k)
        if (k != index) candidates.push_back(k);
    for (auto k : candidates) {
        Matrix row = Matrix::Zero(1, n);
        row(0, k) = 1.0;
        try {
            SparseFactorization lu(detail::augmented_matrix(problem, u, LinearRows{row, Vector::Zero(1)}));
            Vector rhs = Vector::Zero(n);
            rhs[n - 1] = 1.0;
            Vector tau = lu.solve(rhs);
            const double nrm = std::sqrt(problem.inner(tau, tau));
            if (!(nrm > 0.0) || !tau.allFinite()) continue;
            tau /= nrm;
            if (tau[index] * direction < 0.0) tau = -tau;
            return tau;
        } catch (const SingularMatrixError&) {
        }
    }
    throw NumericalFailure("tangent: no unit vector closes the Jacobian at the start point");
}

struct BranchPoint {
    Vector u;
    Vector tangent;        // unit tangent at u
    Vector direction;      // predictor direction used to reach u
    double step = 0.0;     // arclength step that produced u
    int newton_iterations = 0;
};

/// Pseudo-arclength predictor-corrector. `advance` proposes the next point; drivers
/// inspect it for events and then `commit` it (or a refined event point first).
template <ContinuationProblem P>
class Continuation {
public:
    Continuation(P& problem, StepConfig cfg) : problem_(problem), cfg_(cfg), step_(cfg.initial_step) {}

    /// Starts from a converged point; `index` and `direction` orient the first tangent.
    const BranchPoint& start(const Vector& u0, Eigen::Index index, int direction) {
        BranchPoint bp;
        bp.u = u0;
        bp.tangent = initial_tangent(problem_, u0, index, direction);
        bp.direction = bp.tangent;
        history_.clear();
        history_.push_back(std::move(bp));
        step_ = cfg_.initial_step;
        return history_.back();
    }

    /// Starts with a prescribed tangent orientation (used for restarts and reversals).
    const BranchPoint& start_along(const Vector& u0, const Vector& orientation) {
        BranchPoint bp;
        bp.u = u0;
        bp.tangent = curve_tangent(problem_, u0, orientation);
        bp.direction = bp.tangent;
        history_.clear();
        history_.push_back(std::move(bp));
        step_ = cfg_.initial_step;
        return history_.back();
    }

    /// Predictor direction: secant through the last two committed points, else the tangent.
    Vector predictor_direction() const {
        const auto& last = history_.back();
        if (history_.size() < 2) return last.tangent;
        Vector sec = last.u - history_[history_.size() - 2].u;
        const double nrm = std::sqrt(problem_.inner(sec, sec));
        if (!(nrm > 0.0)) return last.tangent;
        return sec / nrm;
    }

    /// Corrects from `from` along `dir` with arclength `ds`; nullopt if Newton fails.
    std::optional<BranchPoint> solve_from(const BranchPoint& from, const Vector& dir, double ds,
                                          const Vector* guess = nullptr) const {
        LinearRows extra{problem_.inner_row(dir).transpose(), Vector(1)};
        extra.rhs[0] = problem_.inner(dir, from.u) + ds;
        Vector u0 = guess ? *guess : Vector(from.u + ds * dir);
        NewtonResult nr = newton(problem_, std::move(u0), extra, cfg_);
        if (!nr.converged) return std::nullopt;
        BranchPoint bp;
        bp.u = std::move(nr.solution);
        bp.direction = dir;
        bp.step = ds;
        bp.newton_iterations = nr.iterations;
        try {
            bp.tangent = curve_tangent(problem_, bp.u, dir);
        } catch (const Error&) {
            return std::nullopt;
        }
        return bp;
    }

    /// Next point along the branch, adapting the step; nullopt on step underflow.
    std::optional<BranchPoint> advance() {
        const BranchPoint& last = history_.back();
        const Vector dir = predictor_direction();
        double ds = step_;
        const double min_step =
            cfg_.min_step > 0.0 ? cfg_.min_step : cfg_.initial_step / std::pow(2.0, cfg_.max_halvings);
        for (int halving = 0; halving <= cfg_.max_halvings; ++halving) {
            if (auto bp = solve_from(last, dir, ds)) {
                step_ = ds;
                if (bp->newton_iterations <= cfg_.fast_newton_iterations)
                    step_ = std::min(ds * cfg_.growth, cfg_.max_step);
                return bp;
            }
            ds *= 0.5;
            if (ds < min_step) break;
        }
        return std::nullopt;
    }

    void commit(BranchPoint bp) { history_.push_back(std::move(bp)); }

    /// Finds the point between `from` and `to` (same predictor direction) where g vanishes,
    /// by Illinois-modified regula falsi on the arclength. g(from) and g(to) must bracket 0.
    /// `lo` and `hi` narrow the arclength bracket (g_from, g_to are then the values there).
    std::optional<BranchPoint> refine(const BranchPoint& from, const BranchPoint& to, double g_from,
                                      double g_to, const std::function<double(const BranchPoint&)>& g,
                                      double tol, int max_iterations = 40, double lo = 0.0,
                                      double hi = -1.0) const {
        double a = lo, b = hi < 0.0 ? to.step : hi, fa = g_from, fb = g_to;
        int side = 0;
        std::optional<BranchPoint> best;
        for (int it = 0; it < max_iterations; ++it) {
            double c = (a * fb - b * fa) / (fb - fa);
            if (!(c > a && c < b)) c = 0.5 * (a + b);
            const double t = c / to.step;
            Vector guess = (1.0 - t) * from.u + t * to.u;
            auto pt = solve_from(from, to.direction, c, &guess);
            if (!pt) return best;
            const double fc = g(*pt);
            best = pt;
            if (std::abs(fc) < tol) return pt;
            if ((fc > 0) == (fb > 0)) {
                b = c;
                fb = fc;
                if (side == -1) fa *= 0.5;
                side = -1;
            } else {
                a = c;
                fa = fc;
                if (side == 1) fb *= 0.5;
                side = 1;
            }
            if (b - a < 1e-15 * std::max(1.0, to.step)) return pt;
        }
        return best;
    }

    const BranchPoint& last() const { return history_.back(); }
    const std::vector<BranchPoint>& history() const { return history_; }
    std::vector<BranchPoint>& mutable_history() { return history_; }
    double current_step() const { return step_; }
    void set_step(double s) { step_ = s; }
    const StepConfig& config() const { return cfg_; }
    P& problem() { return problem_; }

private:
    P& problem_;
    StepConfig cfg_;
    double step_;
    std::vector<BranchPoint> history_;
};

}  // namespace harmocont
