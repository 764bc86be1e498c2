#pragma once

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "dynsys.hpp"
#include "errors.hpp"

namespace harmocont {

/// Gauss-Legendre rule on [0, 1]; weights sum to 1.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(int m) {
    if (m < 1) throw ContractViolation("gauss_legendre: need at least one node");
    const auto pos = boost::math::legendre_p_zeros<double>(m);  // non-negative zeros, ascending
    std::vector<double> zeros;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it)
        if (*it > 0.0) zeros.push_back(-*it);
    for (double z : pos) zeros.push_back(z);
    GaussRule rule;
    for (double x : zeros) {
        const double dp = boost::math::legendre_p_prime(m, x);
        rule.nodes.push_back(0.5 * (x + 1.0));
        rule.weights.push_back(1.0 / ((1.0 - x * x) * dp * dp));  // 2/(...) halved for [0,1]
    }
    return rule;
}

/// Lagrange basis on the equidistant nodes l/m (l = 0..m) of the unit interval.
inline void lagrange_basis(int m, double xi, Eigen::Ref<Eigen::RowVectorXd> value,
                           Eigen::RowVectorXd* derivative = nullptr) {
    for (int l = 0; l <= m; ++l) {
        const double xl = static_cast<double>(l) / m;
        double v = 1.0;
        for (int k = 0; k <= m; ++k)
            if (k != l) v *= (xi - static_cast<double>(k) / m) / (xl - static_cast<double>(k) / m);
        value[l] = v;
        if (derivative) {
            double d = 0.0;
            for (int r = 0; r <= m; ++r) {
                if (r == l) continue;
                double prod = 1.0 / (xl - static_cast<double>(r) / m);
                for (int k = 0; k <= m; ++k)
                    if (k != l && k != r) prod *= (xi - static_cast<double>(k) / m) / (xl - static_cast<double>(k) / m);
                d += prod;
            }
            (*derivative)[l] = d;
        }
    }
}

/// Partition 0 = tau_0 < ... < tau_N = 1 with degree-m piecewise polynomials.
/// Each interval carries m + 1 equidistant representation points (shared endpoints)
/// and m Gauss collocation nodes.
class Mesh {
public:
    Mesh() = default;

    Mesh(std::vector<double> breaks, int degree) : breaks_(std::move(breaks)), degree_(degree) {
        if (degree_ < 1) throw ContractViolation("mesh: degree must be >= 1");
        if (breaks_.size() < 2) throw ContractViolation("mesh: need at least one interval");
        if (breaks_.front() != 0.0 || breaks_.back() != 1.0)
            throw ContractViolation("mesh: breakpoints must span [0, 1]");
        for (std::size_t i = 1; i < breaks_.size(); ++i)
            if (!(breaks_[i] > breaks_[i - 1]))
                throw ContractViolation("mesh: breakpoints must be strictly increasing");
        gauss_ = gauss_legendre(degree_);
        basis_.resize(degree_, degree_ + 1);
        dbasis_.resize(degree_, degree_ + 1);
        Eigen::RowVectorXd v(degree_ + 1), d(degree_ + 1);
        for (int c = 0; c < degree_; ++c) {
            lagrange_basis(degree_, gauss_.nodes[c], v, &d);
            basis_.row(c) = v;
            dbasis_.row(c) = d;
        }
    }

    static Mesh uniform(int intervals, int degree) {
        if (intervals < 1) throw ContractViolation("mesh: need at least one interval");
        std::vector<double> b(intervals + 1);
        for (int i = 0; i <= intervals; ++i) b[i] = static_cast<double>(i) / intervals;
        b.back() = 1.0;
        return Mesh(std::move(b), degree);
    }

    int intervals() const { return static_cast<int>(breaks_.size()) - 1; }
    int degree() const { return degree_; }
    int points() const { return intervals() * degree_ + 1; }
    const std::vector<double>& breaks() const { return breaks_; }
    double width(int i) const { return breaks_[i + 1] - breaks_[i]; }
    const GaussRule& gauss() const { return gauss_; }

    /// Time of representation point g = i * m + l.
    double point_time(int g) const {
        if (g == points() - 1) return 1.0;
        const int i = g / degree_, l = g % degree_;
        return breaks_[i] + width(i) * static_cast<double>(l) / degree_;
    }
    double gauss_time(int i, int c) const { return breaks_[i] + width(i) * gauss_.nodes[c]; }
    double gauss_weight(int i, int c) const { return width(i) * gauss_.weights[c]; }

    /// L_l(xi_c) and L'_l(xi_c) (derivative w.r.t. the local variable xi in [0, 1]).
    const Matrix& basis_at_gauss() const { return basis_; }
    const Matrix& dbasis_at_gauss() const { return dbasis_; }

    /// Interval containing s (the last one for s = 1).
    int locate(double s) const {
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
        int i = static_cast<int>(it - breaks_.begin()) - 1;
        return std::clamp(i, 0, intervals() - 1);
    }

private:
    std::vector<double> breaks_;
    int degree_ = 0;
    GaussRule gauss_;
    Matrix basis_;
    Matrix dbasis_;
};

/// Discretized 1-periodic solution of x' = T g(x; p).
struct PeriodicOrbit {
    Mesh mesh;
    Matrix states;  // n x mesh.points(), column g = value at point_time(g)
    double period = 0.0;
    Vector params;

    int dim() const { return static_cast<int>(states.rows()); }
};

namespace detail {
inline void check_unit_time(double s) {
    if (!(s >= 0.0 && s <= 1.0))
        throw ContractViolation("orbit evaluation outside [0, 1]: s = " + std::to_string(s));
}
}  // namespace detail

/// Value of the piecewise-polynomial interpolant at scaled time s.
inline Vector eval_orbit(const PeriodicOrbit& orbit, double s) {
    detail::check_unit_time(s);
    const Mesh& mesh = orbit.mesh;
    const int i = mesh.locate(s), m = mesh.degree();
    Eigen::RowVectorXd L(m + 1);
    lagrange_basis(m, (s - mesh.breaks()[i]) / mesh.width(i), L);
    return orbit.states.middleCols(i * m, m + 1) * L.transpose();
}

/// max |x(1) - x(0)|.
inline double periodicity_gap(const PeriodicOrbit& orbit) {
    return (orbit.states.col(orbit.states.cols() - 1) - orbit.states.col(0)).cwiseAbs().maxCoeff();
}

/// d/ds of the interpolant (one-sided at breakpoints: the interval to the right).
inline Vector eval_orbit_derivative(const PeriodicOrbit& orbit, double s) {
    detail::check_unit_time(s);
    const Mesh& mesh = orbit.mesh;
    const int i = mesh.locate(s), m = mesh.degree();
    Eigen::RowVectorXd L(m + 1), dL(m + 1);
    lagrange_basis(m, (s - mesh.breaks()[i]) / mesh.width(i), L, &dL);
    return orbit.states.middleCols(i * m, m + 1) * dL.transpose() / mesh.width(i);
}

/// Interpolant values at all Gauss nodes: column i * m + c.
inline Matrix values_at_gauss(const Mesh& mesh, const Matrix& states) {
    const int m = mesh.degree(), N = mesh.intervals();
    Matrix out(states.rows(), N * m);
    for (int i = 0; i < N; ++i)
        out.middleCols(i * m, m) = states.middleCols(i * m, m + 1) * mesh.basis_at_gauss().transpose();
    return out;
}

inline Matrix derivatives_at_gauss(const Mesh& mesh, const Matrix& states) {
    const int m = mesh.degree(), N = mesh.intervals();
    Matrix out(states.rows(), N * m);
    for (int i = 0; i < N; ++i)
        out.middleCols(i * m, m) =
            states.middleCols(i * m, m + 1) * mesh.dbasis_at_gauss().transpose() / mesh.width(i);
    return out;
}

namespace mesh_defaults {
inline constexpr int projection_extra_nodes = 12;
}

/// Weights w_g such that sum_g w_g x_g = integral over [0,1] of x(s) 2 sin(2 pi k s) ds
/// (sine = true) or 2 cos(2 pi k s) ds for the interpolant x through the representation
/// values x_g; k = 0 gives the mean. Uses a Gauss rule of degree + 12 nodes per interval.
inline Eigen::RowVectorXd fourier_projection(const Mesh& mesh, int k, bool sine) {
    const int m = mesh.degree();
    const GaussRule rule = gauss_legendre(m + mesh_defaults::projection_extra_nodes);
    Matrix basis(rule.nodes.size(), m + 1);
    Eigen::RowVectorXd L(m + 1);
    for (std::size_t c = 0; c < rule.nodes.size(); ++c) {
        lagrange_basis(m, rule.nodes[c], L);
        basis.row(static_cast<Eigen::Index>(c)) = L;
    }
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(mesh.points());
    for (int i = 0; i < mesh.intervals(); ++i)
        for (std::size_t c = 0; c < rule.nodes.size(); ++c) {
            const double s = mesh.breaks()[i] + mesh.width(i) * rule.nodes[c];
            const double arg = 2.0 * std::numbers::pi * k * s;
            const double f = k == 0 ? 1.0 : 2.0 * (sine ? std::sin(arg) : std::cos(arg));
            row.segment(i * m, m + 1) += mesh.width(i) * rule.weights[c] * f * basis.row(static_cast<Eigen::Index>(c));
        }
    return row;
}

/// Re-samples an orbit's interpolant onto another mesh.
inline PeriodicOrbit interpolate_orbit(const PeriodicOrbit& orbit, const Mesh& target) {
    PeriodicOrbit out{target, Matrix(orbit.dim(), target.points()), orbit.period, orbit.params};
    for (int g = 0; g < target.points(); ++g) out.states.col(g) = eval_orbit(orbit, target.point_time(g));
    out.states.col(target.points() - 1) = out.states.col(0);
    return out;
}

/// Samples a 1-periodic function of s onto the representation points of a mesh.
template <class F>
PeriodicOrbit sample_orbit(const Mesh& mesh, int dim, double period, const Vector& params, F&& f) {
    PeriodicOrbit out{mesh, Matrix(dim, mesh.points()), period, params};
    for (int g = 0; g < mesh.points(); ++g) out.states.col(g) = f(mesh.point_time(g));
    return out;
}

/// Redistributes breakpoints (same interval count) to equidistribute the local error
/// estimate |x^(m+1)|^(1/(m+1)), with the (m+1)-th derivative estimated from jumps of the
/// piecewise-constant m-th derivative across breakpoints.
inline Mesh adapted_mesh(const PeriodicOrbit& orbit) {
    const Mesh& mesh = orbit.mesh;
    const int N = mesh.intervals(), m = mesh.degree();
    if (N < 3) return mesh;

    // Forward-difference weights for the m-th derivative on m + 1 equidistant points.
    Eigen::RowVectorXd diff(m + 1);
    for (int l = 0; l <= m; ++l) {
        double binom = 1.0;
        for (int r = 1; r <= l; ++r) binom = binom * (m - r + 1) / r;
        diff[l] = ((m - l) % 2 == 0 ? 1.0 : -1.0) * binom;
    }
    Matrix dm(orbit.dim(), N);
    for (int i = 0; i < N; ++i) {
        const double hl = mesh.width(i) / m;
        dm.col(i) = orbit.states.middleCols(i * m, m + 1) * diff.transpose() / std::pow(hl, m);
    }
    std::vector<double> jump(N);  // at breakpoint i, between intervals i-1 and i (periodic)
    for (int i = 0; i < N; ++i) {
        const int prev = (i + N - 1) % N;
        const double h = 0.5 * (mesh.width(prev) + mesh.width(i));
        jump[i] = (dm.col(i) - dm.col(prev)).norm() / h;
    }
    std::vector<double> density(N);
    double top = 0.0;
    for (int i = 0; i < N; ++i) {
        density[i] = std::pow(0.5 * (jump[i] + jump[(i + 1) % N]), 1.0 / (m + 1));
        top = std::max(top, density[i]);
    }
    if (!(top > 0.0) || !std::isfinite(top)) return mesh;
    // Floor keeps intervals in flat regions from growing without bound.
    for (double& d : density) d = std::max(d, 0.05 * top);

    std::vector<double> cum(N + 1, 0.0);
    for (int i = 0; i < N; ++i) cum[i + 1] = cum[i] + density[i] * mesh.width(i);
    std::vector<double> nb(N + 1);
    nb[0] = 0.0;
    nb[N] = 1.0;
    int seg = 0;
    for (int k = 1; k < N; ++k) {
        const double target = cum[N] * k / N;
        while (seg < N - 1 && cum[seg + 1] < target) ++seg;
        const double frac = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
        nb[k] = mesh.breaks()[seg] + frac * mesh.width(seg);
    }
    for (int k = 1; k <= N; ++k)
        if (!(nb[k] > nb[k - 1])) return mesh;
    return Mesh(std::move(nb), m);
}

}  // namespace harmocont
