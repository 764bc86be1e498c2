#pragma once

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "harmonic.hpp"
#include "linbord.hpp"
#include "mesh.hpp"

namespace harmocont {

namespace verify_defaults {
inline constexpr double return_map_tol = 1e-5;
inline constexpr double coefficient_tol = 1e-6;
inline constexpr double integration_tol = 1e-12;
inline constexpr double instability_margin = 1e-3;  // on the largest nontrivial multiplier
inline constexpr int samples = 4096;
inline constexpr int kmax = 8;
}

struct VerifyOptions {
    double return_map_tol = verify_defaults::return_map_tol;
    double coefficient_tol = verify_defaults::coefficient_tol;
    double integration_tol = verify_defaults::integration_tol;
    int samples = verify_defaults::samples;
    int kmax = verify_defaults::kmax;
};

enum class VerifyStatus { Pass, Fail, Unstable };

inline const char* to_string(VerifyStatus s) {
    switch (s) {
        case VerifyStatus::Pass: return "pass";
        case VerifyStatus::Fail: return "fail";
        case VerifyStatus::Unstable: return "unstable";
    }
    return "?";
}

struct VerifyReport {
    double return_map_error = 0.0;  // |x(T) - x(0)| / max_s |x(s)|
    double leading_multiplier = 0.0;  // largest nontrivial Floquet multiplier modulus
    bool diverges = false;
    bool coefficients_checked = false;
    double coefficient_error = 0.0;  // max over stored (k, j) of |stored - FFT|
    int coefficients_compared = 0;
    VerifyStatus status = VerifyStatus::Pass;
};

/// Flow map of the ODE over [t0, t1] by a controlled Runge-Kutta-Fehlberg 7(8) scheme.
inline Vector flow(const DynSystem& sys, const Vector& x0, const Vector& p, double t0, double t1,
                   double tol = verify_defaults::integration_tol) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    State s(x0.data(), x0.data() + x0.size());
    auto f = [&](const State& y, State& dy, double t) {
        Eigen::Map<const Vector> ym(y.data(), static_cast<Eigen::Index>(y.size()));
        Eigen::Map<Vector> dym(dy.data(), static_cast<Eigen::Index>(dy.size()));
        eval_rhs_into(sys, ym, t, p, dym);
    };
    ode::integrate_adaptive(ode::make_controlled(tol, tol, ode::runge_kutta_fehlberg78<State>()), f, s, t0, t1,
                            (t1 - t0) * 1e-4);
    Vector out = Eigen::Map<Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
    if (!out.allFinite()) throw NumericalFailure("time integration produced non-finite values");
    return out;
}

/// (a_k, b_k) for k = 0..kmax of one component from `samples` equidistant interpolant values.
inline std::vector<std::pair<double, double>> fft_coefficients(const PeriodicOrbit& orbit, int j, int kmax,
                                                               int samples = verify_defaults::samples) {
    std::vector<double> x(samples);
    for (int i = 0; i < samples; ++i) x[i] = eval_orbit(orbit, static_cast<double>(i) / samples)[j];
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> X;
    fft.fwd(X, x);
    std::vector<std::pair<double, double>> out;
    out.emplace_back(X[0].real() / samples, 0.0);
    for (int k = 1; k <= kmax; ++k) out.emplace_back(-2.0 * X[k].imag() / samples, 2.0 * X[k].real() / samples);
    return out;
}

/// Largest modulus among the Floquet multipliers other than the one closest to 1,
/// from a finite-difference monodromy matrix.
inline double leading_multiplier(const DynSystem& sys, const Vector& x0, const Vector& p, double period,
                                 double scale, double tol) {
    const int n = static_cast<int>(x0.size());
    const Vector base = flow(sys, x0, p, 0.0, period, tol);
    Matrix M(n, n);
    const double h = 1e-6 * std::max(1.0, scale);
    for (int c = 0; c < n; ++c) {
        Vector xp = x0, xm = x0;
        xp[c] += h;
        xm[c] -= h;
        M.col(c) = (flow(sys, xp, p, 0.0, period, tol) - flow(sys, xm, p, 0.0, period, tol)) / (2.0 * h);
    }
    const Spectrum s = eigenvalues(M);
    std::size_t trivial = 0;
    for (std::size_t i = 1; i < s.size(); ++i)
        if (std::abs(s[i] - 1.0) < std::abs(s[trivial] - 1.0)) trivial = i;
    double lead = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (i != trivial) lead = std::max(lead, std::abs(s[i]));
    return lead;
}

/// Checks a collocation orbit against time integration of the ODE and its stored Fourier
/// coefficients against an FFT of the interpolant. Unstable orbits skip the coefficient check.
inline VerifyReport verify_orbit(const DynSystem& sys, const PeriodicOrbit& orbit,
                                 const std::map<HarmonicIndex, std::pair<double, double>>& stored,
                                 const VerifyOptions& opts = {}) {
    VerifyReport r;
    double scale = 0.0;
    for (int g = 0; g < orbit.mesh.points(); ++g) scale = std::max(scale, orbit.states.col(g).norm());
    scale = std::max(scale, 1e-300);
    const Vector x0 = eval_orbit(orbit, 0.0);
    const Vector x1 = flow(sys, x0, orbit.params, 0.0, orbit.period, opts.integration_tol);
    r.return_map_error = (x1 - x0).norm() / scale;
    r.leading_multiplier = leading_multiplier(sys, x0, orbit.params, orbit.period, scale, opts.integration_tol);
    r.diverges = r.leading_multiplier > 1.0 + verify_defaults::instability_margin;
    if (r.diverges) {
        r.status = VerifyStatus::Unstable;
        return r;
    }
    std::map<int, std::vector<std::pair<double, double>>> fft;
    for (const auto& [idx, ab] : stored) {
        if (idx.k > opts.kmax) continue;
        if (!fft.count(idx.j)) fft[idx.j] = fft_coefficients(orbit, idx.j, opts.kmax, opts.samples);
        const auto& ref = fft[idx.j][idx.k];
        r.coefficient_error =
            std::max({r.coefficient_error, std::abs(ab.first - ref.first), std::abs(ab.second - ref.second)});
        ++r.coefficients_compared;
    }
    r.coefficients_checked = true;
    const bool ok = r.return_map_error < opts.return_map_tol && r.coefficient_error < opts.coefficient_tol;
    r.status = ok ? VerifyStatus::Pass : VerifyStatus::Fail;
    return r;
}

}  // namespace harmocont
