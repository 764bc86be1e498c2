#pragma once

// Reference computations used only by the tests: time integration with an 8th-order
// Runge-Kutta-Fehlberg scheme and a direct discrete Fourier sum, independent of the
// collocation, quadrature and FFT paths under test.

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

#include "harmocont/dynsys.hpp"
#include "harmocont/mesh.hpp"

namespace oracle {

using harmocont::DynSystem;
using harmocont::Vector;
using State = std::vector<double>;

inline Vector integrate(const DynSystem& sys, const Vector& x0, const Vector& p, double t0, double t1,
                        double tol = 1e-12) {
    namespace ode = boost::numeric::odeint;
    State s(x0.data(), x0.data() + x0.size());
    auto f = [&](const State& y, State& dy, double t) {
        Eigen::Map<const Vector> ym(y.data(), static_cast<Eigen::Index>(y.size()));
        Eigen::Map<Vector> dym(dy.data(), static_cast<Eigen::Index>(dy.size()));
        harmocont::eval_rhs_into(sys, ym, t, p, dym);
    };
    ode::integrate_adaptive(ode::make_controlled(tol, tol, ode::runge_kutta_fehlberg78<State>()), f, s, t0, t1,
                            (t1 - t0) * 1e-4);
    return Eigen::Map<Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

/// Samples the trajectory at `count` equally spaced times in [t0, t0 + span).
inline std::vector<Vector> sample(const DynSystem& sys, const Vector& x0, const Vector& p, double t0, double span,
                                  int count, double tol = 1e-12) {
    std::vector<Vector> out;
    Vector x = x0;
    const double dt = span / count;
    for (int i = 0; i < count; ++i) {
        out.push_back(x);
        x = integrate(sys, x, p, t0 + i * dt, t0 + (i + 1) * dt, tol);
    }
    return out;
}

/// a_k = (2/M) sum x_i sin(2 pi k i / M), b_k likewise with cos; k = 0 gives the mean.
inline std::pair<double, double> dft_coefficient(const std::vector<double>& x, int k) {
    const double M = static_cast<double>(x.size());
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double arg = 2.0 * std::numbers::pi * k * static_cast<double>(i) / M;
        a += x[i] * std::sin(arg);
        b += x[i] * std::cos(arg);
    }
    if (k == 0) return {b / M, 0.0};
    return {2.0 * a / M, 2.0 * b / M};
}

/// Dense samples of one component of a collocation orbit.
inline std::vector<double> orbit_samples(const harmocont::PeriodicOrbit& orbit, int j, int count) {
    std::vector<double> x(count);
    for (int i = 0; i < count; ++i) x[i] = harmocont::eval_orbit(orbit, static_cast<double>(i) / count)[j];
    return x;
}

/// Steady first-harmonic amplitudes of y for the explicitly forced oscillator at each
/// frequency, sweeping in the given order and carrying the state over between frequencies.
inline std::vector<double> frequency_sweep(const DynSystem& forced, Vector p, int omega_index, int y_index,
                                           const std::vector<double>& omegas, int settle_periods = 60) {
    std::vector<double> amps;
    Vector x = Vector::Zero(forced.dim());
    double t = 0.0;
    for (double w : omegas) {
        p[omega_index] = w;
        const double period = 2.0 * std::numbers::pi / w;
        // Restart the clock at a whole number of forcing periods so the phase is continuous.
        t = std::ceil(t / period) * period;
        x = integrate(forced, x, p, t, t + settle_periods * period, 1e-10);
        t += settle_periods * period;
        const auto samples = sample(forced, x, p, t, period, 256, 1e-10);
        std::vector<double> y(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i][y_index];
        const auto [a, b] = dft_coefficient(y, 1);
        amps.push_back(std::hypot(a, b));
        x = integrate(forced, samples.back(), p, t + period * 255.0 / 256.0, t + period, 1e-10);
        t += period;
    }
    return amps;
}

}  // namespace oracle
