#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "dynsys.hpp"

namespace harmocont::models {

// ---------------------------------------------------------------------------
// Colpitts oscillator, normalized model in (x, y, z):
//   x, y: voltages across C1, C2 over V_T; z: inductor current over I0;
//   time in units of T0 = sqrt(L C1 C2 / (C1 + C2)).

struct ColpittsParams {
    double Q = 0.8;
    double G = 2.0;
    double gamma = 0.5;
    double alphaF = 1.0;

    // Circuit constants used only for the (R, I0) plane.
    double C1 = 1e-6;   // F
    double C2 = 1e-6;   // F
    double L = 1e-3;    // H
    double VT = 25.9e-3;  // V

    double T0() const { return std::sqrt(L * C1 * C2 / (C1 + C2)); }
    double omega0() const { return 1.0 / T0(); }
    double gamma_from_capacitors() const { return C2 / (C1 + C2); }

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ParameterDomainError("Colpitts: gamma must lie in (0, 1), got " + std::to_string(gamma));
        if (!(Q > 0.0)) throw ParameterDomainError("Colpitts: Q must be positive");
        if (!(G > 0.0)) throw ParameterDomainError("Colpitts: G must be positive");
        if (!(C1 > 0.0 && C2 > 0.0 && L > 0.0 && VT > 0.0))
            throw ParameterDomainError("Colpitts: circuit constants must be positive");
    }
};

namespace colpitts_index {
inline constexpr int Q = 0, G = 1, gamma = 2, alphaF = 3;
}

inline DynSystem colpitts_system(const ColpittsParams& params = {}) {
    params.validate();
    DynSystem::Definition def;
    def.name = "colpitts";
    def.state_names = {"x", "y", "z"};
    def.param_names = {"Q", "G", "gamma", "alphaF"};
    def.params = Vector(4);
    def.params << params.Q, params.G, params.gamma, params.alphaF;
    def.rhs = [](ConstVecRef s, double, ConstVecRef p, VecRef ds) {
        const double Q = p[0], G = p[1], g = p[2], aF = p[3];
        const double ey = std::exp(-s[1]) - 1.0;
        ds[0] = G / (Q * (1.0 - g)) * (-aF * ey + s[2]);
        ds[1] = G / (Q * g) * ((1.0 - aF) * ey + s[2]);
        ds[2] = -Q * g * (1.0 - g) / G * (s[0] + s[1]) - s[2] / Q;
    };
    def.jac_x = [](ConstVecRef s, double, ConstVecRef p, MatRef J) {
        const double Q = p[0], G = p[1], g = p[2], aF = p[3];
        const double e = std::exp(-s[1]);
        const double k1 = G / (Q * (1.0 - g)), k2 = G / (Q * g), c = Q * g * (1.0 - g) / G;
        J << 0.0, k1 * aF * e, k1,
             0.0, -k2 * (1.0 - aF) * e, k2,
             -c, -c, -1.0 / Q;
    };
    return DynSystem(std::move(def));
}

struct CircuitPoint {
    double R;   // ohm
    double I0;  // A
};

/// Inverts the normalization Q = omega0 L / R, G = I0 L / (V_T R (C1 + C2)).
inline CircuitPoint colpitts_to_circuit_plane(double Q, double G, const ColpittsParams& c = {}) {
    if (!(Q > 0.0) || !(G > 0.0))
        throw ContractViolation("colpitts_to_circuit_plane: Q and G must be positive");
    const double R = c.omega0() * c.L / Q;
    const double I0 = G * c.VT * R * (c.C1 + c.C2) / c.L;
    return {R, I0};
}

inline std::pair<double, double> circuit_plane_to_colpitts(double R, double I0,
                                                           const ColpittsParams& c = {}) {
    if (!(R > 0.0) || !(I0 > 0.0))
        throw ContractViolation("circuit_plane_to_colpitts: R and I0 must be positive");
    return {c.omega0() * c.L / R, I0 * c.L / (c.VT * R * (c.C1 + c.C2))};
}

// ---------------------------------------------------------------------------
// Nonlinear damped oscillator (shock-absorber model), x = velocity, y = position:
//   x' = A/m cos(omega t) - (c1 x + c2 x^2 + c3 x^3 + k y) / m
//   y' = x

struct NDOParams {
    double m = 240.0;
    double c1 = 296.0;
    double c2 = 3000.0;
    double c3 = 800.0;
    double k = 240.0 * 16.0 * std::numbers::pi * std::numbers::pi;  // 240 (4 pi)^2
    double A = 1000.0;
    double omega = 4.0 * std::numbers::pi;

    double omega0() const { return std::sqrt(k / m); }

    void validate() const {
        if (!(m > 0.0) || !(k > 0.0)) throw ParameterDomainError("NDO: m and k must be positive");
    }
};

namespace ndo_index {
inline constexpr int m = 0, c1 = 1, c2 = 2, c3 = 3, k = 4, A = 5;
// Autonomized system only.
inline constexpr int alpha = 6, omega = 7;
}

namespace detail {
inline void ndo_damping(ConstVecRef s, ConstVecRef p, VecRef ds) {
    const double m = p[0], c1 = p[1], c2 = p[2], c3 = p[3], k = p[4];
    const double x = s[0];
    ds[0] = -(c1 * x + c2 * x * x + c3 * x * x * x + k * s[1]) / m;
    ds[1] = x;
}

inline void ndo_damping_jac(ConstVecRef s, ConstVecRef p, MatRef J) {
    const double m = p[0], c1 = p[1], c2 = p[2], c3 = p[3], k = p[4];
    const double x = s[0];
    J << -(c1 + 2 * c2 * x + 3 * c3 * x * x) / m, -k / m,
         1.0, 0.0;
}
}  // namespace detail

/// Unforced part of the oscillator; parameters (m, c1, c2, c3, k, A) with A unused here.
inline DynSystem ndo_unforced_system(const NDOParams& params = {}) {
    params.validate();
    DynSystem::Definition def;
    def.name = "ndo";
    def.state_names = {"x", "y"};
    def.param_names = {"m", "c1", "c2", "c3", "k", "A"};
    def.params = Vector(6);
    def.params << params.m, params.c1, params.c2, params.c3, params.k, params.A;
    def.rhs = [](ConstVecRef s, double, ConstVecRef p, VecRef ds) { detail::ndo_damping(s, p, ds); };
    def.jac_x = [](ConstVecRef s, double, ConstVecRef p, MatRef J) { detail::ndo_damping_jac(s, p, J); };
    return DynSystem(std::move(def));
}

/// Explicitly forced, non-autonomous form; parameters (m, c1, c2, c3, k, A, omega).
inline DynSystem ndo_forced_system(const NDOParams& params = {}) {
    params.validate();
    DynSystem::Definition def;
    def.name = "ndo-forced";
    def.state_names = {"x", "y"};
    def.param_names = {"m", "c1", "c2", "c3", "k", "A", "omega"};
    def.params = Vector(7);
    def.params << params.m, params.c1, params.c2, params.c3, params.k, params.A, params.omega;
    def.autonomous = false;
    def.rhs = [](ConstVecRef s, double t, ConstVecRef p, VecRef ds) {
        detail::ndo_damping(s, p, ds);
        ds[0] += p[5] / p[0] * std::cos(p[6] * t);
    };
    def.jac_x = [](ConstVecRef s, double, ConstVecRef p, MatRef J) { detail::ndo_damping_jac(s, p, J); };
    return DynSystem(std::move(def));
}

/// States (x, y, v, w); parameters (m, c1, c2, c3, k, A, alpha, omega).
/// The forcing enters as (A/m) w in the velocity equation, with beta = omega.
inline DynSystem ndo_autonomous_system(const NDOParams& params = {}, double alpha = 1.0) {
    auto binding = ForcingBinding{0, [](ConstVecRef p) { return p[ndo_index::A] / p[ndo_index::m]; },
                                  ForcingChannel::W};
    AutonomizeOptions opts;
    opts.alpha_name = "alpha";
    opts.beta_name = "omega";
    opts.alpha = alpha;
    DynSystem sys = autonomize(ndo_unforced_system(params), {binding}, params.omega, opts);
    return sys;
}

}  // namespace harmocont::models
