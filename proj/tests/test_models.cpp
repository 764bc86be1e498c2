#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <yaml-cpp/yaml.h>

#include "harmocont/models.hpp"

using namespace harmocont;
namespace hm = harmocont::models;

TEST(Colpitts, DefaultsAndDomain) {
    hm::ColpittsParams c;
    EXPECT_DOUBLE_EQ(c.Q, 0.8);
    EXPECT_DOUBLE_EQ(c.G, 2.0);
    EXPECT_DOUBLE_EQ(c.gamma, c.gamma_from_capacitors());
    EXPECT_DOUBLE_EQ(c.alphaF, 1.0);
    c.gamma = 0.0;
    EXPECT_THROW(hm::colpitts_system(c), ParameterDomainError);
    c.gamma = 1.0;
    EXPECT_THROW(hm::colpitts_system(c), ParameterDomainError);
    c.gamma = 0.5;
    c.Q = -1;
    EXPECT_THROW(hm::colpitts_system(c), ParameterDomainError);
}

TEST(Colpitts, ThreeDimensionalAutonomousWithAnalyticJacobian) {
    const DynSystem sys = hm::colpitts_system();
    EXPECT_EQ(sys.dim(), 3);
    EXPECT_TRUE(sys.autonomous());
    EXPECT_TRUE(sys.has_analytic_jacobian_x());
    EXPECT_EQ(sys.param_index("G"), hm::colpitts_index::G);
}

TEST(Colpitts, OriginJacobianEntry) {
    hm::ColpittsParams c;
    c.G = 3.3;
    c.Q = 0.6;
    const DynSystem sys = hm::colpitts_system(c);
    const Matrix J = jacobian_x(sys, Vector::Zero(3), 0.0, sys.default_params());
    EXPECT_NEAR(J(1, 2), 3.3 / (0.6 * 0.5), 1e-14);
}

TEST(CircuitPlane, FormulaAndRoundTrip) {
    hm::ColpittsParams c;
    const double T0 = std::sqrt(1e-3 * 1e-6 * 1e-6 / 2e-6);
    EXPECT_NEAR(c.T0(), T0, 1e-18);
    const auto pt = hm::colpitts_to_circuit_plane(0.8, 2.0, c);
    EXPECT_NEAR(pt.R, (1.0 / T0) * 1e-3 / 0.8, 1e-12);
    EXPECT_NEAR(pt.I0, 2.0 * 25.9e-3 * pt.R * 2e-6 / 1e-3, 1e-15);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(0.05, 20.0);
    for (int i = 0; i < 200; ++i) {
        const double Q = u(rng), G = u(rng);
        const auto rp = hm::colpitts_to_circuit_plane(Q, G, c);
        const auto [q2, g2] = hm::circuit_plane_to_colpitts(rp.R, rp.I0, c);
        EXPECT_NEAR(q2 / Q, 1.0, 1e-12);
        EXPECT_NEAR(g2 / G, 1.0, 1e-12);
        const auto back = hm::colpitts_to_circuit_plane(q2, g2, c);
        EXPECT_NEAR(back.R / rp.R, 1.0, 1e-12);
        EXPECT_NEAR(back.I0 / rp.I0, 1.0, 1e-12);
    }
}

TEST(CircuitPlane, PublishedReferenceValues) {
    const YAML::Node ref = YAML::LoadFile(std::string(HARMOCONT_SCENARIO_DIR) + "/reference-values.yaml");
    hm::ColpittsParams c;
    EXPECT_DOUBLE_EQ(ref["circuit"]["L"].as<double>(), c.L);
    EXPECT_DOUBLE_EQ(ref["circuit"]["C1"].as<double>(), c.C1);
    EXPECT_DOUBLE_EQ(ref["circuit"]["C2"].as<double>(), c.C2);
    EXPECT_DOUBLE_EQ(ref["circuit"]["VT"].as<double>(), c.VT);
    EXPECT_NEAR(ref["T0"].as<double>() / c.T0(), 1.0, 1e-14);
    EXPECT_NEAR(ref["omega0"].as<double>() / c.omega0(), 1.0, 1e-14);
    for (const auto& p : ref["points"]) {
        const auto pt = hm::colpitts_to_circuit_plane(p["Q"].as<double>(), p["G"].as<double>(), c);
        EXPECT_NEAR(pt.R / p["R"].as<double>(), 1.0, 1e-14);
        EXPECT_NEAR(pt.I0 / p["I0"].as<double>(), 1.0, 1e-14);
    }
    EXPECT_NEAR(ref["ndo"]["omega0"].as<double>(), hm::NDOParams{}.omega0(), 1e-12);
}

TEST(CircuitPlane, GLinearInI0) {
    const auto a = hm::colpitts_to_circuit_plane(0.7, 1.5);
    const auto b = hm::colpitts_to_circuit_plane(0.7, 3.0);
    EXPECT_DOUBLE_EQ(a.R, b.R);
    EXPECT_NEAR(b.I0 / a.I0, 2.0, 1e-14);
}

TEST(CircuitPlane, RejectsNonPositive) {
    EXPECT_THROW(hm::colpitts_to_circuit_plane(0.0, 1.0), ContractViolation);
    EXPECT_THROW(hm::circuit_plane_to_colpitts(1.0, -1.0), ContractViolation);
}

TEST(Ndo, ReferenceFrequency) {
    hm::NDOParams p;
    EXPECT_NEAR(p.omega0(), 4.0 * std::numbers::pi, 1e-12);
    const DynSystem sys = hm::ndo_autonomous_system(p);
    EXPECT_EQ(sys.dim(), 4);
    EXPECT_EQ(sys.param_index("alpha"), hm::ndo_index::alpha);
    EXPECT_EQ(sys.param_index("omega"), hm::ndo_index::omega);
    EXPECT_DOUBLE_EQ(sys.default_params()[hm::ndo_index::alpha], 1.0);
}

TEST(Ndo, Domain) {
    hm::NDOParams p;
    p.m = 0.0;
    EXPECT_THROW(hm::ndo_autonomous_system(p), ParameterDomainError);
}
