#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace harmocont {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstVecRef = Eigen::Ref<const Vector>;
using VecRef = Eigen::Ref<Vector>;
using MatRef = Eigen::Ref<Matrix>;

/// Vector field g(x, t; p) of an ODE system x' = g, with optional analytic derivatives.
///
/// Immutable once built; all evaluators are pure, so a DynSystem may be shared
/// between threads.
class DynSystem {
public:
    using Rhs = std::function<void(ConstVecRef x, double t, ConstVecRef p, VecRef dxdt)>;
    /// Fills an n x n (state) or n x q (parameter) Jacobian.
    using Jacobian = std::function<void(ConstVecRef x, double t, ConstVecRef p, MatRef jac)>;

    struct Definition {
        std::string name;
        std::vector<std::string> state_names;
        std::vector<std::string> param_names;
        Vector params;  // default parameter values
        Rhs rhs;
        Jacobian jac_x;  // optional
        Jacobian jac_p;  // optional
        bool autonomous = true;
    };

    explicit DynSystem(Definition def) : def_(std::make_shared<const Definition>(std::move(def))) {
        if (!def_->rhs) throw ContractViolation("DynSystem '" + def_->name + "': missing rhs");
        if (def_->state_names.empty())
            throw ContractViolation("DynSystem '" + def_->name + "': zero-dimensional state");
        if (static_cast<std::size_t>(def_->params.size()) != def_->param_names.size())
            throw ContractViolation("DynSystem '" + def_->name +
                                    "': parameter names and default values differ in length");
    }

    const std::string& name() const { return def_->name; }
    int dim() const { return static_cast<int>(def_->state_names.size()); }
    int num_params() const { return static_cast<int>(def_->param_names.size()); }
    const std::vector<std::string>& state_names() const { return def_->state_names; }
    const std::vector<std::string>& param_names() const { return def_->param_names; }
    const Vector& default_params() const { return def_->params; }
    bool autonomous() const { return def_->autonomous; }
    bool has_analytic_jacobian_x() const { return static_cast<bool>(def_->jac_x); }
    bool has_analytic_jacobian_p() const { return static_cast<bool>(def_->jac_p); }
    const Definition& definition() const { return *def_; }

    std::optional<int> find_param(std::string_view name) const {
        for (std::size_t i = 0; i < def_->param_names.size(); ++i)
            if (def_->param_names[i] == name) return static_cast<int>(i);
        return std::nullopt;
    }

    int param_index(std::string_view name) const {
        if (auto i = find_param(name)) return *i;
        throw ContractViolation("system '" + def_->name + "' has no parameter '" +
                                std::string(name) + "'");
    }

    std::optional<int> find_state(std::string_view name) const {
        for (std::size_t i = 0; i < def_->state_names.size(); ++i)
            if (def_->state_names[i] == name) return static_cast<int>(i);
        return std::nullopt;
    }

    /// Parameter vector with the given named entries replaced.
    Vector params_with(const std::vector<std::pair<std::string, double>>& overrides) const {
        Vector p = def_->params;
        for (const auto& [key, value] : overrides) p[param_index(key)] = value;
        return p;
    }

    void check_dims(const ConstVecRef& x, const ConstVecRef& p) const {
        if (x.size() != dim())
            throw ContractViolation("system '" + name() + "': state has dimension " +
                                    std::to_string(x.size()) + ", expected " +
                                    std::to_string(dim()));
        if (p.size() != num_params())
            throw ContractViolation("system '" + name() + "': parameter vector has " +
                                    std::to_string(p.size()) + " entries, expected " +
                                    std::to_string(num_params()));
    }

private:
    std::shared_ptr<const Definition> def_;
};

/// Relative step for central differences: cbrt(machine epsilon).
inline double fd_relative_step() {
    static const double h = std::cbrt(std::numeric_limits<double>::epsilon());
    return h;
}

inline Vector eval_rhs(const DynSystem& sys, const ConstVecRef& x, double t, const ConstVecRef& p) {
    sys.check_dims(x, p);
    Vector out = Vector::Zero(sys.dim());
    sys.definition().rhs(x, t, p, out);
    return out;
}

/// Unchecked evaluation into a caller-provided buffer (hot loops in the collocation solver).
inline void eval_rhs_into(const DynSystem& sys, const ConstVecRef& x, double t, const ConstVecRef& p,
                          VecRef out) {
    out.setZero();
    sys.definition().rhs(x, t, p, out);
}

inline Matrix jacobian_x_fd(const DynSystem& sys, const ConstVecRef& x, double t, const ConstVecRef& p) {
    sys.check_dims(x, p);
    const int n = sys.dim();
    Matrix jac(n, n);
    Vector xp = x, fp(n), fm(n);
    for (int j = 0; j < n; ++j) {
        const double h = fd_relative_step() * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        eval_rhs_into(sys, xp, t, p, fp);
        xp[j] = x[j] - h;
        eval_rhs_into(sys, xp, t, p, fm);
        xp[j] = x[j];
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

inline Matrix jacobian_p_fd(const DynSystem& sys, const ConstVecRef& x, double t, const ConstVecRef& p) {
    sys.check_dims(x, p);
    const int n = sys.dim();
    const int q = sys.num_params();
    Matrix jac(n, q);
    Vector pp = p, fp(n), fm(n);
    for (int k = 0; k < q; ++k) {
        const double h = fd_relative_step() * std::max(1.0, std::abs(p[k]));
        pp[k] = p[k] + h;
        eval_rhs_into(sys, x, t, pp, fp);
        pp[k] = p[k] - h;
        eval_rhs_into(sys, x, t, pp, fm);
        pp[k] = p[k];
        jac.col(k) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

/// d g / d x: analytic when the system provides it, central differences otherwise.
inline Matrix jacobian_x(const DynSystem& sys, const ConstVecRef& x, double t, const ConstVecRef& p) {
    if (!sys.has_analytic_jacobian_x()) return jacobian_x_fd(sys, x, t, p);
    sys.check_dims(x, p);
    Matrix jac = Matrix::Zero(sys.dim(), sys.dim());
    sys.definition().jac_x(x, t, p, jac);
    return jac;
}

inline Matrix jacobian_p(const DynSystem& sys, const ConstVecRef& x, double t, const ConstVecRef& p) {
    if (!sys.has_analytic_jacobian_p()) return jacobian_p_fd(sys, x, t, p);
    sys.check_dims(x, p);
    Matrix jac = Matrix::Zero(sys.dim(), sys.num_params());
    sys.definition().jac_p(x, t, p, jac);
    return jac;
}

// ---------------------------------------------------------------------------
// Autonomization of sinusoidally forced systems.

enum class ForcingChannel { V, W };

/// Auxiliary oscillator
///   v' =  alpha v + beta w - v (v^2 + w^2)
///   w' = -beta v + alpha w - w (v^2 + w^2)
/// whose stable cycle for alpha = 1 is (v, w) = (sin(beta t), cos(beta t)).
/// The cubic terms carry a minus sign; with a plus sign that circle is not a solution.
struct AuxOscillator {
    double alpha = 1.0;
    double beta = 1.0;
    static constexpr double cubic_sign = -1.0;

    static void rhs(double alpha, double beta, double v, double w, double& dv, double& dw) {
        const double r2 = v * v + w * w;
        dv = alpha * v + beta * w + cubic_sign * v * r2;
        dw = -beta * v + alpha * w + cubic_sign * w * r2;
    }
};

/// Couples gain(p) * v or gain(p) * w into the equation of state `target` (0-based).
struct ForcingBinding {
    int target = 0;
    std::function<double(ConstVecRef p)> gain;
    ForcingChannel channel = ForcingChannel::W;

    static ForcingBinding constant(int target, double c, ForcingChannel channel = ForcingChannel::W) {
        return {target, [c](ConstVecRef) { return c; }, channel};
    }
};

struct AutonomizeOptions {
    std::string alpha_name = "alpha";
    std::string beta_name = "beta";
    double alpha = 1.0;
};

/// Recasts a system whose sinusoidal forcing has been stripped from its rhs as an
/// autonomous system of dimension n + 2, states (x, v, w), parameters (p, alpha, beta).
inline DynSystem autonomize(const DynSystem& base, std::vector<ForcingBinding> bindings, double beta,
                            const AutonomizeOptions& opts = {}) {
    if (bindings.empty()) throw ContractViolation("autonomize: empty forcing binding list");
    const int n = base.dim();
    const int q = base.num_params();
    for (const auto& b : bindings) {
        if (b.target < 0 || b.target >= n)
            throw ContractViolation("autonomize: binding target " + std::to_string(b.target) +
                                    " outside the state range [0, " + std::to_string(n) + ")");
        if (!b.gain) throw ContractViolation("autonomize: binding without gain");
    }

    DynSystem::Definition def;
    def.name = base.name() + "+aux";
    def.state_names = base.state_names();
    def.state_names.push_back("v");
    def.state_names.push_back("w");
    def.param_names = base.param_names();
    def.param_names.push_back(opts.alpha_name);
    def.param_names.push_back(opts.beta_name);
    def.params.resize(q + 2);
    def.params.head(q) = base.default_params();
    def.params[q] = opts.alpha;
    def.params[q + 1] = beta;
    def.autonomous = true;

    auto shared_bindings = std::make_shared<const std::vector<ForcingBinding>>(std::move(bindings));
    const auto base_rhs = base.definition().rhs;

    def.rhs = [base_rhs, shared_bindings, n, q](ConstVecRef x, double t, ConstVecRef p, VecRef dx) {
        const double v = x[n], w = x[n + 1];
        base_rhs(x.head(n), t, p.head(q), dx.head(n));
        for (const auto& b : *shared_bindings)
            dx[b.target] += b.gain(p.head(q)) * (b.channel == ForcingChannel::V ? v : w);
        double dv = 0.0, dw = 0.0;
        AuxOscillator::rhs(p[q], p[q + 1], v, w, dv, dw);
        dx[n] = dv;
        dx[n + 1] = dw;
    };

    DynSystem base_copy = base;
    def.jac_x = [base_copy, shared_bindings, n, q](ConstVecRef x, double t, ConstVecRef p, MatRef jac) {
        jac.setZero();
        jac.topLeftCorner(n, n) = jacobian_x(base_copy, x.head(n), t, p.head(q));
        for (const auto& b : *shared_bindings)
            jac(b.target, b.channel == ForcingChannel::V ? n : n + 1) += b.gain(p.head(q));
        const double alpha = p[q], beta = p[q + 1], v = x[n], w = x[n + 1];
        constexpr double s = AuxOscillator::cubic_sign;
        jac(n, n) = alpha + s * (3 * v * v + w * w);
        jac(n, n + 1) = beta + s * 2 * v * w;
        jac(n + 1, n) = -beta + s * 2 * v * w;
        jac(n + 1, n + 1) = alpha + s * (v * v + 3 * w * w);
    };

    return DynSystem(std::move(def));
}

}  // namespace harmocont
