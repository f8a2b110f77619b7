#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include "flowexec/core.hpp"
#include "flowexec/csv.hpp"
#include "flowexec/numerics.hpp"

namespace flowexec {

/// Deterministic ("myopic") liquidation curves of the calculus-of-variations
/// problem  inf int_0^T xdot^2 + lambda(x) dt  with x_0 = x, x_T = 0.
///   ML: lambda = 0 or constant  -> straight line (VWAP in volume time)
///   MH: lambda = c x^2          -> hyperbolic (Almgren-Chriss)
///   MQ: lambda = c x            -> quadratic, may finish early at T_hat
enum class MyopicKind { ML, MH, MQ };

/// Which leakage profile phi_t = eta * alpha_t feeds the informational cost.
enum class LeakageKind { None, ML, MH, MQ };

inline std::string to_string(MyopicKind k) {
    switch (k) {
        case MyopicKind::ML: return "ML";
        case MyopicKind::MH: return "MH";
        case MyopicKind::MQ: return "MQ";
    }
    return "?";
}

inline LeakageKind leakage_kind(MyopicKind k) {
    switch (k) {
        case MyopicKind::ML: return LeakageKind::ML;
        case MyopicKind::MH: return LeakageKind::MH;
        case MyopicKind::MQ: return LeakageKind::MQ;
    }
    return LeakageKind::None;
}

inline MyopicKind myopic_kind_for(const InventoryRisk& risk) {
    if (std::holds_alternative<QuadraticRisk>(risk)) return MyopicKind::MH;
    if (std::holds_alternative<LinearRisk>(risk)) return MyopicKind::MQ;
    return MyopicKind::ML;
}

class MyopicSolution {
public:
    MyopicSolution(MyopicKind kind, double x, double horizon, double c, bool constant_risk)
        : kind_(kind), x_(x), horizon_(horizon), c_(c), constant_risk_(constant_risk) {
        t_hat_ = horizon_;
        if (kind_ == MyopicKind::MQ && c_ > 0.0) {
            t_hat_ = std::min(horizon_, 2.0 * std::sqrt(x_) / std::sqrt(c_));
        }
    }

    MyopicKind kind() const { return kind_; }
    double initial_inventory() const { return x_; }
    double horizon() const { return horizon_; }
    double risk_c() const { return c_; }
    /// Time at which inventory reaches zero (T_hat <= T; equals T except for MQ).
    double effective_horizon() const { return t_hat_; }

    double inventory(double t) const {
        if (t <= 0.0) return x_;
        if (t >= t_hat_) return 0.0;
        switch (kind_) {
            case MyopicKind::ML: return x_ * (horizon_ - t) / horizon_;
            case MyopicKind::MH: {
                if (c_ == 0.0) return x_ * (horizon_ - t) / horizon_;
                const double a = std::sqrt(c_);
                return x_ * (std::exp(-a * t) - std::exp(-a * (2.0 * horizon_ - t))) /
                       (1.0 - std::exp(-2.0 * a * horizon_));
            }
            case MyopicKind::MQ: {
                const double k = mq_slope();
                return std::max(0.0, c_ * t * t / 4.0 - t * k + x_);
            }
        }
        return 0.0;
    }

    /// Selling rate alpha_t = -d/dt inventory(t); zero once liquidated.
    double rate(double t) const {
        if (t < 0.0 || t >= t_hat_) return 0.0;
        switch (kind_) {
            case MyopicKind::ML: return x_ / horizon_;
            case MyopicKind::MH: {
                if (c_ == 0.0) return x_ / horizon_;
                const double a = std::sqrt(c_);
                return a * x_ * (std::exp(-a * t) + std::exp(-a * (2.0 * horizon_ - t))) /
                       (1.0 - std::exp(-2.0 * a * horizon_));
            }
            case MyopicKind::MQ: return std::max(0.0, mq_slope() - c_ * t / 2.0);
        }
        return 0.0;
    }

    /// I(T, x) = int_0^T (alpha_t^2 + lambda(x_t)) dt along the optimal curve.
    /// For constant risk this includes the c*T timing charge.
    double impact_cost() const {
        switch (kind_) {
            case MyopicKind::ML:
                return x_ * x_ / horizon_ + (constant_risk_ ? c_ * horizon_ : 0.0);
            case MyopicKind::MH: {
                if (c_ == 0.0) return x_ * x_ / horizon_;
                const double a = std::sqrt(c_);
                const double e = std::exp(-2.0 * a * horizon_);
                return a * x_ * x_ * (1.0 + e) / (1.0 - e);
            }
            case MyopicKind::MQ: {
                const double th = t_hat_;
                return -c_ * c_ * th * th * th / 48.0 + c_ * th * x_ / 2.0 + x_ * x_ / th;
            }
        }
        return 0.0;
    }

    /// Samples (t, x_t, alpha_t) on `samples` equally spaced points of [0, T].
    void write_csv(std::ostream& out, int samples = 301) const {
        CsvWriter csv(out, {"t", "x_t", "alpha_t"});
        for (int i = 0; i < samples; ++i) {
            const double t = horizon_ * i / (samples - 1);
            csv.row(t, inventory(t), rate(t));
        }
    }

private:
    double mq_slope() const { return c_ * t_hat_ / 4.0 + x_ / t_hat_; }

    MyopicKind kind_;
    double x_;
    double horizon_;
    double c_;
    bool constant_risk_;
    double t_hat_;
};

inline MyopicSolution myopic_solve(const InventoryRisk& risk, double x, double horizon) {
    validate(risk);
    if (!(x > 0.0)) throw DomainError("myopic_solve: inventory must be > 0");
    if (!(horizon > 0.0)) throw DomainError("myopic_solve: horizon must be > 0");
    return MyopicSolution(myopic_kind_for(risk), x, horizon, risk_coefficient(risk),
                          std::holds_alternative<ConstantRisk>(risk));
}

namespace detail {

/// (1 - exp(-k t)) / k, continuous at k = 0.
inline double decay_integral(double k, double t) {
    if (std::abs(k * t) < 1e-12) return t;
    return -std::expm1(-k * t) / k;
}

}  // namespace detail

/// A_t = int_0^t exp(-beta (t - s)) eta alpha_s ds for the myopic rate of `kind`.
inline double leakage_profile_A(MyopicKind kind, double t, double x, double horizon, double c,
                                const FlowParams& params) {
    if (!(t >= 0.0) || t > horizon * (1.0 + 1e-12)) {
        throw DomainError("leakage_profile_A: t must lie in [0, T]");
    }
    if (!(horizon > 0.0)) throw DomainError("leakage_profile_A: horizon must be > 0");
    if (!(c >= 0.0)) throw DomainError("leakage_profile_A: c must be >= 0");
    const double b = params.beta;
    const double eta = params.eta;
    if (t == 0.0 || x == 0.0 || eta == 0.0) return 0.0;

    switch (kind) {
        case MyopicKind::ML:
            return eta * x / horizon * detail::decay_integral(b, t);

        case MyopicKind::MQ: {
            if (c == 0.0) return eta * x / horizon * detail::decay_integral(b, t);
            const double t_hat = std::min(horizon, 2.0 * std::sqrt(x / c));
            const double k = c * t_hat / 4.0 + x / t_hat;
            auto active = [&](double s) {
                // eta * int_0^s (k - c u / 2) exp(-beta (s - u)) du
                const double g = detail::decay_integral(b, s);
                return eta * (k * g - 0.5 * c * (s - g) / b);
            };
            if (t <= t_hat) return active(t);
            return active(t_hat) * std::exp(-b * (t - t_hat));
        }

        case MyopicKind::MH: {
            if (c == 0.0) return eta * x / horizon * detail::decay_integral(b, t);
            const double a = std::sqrt(c);
            const double T = horizon;
            if (std::abs(a - b) < 1e-9) {
                // sqrt(c) == beta
                return eta * x * std::exp(-b * t) * std::exp(-b * T) *
                       (2.0 * b * t * std::exp(2.0 * b * T) + std::exp(2.0 * b * t) - 1.0) /
                       (4.0 * std::sinh(b * T));
            }
            const double norm = a * x * eta / (-std::expm1(-2.0 * a * T));
            return norm * (std::exp(-a * t) * detail::decay_integral(b - a, t) +
                           std::exp(-a * (2.0 * T - t)) * detail::decay_integral(b + a, t));
        }
    }
    return 0.0;
}

/// O(T, x, y) = kappa int_0^T (y e^{-beta t} - A_t)^2 + sigma_t^2 dt.
/// Closed form for no leakage and for ML; quadrature for MQ and MH.
inline double information_cost_O(LeakageKind kind, double horizon, double x, double y, double c,
                                 const FlowParams& params) {
    params.validate();
    if (!(horizon > 0.0)) throw DomainError("information_cost_O: T must be > 0");
    const double b = params.beta;
    const double k = params.kappa;
    const double T = horizon;
    if (k == 0.0) return 0.0;

    const double e1 = std::exp(-b * T);
    const double e2 = e1 * e1;
    const double base = k * y * y / (2.0 * b) * (1.0 - e2) +
                        k * params.sigma * params.sigma / (4.0 * b * b) * (2.0 * b * T + e2 - 1.0);
    if (kind == LeakageKind::None || x == 0.0 || params.eta == 0.0) return base;

    if (kind == LeakageKind::ML) {
        const double eta = params.eta;
        return base + k * eta * x * y / (b * b * T) * (2.0 * e1 - 1.0 - e2) +
               k * eta * eta * x * x / (2.0 * b * b * b * T * T) *
                   (2.0 * b * T + 4.0 * e1 - e2 - 3.0);
    }

    const MyopicKind mk = (kind == LeakageKind::MQ) ? MyopicKind::MQ : MyopicKind::MH;
    auto integrand = [&](double t) {
        const double a_t = leakage_profile_A(mk, t, x, T, c, params);
        const double m = y * std::exp(-b * t) - a_t;
        return m * m;
    };
    const double tol = 1e-10 / std::max(1.0, k);
    double mean_part = 0.0;
    if (mk == MyopicKind::MQ && c > 0.0) {
        const double t_hat = std::min(T, 2.0 * std::sqrt(x / c));
        mean_part = numerics::integrate(integrand, 0.0, t_hat, tol) +
                    numerics::integrate(integrand, t_hat, T, tol);
    } else {
        mean_part = numerics::integrate(integrand, 0.0, T, tol);
    }
    const double variance_part =
        k * params.sigma * params.sigma / (4.0 * b * b) * (2.0 * b * T + e2 - 1.0);
    return k * mean_part + variance_part;
}

/// u^M(T, x, y) = I(T, x) + O(T, x, y) with the leakage matching the risk's curve.
/// With no inventory left only the cost of sitting in the market remains.
inline double myopic_value(const InventoryRisk& risk, double horizon, double x, double y,
                           const FlowParams& params) {
    if (!(x >= 0.0)) throw DomainError("myopic_value: inventory must be >= 0");
    if (x == 0.0) return information_cost_O(LeakageKind::None, horizon, 0.0, y, 0.0, params);
    const MyopicSolution sol = myopic_solve(risk, x, horizon);
    return sol.impact_cost() + information_cost_O(leakage_kind(sol.kind()), horizon, x, y,
                                                  risk_coefficient(risk), params);
}

/// argmin_y u^M(T, x, y). u^M is quadratic in y with y^2-coefficient
/// kappa int e^{-2 beta t} dt and y-coefficient -2 kappa int e^{-beta t} A_t dt,
/// so the minimiser is their ratio. Returns 0 when kappa = 0 (u^M flat in y).
inline double optimal_initial_imbalance(const InventoryRisk& risk, double horizon, double x,
                                        const FlowParams& params) {
    params.validate();
    validate(risk);
    if (!(horizon > 0.0)) throw DomainError("optimal_initial_imbalance: T must be > 0");
    if (!(x >= 0.0)) throw DomainError("optimal_initial_imbalance: x must be >= 0");
    const double b = params.beta;
    if (params.kappa == 0.0 || params.eta == 0.0 || x == 0.0) return 0.0;
    const double T = horizon;
    const double quad = -std::expm1(-2.0 * b * T) / (2.0 * b);
    const MyopicKind kind = myopic_kind_for(risk);
    const double c = risk_coefficient(risk);
    double lin = 0.0;
    if (kind == MyopicKind::ML) {
        const double e1 = std::exp(-b * T);
        lin = params.eta * x / (b * T) * (1.0 - 2.0 * e1 + e1 * e1) / (2.0 * b);
    } else {
        auto f = [&](double t) {
            return std::exp(-b * t) * leakage_profile_A(kind, t, x, T, c, params);
        };
        lin = numerics::integrate(f, 0.0, T, 1e-12);
    }
    return lin / quad;
}

}  // namespace flowexec
