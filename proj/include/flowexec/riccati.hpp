#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "flowexec/core.hpp"
#include "flowexec/csv.hpp"

namespace flowexec {

/// DH: lambda(x) = c x^2 (the c enters the A equation).
/// DL: lambda(x) = c     (the c enters the F equation).
enum class RiccatiVariant { DH, DL };

inline std::string to_string(RiccatiVariant v) { return v == RiccatiVariant::DH ? "DH" : "DL"; }

/// Coefficients of u(T, x, y) = x^2 A + y^2 B + x y C + F at one time-to-go.
struct RiccatiState {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
    double F = 0.0;
};

/// Right-hand side of the Riccati system in time-to-go.
inline RiccatiState riccati_rhs(const FlowParams& p, RiccatiVariant variant, double c,
                                const RiccatiState& s) {
    const double eta = p.eta;
    const double eta2 = eta * eta;
    const double c_a = (variant == RiccatiVariant::DH) ? c : 0.0;
    const double c_f = (variant == RiccatiVariant::DL) ? c : 0.0;
    return {
        -s.A * s.A - eta * s.A * s.C - 0.25 * eta2 * s.C * s.C + c_a,
        -eta2 * s.B * s.B - s.B * (eta * s.C + 2.0 * p.beta) + p.kappa - 0.25 * s.C * s.C,
        -0.5 * eta * s.C * s.C - s.C * (eta2 * s.B + s.A + p.beta) - 2.0 * eta * s.A * s.B,
        p.sigma * p.sigma * s.B + c_f,
    };
}

/// Leading terms of the solution just above the singular terminal time:
/// A = 1/eps, B = kappa eps, C = -eta kappa eps, F = sigma^2 kappa eps^2 / 2 (+ c eps for DL).
inline RiccatiState short_time_expansion(const FlowParams& p, RiccatiVariant variant, double c,
                                         double eps) {
    RiccatiState s;
    s.A = 1.0 / eps;
    s.B = p.kappa * eps;
    s.C = -p.eta * p.kappa * eps;
    s.F = p.sigma * p.sigma * p.kappa * eps * eps / 2.0;
    if (variant == RiccatiVariant::DL) s.F += c * eps;
    return s;
}

/// Counts how often a clamped rate query hit the alpha >= 0 constraint.
struct ClampStats {
    long queries = 0;
    long clamped = 0;

    ClampStats& operator+=(const ClampStats& o) {
        queries += o.queries;
        clamped += o.clamped;
        return *this;
    }
    double frequency() const { return queries ? static_cast<double>(clamped) / queries : 0.0; }
};

/// Uniform time-to-go grid of (A, B, C, F) on [epsilon, tau_max], with cubic
/// Hermite interpolation between nodes using the ODE right-hand side as slopes.
class RiccatiCoefficients {
public:
    RiccatiCoefficients(FlowParams params, RiccatiVariant variant, double c, double epsilon,
                        double step, std::vector<RiccatiState> values)
        : params_(params), variant_(variant), c_(c), epsilon_(epsilon), step_(step),
          values_(std::move(values)) {
        slopes_.reserve(values_.size());
        for (const auto& v : values_) slopes_.push_back(riccati_rhs(params_, variant_, c_, v));
    }

    RiccatiVariant variant() const { return variant_; }
    const FlowParams& params() const { return params_; }
    double risk_c() const { return c_; }
    double epsilon() const { return epsilon_; }
    double step() const { return step_; }
    double tau_max() const { return epsilon_ + step_ * static_cast<double>(values_.size() - 1); }
    std::size_t size() const { return values_.size(); }
    double tau(std::size_t i) const { return epsilon_ + step_ * static_cast<double>(i); }
    const RiccatiState& node(std::size_t i) const { return values_[i]; }

    bool contains(double tau) const {
        return tau >= epsilon_ - 1e-12 && tau <= tau_max() + 1e-12;
    }

    RiccatiState at(double tau) const {
        if (!contains(tau)) {
            throw DomainError("Riccati coefficients queried at tau = " + std::to_string(tau) +
                              " outside [" + std::to_string(epsilon_) + ", " +
                              std::to_string(tau_max()) + "]");
        }
        const double pos = (tau - epsilon_) / step_;
        std::size_t i = pos <= 0.0 ? 0 : static_cast<std::size_t>(pos);
        if (i + 1 >= values_.size()) i = values_.size() - 2;
        const double s = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1;
        const double h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2;
        const double h11 = s3 - s2;
        const auto& v0 = values_[i];
        const auto& v1 = values_[i + 1];
        const auto& d0 = slopes_[i];
        const auto& d1 = slopes_[i + 1];
        const double h = step_;
        auto mix = [&](double a0, double a1, double b0, double b1) {
            return h00 * a0 + h10 * h * b0 + h01 * a1 + h11 * h * b1;
        };
        return {mix(v0.A, v1.A, d0.A, d1.A), mix(v0.B, v1.B, d0.B, d1.B),
                mix(v0.C, v1.C, d0.C, d1.C), mix(v0.F, v1.F, d0.F, d1.F)};
    }

    /// CSV columns tau, A, B, C, F; every `stride`-th node plus the last one.
    void write_csv(std::ostream& out, std::size_t stride = 1) const {
        CsvWriter csv(out, {"tau", "A", "B", "C", "F"});
        stride = std::max<std::size_t>(stride, 1);
        for (std::size_t i = 0; i < values_.size(); i += stride) {
            const auto& v = values_[i];
            csv.row(tau(i), v.A, v.B, v.C, v.F);
        }
        if ((values_.size() - 1) % stride != 0) {
            const auto& v = values_.back();
            csv.row(tau(values_.size() - 1), v.A, v.B, v.C, v.F);
        }
    }

private:
    FlowParams params_;
    RiccatiVariant variant_;
    double c_;
    double epsilon_;
    double step_;
    std::vector<RiccatiState> values_;
    std::vector<RiccatiState> slopes_;
};

inline RiccatiVariant riccati_variant_for(const InventoryRisk& risk) {
    if (std::holds_alternative<QuadraticRisk>(risk)) return RiccatiVariant::DH;
    if (std::holds_alternative<ConstantRisk>(risk) || std::holds_alternative<NoRisk>(risk)) {
        return RiccatiVariant::DL;
    }
    // lambda(x) = c x would need linear terms D, E and a state constraint.
    throw DomainError("Riccati strategies support quadratic or constant inventory risk only");
}

/// Integrates the Riccati system in time-to-go from epsilon to tau_max with
/// fixed-step RK4. The step is shrunk slightly, if needed, so the grid ends
/// exactly at tau_max.
inline RiccatiCoefficients solve_riccati(const FlowParams& params, const InventoryRisk& risk,
                                         double tau_max, double epsilon = 1e-3,
                                         double step = 1e-4) {
    params.validate();
    validate(risk);
    const RiccatiVariant variant = riccati_variant_for(risk);
    const double c = risk_coefficient(risk);
    if (!(epsilon > 0.0) || !(epsilon < tau_max)) {
        throw DomainError("solve_riccati: need 0 < epsilon < T_max");
    }
    if (!(step > 0.0) || step > epsilon / 10.0 * (1.0 + 1e-12)) {
        throw DomainError("solve_riccati: step must be in (0, epsilon/10]");
    }
    const auto n = static_cast<std::size_t>(std::ceil((tau_max - epsilon) / step - 1e-9));
    const double h = (tau_max - epsilon) / static_cast<double>(n);

    std::vector<RiccatiState> values;
    values.reserve(n + 1);
    RiccatiState s = short_time_expansion(params, variant, c, epsilon);
    values.push_back(s);
    const double blow_up = 1.0 / (epsilon * epsilon);

    auto axpy = [](const RiccatiState& a, double k, const RiccatiState& d) {
        return RiccatiState{a.A + k * d.A, a.B + k * d.B, a.C + k * d.C, a.F + k * d.F};
    };
    for (std::size_t i = 0; i < n; ++i) {
        const RiccatiState k1 = riccati_rhs(params, variant, c, s);
        const RiccatiState k2 = riccati_rhs(params, variant, c, axpy(s, 0.5 * h, k1));
        const RiccatiState k3 = riccati_rhs(params, variant, c, axpy(s, 0.5 * h, k2));
        const RiccatiState k4 = riccati_rhs(params, variant, c, axpy(s, h, k3));
        s.A += h / 6.0 * (k1.A + 2 * k2.A + 2 * k3.A + k4.A);
        s.B += h / 6.0 * (k1.B + 2 * k2.B + 2 * k3.B + k4.B);
        s.C += h / 6.0 * (k1.C + 2 * k2.C + 2 * k3.C + k4.C);
        s.F += h / 6.0 * (k1.F + 2 * k2.F + 2 * k3.F + k4.F);
        const bool finite = std::isfinite(s.A) && std::isfinite(s.B) && std::isfinite(s.C) &&
                            std::isfinite(s.F);
        if (!finite || std::abs(s.A) > blow_up) {
            throw SolverError("Riccati solution blew up at tau = " +
                              std::to_string(epsilon + h * static_cast<double>(i + 1)));
        }
        values.push_back(s);
    }
    return RiccatiCoefficients(params, variant, c, epsilon, h, std::move(values));
}

/// u^D(T, x, y) = x^2 A(T) + y^2 B(T) + x y C(T) + F(T).
inline double value_uD(const RiccatiCoefficients& coef, double T, double x, double y) {
    const RiccatiState s = coef.at(T);
    return x * x * s.A + y * y * s.B + x * y * s.C + s.F;
}

/// alpha^D = [x (2A + eta C) + y (C + 2 eta B)] / 2 at time-to-go tau.
/// With `clamp`, negative rates become 0 and are counted in `stats`.
inline double rate_alphaD(const RiccatiCoefficients& coef, double tau, double x, double y,
                          bool clamp = false, ClampStats* stats = nullptr) {
    const RiccatiState s = coef.at(tau);
    const double eta = coef.params().eta;
    const double alpha = 0.5 * (x * (2.0 * s.A + eta * s.C) + y * (s.C + 2.0 * eta * s.B));
    if (!clamp) return alpha;
    if (stats) {
        ++stats->queries;
        if (alpha < 0.0) ++stats->clamped;
    }
    return std::max(alpha, 0.0);
}

/// |u_T - [sigma^2 u_yy / 2 - beta y u_y + kappa y^2 + lambda(x) - ((u_x + eta u_y)/2)^2]|
/// using the exact partials of the quadratic form and a five-point finite
/// difference (spacing = integrator step) for the coefficient derivatives.
inline double pde_residual(const RiccatiCoefficients& coef, double T, double x, double y,
                           const FlowParams& params, const InventoryRisk& risk) {
    if (riccati_variant_for(risk) != coef.variant()) {
        throw DomainError("pde_residual: risk does not match the coefficient variant");
    }
    const double h = coef.step();
    if (T - 2 * h < coef.epsilon() || T + 2 * h > coef.tau_max()) {
        throw DomainError("pde_residual: T too close to the ends of the coefficient grid");
    }
    const RiccatiState m2 = coef.at(T - 2 * h);
    const RiccatiState m1 = coef.at(T - h);
    const RiccatiState p1 = coef.at(T + h);
    const RiccatiState p2 = coef.at(T + 2 * h);
    auto d = [h](double a, double b, double c, double e) {
        return (a - 8.0 * b + 8.0 * c - e) / (12.0 * h);
    };
    const RiccatiState s = coef.at(T);
    const double dA = d(m2.A, m1.A, p1.A, p2.A);
    const double dB = d(m2.B, m1.B, p1.B, p2.B);
    const double dC = d(m2.C, m1.C, p1.C, p2.C);
    const double dF = d(m2.F, m1.F, p1.F, p2.F);

    const double u_T = x * x * dA + y * y * dB + x * y * dC + dF;
    const double u_x = 2.0 * x * s.A + y * s.C;
    const double u_y = 2.0 * y * s.B + x * s.C;
    const double u_yy = 2.0 * s.B;
    const double drive = 0.5 * (u_x + params.eta * u_y);
    // The DL form carries the constant charge c in F for every x, x = 0 included.
    const double lambda = coef.variant() == RiccatiVariant::DL ? risk_coefficient(risk)
                                                               : inventory_risk(risk, x);
    const double rhs = 0.5 * params.sigma * params.sigma * u_yy - params.beta * y * u_y +
                       params.kappa * y * y + lambda - drive * drive;
    return std::abs(u_T - rhs);
}

}  // namespace flowexec
