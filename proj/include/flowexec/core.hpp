#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace flowexec {

inline constexpr const char* kVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Errors. Every module throws one of these; the CLI maps each to its own exit
// code.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by an argument (negative time, non-positive inventory, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numerical solver could not produce a valid answer (ODE blow-up,
/// negative radicand in the explicit HJB march).
class SolverError : public Error {
public:
    using Error::Error;
};

/// The horizon search could not bracket a minimum.
class SearchError : public Error {
public:
    using Error::Error;
};

class SimulationError : public Error {
public:
    SimulationError(const std::string& what, long step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Bad input data: malformed trade file lines, zero-volume records.
class DataError : public Error {
public:
    DataError(const std::string& what, long location)
        : Error(what + " (at " + std::to_string(location) + ")"), location_(location) {}
    long location() const noexcept { return location_; }

private:
    long location_;
};

// ---------------------------------------------------------------------------

/// Order-flow model constants. Time is measured in traded-volume units.
struct FlowParams {
    double beta = 0.05;    // mean reversion of the imbalance
    double sigma = 0.14;   // imbalance volatility
    double kappa = 10.0;   // weight of the informational cost kappa*Y^2
    double eta = 0.075;    // leakage per unit of selling rate

    void validate() const {
        if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be > 0");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be > 0");
        if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be >= 0");
        if (!(eta >= 0.0) || !std::isfinite(eta)) throw DomainError("eta must be >= 0");
    }

    double stationary_variance() const { return sigma * sigma / (2.0 * beta); }
    double stationary_sd() const { return std::sqrt(stationary_variance()); }

    /// Imbalance lives in [-1, 1], so the stationary variance is expected to sit
    /// in [0.01, 0.2]. Outside that range we only warn.
    std::optional<std::string> plausibility_warning() const {
        const double v = stationary_variance();
        if (v < 0.01 || v > 0.2) {
            return "stationary imbalance variance sigma^2/(2 beta) = " + std::to_string(v) +
                   " is outside the typical range [0.01, 0.2]";
        }
        return std::nullopt;
    }
};

// ---------------------------------------------------------------------------
// Inventory (timing) risk lambda(x).

struct NoRisk {};
struct QuadraticRisk { double c = 0.0; };  // lambda(x) = c x^2
struct LinearRisk { double c = 0.0; };     // lambda(x) = c x
struct ConstantRisk { double c = 0.0; };   // lambda(x) = c  (x > 0)

using InventoryRisk = std::variant<NoRisk, QuadraticRisk, LinearRisk, ConstantRisk>;

inline double risk_coefficient(const InventoryRisk& risk) {
    return std::visit(
        [](const auto& r) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(r)>, NoRisk>) {
                return 0.0;
            } else {
                return r.c;
            }
        },
        risk);
}

inline void validate(const InventoryRisk& risk) {
    const double c = risk_coefficient(risk);
    if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("risk coefficient c must be >= 0");
}

/// lambda(x). Zero inventory carries no risk, including for the constant variant.
inline double inventory_risk(const InventoryRisk& risk, double x) {
    if (x <= 0.0) return 0.0;
    struct Visitor {
        double x;
        double operator()(const NoRisk&) const { return 0.0; }
        double operator()(const QuadraticRisk& r) const { return r.c * x * x; }
        double operator()(const LinearRisk& r) const { return r.c * x; }
        double operator()(const ConstantRisk& r) const { return r.c; }
    };
    return std::visit(Visitor{x}, risk);
}

inline std::string risk_name(const InventoryRisk& risk) {
    struct Visitor {
        std::string operator()(const NoRisk&) const { return "zero"; }
        std::string operator()(const QuadraticRisk&) const { return "quadratic"; }
        std::string operator()(const LinearRisk&) const { return "linear"; }
        std::string operator()(const ConstantRisk&) const { return "constant"; }
    };
    return std::visit(Visitor{}, risk);
}

/// Parses "zero", "quadratic", "linear" or "constant" together with a coefficient.
inline InventoryRisk make_risk(const std::string& kind, double c) {
    if (kind == "zero" || kind == "none") return NoRisk{};
    if (kind == "quadratic") return QuadraticRisk{c};
    if (kind == "linear") return LinearRisk{c};
    if (kind == "constant") return ConstantRisk{c};
    throw DomainError("unknown risk kind '" + kind + "'");
}

}  // namespace flowexec
