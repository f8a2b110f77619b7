#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>

#include "flowexec/core.hpp"
#include "flowexec/myopic.hpp"
#include "flowexec/numerics.hpp"
#include "flowexec/riccati.hpp"

namespace flowexec {

inline constexpr double kHorizonFloor = 1e-3;

struct HorizonResult {
    double t_star = 0.0;
    double value_at_star = 0.0;
    double t_bar = 0.0;
    int evaluations = 0;
};

/// Doubles T from t_seed until value_fn rises just past T and keeps rising
/// across 8 equally spaced samples of [T, 2T]; that T bounds the minimiser.
template <class ValueFn>
double find_t_bar(const ValueFn& value_fn, double t_seed) {
    if (!(t_seed > 0.0)) throw DomainError("find_t_bar: seed must be > 0");
    const double limit = std::ldexp(t_seed, 15);
    for (double T = t_seed; T <= limit; T *= 2.0) {
        double prev = value_fn(T);
        bool increasing = value_fn(T * (1.0 + 1e-4)) > prev;
        for (int k = 1; k < 8 && increasing; ++k) {
            const double cur = value_fn(T * (1.0 + k / 7.0));
            increasing = cur > prev;
            prev = cur;
        }
        if (increasing) return T;
    }
    throw SearchError("find_t_bar: value is not eventually increasing in T up to T = " +
                      std::to_string(limit));
}

/// Global minimisation over [t_floor, t_bar]: a 64-point scan localises the
/// best basin, then golden-section refines it to `tol`.
template <class ValueFn>
HorizonResult optimize_T(const ValueFn& value_fn, double t_bar, double tol = 1e-5,
                         double t_floor = kHorizonFloor) {
    if (!(tol > 0.0)) throw DomainError("optimize_T: tol must be > 0");
    HorizonResult res;
    res.t_bar = t_bar;
    if (!(t_bar > t_floor)) {
        res.t_star = t_floor;
        res.value_at_star = value_fn(t_floor);
        res.evaluations = 1;
        return res;
    }
    constexpr int kGrid = 64;
    std::array<double, kGrid> values{};
    const double width = (t_bar - t_floor) / (kGrid - 1);
    int best = 0;
    for (int i = 0; i < kGrid; ++i) {
        values[i] = value_fn(t_floor + width * i);
        if (values[i] < values[best]) best = i;
    }
    res.evaluations = kGrid;
    const double lo = t_floor + width * std::max(best - 1, 0);
    const double hi = t_floor + width * std::min(best + 1, kGrid - 1);
    const auto refined = numerics::golden_section(value_fn, lo, hi, tol);
    res.evaluations += refined.evaluations;
    if (refined.value <= values[best]) {
        res.t_star = refined.x;
        res.value_at_star = refined.value;
    } else {
        res.t_star = t_floor + width * best;
        res.value_at_star = values[best];
    }
    return res;
}

// ---------------------------------------------------------------------------

enum class HorizonFamily { MyopicML, DynamicDL, DynamicDH };

inline std::string to_string(HorizonFamily f) {
    switch (f) {
        case HorizonFamily::MyopicML: return "myopic-ML";
        case HorizonFamily::DynamicDL: return "dynamic-DL";
        case HorizonFamily::DynamicDH: return "dynamic-DH";
    }
    return "?";
}

/// When a receding strategy recomputes T*: every `interval` of volume time,
/// each time another 1/K of the initial inventory has been sold, or never
/// (static strategy: T* from t = 0 only).
struct RebalanceSchedule {
    enum class Mode { Continuous, InventoryFraction, Never };
    Mode mode = Mode::Continuous;
    double interval = 0.0;  // Continuous; <= the simulation step means "every step"
    int fractions = 1;      // InventoryFraction

    static RebalanceSchedule every(double dt) { return {Mode::Continuous, dt, 1}; }
    static RebalanceSchedule inventory_fractions(int k) {
        if (k < 1) throw DomainError("inventory-fraction schedule needs K >= 1");
        return {Mode::InventoryFraction, 0.0, k};
    }
    static RebalanceSchedule never() { return {Mode::Never, 0.0, 1}; }

    void validate() const {
        if (mode == Mode::Continuous && !(interval >= 0.0)) {
            throw DomainError("rebalance interval must be >= 0");
        }
        if (mode == Mode::InventoryFraction && fractions < 1) {
            throw DomainError("rebalance fractions must be >= 1");
        }
    }
};

/// Fixed-horizon value and rate for one strategy family, plus the T* search on top.
/// Dynamic families share one precomputed coefficient grid.
class HorizonPlanner {
public:
    HorizonPlanner(HorizonFamily family, const FlowParams& params, const InventoryRisk& risk,
                   double tau_max = 40.0, double epsilon = 1e-3, double step = 1e-4)
        : family_(family), params_(params), risk_(risk) {
        params_.validate();
        validate(risk_);
        switch (family_) {
            case HorizonFamily::MyopicML:
                if (!std::holds_alternative<NoRisk>(risk_) &&
                    !std::holds_alternative<ConstantRisk>(risk_)) {
                    throw DomainError("myopic-ML family needs zero or constant inventory risk");
                }
                break;
            case HorizonFamily::DynamicDL:
                if (riccati_variant_for(risk_) != RiccatiVariant::DL) {
                    throw DomainError("dynamic-DL family needs zero or constant inventory risk");
                }
                coef_ = std::make_shared<const RiccatiCoefficients>(
                    solve_riccati(params_, risk_, tau_max, epsilon, step));
                break;
            case HorizonFamily::DynamicDH:
                if (riccati_variant_for(risk_) != RiccatiVariant::DH) {
                    throw DomainError("dynamic-DH family needs quadratic inventory risk");
                }
                coef_ = std::make_shared<const RiccatiCoefficients>(
                    solve_riccati(params_, risk_, tau_max, epsilon, step));
                break;
        }
    }

    HorizonPlanner(HorizonFamily family, std::shared_ptr<const RiccatiCoefficients> coef,
                   const InventoryRisk& risk)
        : family_(family), params_(coef->params()), risk_(risk), coef_(std::move(coef)) {
        if (family_ == HorizonFamily::MyopicML) throw DomainError("myopic family takes no grid");
    }

    HorizonFamily family() const { return family_; }
    const FlowParams& params() const { return params_; }
    const InventoryRisk& risk() const { return risk_; }
    const RiccatiCoefficients* coefficients() const { return coef_.get(); }

    void set_search(double t_seed, double tol, double t_floor) {
        t_seed_ = t_seed;
        tol_ = tol;
        t_floor_ = t_floor;
    }
    double t_floor() const { return t_floor_; }

    /// Fixed-horizon expected cost u(T, x, y).
    double value(double T, double x, double y) const {
        if (family_ == HorizonFamily::MyopicML) return ml_value(T, x, y);
        return value_uD(*coef_, T, x, y);
    }

    /// Fixed-horizon selling rate at time-to-go T.
    double rate(double T, double x, double y, ClampStats* stats = nullptr) const {
        if (family_ == HorizonFamily::MyopicML) return x / T;
        return rate_alphaD(*coef_, std::max(T, coef_->epsilon()), x, y, true, stats);
    }

    HorizonResult optimize(double x, double y) const {
        auto fn = [&](double T) { return value(T, x, y); };
        const double t_bar = find_t_bar(fn, t_seed_);
        return optimize_T(fn, t_bar, tol_, t_floor_);
    }

    /// alpha(T*(x, y), x, y): the first action of the fixed-horizon plan.
    double receding_rate(double x, double y, ClampStats* stats = nullptr) const {
        if (!(x > 0.0)) throw DomainError("receding_step: x must be > 0");
        return rate(optimize(x, y).t_star, x, y, stats);
    }

private:
    // u^ML = x^2/T + cT + O^ML with the exponentials shared between terms.
    double ml_value(double T, double x, double y) const {
        const double b = params_.beta;
        const double k = params_.kappa;
        const double eta = params_.eta;
        const double s2 = params_.sigma * params_.sigma;
        const double e1 = std::exp(-b * T);
        const double e2 = e1 * e1;
        double u = x * x / T + risk_coefficient(risk_) * T;
        u += k * y * y / (2.0 * b) * (1.0 - e2) + k * s2 / (4.0 * b * b) * (2.0 * b * T + e2 - 1.0);
        if (eta != 0.0 && x != 0.0) {
            u += k * eta * x * y / (b * b * T) * (2.0 * e1 - 1.0 - e2) +
                 k * eta * eta * x * x / (2.0 * b * b * b * T * T) * (2.0 * b * T + 4.0 * e1 - e2 - 3.0);
        }
        return u;
    }

    HorizonFamily family_;
    FlowParams params_;
    InventoryRisk risk_;
    std::shared_ptr<const RiccatiCoefficients> coef_;
    double t_seed_ = 1.0;
    double tol_ = 1e-5;
    double t_floor_ = kHorizonFloor;
};

/// One receding-horizon decision at state (x, y).
inline double receding_step(double x, double y, const HorizonPlanner& planner,
                            ClampStats* stats = nullptr) {
    return planner.receding_rate(x, y, stats);
}

inline double receding_step(double x, double y, HorizonFamily family, const FlowParams& params,
                            const InventoryRisk& risk) {
    return HorizonPlanner(family, params, risk).receding_rate(x, y);
}

/// Static horizon choice when the informational cost is E|Y_T| and timing
/// risk is c sqrt(T), trading at the constant rate x/T.
inline HorizonResult elo_static_horizon(double x, double y, double c, const FlowParams& params) {
    params.validate();
    if (!(x > 0.0)) throw DomainError("elo_static_horizon: x must be > 0");
    if (!(c > 0.0)) throw DomainError("elo_static_horizon: c must be > 0");
    const double b = params.beta;
    auto objective = [&](double T) {
        const double mean = y * std::exp(-b * T) +
                            -params.eta * x / (b * T) * (-std::expm1(-b * T));
        const double sd = std::sqrt(params.stationary_variance() * (-std::expm1(-2.0 * b * T)));
        return numerics::folded_normal_mean(mean, sd) + c * std::sqrt(T);
    };
    const double t_bar = find_t_bar(objective, 1.0);
    return optimize_T(objective, t_bar);
}

}  // namespace flowexec
