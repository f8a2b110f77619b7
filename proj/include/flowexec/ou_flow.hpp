#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <variant>
#include <vector>

#include "flowexec/core.hpp"
#include "flowexec/csv.hpp"
#include "flowexec/numerics.hpp"
#include "flowexec/rng.hpp"

namespace flowexec {

// ---------------------------------------------------------------------------
// Leakage: the drift phi that the trader's own selling imposes on Y.

struct ZeroLeakage {};

/// Deterministic schedule t -> phi_t >= 0, integrated numerically.
struct ScheduleLeakage {
    std::function<double(double)> rate;
};

/// Deterministic piecewise-constant schedule: value[i] on [knots[i], knots[i+1]),
/// and value.back() after the last knot. knots[0] must be 0.
struct PiecewiseLeakage {
    std::vector<double> knots;
    std::vector<double> values;
};

/// phi(alpha) = eta * alpha. Needs a rate path, so only usable in simulation.
struct ProportionalLeakage {
    double eta = 0.0;
};

using LeakageSpec = std::variant<ZeroLeakage, ScheduleLeakage, PiecewiseLeakage, ProportionalLeakage>;

struct FlowMoments {
    double mean;
    double variance;
};

namespace detail {

inline void check_piecewise(const PiecewiseLeakage& p) {
    if (p.knots.empty() || p.knots.size() != p.values.size() || p.knots.front() != 0.0) {
        throw DomainError("piecewise leakage needs matching knots/values starting at 0");
    }
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        if (p.values[i] < 0.0) throw DomainError("leakage must be non-negative");
        if (i > 0 && !(p.knots[i] > p.knots[i - 1])) throw DomainError("leakage knots must increase");
    }
}

/// int_0^t exp(-beta (t - s)) phi_s ds for a piecewise-constant phi, exactly.
inline double piecewise_convolution(const PiecewiseLeakage& p, double beta, double t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.knots.size(); ++i) {
        const double lo = p.knots[i];
        if (lo >= t) break;
        const double hi = (i + 1 < p.knots.size()) ? std::min(p.knots[i + 1], t) : t;
        acc += p.values[i] * (std::exp(-beta * (t - hi)) - std::exp(-beta * (t - lo))) / beta;
    }
    return acc;
}

}  // namespace detail

/// Mean and variance of Y_t started from y under a deterministic leakage schedule.
inline FlowMoments moments(double t, double y, const FlowParams& params, const LeakageSpec& leakage) {
    params.validate();
    if (!(t >= 0.0)) throw DomainError("moments: t must be >= 0");
    const double b = params.beta;
    const double variance = params.stationary_variance() * (1.0 - std::exp(-2.0 * b * t));
    double drift = 0.0;
    struct Visitor {
        double t, b;
        double operator()(const ZeroLeakage&) const { return 0.0; }
        double operator()(const ScheduleLeakage& s) const {
            if (!s.rate) throw DomainError("schedule leakage without a rate function");
            return numerics::integrate(
                [&](double u) { return std::exp(-b * (t - u)) * s.rate(u); }, 0.0, t, 1e-10);
        }
        double operator()(const PiecewiseLeakage& p) const {
            detail::check_piecewise(p);
            return detail::piecewise_convolution(p, b, t);
        }
        double operator()(const ProportionalLeakage&) const {
            throw DomainError("moments: proportional leakage needs a fixed rate schedule");
        }
    };
    if (t > 0.0) drift = std::visit(Visitor{t, b}, leakage);
    return {y * std::exp(-b * t) - drift, variance};
}

// ---------------------------------------------------------------------------

/// Exact Gaussian transition of dY = -beta Y dt + sigma dW over one step h.
class OuStep {
public:
    OuStep(const FlowParams& params, double h)
        : decay_(std::exp(-params.beta * h)),
          sd_(std::sqrt(params.stationary_variance() * (1.0 - std::exp(-2.0 * params.beta * h)))) {}

    double advance(double y, double z) const { return y * decay_ + sd_ * z; }
    double decay() const { return decay_; }
    double sd() const { return sd_; }

private:
    double decay_;
    double sd_;
};

struct FlowPath {
    std::vector<double> times;
    std::vector<double> values;

    void write_csv(std::ostream& out) const {
        CsvWriter csv(out, {"t", "Y"});
        for (std::size_t i = 0; i < times.size(); ++i) csv.row(times[i], values[i]);
    }
};

/// Leakage callback for simulation: (t, Y_t) -> phi.
using LeakageCallback = std::function<double(double, double)>;

/// Samples Y on the grid t_k = min(k dt, horizon). Each step applies the exact OU
/// transition and then deducts phi(t_k, Y_k) * h explicitly.
inline FlowPath simulate_path(const FlowParams& params, double y0, const LeakageCallback& leakage,
                              double dt, double horizon, std::uint64_t seed,
                              std::uint64_t path_index = 0) {
    params.validate();
    if (!(dt > 0.0)) throw DomainError("simulate_path: dt must be > 0");
    if (!(horizon > 0.0)) throw DomainError("simulate_path: horizon must be > 0");
    const auto steps = static_cast<long>(std::ceil(horizon / dt - 1e-12));
    FlowPath path;
    path.times.reserve(steps + 1);
    path.values.reserve(steps + 1);
    path.times.push_back(0.0);
    path.values.push_back(y0);

    PathRng rng(seed, path_index);
    const OuStep full(params, dt);
    double t = 0.0;
    double y = y0;
    for (long k = 0; k < steps; ++k) {
        const double t_next = (k + 1 == steps) ? horizon : static_cast<double>(k + 1) * dt;
        const double h = t_next - t;
        const double phi = leakage ? leakage(t, y) : 0.0;
        if (!std::isfinite(phi)) throw SimulationError("non-finite leakage", k);
        const double z = rng.normal();
        y = (std::abs(h - dt) < 1e-15 ? full : OuStep(params, h)).advance(y, z) - phi * h;
        t = t_next;
        path.times.push_back(t);
        path.values.push_back(y);
    }
    return path;
}

}  // namespace flowexec
