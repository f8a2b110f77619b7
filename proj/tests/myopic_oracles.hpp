#pragma once
// Myopic rates, leakage profiles and information costs by direct quadrature.

#include <optional>

#include "flowexec/core.hpp"
#include "flowexec/myopic.hpp"
#include "oracles.hpp"

namespace oracle {

using flowexec::FlowParams;
using flowexec::MyopicKind;

// Rates of the three curves, written out independently of the library.
inline double myopic_rate(MyopicKind kind, double s, double x, double T, double c) {
    switch (kind) {
        case MyopicKind::ML: return x / T;
        case MyopicKind::MH: {
            const double a = std::sqrt(c);
            return x * a * std::cosh(a * (T - s)) / std::sinh(a * T);
        }
        case MyopicKind::MQ: {
            const double th = std::min(T, 2.0 * std::sqrt(x / c));
            if (s >= th) return 0.0;
            return c * th / 4.0 + x / th - c * s / 2.0;
        }
    }
    return 0.0;
}

inline double leakage_A(MyopicKind kind, double t, double x, double T, double c, const FlowParams& p) {
    auto f = [&](double s) { return std::exp(-p.beta * (t - s)) * p.eta * myopic_rate(kind, s, x, T, c); };
    if (kind == MyopicKind::MQ) {
        const double th = std::min(T, 2.0 * std::sqrt(x / c));
        return gl_integrate(f, 0.0, std::min(t, th), 8) +
               (t > th ? gl_integrate(f, th, t, 8) : 0.0);
    }
    return gl_integrate(f, 0.0, t, 8);
}

inline double information_O(std::optional<MyopicKind> kind, double T, double x, double y, double c, const FlowParams& p) {
    auto mean_sq = [&](double t) {
        const double a = kind ? leakage_A(*kind, t, x, T, c, p) : 0.0;
        const double m = y * std::exp(-p.beta * t) - a;
        return m * m;
    };
    auto var = [&](double t) { return p.sigma * p.sigma / (2 * p.beta) * (1 - std::exp(-2 * p.beta * t)); };
    double split = T;
    if (kind == MyopicKind::MQ) split = std::min(T, 2.0 * std::sqrt(x / c));
    double m = gl_integrate(mean_sq, 0.0, split, 8);
    if (split < T) m += gl_integrate(mean_sq, split, T, 8);
    return p.kappa * (m + gl_integrate(var, 0.0, T, 8));
}

}  // namespace oracle
