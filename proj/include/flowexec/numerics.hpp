#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "flowexec/core.hpp"

namespace flowexec::numerics {

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance `tol`.
/// The interval is pre-split into a few panels so that integrands with an
/// interior bump are not mistaken for flat ones on the first probe.
template <class F>
double integrate(const F& f, double a, double b, double tol = 1e-10, int max_depth = 40) {
    if (b == a) return 0.0;
    if (b < a) return -integrate(f, b, a, tol, max_depth);
    constexpr int kPanels = 8;
    const double width = (b - a) / kPanels;
    double total = 0.0;
    for (int p = 0; p < kPanels; ++p) {
        const double lo = a + p * width;
        const double hi = (p + 1 == kPanels) ? b : lo + width;
        const double mid = 0.5 * (lo + hi);
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fmid = f(mid);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += detail::simpson_step(f, lo, flo, hi, fhi, mid, fmid, whole, tol / kPanels,
                                      max_depth);
    }
    return total;
}

struct MinimumResult {
    double x;
    double value;
    int evaluations;
};

/// Golden-section search for a minimum of a unimodal f on [a, b]; stops once
/// the bracket is narrower than `tol`.
template <class F>
MinimumResult golden_section(const F& f, double a, double b, double tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    int evals = 0;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c);
    double fd = f(d);
    evals += 2;
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
        ++evals;
    }
    const double x = 0.5 * (a + b);
    const double fx = f(x);
    ++evals;
    // Return the best point actually evaluated.
    if (fc < fx && fc <= fd) return {c, fc, evals};
    if (fd < fx) return {d, fd, evals};
    return {x, fx, evals};
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// E|X| for X ~ N(mean, sd^2).
inline double folded_normal_mean(double mean, double sd) {
    if (sd <= 0.0) return std::abs(mean);
    const double z = mean / sd;
    return sd * std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * z * z) +
           mean * (1.0 - 2.0 * normal_cdf(-z));
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DomainError("quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace flowexec::numerics
