#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "flowexec/core.hpp"
#include "flowexec/csv.hpp"
#include "flowexec/riccati.hpp"

namespace flowexec {

/// Inventory grid x_i = i dx (i = 0..n_x) by imbalance grid y_j = y_lo + j dy (j = 0..n_y).
struct GridSpec {
    std::size_t n_x = 0;
    double dx = 0.0;
    std::size_t n_y = 0;
    double y_lo = 0.0;
    double y_hi = 0.0;
    double dy = 0.0;

    double x(std::size_t i) const { return dx * static_cast<double>(i); }
    double y(std::size_t j) const { return y_lo + dy * static_cast<double>(j); }
    double x_max() const { return x(n_x); }

    /// n_x is rounded so that x_max lands on the grid exactly; dx is adjusted to match.
    static GridSpec make(double x_max, double dx_target, std::size_t n_y, double y_lo, double y_hi) {
        if (!(x_max > 0.0) || !(dx_target > 0.0)) throw DomainError("grid: x_max and dx must be > 0");
        if (n_y < 4) throw DomainError("grid: need at least 4 imbalance steps");
        if (!(y_lo < y_hi)) throw DomainError("grid: y_lo must be < y_hi");
        GridSpec g;
        g.n_x = static_cast<std::size_t>(std::max(1.0, std::ceil(x_max / dx_target - 1e-9)));
        g.dx = x_max / static_cast<double>(g.n_x);
        g.n_y = n_y;
        g.y_lo = y_lo;
        g.y_hi = y_hi;
        g.dy = (y_hi - y_lo) / static_cast<double>(n_y);
        return g;
    }

    void validate(const FlowParams& params) const {
        if (!(dx > 0.0) || !(dy > 0.0) || n_x < 1 || n_y < 4) {
            throw DomainError("grid: need dx > 0, dy > 0, n_x >= 1, n_y >= 4");
        }
        if (!(y_lo < 0.0 && 0.0 < y_hi)) throw DomainError("grid: need y_lo < 0 < y_hi");
        const double need = 5.0 * params.stationary_sd() * (1.0 - 1e-9);
        if (-y_lo < need || y_hi < need) {
            throw DomainError("grid: imbalance bounds must cover 5 stationary standard deviations (" +
                              std::to_string(need) + ")");
        }
        if (std::abs(y_lo + dy * static_cast<double>(n_y) - y_hi) > 1e-9 * (y_hi - y_lo)) {
            throw DomainError("grid: dy inconsistent with bounds");
        }
    }
};

namespace detail {

/// lambda just above inventory x; the constant charge applies to every
/// strictly positive inventory, including the first step out of x = 0.
inline double risk_from_above(const InventoryRisk& risk, double x) {
    if (std::holds_alternative<ConstantRisk>(risk)) return risk_coefficient(risk);
    return inventory_risk(risk, x);
}

}  // namespace detail

/// Default grid: y in +-n_sd stationary SDs with n_y steps, and
/// dx = min(1e-3 x0, 0.5 sqrt(R_floor) dy^2 / sigma^2). The second bound is the
/// explicit scheme's stability limit, with R_floor the smallest source term
/// kappa y^2 + lambda on the grid.
inline GridSpec default_grid(const FlowParams& params, const InventoryRisk& risk, double x0,
                             std::size_t n_y = 400, double n_sd = 5.0) {
    params.validate();
    if (!(x0 > 0.0)) throw DomainError("grid: x0 must be > 0");
    const double half = n_sd * params.stationary_sd();
    const double dy = 2.0 * half / static_cast<double>(n_y);
    const double r_floor = params.kappa * dy * dy + detail::risk_from_above(risk, 0.0);
    double dx = 1e-3 * x0;
    if (params.sigma > 0.0 && r_floor > 0.0) {
        dx = std::min(dx, 0.5 * std::sqrt(r_floor) * dy * dy / (params.sigma * params.sigma));
    }
    return GridSpec::make(x0, dx, n_y, -half, half);
}

/// Same bounds, half the imbalance step; dx follows the stability rule.
inline GridSpec refine(const GridSpec& g, const FlowParams& params, const InventoryRisk& risk) {
    const double half = std::max(-g.y_lo, g.y_hi);
    GridSpec fine = default_grid(params, risk, g.x_max(), 2 * g.n_y, half / params.stationary_sd());
    if (fine.dx > 0.5 * g.dx) fine = GridSpec::make(g.x_max(), 0.5 * g.dx, fine.n_y, fine.y_lo, fine.y_hi);
    return fine;
}

class ValueSurface {
public:
    ValueSurface(GridSpec grid, std::vector<double> values, FlowParams params, InventoryRisk risk)
        : grid_(grid), values_(std::move(values)), params_(params), risk_(risk) {
        if (values_.size() != (grid_.n_x + 1) * (grid_.n_y + 1)) {
            throw DomainError("value surface: size does not match grid");
        }
    }

    const GridSpec& grid() const { return grid_; }
    const FlowParams& params() const { return params_; }
    const InventoryRisk& risk() const { return risk_; }
    const std::vector<double>& values() const { return values_; }

    double at(std::size_t i, std::size_t j) const { return values_[i * (grid_.n_y + 1) + j]; }

    bool contains(double x, double y) const {
        return x >= 0.0 && x <= grid_.x_max() * (1.0 + 1e-12) && y >= grid_.y_lo && y <= grid_.y_hi;
    }

    /// Bilinear interpolation of v.
    double value(double x, double y) const {
        if (!contains(x, y)) throw DomainError(out_of_grid(x, y));
        const auto [i, fx] = locate(x / grid_.dx, grid_.n_x);
        const auto [j, fy] = locate((y - grid_.y_lo) / grid_.dy, grid_.n_y);
        const double v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
        return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
    }

    void write_csv(std::ostream& out) const {
        CsvWriter csv(out, {"x", "y", "v"});
        for (std::size_t i = 0; i <= grid_.n_x; ++i) {
            for (std::size_t j = 0; j <= grid_.n_y; ++j) csv.row(grid_.x(i), grid_.y(j), at(i, j));
        }
    }

    /// Header: uint64 n_x, uint64 n_y, double dx, dy, y_lo; then (n_x+1)(n_y+1)
    /// doubles, row-major in x. Native endianness.
    void write_binary(std::ostream& out) const {
        const std::uint64_t nx = grid_.n_x, ny = grid_.n_y;
        out.write(reinterpret_cast<const char*>(&nx), sizeof nx);
        out.write(reinterpret_cast<const char*>(&ny), sizeof ny);
        for (double d : {grid_.dx, grid_.dy, grid_.y_lo}) out.write(reinterpret_cast<const char*>(&d), sizeof d);
        out.write(reinterpret_cast<const char*>(values_.data()),
                  static_cast<std::streamsize>(values_.size() * sizeof(double)));
    }

    static ValueSurface read_binary(std::istream& in, const FlowParams& params, const InventoryRisk& risk) {
        std::uint64_t nx = 0, ny = 0;
        double dx = 0, dy = 0, y_lo = 0;
        in.read(reinterpret_cast<char*>(&nx), sizeof nx);
        in.read(reinterpret_cast<char*>(&ny), sizeof ny);
        in.read(reinterpret_cast<char*>(&dx), sizeof dx);
        in.read(reinterpret_cast<char*>(&dy), sizeof dy);
        in.read(reinterpret_cast<char*>(&y_lo), sizeof y_lo);
        if (!in || nx == 0 || ny == 0 || nx > (1u << 26) || ny > (1u << 26)) {
            throw DataError("surface dump: bad header", 0);
        }
        GridSpec g;
        g.n_x = nx;
        g.n_y = ny;
        g.dx = dx;
        g.dy = dy;
        g.y_lo = y_lo;
        g.y_hi = y_lo + dy * static_cast<double>(ny);
        std::vector<double> v((nx + 1) * (ny + 1));
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) throw DataError("surface dump: truncated data", 40);
        return ValueSurface(g, std::move(v), params, risk);
    }

private:
    // Cell index and fractional offset, with the last cell closed on the right.
    static std::pair<std::size_t, double> locate(double s, std::size_t n) {
        const double fl = std::clamp(std::floor(s), 0.0, static_cast<double>(n - 1));
        return {static_cast<std::size_t>(fl), std::clamp(s - fl, 0.0, 1.0)};
    }

    std::string out_of_grid(double x, double y) const {
        std::ostringstream msg;
        msg << "query (" << x << ", " << y << ") outside grid [0, " << grid_.x_max() << "] x ["
            << grid_.y_lo << ", " << grid_.y_hi << "]";
        return msg.str();
    }

    GridSpec grid_;
    std::vector<double> values_;
    FlowParams params_;
    InventoryRisk risk_;
};

/// Explicit march in x of
///   v_x = 2 sqrt(kappa y^2 + lambda(x) - beta y v_y + sigma^2/2 v_yy) - eta v_y,  v(0, y) = 0,
/// central differences in y and v_yy = 0 at both y boundaries.
inline ValueSurface solve_indefinite(const FlowParams& params, const InventoryRisk& risk,
                                     const GridSpec& grid) {
    params.validate();
    validate(risk);
    grid.validate(params);
    const std::size_t m = grid.n_y;
    const std::size_t stride = m + 1;
    std::vector<double> v((grid.n_x + 1) * stride, 0.0);
    std::vector<double> y(stride);
    for (std::size_t j = 0; j <= m; ++j) y[j] = grid.y(j);
    const double half_s2 = 0.5 * params.sigma * params.sigma;
    const double inv_2dy = 0.5 / grid.dy;
    const double inv_dy2 = 1.0 / (grid.dy * grid.dy);

    for (std::size_t i = 0; i < grid.n_x; ++i) {
        const double* cur = v.data() + i * stride;
        double* next = v.data() + (i + 1) * stride;
        const double lambda = detail::risk_from_above(risk, grid.x(i));
        for (std::size_t j = 1; j < m; ++j) {
            const double vy = (cur[j + 1] - cur[j - 1]) * inv_2dy;
            const double vyy = (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]) * inv_dy2;
            const double r = params.kappa * y[j] * y[j] + lambda - params.beta * y[j] * vy + half_s2 * vyy;
            if (r < 0.0) {
                std::ostringstream msg;
                msg << "explicit scheme failed: negative radicand " << r << " at grid point (i=" << i
                    << ", j=" << j << "), x=" << grid.x(i) << ", y=" << y[j]
                    << "; widen the imbalance bounds or reduce dx";
                throw SolverError(msg.str());
            }
            next[j] = cur[j] + grid.dx * (2.0 * std::sqrt(r) - params.eta * vy);
        }
        next[0] = 2.0 * next[1] - next[2];
        next[m] = 2.0 * next[m - 1] - next[m - 2];
        for (std::size_t j = 0; j <= m; ++j) {
            if (!std::isfinite(next[j])) {
                throw SolverError("explicit scheme produced a non-finite value at (i=" +
                                  std::to_string(i + 1) + ", j=" + std::to_string(j) + ")");
            }
        }
    }
    return ValueSurface(grid, std::move(v), params, risk);
}

/// alpha* = max(0, (v_x + eta v_y) / 2). Derivatives are centred differences of
/// the bilinear interpolant with the grid spacing as step, one-sided at edges.
inline double feedback_rate(const ValueSurface& s, double x, double y, ClampStats* stats = nullptr) {
    if (!s.contains(x, y)) {
        std::ostringstream msg;
        msg << "feedback_rate: (" << x << ", " << y << ") outside the solved grid";
        throw DomainError(msg.str());
    }
    const GridSpec& g = s.grid();
    const double x_hi = g.x_max();
    const double xa = std::max(0.0, x - g.dx), xb = std::min(x_hi, x + g.dx);
    const double ya = std::max(g.y_lo, y - g.dy), yb = std::min(g.y_hi, y + g.dy);
    const double vx = (s.value(xb, y) - s.value(xa, y)) / (xb - xa);
    const double vy = (s.value(x, yb) - s.value(x, ya)) / (yb - ya);
    const double raw = 0.5 * (vx + s.params().eta * vy);
    if (stats) {
        ++stats->queries;
        if (raw < 0.0) ++stats->clamped;
    }
    return std::max(0.0, raw);
}

}  // namespace flowexec
