#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "flowexec/core.hpp"
#include "flowexec/csv.hpp"

namespace flowexec {

/// Volume-bucket execution model. Inventory x_i = i V / N, participation
/// alpha_m = m / N (m = 1..N), so selling alpha V always lands on the grid.
struct DPConfig {
    std::size_t n_y = 41;       // imbalance levels spread evenly over [-1, 1]
    std::size_t n_x = 40;       // inventory steps above 0
    std::size_t n_alpha = 20;   // N
    double bucket_volume = 1.0; // V
    double beta = 0.05;         // per unit volume
    double sigma = 0.14;
    double kappa = 10.0;
    double psi_exponent = 1.0;  // psi(alpha) = alpha^p
    InventoryRisk risk = ConstantRisk{0.1};
    double terminal_coefficient = 0.0;  // A in H(x) = A x^2; 0 means 1 / V^2
    std::size_t noise_points = 101;     // quantile nodes for the bucket noise
};

class DPModel {
public:
    explicit DPModel(const DPConfig& cfg) : cfg_(cfg) {
        if (cfg_.n_y < 2 || cfg_.n_x < 1 || cfg_.n_alpha < 1 || cfg_.noise_points < 1) {
            throw DomainError("dp: grids must be non-empty");
        }
        if (!(cfg_.bucket_volume > 0.0)) throw DomainError("dp: bucket volume must be > 0");
        if (!(cfg_.beta > 0.0) || !(cfg_.sigma >= 0.0) || !(cfg_.kappa >= 0.0)) {
            throw DomainError("dp: need beta > 0, sigma >= 0, kappa >= 0");
        }
        if (!(cfg_.psi_exponent >= 0.0)) throw DomainError("dp: psi exponent must be >= 0");
        validate(cfg_.risk);
        for (std::size_t j = 0; j < cfg_.n_y; ++j) {
            y_.push_back(-1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(cfg_.n_y - 1));
        }
        build_kernel();
    }

    /// Arbitrary imbalance levels inside [-1, 1], ascending.
    DPModel(const DPConfig& cfg, std::vector<double> y_levels) : cfg_(cfg), y_(std::move(y_levels)) {
        cfg_.n_y = y_.size();
        if (y_.size() < 2 || y_.front() < -1.0 || y_.back() > 1.0 ||
            !std::is_sorted(y_.begin(), y_.end())) {
            throw DomainError("dp: imbalance levels must be ascending inside [-1, 1]");
        }
        if (!(cfg_.bucket_volume > 0.0) || cfg_.n_x < 1 || cfg_.n_alpha < 1) {
            throw DomainError("dp: grids must be non-empty and V > 0");
        }
        validate(cfg_.risk);
        build_kernel();
    }

    const DPConfig& config() const { return cfg_; }
    std::size_t n_y() const { return y_.size(); }
    std::size_t n_x() const { return cfg_.n_x; }
    std::size_t n_alpha() const { return cfg_.n_alpha; }
    double y(std::size_t j) const { return y_[j]; }
    const std::vector<double>& y_levels() const { return y_; }
    double x(std::size_t i) const {
        return cfg_.bucket_volume * static_cast<double>(i) / static_cast<double>(cfg_.n_alpha);
    }
    double alpha(std::size_t m) const { return static_cast<double>(m) / static_cast<double>(cfg_.n_alpha); }
    double psi(double a) const { return std::pow(a, cfg_.psi_exponent); }
    double terminal_coefficient() const {
        return cfg_.terminal_coefficient > 0.0 ? cfg_.terminal_coefficient
                                               : 1.0 / (cfg_.bucket_volume * cfg_.bucket_volume);
    }

    /// E[Y_1] before truncation: F's mean y e^{-beta V} shifted by the leakage
    /// alpha psi(alpha) (F + 1). Defined for alpha = 0 as well.
    double mean_next(double y, double a) const {
        const double f = y * std::exp(-cfg_.beta * cfg_.bucket_volume);
        return f - a * psi(a) * (f + 1.0);
    }
    double noise_sd() const {
        const double b = cfg_.beta, v = cfg_.bucket_volume;
        return std::sqrt(cfg_.sigma * cfg_.sigma / (2.0 * b) * (-std::expm1(-2.0 * b * v)));
    }

    /// P(Y_1 = y_k | Y_0 = y_j, alpha_m), m in 0..N (m = 0: no trade).
    double transition(std::size_t j, std::size_t m, std::size_t k) const {
        return kernel_[(j * (cfg_.n_alpha + 1) + m) * y_.size() + k];
    }
    const double* row(std::size_t j, std::size_t m) const {
        return kernel_.data() + (j * (cfg_.n_alpha + 1) + m) * y_.size();
    }

    /// Row for an arbitrary (y, alpha): truncated Gaussian around mean_next,
    /// equal-probability quantile nodes mapped to the nearest level.
    std::vector<double> distribution(double y0, double a) const {
        std::vector<double> out(y_.size(), 0.0);
        const double m = mean_next(y0, a);
        const double half_lo = 0.5 * (y_[1] - y_[0]);
        const double half_hi = 0.5 * (y_.back() - y_[y_.size() - 2]);
        if (m < y_.front() - half_lo || m > y_.back() + half_hi) {
            throw DomainError("dp: imbalance grid too coarse to represent the leakage shift (mean " +
                              std::to_string(m) + ")");
        }
        const double sd = noise_sd();
        const std::size_t q = cfg_.noise_points;
        const double w = 1.0 / static_cast<double>(q);
        boost::math::normal_distribution<double> std_normal(0.0, 1.0);
        double p_lo = 0.0, p_hi = 1.0;
        if (sd > 0.0) {
            p_lo = boost::math::cdf(std_normal, (-1.0 - m) / sd);
            p_hi = boost::math::cdf(std_normal, (1.0 - m) / sd);
        }
        if (!(sd > 0.0) || !(p_hi - p_lo > 1e-12)) {
            out[nearest(std::clamp(m, -1.0, 1.0))] = 1.0;
            return out;
        }
        for (std::size_t i = 0; i < q; ++i) {
            const double p = p_lo + (p_hi - p_lo) * (static_cast<double>(i) + 0.5) * w;
            const double e = sd * boost::math::quantile(std_normal, p);
            out[nearest(std::clamp(m + e, -1.0, 1.0))] += w;
        }
        return out;
    }

    std::size_t nearest(double v) const {
        const auto it = std::lower_bound(y_.begin(), y_.end(), v);
        if (it == y_.begin()) return 0;
        if (it == y_.end()) return y_.size() - 1;
        const auto k = static_cast<std::size_t>(it - y_.begin());
        return (v - y_[k - 1] <= y_[k] - v) ? k - 1 : k;
    }

private:
    void build_kernel() {
        const std::size_t na = cfg_.n_alpha + 1;
        kernel_.assign(y_.size() * na * y_.size(), 0.0);
        for (std::size_t j = 0; j < y_.size(); ++j) {
            for (std::size_t m = 0; m < na; ++m) {
                const auto d = distribution(y_[j], alpha(m));
                std::copy(d.begin(), d.end(), kernel_.begin() + (j * na + m) * y_.size());
            }
        }
    }

    DPConfig cfg_;
    std::vector<double> y_;
    std::vector<double> kernel_;
};

inline DPModel build_model(const DPConfig& cfg) { return DPModel(cfg); }

/// v and the minimising alpha on the (x, y) grid, row-major in x.
struct DPStage {
    std::vector<double> value;
    std::vector<double> policy;  // 0 where x = 0
};

struct ValueTable {
    std::size_t n_x = 0;  // levels 0..n_x
    std::size_t n_y = 0;
    std::vector<DPStage> stages;  // stages[t] = v^(t); may hold only the last one
    std::vector<double> gaps;     // sup-norm change per iteration
    bool converged = false;

    const DPStage& last() const { return stages.back(); }
    double v(const DPStage& s, std::size_t i, std::size_t j) const { return s.value[i * n_y + j]; }
    double alpha(const DPStage& s, std::size_t i, std::size_t j) const { return s.policy[i * n_y + j]; }

    void write_csv(std::ostream& out, const DPModel& model, const DPStage& s) const {
        CsvWriter csv(out, {"x", "y", "alpha", "v"});
        for (std::size_t i = 0; i <= n_x; ++i) {
            for (std::size_t j = 0; j < n_y; ++j) csv.row(model.x(i), model.y(j), alpha(s, i, j), v(s, i, j));
        }
    }
};

namespace detail {

inline DPStage terminal_stage(const DPModel& model) {
    const std::size_t ny = model.n_y();
    DPStage s{std::vector<double>((model.n_x() + 1) * ny), std::vector<double>((model.n_x() + 1) * ny, 0.0)};
    const double a = model.terminal_coefficient();
    for (std::size_t i = 0; i <= model.n_x(); ++i) {
        for (std::size_t j = 0; j < ny; ++j) s.value[i * ny + j] = a * model.x(i) * model.x(i);
    }
    return s;
}

/// One Bellman update. Ties go to the smallest participation rate.
inline DPStage bellman(const DPModel& model, const DPStage& prev) {
    const std::size_t ny = model.n_y();
    const std::size_t nx = model.n_x();
    const double kappa = model.config().kappa;
    DPStage s{std::vector<double>((nx + 1) * ny, 0.0), std::vector<double>((nx + 1) * ny, 0.0)};
    for (std::size_t i = 1; i <= nx; ++i) {
        const double lam = inventory_risk(model.config().risk, model.x(i));
        const std::size_t m_max = std::min(i, model.n_alpha());
        for (std::size_t j = 0; j < ny; ++j) {
            double best = std::numeric_limits<double>::infinity();
            double best_a = 0.0;
            for (std::size_t m = 1; m <= m_max; ++m) {
                const double a = model.alpha(m);
                const double* p = model.row(j, m);
                const double* next = prev.value.data() + (i - m) * ny;
                double ev = 0.0;
                for (std::size_t k = 0; k < ny; ++k) ev += p[k] * next[k];
                const double total = a * a + kappa * model.y(j) * model.y(j) + lam + ev;
                if (m == 1 || total < best - 1e-14 * std::abs(best)) {
                    best = total;
                    best_a = a;
                }
            }
            s.value[i * ny + j] = best;
            s.policy[i * ny + j] = best_a;
        }
    }
    return s;
}

inline double sup_gap(const DPStage& a, const DPStage& b) {
    double g = 0.0;
    for (std::size_t i = 0; i < a.value.size(); ++i) g = std::max(g, std::abs(a.value[i] - b.value[i]));
    return g;
}

}  // namespace detail

/// v^(0) = H and t_max backward steps; every stage is kept.
inline ValueTable value_iteration(const DPModel& model, std::size_t t_max) {
    if (t_max < 1) throw DomainError("value_iteration: need at least one stage");
    ValueTable vt;
    vt.n_x = model.n_x();
    vt.n_y = model.n_y();
    vt.stages.push_back(detail::terminal_stage(model));
    for (std::size_t t = 1; t <= t_max; ++t) {
        vt.stages.push_back(detail::bellman(model, vt.stages.back()));
        vt.gaps.push_back(detail::sup_gap(vt.stages[t], vt.stages[t - 1]));
    }
    vt.converged = vt.gaps.back() < 1e-12;
    return vt;
}

/// Iterates until the sup-norm change drops below tol or t_cap stages; keeps
/// only the final stage.
inline ValueTable stationary_value(const DPModel& model, double tol = 1e-6, std::size_t t_cap = 500) {
    if (!(tol > 0.0)) throw DomainError("stationary_value: tol must be > 0");
    ValueTable vt;
    vt.n_x = model.n_x();
    vt.n_y = model.n_y();
    DPStage cur = detail::terminal_stage(model);
    for (std::size_t t = 1; t <= t_cap; ++t) {
        DPStage next = detail::bellman(model, cur);
        vt.gaps.push_back(detail::sup_gap(next, cur));
        cur = std::move(next);
        if (vt.gaps.back() < tol) {
            vt.converged = true;
            break;
        }
    }
    vt.stages.push_back(std::move(cur));
    return vt;
}

}  // namespace flowexec
