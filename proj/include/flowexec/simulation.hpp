#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "flowexec/core.hpp"
#include "flowexec/csv.hpp"
#include "flowexec/hjb_solver.hpp"
#include "flowexec/horizon.hpp"
#include "flowexec/numerics.hpp"
#include "flowexec/ou_flow.hpp"
#include "flowexec/rng.hpp"

namespace flowexec {

enum class StrategyKind {
    FDFeedback,   // alpha* from the indefinite-horizon value surface
    RecedingDL,   // T* re-optimised on the dynamic fixed-horizon value
    RecedingML,   // T* re-optimised on the straight-line value
    TwoStageML,   // straight line, horizon recomputed once at x0 / 2
    StaticDL,     // dynamic fixed-horizon feedback with T* from t = 0
    StaticML,     // straight line over T* from t = 0
    MyopicMH,     // hyperbolic curve over a given T
    DynamicDH,    // dynamic fixed-horizon feedback, quadratic risk, given T
};

inline std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::FDFeedback: return "fd_feedback";
        case StrategyKind::RecedingDL: return "receding_dl";
        case StrategyKind::RecedingML: return "receding_ml";
        case StrategyKind::TwoStageML: return "two_stage_ml";
        case StrategyKind::StaticDL: return "static_dl";
        case StrategyKind::StaticML: return "static_ml";
        case StrategyKind::MyopicMH: return "myopic_mh";
        case StrategyKind::DynamicDH: return "dynamic_dh";
    }
    return "?";
}

/// A strategy together with whatever it was pre-built from.
struct Strategy {
    StrategyKind kind = StrategyKind::StaticML;
    std::shared_ptr<const ValueSurface> surface;   // FDFeedback
    std::shared_ptr<const HorizonPlanner> planner;  // every other kind except MyopicMH
    double horizon = 0.0;  // fixed T; 0 means "T*(x0, y0)" for the static kinds
    double risk_c = 0.0;   // MyopicMH
    double rebalance_interval = 0.0;  // receding kinds; 0 means every step

    static Strategy fd(std::shared_ptr<const ValueSurface> s) {
        return {StrategyKind::FDFeedback, std::move(s), nullptr};
    }
    static Strategy receding(std::shared_ptr<const HorizonPlanner> p, double interval = 0.0) {
        const auto kind = p->family() == HorizonFamily::MyopicML ? StrategyKind::RecedingML
                                                                  : StrategyKind::RecedingDL;
        return {kind, nullptr, std::move(p), 0.0, 0.0, interval};
    }
    static Strategy two_stage_ml(std::shared_ptr<const HorizonPlanner> p) {
        return {StrategyKind::TwoStageML, nullptr, std::move(p)};
    }
    static Strategy fixed(std::shared_ptr<const HorizonPlanner> p, double horizon = 0.0) {
        StrategyKind kind = StrategyKind::StaticML;
        if (p->family() == HorizonFamily::DynamicDL) kind = StrategyKind::StaticDL;
        if (p->family() == HorizonFamily::DynamicDH) kind = StrategyKind::DynamicDH;
        return {kind, nullptr, std::move(p), horizon};
    }
    static Strategy myopic_mh(double horizon, double c) {
        return {StrategyKind::MyopicMH, nullptr, nullptr, horizon, c};
    }

    bool fixed_horizon() const {
        return kind == StrategyKind::StaticDL || kind == StrategyKind::StaticML ||
               kind == StrategyKind::MyopicMH || kind == StrategyKind::DynamicDH;
    }

    void validate() const {
        auto need_family = [&](HorizonFamily f) {
            if (!planner || planner->family() != f) {
                throw DomainError(to_string(kind) + " needs a " + to_string(f) + " planner");
            }
        };
        switch (kind) {
            case StrategyKind::FDFeedback:
                if (!surface) throw DomainError("fd_feedback needs a value surface");
                break;
            case StrategyKind::RecedingDL:
            case StrategyKind::StaticDL: need_family(HorizonFamily::DynamicDL); break;
            case StrategyKind::RecedingML:
            case StrategyKind::TwoStageML:
            case StrategyKind::StaticML: need_family(HorizonFamily::MyopicML); break;
            case StrategyKind::DynamicDH:
                need_family(HorizonFamily::DynamicDH);
                if (!(horizon > 0.0)) throw DomainError("dynamic_dh needs a horizon > 0");
                break;
            case StrategyKind::MyopicMH:
                if (!(horizon > 0.0) || !(risk_c > 0.0)) {
                    throw DomainError("myopic_mh needs a horizon > 0 and c > 0");
                }
                break;
        }
        if (!(rebalance_interval >= 0.0)) throw DomainError("rebalance interval must be >= 0");
    }

    /// Static kinds with horizon 0 get T*(x0, y0) filled in.
    Strategy resolved(double x0, double y0) const {
        Strategy s = *this;
        if ((kind == StrategyKind::StaticDL || kind == StrategyKind::StaticML) && !(horizon > 0.0)) {
            s.horizon = planner->optimize(x0, y0).t_star;
        }
        return s;
    }
};

struct SimulationOptions {
    double dt = 0.01;
    bool terminal_cost = false;  // kappa Y_{T0}^2 at the end instead of the running kappa Y^2
    double guard_factor = 100.0; // give up at t = guard_factor x0 / alpha_0
    bool record = false;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<double> inventory;
    std::vector<double> rate;
    std::vector<double> imbalance;
    std::vector<double> cost;
    double realized_horizon = 0.0;
};

struct PathOutcome {
    double cost = 0.0;
    double realized_horizon = 0.0;     // T0: liquidation time, or T for fixed-horizon kinds
    double liquidation_time = 0.0;     // time x first reaches 0
    double final_imbalance = 0.0;      // Y at T0
    double final_inventory = 0.0;
    long steps = 0;
    ClampStats clamps;
    Trajectory trajectory;             // filled when options.record
};

namespace detail {

inline double lambda_of(const InventoryRisk& risk, double x) { return inventory_risk(risk, x); }

/// Hyperbolic feedback x sqrt(c) coth(sqrt(c) tau).
inline double mh_feedback(double x, double tau, double c) {
    const double k = std::sqrt(c);
    return x * k / std::tanh(k * tau);
}

}  // namespace detail

/// One path. Left-endpoint cost on alpha^2 + kappa Y^2 + lambda(x); the step that
/// would overshoot sells the remainder in the fraction of dt it needs; a
/// fixed-horizon plan whose remaining time falls within one step sells
/// everything over exactly that time. Fixed-horizon kinds keep accruing
/// kappa Y^2 (and a constant lambda) until T.
inline PathOutcome run_strategy(const Strategy& strategy_in, const FlowParams& params,
                                const InventoryRisk& risk, double x0, double y0,
                                const SimulationOptions& opt, std::uint64_t seed,
                                std::uint64_t path_index = 0) {
    params.validate();
    validate(risk);
    strategy_in.validate();
    if (!(opt.dt > 0.0)) throw DomainError("run_strategy: dt must be > 0");
    if (!(x0 > 0.0)) throw DomainError("run_strategy: x0 must be > 0");
    const Strategy s = strategy_in.resolved(x0, y0);

    PathRng rng(seed, path_index);
    const OuStep full(params, opt.dt);
    PathOutcome out;
    const bool constant_risk = std::holds_alternative<ConstantRisk>(risk);
    const double c_const = constant_risk ? risk_coefficient(risk) : 0.0;

    double t = 0.0, x = x0, y = y0, cost = 0.0;
    // Plan state for planner-based kinds: fixed horizon T_plan set at t_plan.
    double t_plan = 0.0, T_plan = 0.0, next_rebalance = 0.0;
    bool second_stage_done = false;
    double guard_time = 0.0;

    auto record = [&](double alpha) {
        if (!opt.record) return;
        auto& tr = out.trajectory;
        tr.times.push_back(t);
        tr.inventory.push_back(x);
        tr.rate.push_back(alpha);
        tr.imbalance.push_back(y);
        tr.cost.push_back(cost);
    };

    auto plan_rate = [&](double tau) {
        return s.planner->rate(tau, x, y, &out.clamps);
    };

    long k = 0;
    while (x > 0.0) {
        double tau = 0.0;  // remaining time of the current fixed plan, if any
        bool has_plan = true;
        switch (s.kind) {
            case StrategyKind::FDFeedback: has_plan = false; break;
            case StrategyKind::RecedingDL:
            case StrategyKind::RecedingML:
                if (t >= next_rebalance - 1e-12) {
                    t_plan = t;
                    T_plan = s.planner->optimize(x, y).t_star;
                    next_rebalance = t + s.rebalance_interval;
                }
                break;
            case StrategyKind::TwoStageML:
                if (k == 0) {
                    T_plan = s.planner->optimize(x, y).t_star;
                } else if (!second_stage_done && x <= 0.5 * x0) {
                    t_plan = t;
                    T_plan = s.planner->optimize(x, y).t_star;
                    second_stage_done = true;
                }
                break;
            default:
                T_plan = s.horizon;
                break;
        }
        if (has_plan) tau = T_plan - (t - t_plan);

        double alpha = 0.0;
        double h = opt.dt;
        if (has_plan && tau <= opt.dt * (1.0 + 1e-9)) {
            h = std::max(tau, 0.0);
            alpha = h > 0.0 ? x / h : 0.0;
        } else {
            switch (s.kind) {
                case StrategyKind::FDFeedback: {
                    const auto& g = s.surface->grid();
                    alpha = feedback_rate(*s.surface, std::min(x, g.x_max()),
                                          std::clamp(y, g.y_lo, g.y_hi), &out.clamps);
                    break;
                }
                case StrategyKind::MyopicMH: alpha = detail::mh_feedback(x, tau, s.risk_c); break;
                default: alpha = plan_rate(tau); break;
            }
        }
        if (!std::isfinite(alpha) || alpha < 0.0) throw SimulationError("invalid selling rate", k);
        if (k == 0) {
            guard_time = alpha > 0.0 ? opt.guard_factor * x0 / alpha : opt.guard_factor * 1e4 * opt.dt;
        }
        if (h <= 0.0) {
            x = 0.0;
            break;
        }
        if (alpha * h >= x) h = x / alpha;

        record(alpha);
        const double running = alpha * alpha + (opt.terminal_cost ? 0.0 : params.kappa * y * y) +
                               detail::lambda_of(risk, x);
        cost += running * h;
        const double z = rng.normal();
        const double y_next = (h == opt.dt ? full : OuStep(params, h)).advance(y, z) -
                              params.eta * alpha * h;
        x = (alpha * h >= x) ? 0.0 : x - alpha * h;
        y = y_next;
        t += h;
        ++k;
        if (!std::isfinite(y) || !std::isfinite(cost)) throw SimulationError("non-finite state", k);
        if (x > 0.0 && t > guard_time) {
            throw SimulationError("strategy did not liquidate by t = " + std::to_string(guard_time), k);
        }
    }
    out.liquidation_time = t;
    record(0.0);

    // Fixed-horizon accounting: the flow cost runs on to T after liquidation.
    if (s.fixed_horizon() && t < s.horizon) {
        while (t < s.horizon - 1e-12) {
            const double h = std::min(opt.dt, s.horizon - t);
            cost += ((opt.terminal_cost ? 0.0 : params.kappa * y * y) + c_const) * h;
            const double z = rng.normal();
            y = (h == opt.dt ? full : OuStep(params, h)).advance(y, z);
            t += h;
            ++k;
            record(0.0);
        }
    }
    if (opt.terminal_cost) cost += params.kappa * y * y;

    out.cost = cost;
    out.realized_horizon = t;
    out.final_imbalance = y;
    out.final_inventory = x;
    out.steps = k;
    out.trajectory.realized_horizon = t;
    return out;
}

// ---------------------------------------------------------------------------

struct CostStats {
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
    double mean_T0 = 0.0;
    std::size_t n_paths = 0;
    double se = 0.0;
};

inline CostStats summarize(const std::vector<double>& costs, const std::vector<double>& horizons) {
    if (costs.empty() || costs.size() != horizons.size()) throw DomainError("summarize: bad sample");
    CostStats st;
    st.n_paths = costs.size();
    const double n = static_cast<double>(st.n_paths);
    for (double c : costs) st.mean += c;  // path-index order
    st.mean /= n;
    double ss = 0.0;
    for (double c : costs) ss += (c - st.mean) * (c - st.mean);
    st.sd = st.n_paths > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    st.se = st.sd / std::sqrt(n);
    for (double h : horizons) st.mean_T0 += h;
    st.mean_T0 /= n;
    std::vector<double> sorted = costs;
    std::sort(sorted.begin(), sorted.end());
    st.q05 = numerics::quantile_sorted(sorted, 0.05);
    st.q95 = numerics::quantile_sorted(sorted, 0.95);
    return st;
}

struct MonteCarloResult {
    std::string label;
    CostStats stats;
    std::vector<double> costs;
    std::vector<double> horizons;
    std::vector<double> final_imbalance;
    ClampStats clamps;
};

/// Mean and standard error of the per-path difference a - b (same path indices).
struct PairedDifference {
    double mean = 0.0;
    double se = 0.0;
};

inline PairedDifference paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw DomainError("paired_difference: bad samples");
    const double n = static_cast<double>(a.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m += a[i] - b[i];
    m /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - m) * (a[i] - b[i] - m);
    return {m, std::sqrt(ss / (n - 1.0) / n)};
}

/// n_paths independent runs; path i always uses Brownian stream (seed, i), so two
/// strategies run with the same seed see common random numbers. Results are
/// stored by path index, so statistics do not depend on `threads`.
inline MonteCarloResult monte_carlo(const Strategy& strategy, const FlowParams& params,
                                    const InventoryRisk& risk, double x0, double y0,
                                    const SimulationOptions& opt, std::size_t n_paths,
                                    std::uint64_t seed, unsigned threads = 1) {
    if (n_paths < 100) throw DomainError("monte_carlo: need at least 100 paths");
    const Strategy s = strategy.resolved(x0, y0);
    SimulationOptions o = opt;
    o.record = false;
    MonteCarloResult res;
    res.label = to_string(s.kind);
    res.costs.resize(n_paths);
    res.horizons.resize(n_paths);
    res.final_imbalance.resize(n_paths);
    std::vector<ClampStats> clamps(n_paths);

    auto work = [&](std::size_t i) {
        PathOutcome p = run_strategy(s, params, risk, x0, y0, o, seed, i);
        res.costs[i] = p.cost;
        res.horizons[i] = p.realized_horizon;
        res.final_imbalance[i] = p.final_imbalance;
        clamps[i] = p.clamps;
    };
    threads = std::max(1u, threads);
    if (threads == 1) {
        for (std::size_t i = 0; i < n_paths; ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                (void)w;
                for (std::size_t i = next++; i < n_paths && !failed; i = next++) {
                    try {
                        work(i);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }
    for (const auto& c : clamps) res.clamps += c;
    res.stats = summarize(res.costs, res.horizons);
    return res;
}

// ---------------------------------------------------------------------------
// Experiments

struct Table1Setup {
    FlowParams params;
    double c = 0.1;  // constant inventory risk
    double x0 = 3.0;
    double y0 = 0.0;
    std::size_t n_paths = 20000;
    std::uint64_t seed = 7;
    SimulationOptions options;
    unsigned threads = 1;
    std::size_t fd_ny = 400;
};

struct Table1Result {
    std::vector<MonteCarloResult> rows;  // fd, receding_dl, receding_ml, two_stage_ml, static_dl, static_ml
    double fd_value = 0.0;               // v(x0, y0) from the surface
    double static_t_star_dl = 0.0;
    double static_t_star_ml = 0.0;

    const MonteCarloResult& row(StrategyKind k) const {
        for (const auto& r : rows) {
            if (r.label == to_string(k)) return r;
        }
        throw DomainError("table1: no row for " + to_string(k));
    }

    void write_csv(std::ostream& out) const {
        CsvWriter csv(out, {"strategy", "mean", "sd", "q05", "q95", "mean_T0", "n_paths", "se"});
        for (const auto& r : rows) {
            const auto& s = r.stats;
            csv.row(r.label, s.mean, s.sd, s.q05, s.q95, s.mean_T0, s.n_paths, s.se);
        }
    }
};

inline Table1Result table1(const Table1Setup& setup) {
    const InventoryRisk risk = ConstantRisk{setup.c};
    Table1Result out;
    auto surface = std::make_shared<const ValueSurface>(
        solve_indefinite(setup.params, risk, default_grid(setup.params, risk, setup.x0, setup.fd_ny)));
    out.fd_value = surface->value(setup.x0, setup.y0);
    auto dl = std::make_shared<const HorizonPlanner>(HorizonFamily::DynamicDL, setup.params, risk);
    auto ml = std::make_shared<const HorizonPlanner>(HorizonFamily::MyopicML, setup.params, risk);
    const Strategy static_dl = Strategy::fixed(dl).resolved(setup.x0, setup.y0);
    const Strategy static_ml = Strategy::fixed(ml).resolved(setup.x0, setup.y0);
    out.static_t_star_dl = static_dl.horizon;
    out.static_t_star_ml = static_ml.horizon;
    const Strategy order[] = {Strategy::fd(surface), Strategy::receding(dl), Strategy::receding(ml),
                              Strategy::two_stage_ml(ml), static_dl, static_ml};
    for (const auto& s : order) {
        out.rows.push_back(monte_carlo(s, setup.params, risk, setup.x0, setup.y0, setup.options,
                                       setup.n_paths, setup.seed, setup.threads));
    }
    return out;
}

struct StaticsRow {
    double kappa, eta, y, rate, t_star;
};

/// Receding-horizon DL rate alpha(T*(x, y), x, y) over a kappa x eta x y grid.
inline std::vector<StaticsRow> comparative_statics(const FlowParams& base, double c, double x,
                                                   const std::vector<double>& kappas,
                                                   const std::vector<double>& etas,
                                                   const std::vector<double>& ys) {
    std::vector<StaticsRow> rows;
    for (double kappa : kappas) {
        for (double eta : etas) {
            FlowParams p = base;
            p.kappa = kappa;
            p.eta = eta;
            const HorizonPlanner planner(HorizonFamily::DynamicDL, p, ConstantRisk{c});
            for (double y : ys) {
                const auto h = planner.optimize(x, y);
                rows.push_back({kappa, eta, y, planner.rate(h.t_star, x, y), h.t_star});
            }
        }
    }
    return rows;
}

inline void write_statics_csv(std::ostream& out, const std::vector<StaticsRow>& rows) {
    CsvWriter csv(out, {"kappa", "eta", "y", "rate", "t_star"});
    for (const auto& r : rows) csv.row(r.kappa, r.eta, r.y, r.rate, r.t_star);
}

struct HorizonSample {
    double y0;
    double static_t_star;
    std::vector<double> horizons;
    std::vector<double> final_imbalance;
    std::vector<double> costs;

    double median() const {
        std::vector<double> s = horizons;
        std::sort(s.begin(), s.end());
        return numerics::quantile_sorted(s, 0.5);
    }
};

/// Realised T0 of the receding DL strategy for each starting imbalance.
inline std::vector<HorizonSample> horizon_distribution(std::shared_ptr<const HorizonPlanner> planner,
                                                       const InventoryRisk& risk, double x0,
                                                       const std::vector<double>& y0s,
                                                       const SimulationOptions& opt,
                                                       std::size_t n_paths, std::uint64_t seed,
                                                       unsigned threads = 1) {
    std::vector<HorizonSample> out;
    const Strategy s = Strategy::receding(planner);
    for (double y0 : y0s) {
        auto mc = monte_carlo(s, planner->params(), risk, x0, y0, opt, n_paths, seed, threads);
        out.push_back({y0, planner->optimize(x0, y0).t_star, std::move(mc.horizons),
                       std::move(mc.final_imbalance), std::move(mc.costs)});
    }
    return out;
}

inline void write_horizon_histogram(std::ostream& out, const std::vector<HorizonSample>& samples,
                                    int bins = 40) {
    CsvWriter csv(out, {"y0", "bin_lo", "bin_hi", "count", "static_t_star"});
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : samples) {
        for (double h : s.horizons) {
            lo = std::min(lo, h);
            hi = std::max(hi, h);
        }
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const double w = (hi - lo) / bins;
    for (const auto& s : samples) {
        std::vector<long> counts(bins, 0);
        for (double h : s.horizons) counts[std::min(bins - 1, static_cast<int>((h - lo) / w))]++;
        for (int b = 0; b < bins; ++b) csv.row(s.y0, lo + w * b, lo + w * (b + 1), counts[b], s.static_t_star);
    }
}

inline void write_horizon_scatter(std::ostream& out, const std::vector<HorizonSample>& samples) {
    CsvWriter csv(out, {"y0", "path", "T0", "Y_T0", "cost"});
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < s.horizons.size(); ++i) {
            csv.row(s.y0, i, s.horizons[i], s.final_imbalance[i], s.costs[i]);
        }
    }
}

inline void write_trajectory_csv(CsvWriter& csv, const std::string& label, std::size_t path,
                                 const Trajectory& tr) {
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        csv.row(label, path, tr.times[k], tr.inventory[k], tr.rate[k], tr.imbalance[k], tr.cost[k]);
    }
}

inline CsvWriter trajectory_writer(std::ostream& out) {
    return CsvWriter(out, {"strategy", "path", "t", "x", "alpha", "Y", "cost"});
}

}  // namespace flowexec
