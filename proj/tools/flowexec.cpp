// flowexec: command-line driver for the execution models. Every subcommand
// writes CSVs plus a <command>_manifest.json into the output directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowexec/core.hpp"
#include "flowexec/discrete_dp.hpp"
#include "flowexec/flow_metrics.hpp"
#include "flowexec/hjb_solver.hpp"
#include "flowexec/horizon.hpp"
#include "flowexec/myopic.hpp"
#include "flowexec/riccati.hpp"
#include "flowexec/simulation.hpp"

namespace fs = std::filesystem;
using namespace flowexec;
using json = nlohmann::ordered_json;

namespace {

enum Exit : int {
    kOk = 0,
    kUsage = 2,
    kConfig = 3,
    kDomain = 4,
    kSolver = 5,
    kSearch = 6,
    kSimulation = 7,
    kData = 8,
    kIo = 9,
    kInternal = 10,
};

struct ConfigInvalid : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    FlowParams params;
    std::string risk = "constant";
    double c = 0.1;
    std::string out_dir;
    std::uint64_t seed = 7;
    unsigned threads = 1;
};

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    std::ofstream open(const std::string& name, bool binary = false) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoFailure("cannot create output directory '" + dir_.string() + "': " + ec.message());
        const fs::path p = dir_ / name;
        std::ofstream f(p, binary ? std::ios::binary : std::ios::out);
        if (!f) throw IoFailure("cannot open '" + p.string() + "' for writing");
        files_.push_back(name);
        return f;
    }

    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

json option_values(const CLI::App* app) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        std::vector<std::string> vals = opt->count() ? opt->reduced_results() : std::vector<std::string>{};
        if (vals.empty()) {
            if (opt->get_default_str().empty()) continue;
            vals = {opt->get_default_str()};
        }
        if (vals.size() == 1) j[name] = vals.front();
        else j[name] = vals;
    }
    return j;
}

void write_manifest(Outputs& out, const CLI::App& root, const CLI::App* sub, const Common& common,
                    json extra = json::object()) {
    json m;
    m["command"] = sub->get_name();
    m["version"] = kVersion;
    m["seed"] = common.seed;
    m["config"] = option_values(&root);
    m["config"].update(option_values(sub));
    for (const CLI::App* s : sub->get_subcommands({})) {
        if (s->parsed()) m["config"]["mode"] = s->get_name();
    }
    m["outputs"] = out.files();
    if (!extra.empty()) m["results"] = extra;
    auto f = out.open(sub->get_name() + "_manifest.json");
    f << m.dump(2) << '\n';
}

InventoryRisk risk_of(const Common& c) {
    try {
        return make_risk(c.risk, c.c);
    } catch (const DomainError& e) {
        throw ConfigInvalid(e.what());
    }
}

void check(const Common& c) {
    try {
        c.params.validate();
        validate(risk_of(c));
    } catch (const DomainError& e) {
        throw ConfigInvalid(e.what());
    }
    if (auto w = c.params.plausibility_warning()) std::cerr << "warning: " << *w << '\n';
}

StrategyKind parse_strategy(const std::string& s) {
    static const std::map<std::string, StrategyKind> names = {
        {"fd", StrategyKind::FDFeedback},          {"receding-dl", StrategyKind::RecedingDL},
        {"receding-ml", StrategyKind::RecedingML}, {"two-stage-ml", StrategyKind::TwoStageML},
        {"static-dl", StrategyKind::StaticDL},     {"static-ml", StrategyKind::StaticML},
        {"myopic-mh", StrategyKind::MyopicMH},     {"dynamic-dh", StrategyKind::DynamicDH},
    };
    auto it = names.find(s);
    if (it == names.end()) throw ConfigInvalid("unknown strategy '" + s + "'");
    return it->second;
}

HorizonFamily parse_family(const std::string& s) {
    if (s == "ml") return HorizonFamily::MyopicML;
    if (s == "dl") return HorizonFamily::DynamicDL;
    if (s == "dh") return HorizonFamily::DynamicDH;
    throw ConfigInvalid("unknown family '" + s + "' (ml, dl, dh)");
}

std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw ConfigInvalid("need at least one grid point");
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal execution with order-flow imbalance"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    Common common;
    const char* env_out = std::getenv("FLOWEXEC_OUT");
    common.out_dir = env_out && *env_out ? env_out : "flowexec_out";
    app.add_option("--beta", common.params.beta, "Mean reversion of the imbalance")->capture_default_str();
    app.add_option("--sigma", common.params.sigma, "Imbalance volatility")->capture_default_str();
    app.add_option("--kappa", common.params.kappa, "Informational cost weight")->capture_default_str();
    app.add_option("--eta", common.params.eta, "Leakage per unit selling rate")->capture_default_str();
    app.add_option("--risk", common.risk, "Inventory risk: none, quadratic, linear, constant")
        ->capture_default_str();
    app.add_option("--c", common.c, "Inventory risk coefficient")->capture_default_str();
    app.add_option("--out", common.out_dir, "Output directory (default: $FLOWEXEC_OUT or flowexec_out)")
        ->capture_default_str();
    app.add_option("--seed", common.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", common.threads, "Worker threads for Monte Carlo")->capture_default_str();

    // myopic
    auto* myopic = app.add_subcommand("myopic", "Deterministic liquidation curves (ML, MH, MQ)");
    double my_x = 3.0, my_T = 3.0, my_c = 2.0;
    int my_samples = 301;
    myopic->add_option("--x", my_x, "Initial inventory")->capture_default_str();
    myopic->add_option("--T", my_T, "Horizon")->capture_default_str();
    myopic->add_option("--curve-c", my_c, "Risk coefficient for the MH and MQ curves")->capture_default_str();
    myopic->add_option("--samples", my_samples, "Samples per curve")->capture_default_str();

    // riccati
    auto* riccati = app.add_subcommand("riccati", "Coefficient ODE system for the dynamic fixed-horizon value");
    double ric_tau = 10.0, ric_eps = 1e-3, ric_step = 1e-4;
    int ric_stride = 100;
    riccati->add_option("--tau-max", ric_tau, "Largest time-to-go")->capture_default_str();
    riccati->add_option("--epsilon", ric_eps, "Boundary-layer width")->capture_default_str();
    riccati->add_option("--step", ric_step, "RK4 step")->capture_default_str();
    riccati->add_option("--stride", ric_stride, "Write every stride-th node")->capture_default_str();

    // hjb
    auto* hjb = app.add_subcommand("hjb", "Finite-difference solution of the indefinite-horizon value");
    double hjb_x = 3.0, hjb_dx = 0.0, hjb_nsd = 5.0;
    std::size_t hjb_ny = 400;
    bool hjb_binary = false;
    hjb->add_option("--x", hjb_x, "Largest inventory")->capture_default_str();
    hjb->add_option("--ny", hjb_ny, "Imbalance steps")->capture_default_str();
    hjb->add_option("--dx", hjb_dx, "Inventory step (0: stability-limited default)")->capture_default_str();
    hjb->add_option("--n-sd", hjb_nsd, "Imbalance half-width in stationary SDs")->capture_default_str();
    hjb->add_flag("--binary", hjb_binary, "Also write the binary surface dump");

    // optimize-horizon
    auto* opt_h = app.add_subcommand("optimize-horizon", "T* and the value curve u(T) for a strategy family");
    std::string oh_family = "dl";
    double oh_x = 3.0, oh_tmax = 8.0;
    std::vector<double> oh_y = {-0.5, 0.0, 0.5};
    int oh_points = 200;
    bool oh_elo = false;
    opt_h->add_option("--family", oh_family, "ml, dl or dh")->capture_default_str();
    opt_h->add_option("--x", oh_x, "Inventory")->capture_default_str();
    opt_h->add_option("--y", oh_y, "Imbalance values")->capture_default_str();
    opt_h->add_option("--t-max", oh_tmax, "Right end of the value curve")->capture_default_str();
    opt_h->add_option("--points", oh_points, "Points on the value curve")->capture_default_str();
    opt_h->add_flag("--elo", oh_elo, "Use the E|Y_T| + c sqrt(T) objective instead");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo of one strategy");
    std::string sim_strategy = "receding-dl";
    double sim_x = 3.0, sim_y = 0.0, sim_dt = 0.01, sim_T = 0.0, sim_interval = 0.0;
    std::size_t sim_paths = 2000, sim_record = 5, sim_ny = 400;
    bool sim_terminal = false;
    simulate->add_option("--strategy", sim_strategy,
                         "fd, receding-dl, receding-ml, two-stage-ml, static-dl, static-ml, myopic-mh, dynamic-dh")
        ->capture_default_str();
    simulate->add_option("--x", sim_x, "Initial inventory")->capture_default_str();
    simulate->add_option("--y", sim_y, "Initial imbalance")->capture_default_str();
    simulate->add_option("--dt", sim_dt, "Time step")->capture_default_str();
    simulate->add_option("--paths", sim_paths, "Number of paths")->capture_default_str();
    simulate->add_option("--horizon", sim_T, "Fixed horizon (0: T* at t = 0)")->capture_default_str();
    simulate->add_option("--rebalance", sim_interval, "Receding re-optimisation interval (0: every step)")
        ->capture_default_str();
    simulate->add_option("--record", sim_record, "Paths written to trajectories.csv")->capture_default_str();
    simulate->add_option("--ny", sim_ny, "Imbalance steps for the fd surface")->capture_default_str();
    simulate->add_flag("--terminal-cost", sim_terminal, "Charge kappa Y^2 at T0 instead of along the path");

    // table1
    auto* tab = app.add_subcommand("table1", "Six-strategy comparison with common random numbers");
    Table1Setup t1;
    tab->add_option("--paths", t1.n_paths, "Paths per strategy")->capture_default_str();
    tab->add_option("--x", t1.x0, "Initial inventory")->capture_default_str();
    tab->add_option("--y", t1.y0, "Initial imbalance")->capture_default_str();
    tab->add_option("--dt", t1.options.dt, "Time step")->capture_default_str();
    tab->add_option("--ny", t1.fd_ny, "Imbalance steps for the fd surface")->capture_default_str();

    // statics
    auto* statics = app.add_subcommand("statics", "Receding DL rate across kappa, eta and y");
    std::vector<double> st_kappa = {0.0, 5.0, 10.0, 20.0}, st_eta = {0.0, 0.075, 0.15};
    double st_x = 3.0, st_ylo = -1.0, st_yhi = 1.0;
    int st_ny = 41;
    statics->add_option("--kappas", st_kappa, "kappa values")->capture_default_str();
    statics->add_option("--etas", st_eta, "eta values")->capture_default_str();
    statics->add_option("--x", st_x, "Inventory")->capture_default_str();
    statics->add_option("--y-min", st_ylo, "Smallest imbalance")->capture_default_str();
    statics->add_option("--y-max", st_yhi, "Largest imbalance")->capture_default_str();
    statics->add_option("--y-points", st_ny, "Imbalance points")->capture_default_str();

    // horizons
    auto* horizons = app.add_subcommand("horizons", "Distribution of the realised horizon under receding DL");
    std::vector<double> hz_y0 = {-0.25, 0.0, 0.25};
    std::size_t hz_paths = 2000;
    double hz_x = 3.0, hz_dt = 0.01;
    int hz_bins = 40;
    horizons->add_option("--y0", hz_y0, "Initial imbalances")->capture_default_str();
    horizons->add_option("--paths", hz_paths, "Paths per initial imbalance")->capture_default_str();
    horizons->add_option("--x", hz_x, "Initial inventory")->capture_default_str();
    horizons->add_option("--dt", hz_dt, "Time step")->capture_default_str();
    horizons->add_option("--bins", hz_bins, "Histogram bins")->capture_default_str();

    // dp
    auto* dp = app.add_subcommand("dp", "Volume-bucket dynamic programme");
    DPConfig dpc;
    double dp_tol = 1e-6;
    std::size_t dp_cap = 500;
    dp->add_option("--ny", dpc.n_y, "Imbalance levels")->capture_default_str();
    dp->add_option("--nx", dpc.n_x, "Inventory steps")->capture_default_str();
    dp->add_option("--n-alpha", dpc.n_alpha, "Participation levels")->capture_default_str();
    dp->add_option("--bucket-volume", dpc.bucket_volume, "Bucket volume V")->capture_default_str();
    dp->add_option("--psi-exponent", dpc.psi_exponent, "psi(alpha) = alpha^p")->capture_default_str();
    dp->add_option("--terminal", dpc.terminal_coefficient, "A in H(x) = A x^2 (0: 1/V^2)")->capture_default_str();
    dp->add_option("--noise-points", dpc.noise_points, "Quantile nodes for the noise")->capture_default_str();
    dp->add_option("--tol", dp_tol, "Sup-norm stopping tolerance")->capture_default_str();
    dp->add_option("--t-cap", dp_cap, "Stage cap")->capture_default_str();

    // flow
    auto* flow = app.add_subcommand("flow", "Empirical imbalance from a trade file");
    flow->require_subcommand(1);
    std::string fl_input;
    bool fl_touch = false;
    flow->add_option("--input", fl_input, "Trade CSV: index,signed_volume[,kind]")->required();
    flow->add_flag("--include-touch", fl_touch, "Count limit orders at the touch as flow");
    auto* ewma = flow->add_subcommand("ewma", "EWMA imbalance");
    double fl_a = 30.0, fl_daily = 0.0, fl_i0 = 0.0;
    ewma->add_option("--beta-a", fl_a, "a in beta = a / V_daily")->capture_default_str();
    ewma->add_option("--daily-volume", fl_daily, "V_daily (0: total volume of the input)")->capture_default_str();
    ewma->add_option("--i0", fl_i0, "Initial imbalance")->capture_default_str();
    auto* bucket = flow->add_subcommand("bucket", "Bucket imbalance and VPIN");
    double fl_V = 25000.0;
    std::size_t fl_n = 20;
    bucket->add_option("--bucket-volume", fl_V, "Bucket volume V")->capture_default_str();
    bucket->add_option("--window", fl_n, "VPIN window n")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        check(common);
        const InventoryRisk risk = risk_of(common);
        Outputs out(common.out_dir);
        json results = json::object();

        if (sub == myopic) {
            auto f = out.open("myopic.csv");
            CsvWriter csv(f, {"kind", "t", "x_t", "alpha_t"});
            const std::pair<MyopicKind, InventoryRisk> curves[] = {
                {MyopicKind::ML, NoRisk{}}, {MyopicKind::MH, QuadraticRisk{my_c}}, {MyopicKind::MQ, LinearRisk{my_c}}};
            for (const auto& [kind, r] : curves) {
                const auto sol = myopic_solve(r, my_x, my_T);
                for (int k = 0; k < my_samples; ++k) {
                    const double t = my_T * k / (my_samples - 1);
                    csv.row(to_string(kind), t, sol.inventory(t), sol.rate(t));
                }
                results[to_string(kind)] = {{"impact_cost", sol.impact_cost()},
                                            {"effective_horizon", sol.effective_horizon()}};
            }
        } else if (sub == riccati) {
            const auto coef = solve_riccati(common.params, risk, ric_tau, ric_eps, ric_step);
            auto f = out.open("riccati.csv");
            coef.write_csv(f, static_cast<std::size_t>(std::max(1, ric_stride)));
            results["variant"] = to_string(coef.variant());
        } else if (sub == hjb) {
            GridSpec g = default_grid(common.params, risk, hjb_x, hjb_ny, hjb_nsd);
            if (hjb_dx > 0.0) g = GridSpec::make(hjb_x, hjb_dx, g.n_y, g.y_lo, g.y_hi);
            const auto surface = solve_indefinite(common.params, risk, g);
            auto f = out.open("hjb_surface.csv");
            surface.write_csv(f);
            if (hjb_binary) {
                auto b = out.open("hjb_surface.bin", true);
                surface.write_binary(b);
            }
            results["v_at_x_y0"] = surface.value(hjb_x, 0.0);
            results["dx"] = g.dx;
            results["dy"] = g.dy;
            std::cout << "v(" << hjb_x << ", 0) = " << surface.value(hjb_x, 0.0) << '\n';
        } else if (sub == opt_h) {
            auto curve = out.open("value_curve.csv");
            CsvWriter cw(curve, {"y", "T", "u"});
            auto best = out.open("horizon.csv");
            CsvWriter bw(best, {"y", "t_star", "value", "t_bar", "rate"});
            if (oh_elo) {
                for (double y : oh_y) {
                    const auto h = elo_static_horizon(oh_x, y, common.c, common.params);
                    bw.row(y, h.t_star, h.value_at_star, h.t_bar, oh_x / h.t_star);
                }
            } else {
                const HorizonPlanner planner(parse_family(oh_family), common.params, risk,
                                             std::max(40.0, 2.0 * oh_tmax));
                for (double y : oh_y) {
                    for (double T : linspace(oh_tmax / oh_points, oh_tmax, oh_points)) {
                        cw.row(y, T, planner.value(T, oh_x, y));
                    }
                    const auto h = planner.optimize(oh_x, y);
                    bw.row(y, h.t_star, h.value_at_star, h.t_bar, planner.rate(h.t_star, oh_x, y));
                    std::cout << "y = " << y << ": T* = " << h.t_star << ", u = " << h.value_at_star << '\n';
                }
            }
        } else if (sub == simulate) {
            const StrategyKind kind = parse_strategy(sim_strategy);
            Strategy s;
            switch (kind) {
                case StrategyKind::FDFeedback:
                    s = Strategy::fd(std::make_shared<const ValueSurface>(solve_indefinite(
                        common.params, risk, default_grid(common.params, risk, sim_x, sim_ny))));
                    break;
                case StrategyKind::RecedingDL:
                case StrategyKind::StaticDL:
                case StrategyKind::RecedingML:
                case StrategyKind::TwoStageML:
                case StrategyKind::StaticML: {
                    const bool ml = kind == StrategyKind::RecedingML || kind == StrategyKind::TwoStageML ||
                                    kind == StrategyKind::StaticML;
                    auto p = std::make_shared<const HorizonPlanner>(
                        ml ? HorizonFamily::MyopicML : HorizonFamily::DynamicDL, common.params, risk);
                    if (kind == StrategyKind::RecedingDL || kind == StrategyKind::RecedingML) {
                        s = Strategy::receding(p, sim_interval);
                    } else if (kind == StrategyKind::TwoStageML) {
                        s = Strategy::two_stage_ml(p);
                    } else {
                        s = Strategy::fixed(p, sim_T);
                    }
                    break;
                }
                case StrategyKind::DynamicDH:
                    s = Strategy::fixed(std::make_shared<const HorizonPlanner>(
                                            HorizonFamily::DynamicDH, common.params, risk,
                                            std::max(40.0, sim_T + 1.0)),
                                        sim_T);
                    break;
                case StrategyKind::MyopicMH: s = Strategy::myopic_mh(sim_T, common.c); break;
            }
            SimulationOptions o;
            o.dt = sim_dt;
            o.terminal_cost = sim_terminal;
            const auto mc = monte_carlo(s, common.params, risk, sim_x, sim_y, o, sim_paths, common.seed,
                                        common.threads);
            auto f = out.open("simulate.csv");
            CsvWriter csv(f, {"strategy", "mean", "sd", "q05", "q95", "mean_T0", "n_paths", "se"});
            const auto& st = mc.stats;
            csv.row(mc.label, st.mean, st.sd, st.q05, st.q95, st.mean_T0, st.n_paths, st.se);
            auto pf = out.open("paths.csv");
            CsvWriter pcsv(pf, {"path", "cost", "T0", "Y_T0"});
            for (std::size_t i = 0; i < mc.costs.size(); ++i) {
                pcsv.row(i, mc.costs[i], mc.horizons[i], mc.final_imbalance[i]);
            }
            auto tf = out.open("trajectories.csv");
            CsvWriter tcsv = trajectory_writer(tf);
            o.record = true;
            for (std::size_t i = 0; i < std::min(sim_record, sim_paths); ++i) {
                const auto p = run_strategy(s, common.params, risk, sim_x, sim_y, o, common.seed, i);
                write_trajectory_csv(tcsv, mc.label, i, p.trajectory);
            }
            results["mean"] = st.mean;
            results["se"] = st.se;
            results["clamp_frequency"] = mc.clamps.frequency();
            std::cout << mc.label << ": E[J] = " << st.mean << " (se " << st.se << "), E[T0] = " << st.mean_T0
                      << '\n';
        } else if (sub == tab) {
            if (!std::holds_alternative<ConstantRisk>(risk)) {
                throw ConfigInvalid("table1 needs --risk constant");
            }
            t1.params = common.params;
            t1.c = common.c;
            t1.seed = common.seed;
            t1.threads = common.threads;
            const auto res = table1(t1);
            auto f = out.open("table1.csv");
            res.write_csv(f);
            results["fd_value"] = res.fd_value;
            results["static_t_star_dl"] = res.static_t_star_dl;
            results["static_t_star_ml"] = res.static_t_star_ml;
            for (const auto& r : res.rows) {
                std::cout << r.label << ": E[J] = " << r.stats.mean << " (se " << r.stats.se
                          << "), E[T0] = " << r.stats.mean_T0 << '\n';
            }
        } else if (sub == statics) {
            const auto rows = comparative_statics(common.params, common.c, st_x, st_kappa, st_eta,
                                                  linspace(st_ylo, st_yhi, st_ny));
            auto f = out.open("rates.csv");
            write_statics_csv(f, rows);
        } else if (sub == horizons) {
            auto planner = std::make_shared<const HorizonPlanner>(HorizonFamily::DynamicDL, common.params, risk);
            SimulationOptions o;
            o.dt = hz_dt;
            const auto samples = horizon_distribution(planner, risk, hz_x, hz_y0, o, hz_paths, common.seed,
                                                      common.threads);
            auto h = out.open("horizon_hist.csv");
            write_horizon_histogram(h, samples, hz_bins);
            auto sc = out.open("horizon_scatter.csv");
            write_horizon_scatter(sc, samples);
            for (const auto& s : samples) {
                results["median_T0"][CsvWriter::format(s.y0)] = s.median();
                std::cout << "y0 = " << s.y0 << ": median T0 = " << s.median() << ", static T* = "
                          << s.static_t_star << '\n';
            }
        } else if (sub == dp) {
            dpc.beta = common.params.beta;
            dpc.sigma = common.params.sigma;
            dpc.kappa = common.params.kappa;
            dpc.risk = risk;
            const DPModel model(dpc);
            const auto vt = stationary_value(model, dp_tol, dp_cap);
            auto f = out.open("dp_policy.csv");
            vt.write_csv(f, model, vt.last());
            auto g = out.open("dp_gaps.csv");
            CsvWriter gw(g, {"iteration", "gap"});
            for (std::size_t i = 0; i < vt.gaps.size(); ++i) gw.row(i + 1, vt.gaps[i]);
            results["converged"] = vt.converged;
            results["iterations"] = vt.gaps.size();
            std::cout << (vt.converged ? "converged" : "not converged") << " after " << vt.gaps.size()
                      << " iterations, gap " << vt.gaps.back() << '\n';
        } else if (sub == flow) {
            const TradeFilter filter = fl_touch ? TradeFilter::IncludeTouch : TradeFilter::ExecutionOnly;
            if (ewma->parsed()) {
                double daily = fl_daily;
                if (!(daily > 0.0)) {
                    daily = 0.0;
                    ingest_trades(fl_input, filter, [&](const TradeRecord& r) { daily += std::abs(r.signed_volume); });
                    if (!(daily > 0.0)) throw DataError("trades: no volume in '" + fl_input + "'", 0);
                }
                EwmaImbalance e(ewma_beta(fl_a, daily), fl_i0);
                auto f = out.open("imbalance.csv");
                CsvWriter csv(f, {"k", "index", "I"});
                std::size_t k = 0;
                csv.row(k++, -1, e.value());
                ingest_trades(fl_input, filter, [&](const TradeRecord& r) {
                    csv.row(k++, r.index, e.update(r.signed_volume, r.index));
                });
                results["beta"] = e.beta();
                results["records"] = k - 1;
            } else {
                BucketSeries s;
                s.bucket_volume = fl_V;
                BucketAccumulator acc(fl_V);
                ingest_trades(fl_input, filter, [&](const TradeRecord& r) { acc.add(r.signed_volume, r.index, s.buckets); });
                auto f = out.open("buckets.csv");
                write_bucket_csv(f, s, fl_n);
                results["buckets"] = s.size();
            }
        }
        write_manifest(out, app, sub, common, results);
        return kOk;
    } catch (const ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoFailure& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return kDomain;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kSolver;
    } catch (const SearchError& e) {
        std::cerr << "search error: " << e.what() << '\n';
        return kSearch;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error at step " << e.step() << ": " << e.what() << '\n';
        return kSimulation;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    }
}
