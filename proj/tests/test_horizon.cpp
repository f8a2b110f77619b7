#include <gtest/gtest.h>

#include <cmath>

#include "flowexec/horizon.hpp"
#include "flowexec/ou_flow.hpp"
#include "oracles.hpp"

using namespace flowexec;

TEST(HorizonSearch, ZeroKappaMatchesSquareRootRule) {
    FlowParams p;
    p.kappa = 0.0;
    const HorizonPlanner ml(HorizonFamily::MyopicML, p, ConstantRisk{0.1});
    const auto res = ml.optimize(3.0, 0.0);
    EXPECT_NEAR(res.t_star, 3.0 / std::sqrt(0.1), 1e-5);
    EXPECT_NEAR(res.t_star, 9.4868, 1e-4);
    EXPECT_NEAR(res.value_at_star, 2.0 * 3.0 * std::sqrt(0.1), 1e-9);
    EXPECT_NEAR(ml.receding_rate(3.0, 0.4), std::sqrt(0.1), 1e-5);

    const HorizonPlanner dl(HorizonFamily::DynamicDL, p, ConstantRisk{0.1});
    EXPECT_NEAR(dl.optimize(3.0, 0.0).t_star, 3.0 / std::sqrt(0.1), 1e-4);
}

TEST(HorizonSearch, UpperBoundIsPastTheMinimum) {
    FlowParams p;
    for (HorizonFamily fam : {HorizonFamily::MyopicML, HorizonFamily::DynamicDL}) {
        const HorizonPlanner planner(fam, p, ConstantRisk{0.1});
        for (double y : {-0.5, 0.0, 0.5}) {
            auto fn = [&](double T) { return planner.value(T, 3.0, y); };
            const double t_bar = find_t_bar(fn, 1.0);
            ASSERT_TRUE(std::isfinite(t_bar));
            for (int k = 1; k <= 10; ++k) {
                const double T = t_bar * (1.0 + 0.2 * k);
                if (T + 1e-3 > 40.0) break;
                EXPECT_GT(fn(T + 1e-3), fn(T)) << to_string(fam) << " y=" << y << " T=" << T;
            }
            const auto res = planner.optimize(3.0, y);
            EXPECT_LE(res.t_star, t_bar);
            for (double T = 0.05; T < t_bar; T += 0.05) EXPECT_GE(fn(T), res.value_at_star - 1e-12);
        }
    }
}

TEST(HorizonSearch, NoRiskNoKappaIsUnbounded) {
    FlowParams p;
    p.kappa = 0.0;
    const HorizonPlanner planner(HorizonFamily::MyopicML, p, NoRisk{});
    EXPECT_THROW(planner.optimize(3.0, 0.0), SearchError);
}

TEST(HorizonSearch, NeverWorseThanGrid) {
    // Two basins of different depth.
    auto fn = [](double T) { return std::cos(3.0 * T) + 0.1 * T; };
    const auto res = optimize_T(fn, 10.0);
    const double width = (10.0 - kHorizonFloor) / 63.0;
    for (int i = 0; i < 64; ++i) EXPECT_LE(res.value_at_star, fn(kHorizonFloor + width * i));
    EXPECT_NEAR(res.t_star, (std::numbers::pi - std::asin(0.1 / 3.0)) / 3.0, 1e-4);
}

TEST(HorizonSearch, FloorReturnedForMonotoneIncrease) {
    auto fn = [](double T) { return T; };
    const auto res = optimize_T(fn, 5.0);
    EXPECT_NEAR(res.t_star, kHorizonFloor, 1e-5);
    EXPECT_THROW(optimize_T(fn, 5.0, 0.0), DomainError);
    EXPECT_THROW(find_t_bar(fn, -1.0), DomainError);
}

TEST(HorizonSearch, MyopicValueMatchesModule) {
    FlowParams p;
    const HorizonPlanner ml(HorizonFamily::MyopicML, p, ConstantRisk{0.1});
    for (double T : {0.3, 2.0, 7.5}) {
        for (double y : {-0.4, 0.0, 0.9}) {
            EXPECT_NEAR(ml.value(T, 3.0, y), myopic_value(ConstantRisk{0.1}, T, 3.0, y, p),
                        1e-12 * ml.value(T, 3.0, y));
        }
    }
}

TEST(HorizonSearch, SellPressureShortensHorizon) {
    FlowParams p;
    const HorizonPlanner dl(HorizonFamily::DynamicDL, p, ConstantRisk{0.1});
    EXPECT_LT(dl.optimize(3.0, -0.5).t_star, dl.optimize(3.0, 0.0).t_star);
}

TEST(HorizonSearch, DynamicValueBelowMyopic) {
    FlowParams p;
    const HorizonPlanner dl(HorizonFamily::DynamicDL, p, ConstantRisk{0.1});
    const HorizonPlanner ml(HorizonFamily::MyopicML, p, ConstantRisk{0.1});
    for (double T : {0.5, 3.0, 8.0}) EXPECT_LE(dl.value(T, 3.0, 0.2), ml.value(T, 3.0, 0.2) + 1e-9);
}

TEST(HorizonSearch, FamilyRiskMismatchRejected) {
    FlowParams p;
    EXPECT_THROW(HorizonPlanner(HorizonFamily::MyopicML, p, QuadraticRisk{0.1}), DomainError);
    EXPECT_THROW(HorizonPlanner(HorizonFamily::DynamicDL, p, QuadraticRisk{0.1}), DomainError);
    EXPECT_THROW(HorizonPlanner(HorizonFamily::DynamicDH, p, ConstantRisk{0.1}), DomainError);
    EXPECT_THROW(receding_step(0.0, 0.0, HorizonFamily::MyopicML, p, ConstantRisk{0.1}), DomainError);
}

TEST(HorizonSearch, QuadraticRiskFamilyRuns) {
    FlowParams p;
    const HorizonPlanner dh(HorizonFamily::DynamicDH, p, QuadraticRisk{0.1});
    const double a = receding_step(3.0, 0.0, dh);
    EXPECT_GT(a, 0.0);
    EXPECT_TRUE(std::isfinite(a));
}

TEST(RebalanceSchedule, Validation) {
    EXPECT_THROW(RebalanceSchedule::inventory_fractions(0), DomainError);
    RebalanceSchedule s = RebalanceSchedule::every(-1.0);
    EXPECT_THROW(s.validate(), DomainError);
    EXPECT_NO_THROW(RebalanceSchedule::never().validate());
}

TEST(EloHorizon, NoiselessStationaryPoint) {
    FlowParams p;
    p.sigma = 1e-12;
    p.eta = 0.0;
    const double y = 1.0, c = 0.01;
    const auto res = elo_static_horizon(3.0, y, c, p);
    // d/dT [y e^{-beta T} + c sqrt(T)] = 0, by bisection on the interior root.
    auto g = [&](double T) { return -p.beta * y * std::exp(-p.beta * T) + c / (2.0 * std::sqrt(T)); };
    double lo = 1.0, hi = 400.0;
    ASSERT_LT(g(lo), 0.0);
    ASSERT_GT(g(hi), 0.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(res.t_star, lo, 1e-3);
}

TEST(EloHorizon, ObjectiveMatchesMonteCarlo) {
    FlowParams p;
    const double x = 3.0, c = 0.1;
    const auto res = elo_static_horizon(x, 0.0, c, p);
    const double T = res.t_star;
    const double phi = p.eta * x / T;
    const int n = 20000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double yT = simulate_path(p, 0.0, [phi](double, double) { return phi; }, 0.005, T, 3, i).values.back();
        s1 += std::abs(yT);
        s2 += yT * yT;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean + c * std::sqrt(T), res.value_at_star, 3.0 * se + 1e-3);
}

TEST(EloHorizon, RejectsBadInput) {
    FlowParams p;
    EXPECT_THROW(elo_static_horizon(0.0, 0.0, 0.1, p), DomainError);
    EXPECT_THROW(elo_static_horizon(3.0, 0.0, 0.0, p), DomainError);
}
