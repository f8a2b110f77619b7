#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "flowexec/ou_flow.hpp"
#include "oracles.hpp"

using namespace flowexec;

TEST(Moments, ZeroLeakageMatchesOuFormulas) {
    FlowParams p;
    const auto m = moments(2.0, 0.3, p, ZeroLeakage{});
    EXPECT_NEAR(m.mean, 0.3 * std::exp(-0.1), 1e-15);
    EXPECT_NEAR(m.variance, p.sigma * p.sigma / 0.1 * (1.0 - std::exp(-0.2)), 1e-15);
}

TEST(Moments, PiecewiseAndScheduleAgreeWithQuadrature) {
    FlowParams p;
    PiecewiseLeakage pw{{0.0, 1.0, 2.5}, {0.2, 0.05, 0.0}};
    auto rate = [](double s) { return s < 1.0 ? 0.2 : (s < 2.5 ? 0.05 : 0.0); };
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        auto f = [&](double s) { return std::exp(-p.beta * (t - s)) * rate(s); };
        double ref = 0.0;
        for (auto [a, b] : {std::pair{0.0, 1.0}, {1.0, 2.5}, {2.5, 10.0}}) {
            ref += oracle::gl_integrate(f, std::min(a, t), std::min(b, t));
        }
        EXPECT_NEAR(moments(t, 0.1, p, pw).mean, 0.1 * std::exp(-p.beta * t) - ref, 1e-13);
        ScheduleLeakage smooth{[](double s) { return 0.1 + 0.05 * std::sin(s); }};
        auto g = [&](double s) { return std::exp(-p.beta * (t - s)) * (0.1 + 0.05 * std::sin(s)); };
        EXPECT_NEAR(moments(t, 0.0, p, smooth).mean, -oracle::gl_integrate(g, 0.0, t), 1e-10);
    }
}

TEST(Moments, ConstantLeakageClosedForm) {
    FlowParams p;
    const double phi = 0.075 * 3.0 / 3.4;
    const double t = 3.4;
    const auto m = moments(t, 0.0, p, PiecewiseLeakage{{0.0}, {phi}});
    EXPECT_NEAR(m.mean, -phi * (1.0 - std::exp(-p.beta * t)) / p.beta, 1e-14);
}

TEST(Moments, RejectsBadArguments) {
    FlowParams p;
    EXPECT_THROW(moments(-1.0, 0.0, p, ZeroLeakage{}), DomainError);
    EXPECT_THROW(moments(1.0, 0.0, p, ProportionalLeakage{0.1}), DomainError);
    EXPECT_THROW(moments(1.0, 0.0, p, PiecewiseLeakage{{0.5}, {0.1}}), DomainError);
    FlowParams bad = p;
    bad.beta = 0.0;
    EXPECT_THROW(moments(1.0, 0.0, bad, ZeroLeakage{}), DomainError);
}

TEST(Moments, PlausibilityWarning) {
    FlowParams p;
    EXPECT_FALSE(p.plausibility_warning());
    p.sigma = 1.0;
    EXPECT_TRUE(p.plausibility_warning());
}

TEST(SimulatePath, DeterministicGivenSeed) {
    FlowParams p;
    auto a = simulate_path(p, 0.1, nullptr, 0.01, 1.0, 42, 3);
    auto b = simulate_path(p, 0.1, nullptr, 0.01, 1.0, 42, 3);
    auto c = simulate_path(p, 0.1, nullptr, 0.01, 1.0, 42, 4);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
    ASSERT_EQ(a.times.size(), 101u);
    EXPECT_DOUBLE_EQ(a.times.back(), 1.0);
}

TEST(SimulatePath, LastStepLandsOnHorizon) {
    FlowParams p;
    auto path = simulate_path(p, 0.0, nullptr, 0.3, 1.0, 1);
    ASSERT_EQ(path.times.size(), 5u);
    EXPECT_DOUBLE_EQ(path.times.back(), 1.0);
    EXPECT_NEAR(path.times[3], 0.9, 1e-15);
}

TEST(SimulatePath, ExactTransitionMomentsMonteCarlo) {
    // Coarse steps: the transition is exact, so no discretisation bias.
    FlowParams p;
    const int n = 20000;
    const double T = 5.0;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = simulate_path(p, 0.4, nullptr, 1.0, T, 11, i).values.back();
        s1 += y;
        s2 += y * y;
    }
    const double mean = s1 / n, var = s2 / n - mean * mean;
    const auto m = moments(T, 0.4, p, ZeroLeakage{});
    EXPECT_NEAR(mean, m.mean, 3.0 * std::sqrt(m.variance / n));
    EXPECT_NEAR(var, m.variance, 3.0 * m.variance * std::sqrt(2.0 / n));
}

TEST(SimulatePath, LeakageCallbackShiftsMean) {
    FlowParams p;
    const int n = 4000;
    const double phi = 0.05;
    double s1 = 0.0;
    for (int i = 0; i < n; ++i) {
        s1 += simulate_path(p, 0.0, [phi](double, double) { return phi; }, 0.001, 2.0, 5, i).values.back();
    }
    const auto m = moments(2.0, 0.0, p, PiecewiseLeakage{{0.0}, {phi}});
    EXPECT_NEAR(s1 / n, m.mean, 3.0 * std::sqrt(m.variance / n) + 1e-4);
}

TEST(SimulatePath, NonFiniteLeakageReportsStep) {
    FlowParams p;
    auto bad = [](double t, double) { return t > 0.045 ? std::numeric_limits<double>::quiet_NaN() : 0.0; };
    try {
        simulate_path(p, 0.0, bad, 0.01, 1.0, 1);
        FAIL() << "expected SimulationError";
    } catch (const SimulationError& e) {
        EXPECT_EQ(e.step(), 5);
    }
}

TEST(SimulatePath, CsvHeader) {
    FlowParams p;
    std::ostringstream os;
    simulate_path(p, 0.0, nullptr, 0.5, 1.0, 1).write_csv(os);
    EXPECT_EQ(os.str().substr(0, 4), "t,Y\n");
}
