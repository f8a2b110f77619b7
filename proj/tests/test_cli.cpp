#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(::testing::TempDir()) / ("flowexec_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string("\"") + FLOWEXEC_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST(Cli, RerunsAreByteIdentical) {
    const auto a = scratch("rerun_a"), b = scratch("rerun_b");
    const std::string args = " simulate --strategy receding-dl --paths 100 --record 2";
    ASSERT_EQ(run("--out " + a.string() + args), 0);
    ASSERT_EQ(run("--out " + b.string() + " --threads 3" + args), 0);
    for (const char* f : {"simulate.csv", "paths.csv", "trajectories.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        EXPECT_FALSE(slurp(a / f).empty()) << f;
    }
    const std::string manifest = slurp(a / "simulate_manifest.json");
    EXPECT_NE(manifest.find("\"command\": \"simulate\""), std::string::npos);
    EXPECT_NE(manifest.find("\"seed\": 7"), std::string::npos);
    EXPECT_NE(manifest.find("paths.csv"), std::string::npos);
}

TEST(Cli, EverySubcommandWritesItsFiles) {
    const auto d = scratch("all");
    const std::string out = "--out " + d.string() + " ";
    write(d / "trades.csv", "index,signed_volume,kind\n1,600\n2,-300\n3,500,limit_at_touch\n4,-700\n5,400\n");
    const std::pair<std::string, std::vector<std::string>> cases[] = {
        {"myopic --samples 11", {"myopic.csv"}},
        {"riccati --tau-max 2 --stride 100", {"riccati.csv"}},
        {"hjb --x 0.5 --ny 100 --binary", {"hjb_surface.csv", "hjb_surface.bin"}},
        {"optimize-horizon --family dl --y -0.5 0 0.5 --points 20", {"value_curve.csv", "horizon.csv"}},
        {"optimize-horizon --elo --y 0", {"horizon.csv"}},
        {"table1 --paths 100 --ny 100", {"table1.csv"}},
        {"statics --kappas 0 10 --etas 0.075 --y-points 5", {"rates.csv"}},
        {"horizons --y0 -0.5 0.5 --paths 100 --bins 10", {"horizon_hist.csv", "horizon_scatter.csv"}},
        {"dp --ny 11 --nx 10 --n-alpha 5", {"dp_policy.csv", "dp_gaps.csv"}},
        {"flow --input " + (d / "trades.csv").string() + " ewma", {"imbalance.csv"}},
        {"flow --input " + (d / "trades.csv").string() + " bucket --bucket-volume 1000 --window 1",
         {"buckets.csv"}},
    };
    for (const auto& [args, files] : cases) {
        ASSERT_EQ(run(out + args), 0) << args;
        for (const auto& f : files) EXPECT_TRUE(fs::exists(d / f)) << args << " -> " << f;
    }
    // Touch trades are dropped by default: buckets (600 buy, 400 sell) and (400 buy, 600 sell).
    EXPECT_EQ(slurp(d / "buckets.csv"),
              "l,end_index,imbalance,vpin\n"
              "0,4,0.19999999999999996,\n"
              "1,5,-0.19999999999999996,0.19999999999999996\n");
    const std::string imb = slurp(d / "imbalance.csv");
    EXPECT_EQ(std::count(imb.begin(), imb.end(), '\n'), 1 + 1 + 4);
    EXPECT_TRUE(fs::exists(d / "flow_manifest.json"));
}

TEST(Cli, ConfigFileAndPrecedence) {
    const auto d = scratch("config");
    write(d / "run.ini", "kappa=0\nrisk=constant\nc=0.1\n");
    ASSERT_EQ(run("--config " + (d / "run.ini").string() + " --out " + d.string() +
                  " optimize-horizon --family ml --y 0"),
              0);
    const std::string h = slurp(d / "horizon.csv");
    EXPECT_NE(h.find("0,9.4868"), std::string::npos) << h;
    const std::string m = slurp(d / "optimize-horizon_manifest.json");
    EXPECT_NE(m.find("\"kappa\": \"0\""), std::string::npos) << m;

    ASSERT_EQ(run("--config " + (d / "run.ini").string() + " --kappa 10 --out " + d.string() +
                  " optimize-horizon --family ml --y 0"),
              0);
    EXPECT_EQ(slurp(d / "horizon.csv").find("0,9.4868"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    const auto d = scratch("codes");
    const std::string out = "--out " + d.string() + " ";
    write(d / "bad.ini", "kapa=3\n");
    write(d / "bad_trades.csv", "1,5\n2,zero\n");
    EXPECT_EQ(run("--version"), 0);
    EXPECT_EQ(run(out + "--no-such-flag myopic"), 2);
    EXPECT_EQ(run(out), 2);
    EXPECT_EQ(run("--config " + (d / "bad.ini").string() + " " + out + "myopic"), 3);
    EXPECT_EQ(run(out + "--risk cubic myopic"), 3);
    EXPECT_EQ(run(out + "--beta -1 myopic"), 3);
    EXPECT_EQ(run(out + "simulate --strategy nope"), 3);
    EXPECT_EQ(run(out + "myopic --x 0"), 4);
    EXPECT_EQ(run(out + "hjb --x 3 --ny 400 --dx 0.003"), 5);
    EXPECT_EQ(run(out + "--kappa 0 --risk none optimize-horizon --family ml --y 0"), 6);
    EXPECT_EQ(run(out + "flow --input " + (d / "bad_trades.csv").string() + " ewma"), 8);
    EXPECT_EQ(run(out + "flow --input " + (d / "missing.csv").string() + " bucket"), 8);
    write(d / "blocker", "");
    EXPECT_EQ(run("--out " + (d / "blocker" / "sub").string() + " myopic"), 9);
}
