#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "laplab/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{
    struct Run
    {
        int code = 0;
        std::string out;
        std::string err;
    };

    Run run(std::vector<std::string> args)
    {
        std::ostringstream out, err;
        const int code = laplab::cli::dispatch(args, out, err);
        return {code, out.str(), err.str()};
    }

    std::string data(const std::string& name) { return std::string(LAPLAB_DATA_DIR) + "/" + name; }

    class CliTest : public ::testing::Test
    {
    protected:
        fs::path dir;

        void SetUp() override
        {
            const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
            dir = fs::temp_directory_path() / (std::string("laplab_cli_") + info->name());
            fs::remove_all(dir);
            fs::create_directories(dir);
            unsetenv("LAPLAB_SEED");
        }

        void TearDown() override { fs::remove_all(dir); }

        std::string out(const std::string& sub) const { return (dir / sub).string(); }
        std::string file(const std::string& sub, const std::string& name) const
        {
            return laplab::io::read_text((dir / sub / name).string());
        }
    };

    std::vector<std::string> small_sweep(const std::string& out_dir)
    {
        return {"sweep", "--net", data("net_n.json"), "--r", "4,8,16", "--reps", "2", "--T", "5", "--seed", "3",
                "--out", out_dir};
    }
}

TEST_F(CliTest, AnalyzeReportsNetN)
{
    const auto r = run({"analyze", "--net", data("net_n.json"), "--out", out("a")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(file("a", "analysis.json"));
    EXPECT_NEAR(j["spp"]["rho"].get<double>(), 0.85, 1e-12);
    const auto psi = j["equilibrium"]["psi"].get<std::vector<double>>();
    ASSERT_EQ(psi.size(), 3u);
    EXPECT_NEAR(psi[0], 0.5, 1e-12);
    EXPECT_NEAR(psi[1], 1.0, 1e-12);
    EXPECT_NEAR(psi[2], 0.2, 1e-12);
    EXPECT_EQ(j["equilibrium"]["lowest_priority_pool"].get<int>(), 2);
    EXPECT_EQ(json::parse(r.out), j);
    EXPECT_TRUE(fs::exists(dir / "a" / "manifest.json"));
}

TEST_F(CliTest, InvalidNetworkExitsTwo)
{
    const auto r = run({"analyze", "--net", data("net_n_cycle.json"), "--out", out("a")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error: "), std::string::npos);
    EXPECT_NE(r.err.find("activity set not a tree"), std::string::npos);
}

TEST_F(CliTest, MissingFileAndUnknownCommand)
{
    EXPECT_NE(run({"analyze", "--net", out("nope.json"), "--out", out("a")}).code, 0);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"analyze", "--bogus", "1"}).code, 2);
}

TEST_F(CliTest, SweepIsReproducible)
{
    ASSERT_EQ(run(small_sweep(out("s1"))).code, 0);
    ASSERT_EQ(run(small_sweep(out("s2"))).code, 0);
    EXPECT_EQ(file("s1", "sweep.csv"), file("s2", "sweep.csv"));
    EXPECT_EQ(file("s1", "sweep.json"), file("s2", "sweep.json"));
    const auto csv = file("s1", "sweep.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "r,replication,mean_normF,ci_halfwidth,mean_W");
}

TEST_F(CliTest, SerialFlagGivesIdenticalOutput)
{
    ASSERT_EQ(run(small_sweep(out("p"))).code, 0);
    auto args = small_sweep(out("s"));
    args.push_back("--serial");
    ASSERT_EQ(run(args).code, 0);
    EXPECT_EQ(file("p", "sweep.csv"), file("s", "sweep.csv"));
}

TEST_F(CliTest, ReplayReproducesOutputs)
{
    ASSERT_EQ(run(small_sweep(out("orig"))).code, 0);
    const auto r = run({"replay", "--manifest", out("orig") + "/manifest.json", "--out", out("again")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto* name : {"sweep.csv", "sweep.json", "manifest.json"})
        EXPECT_EQ(file("orig", name), file("again", name)) << name;
}

TEST_F(CliTest, ManifestRecordsResolvedConfig)
{
    ASSERT_EQ(run(small_sweep(out("m"))).code, 0);
    const auto m = json::parse(file("m", "manifest.json"));
    EXPECT_EQ(m["command"], "sweep");
    EXPECT_EQ(m["seed"].get<std::uint64_t>(), 3u);
    EXPECT_EQ(m["config"]["reps"].get<int>(), 2);
    EXPECT_TRUE(m.contains("version"));
    EXPECT_TRUE(m.contains("outputs"));
}

TEST_F(CliTest, FlagsOverrideConfigOverridesDefaults)
{
    laplab::io::write_json(out("cfg.json"), json{{"r", 7}, {"horizon", 3.0}, {"seed", 11}});
    ASSERT_EQ(run({"simulate", "--net", data("net_1.json"), "--config", out("cfg.json"), "--r", "9", "--out",
                   out("o")})
                  .code,
              0);
    const auto m = json::parse(file("o", "manifest.json"));
    EXPECT_EQ(m["config"]["r"].get<int>(), 9);
    EXPECT_EQ(m["config"]["horizon"].get<double>(), 3.0);
    EXPECT_EQ(m["seed"].get<int>(), 11);
}

TEST_F(CliTest, UnknownConfigKeyIsRejected)
{
    laplab::io::write_json(out("cfg.json"), json{{"not_a_key", 1}});
    EXPECT_EQ(run({"analyze", "--net", data("net_1.json"), "--config", out("cfg.json"), "--out", out("o")}).code, 2);
    laplab::io::write_text(out("bad.json"), "{ nope");
    EXPECT_EQ(run({"analyze", "--net", data("net_1.json"), "--config", out("bad.json"), "--out", out("o")}).code, 2);
}

TEST_F(CliTest, SeedFallsBackToEnvironment)
{
    setenv("LAPLAB_SEED", "42", 1);
    ASSERT_EQ(run({"simulate", "--net", data("net_1.json"), "--r", "2", "--horizon", "2", "--out", out("e")}).code, 0);
    unsetenv("LAPLAB_SEED");
    EXPECT_EQ(json::parse(file("e", "manifest.json"))["seed"].get<int>(), 42);
    ASSERT_EQ(run({"simulate", "--net", data("net_1.json"), "--r", "2", "--horizon", "2", "--out", out("d")}).code, 0);
    EXPECT_EQ(json::parse(file("d", "manifest.json"))["seed"].get<int>(), 1);
}

TEST_F(CliTest, LyapunovEquilibriumStart)
{
    const auto r = run({"lyapunov", "--net", data("net_1.json"), "--r", "10", "--window", "1", "--reps", "4",
                        "--level", "none", "--out", out("l")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(file("l", "drift.json"));
    EXPECT_EQ(j["padded_queue"].get<int>(), 0);
}

TEST_F(CliTest, OverloadedSweepExitsTwo)
{
    laplab::io::write_json(out("hot.json"),
                           json{{"classes", 1}, {"pools", 1}, {"lambda", {1.5}}, {"beta", {1.0}},
                                {"activities", json::array({json::array({1, 1, 1.0})})}});
    const auto r = run({"sweep", "--net", out("hot.json"), "--r", "4,8,16", "--reps", "1", "--T", "1", "--out",
                        out("o")});
    EXPECT_EQ(r.code, 2);
}
