#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include <domus/cli.hpp>
#include <nlohmann/json.hpp>

#include "support.hpp"

using namespace domus;
using domus::testing::corpus;
using domus::testing::slurp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out, err;
    nlohmann::json json() const { return nlohmann::json::parse(out); }
};

Outcome domus_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
    std::istringstream in(stdin_text);
    std::ostringstream out, err;
    int code = cli::run(args, in, out, err);
    return {code, out.str(), err.str()};
}

class Scratch : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("domus_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(Scratch, BuildRow) {
    auto r = domus_cli({"build", corpus("row3.cvm"), "--dims", "4", "1", "1", "-o", path("row.vox.txt")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(path("row.vox.txt")), "DIMS 4 1 1\nLAYER 0\n###.");
    auto c = domus_cli({"complexity", path("row.vox.txt")});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(c.json()["length"], 10);
    EXPECT_EQ(c.json()["cells"], 3);
}

TEST(Cli, MissingFile) {
    auto r = domus_cli({"build", "missing.cvm"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("missing.cvm"), std::string::npos);
}

TEST(Cli, Render) {
    EXPECT_EQ(domus_cli({"render", "-"}, "DIMS 1 1 1\nLAYER 0\n.").out, "DIMS 1 1 1\nLAYER 0\n.");
    EXPECT_EQ(domus_cli({"render", "-"}, "DIMS 1 1 1\nLAYER 0\n#").out, "DIMS 1 1 1\nLAYER 0\n#");
    EXPECT_EQ(domus_cli({"render", "-", "--dims", "2", "1", "1"}, "PLACE\nMOVE X 1\nPLACE").out, "DIMS 2 1 1\nLAYER 0\n##");
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(domus_cli({}).code, 2);
    EXPECT_EQ(domus_cli({"frobnicate"}).code, 2);
    EXPECT_EQ(domus_cli({"build"}).code, 2);
    EXPECT_EQ(domus_cli({"build", corpus("row3.cvm"), "--bogus"}).code, 2);
    EXPECT_EQ(domus_cli({"build", corpus("row3.cvm"), "--dims", "0", "1", "1"}).code, 2);
    EXPECT_EQ(domus_cli({"build", corpus("row3.cvm"), "--dims", "4", "1"}).code, 2);
    EXPECT_EQ(domus_cli({"build", corpus("row3.cvm"), "--format", "xml"}).code, 2);
    EXPECT_EQ(domus_cli({"beauty", corpus("row3.cvm")}).code, 2);  // --dict is required
    EXPECT_EQ(domus_cli({"attack", corpus("bridge.cvm"), "--p", "2"}).code, 2);
    EXPECT_EQ(domus_cli({"attack", corpus("bridge.cvm"), "--builder", "alien"}).code, 2);
}

TEST(Cli, HelpIsSuccess) {
    auto r = domus_cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("complexity"), std::string::npos);
}

TEST(Cli, ExecutionErrorsAreFailures) {
    EXPECT_EQ(domus_cli({"build", "-", "--dims", "2", "2", "2"}, "MOVE X 5\nPLACE").code, 3);
    EXPECT_EQ(domus_cli({"build", "-"}, "JUMP").code, 3);
    EXPECT_EQ(domus_cli({"render", "-"}, "DIMS 1 1 1\nLAYER 0\n#x").code, 3);
    EXPECT_EQ(domus_cli({"natural", "-"}, "DIMS 1 1 1\nLAYER 0\n.").code, 3);  // empty structure
}

TEST(Cli, ComplexityExhaustive) {
    auto r = domus_cli({"complexity", "-", "--exhaustive", "20"}, "DIMS 1 1 1\nLAYER 0\n#");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.json()["exhaustive"]["length"], 5);
    EXPECT_EQ(r.json()["exhaustive"]["program_text"], "PLACE");

    auto none = domus_cli({"complexity", "-", "--exhaustive", "10"}, "DIMS 3 1 1\nLAYER 0\n#.#");
    EXPECT_EQ(none.code, 1);
    EXPECT_TRUE(none.json()["exhaustive"].is_null());
}

TEST(Cli, Beauty) {
    auto r = domus_cli({"beauty", "-", "--dims", "4", "1", "1", "--dict", corpus("brick.pat")}, "FILL 4 1 1");
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = r.json();
    EXPECT_EQ(j["N"], 1);
    EXPECT_EQ(j["r"], 0);
    EXPECT_EQ(j["placements"].size(), 2u);
    EXPECT_EQ(j["score"], j["D"].get<int>() * 1 + 0);
    EXPECT_EQ(j["placements"][0], "STAMP brick 0 0 0");
}

TEST(Cli, NaturalLabelsCuboidArtificial) {
    auto r = domus_cli({"natural", "-", "--dims", "8", "8", "8"}, "FILL 8 8 8");
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.json()["label"], "Artificial");
    EXPECT_DOUBLE_EQ(r.json()["fractal"]["dimension"].get<double>(), 3.0);
}

TEST(Cli, NaturalSmallStructureHasNoFractal) {
    auto r = domus_cli({"natural", "-"}, "DIMS 2 1 1\nLAYER 0\n##");
    EXPECT_TRUE(r.json()["fractal"].is_null());
}

TEST(Cli, TextFormat) {
    auto r = domus_cli({"complexity", "-", "--format", "text"}, "DIMS 1 1 1\nLAYER 0\n#");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("length: 5\n"), std::string::npos);
    EXPECT_NE(r.out.find("program_text: PLACE\n"), std::string::npos);
}

TEST(Cli, AttackRobotFleet) {
    auto r = domus_cli({"attack", corpus("bridge.cvm"), "--fleet", "10", "--k", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = r.json();
    EXPECT_EQ(j["transfer_rate"], 1.0);
    EXPECT_EQ(j["distinct_structures"], 1);
    EXPECT_EQ(j["attack_cells"], nlohmann::json::parse("[[2,2,0],[6,2,0]]"));
    EXPECT_EQ(j["member_fractions"].size(), 10u);
}

TEST(Cli, AttackHumanFleet) {
    auto r = domus_cli({"attack", corpus("bridge.cvm"), "--builder", "human", "--p", "0.2", "--seed", "1", "--fleet", "50"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_DOUBLE_EQ(r.json()["transfer_rate"].get<double>(), 0.88);
    EXPECT_EQ(r.json()["distinct_structures"], 24);
}

TEST(Cli, AttackUnstablePrototypeFails) {
    auto r = domus_cli({"attack", "-", "--dims", "1", "1", "4"}, "MOVE Z 3\nPLACE");
    EXPECT_EQ(r.code, 3);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, PlacementBudgetFromEnvironment) {
    ::setenv("DOMUS_MAX_PLACEMENTS", "3", 1);
    auto over = domus_cli({"build", "-"}, "FILL 2 2 1");
    auto ok = domus_cli({"build", "-", "--dims", "3", "1", "1"}, "FILL 3 1 1");
    ::setenv("DOMUS_MAX_PLACEMENTS", "zero", 1);
    auto bad = domus_cli({"build", "-"}, "PLACE");
    ::unsetenv("DOMUS_MAX_PLACEMENTS");
    EXPECT_EQ(over.code, 3);
    EXPECT_EQ(ok.code, 0);
    EXPECT_EQ(bad.code, 2);
}

TEST_F(Scratch, Optimize) {
    auto r = domus_cli({"optimize", "--dict", corpus("brick.pat"), "--constraints", corpus("constraints.json"), "--dims",
                  "8", "8", "8", "--seed", "7", "--iters", "300", "-o", path("run")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = r.json();
    EXPECT_EQ(j["iterations"], 300);
    std::string trace = slurp(path("run/trace.csv"));
    EXPECT_EQ(trace.rfind("iter,objective,accepted,best\n", 0), 0u);
    EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 301);
    // the saved program rebuilds the saved structure
    auto built = execute(parse(slurp(path("run/best.cvm"))), Dims{8, 8, 8});
    EXPECT_EQ(to_vox_text(built), slurp(path("run/best.vox.txt")));
    EXPECT_EQ(j["cells"], built.count());
}

TEST_F(Scratch, OptimizeRejectsEmptyConstraints) {
    std::ofstream(path("none.json")) << "[]";
    auto r = domus_cli({"optimize", "--dict", corpus("brick.pat"), "--constraints", path("none.json"), "-o", path("x")});
    EXPECT_EQ(r.code, 2);
}

TEST_F(Scratch, PipeComposability) {
    for (const char* prog : {"row3.cvm", "slab4.cvm", "pillar.cvm", "bridge.cvm"}) {
        auto built = domus_cli({"build", corpus(prog)});
        ASSERT_EQ(built.code, 0) << prog << ": " << built.err;
        for (std::vector<std::string> cmd :
             {std::vector<std::string>{"render", "-"}, {"complexity", "-"}, {"natural", "-"},
              {"beauty", "-", "--dict", corpus("brick.pat")}}) {
            auto r = domus_cli(cmd, built.out);
            EXPECT_TRUE(r.code == 0 || r.code == 1) << prog << " " << cmd[0] << ": " << r.err;
        }
        EXPECT_EQ(domus_cli({"render", "-"}, built.out).out, built.out);
    }
}

TEST(Cli, CorpusBuildsAtDefaultDims) {
    for (const char* prog :
         {"row3.cvm", "slab4.cvm", "pillar.cvm", "bridge.cvm", "sierpinski2.cvm", "sierpinski3.cvm"}) {
        auto r = domus_cli({"build", corpus(prog)});
        EXPECT_EQ(r.code, 0) << prog << ": " << r.err;
    }
    // 81 cells wide, past the default 64
    EXPECT_EQ(domus_cli({"build", corpus("sierpinski4.cvm")}).code, 3);
    EXPECT_EQ(domus_cli({"build", corpus("sierpinski4.cvm"), "--dims", "81", "81", "1"}).code, 0);
}

TEST(Cli, ReportsAreDeterministic) {
    std::vector<std::string> cmd{"attack", corpus("bridge.cvm"), "--builder", "human", "--p", "0.3", "--seed", "4"};
    auto a = domus_cli(cmd);
    auto b = domus_cli(cmd);
    cmd.insert(cmd.end(), {"--workers", "4"});
    auto c = domus_cli(cmd);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.out, c.out);
}
