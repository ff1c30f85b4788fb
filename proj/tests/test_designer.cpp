#include <gtest/gtest.h>

#include "support.hpp"

using namespace domus;

namespace {

PatternDictionary brick_dict() {
    PatternDictionary d;
    d.add("brick", {{0, 0, 0}, {1, 0, 0}});
    return d;
}

Program with_stamps(const PatternDictionary& d, const std::string& body) {
    Program stamps;
    stamps.instructions = compile_stamps(d);
    return parse(serialize(stamps) + "\n" + body);
}

ConstraintSet ac_constraints() { return ConstraintSet{{Stability{2}, 10}, {MaterialAtMost{2}, 2}}; }

} // namespace

TEST(Objective, GroundStampIsFree) {
    auto d = brick_dict();
    EXPECT_EQ(objective(with_stamps(d, "CALL brick"), d, ConstraintSet{{Stability{2}, 1}}, Dims{8, 8, 8}), 0.0);
}

TEST(Objective, EmptyProgramPaysForMissingRoom) {
    EXPECT_EQ(objective(Program{}, brick_dict(), ConstraintSet{{EnclosedVolumeAtLeast{1}, 3}}, Dims{8, 8, 8}), 3.0);
}

TEST(Objective, FloatingCell) {
    // r is the cost of rebuilding the residual where it stands: MOVE Z 1, PLACE
    auto d = brick_dict();
    auto bd = objective_breakdown(parse("MOVE Z 1 PLACE"), d, ConstraintSet{{Stability{2}, 10}}, Dims{8, 8, 8});
    EXPECT_EQ(bd.residual, 14.0);
    EXPECT_EQ(bd.penalty, 10.0);
    EXPECT_EQ(bd.total, 24.0);
}

TEST(Objective, ExecutionFailureIsInfinite) {
    EXPECT_EQ(objective(parse("MOVE X 9 PLACE"), brick_dict(), ac_constraints(), Dims{8, 8, 8}), kInfeasible);
}

TEST(Stamps, EachStampReproducesItsPattern) {
    PatternDictionary d = brick_dict();
    d.add("tee", {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {1, 1, 0}, {1, 1, 1}});
    d.add("hook", {{0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {1, 0, 2}, {0, 2, 0}});
    auto stamps = compile_stamps(d);
    ASSERT_EQ(stamps.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (Cell anchor : {Cell{0, 0, 0}, Cell{3, 2, 0}}) {
            Program p;
            p.instructions = stamps;
            for (auto& m : moves_for(anchor)) p.instructions.push_back(m);
            p.instructions.push_back(Call{d[i].name, 1});
            auto s = execute(p, Dims{8, 8, 8});
            std::vector<Cell> want;
            for (const auto& o : d[i].cells) want.push_back(anchor + o);
            std::sort(want.begin(), want.end());
            EXPECT_EQ(s.cells(), want) << d[i].name;
        }
    }
}

TEST(Optimize, ReachesZeroForBrickWorld) {
    SearchParams sp;
    sp.seed = 7;
    sp.iterations = 5000;
    sp.dims = Dims{8, 8, 8};
    auto d = brick_dict();
    auto cs = ac_constraints();
    auto res = optimize(d, cs, sp);
    EXPECT_EQ(res.objective, 0.0);
    EXPECT_EQ(objective(res.best, d, cs, sp.dims), res.objective);
}

TEST(Optimize, ImprovesFromBadStart) {
    SearchParams sp;
    sp.seed = 7;
    sp.iterations = 3000;
    sp.initial_body = parse("MOVE Z 2 FILL 3 1 1 MOVE Y 2 PLACE").instructions;
    auto d = brick_dict();
    auto cs = ac_constraints();
    auto res = optimize(d, cs, sp);
    ASSERT_FALSE(res.trace.records.empty());
    Program start;
    start.instructions = compile_stamps(d);
    for (auto& ins : sp.initial_body) start.instructions.push_back(ins);
    double j0 = objective(start, d, cs, sp.dims);
    EXPECT_GT(j0, 0.0);
    EXPECT_LT(res.objective, j0);
    EXPECT_EQ(res.objective, 0.0);
}

TEST(Optimize, SingleIteration) {
    SearchParams sp;
    sp.iterations = 1;
    sp.initial_body = parse("MOVE Z 1 PLACE").instructions;
    auto d = brick_dict();
    auto cs = ac_constraints();
    auto res = optimize(d, cs, sp);
    ASSERT_EQ(res.trace.records.size(), 1u);
    const auto& t = res.trace.records[0];
    Program start;
    start.instructions = compile_stamps(d);
    for (auto& ins : sp.initial_body) start.instructions.push_back(ins);
    EXPECT_EQ(res.objective, std::min(objective(start, d, cs, sp.dims), t.objective));
    EXPECT_EQ(t.best, res.objective);
}

TEST(Optimize, DeterministicAndTraceMonotone) {
    SearchParams sp;
    sp.seed = 3;
    sp.iterations = 800;
    sp.initial_body = parse("MOVE Z 3 FILL 2 2 1").instructions;
    auto d = brick_dict();
    auto cs = ac_constraints();
    auto a = optimize(d, cs, sp);
    auto b = optimize(d, cs, sp);
    EXPECT_EQ(serialize(a.best), serialize(b.best));
    ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
    for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
        EXPECT_EQ(a.trace.records[i].objective, b.trace.records[i].objective);
        EXPECT_EQ(a.trace.records[i].accepted, b.trace.records[i].accepted);
        EXPECT_EQ(a.trace.records[i].iteration, i);
        if (i) {
            EXPECT_LE(a.trace.records[i].best, a.trace.records[i - 1].best);
        }
    }
}

TEST(Optimize, IslandsIndependentOfThreads) {
    SearchParams sp;
    sp.seed = 5;
    sp.iterations = 400;
    sp.islands = 3;
    sp.initial_body = parse("MOVE Z 3 FILL 2 2 1").instructions;
    auto d = brick_dict();
    auto cs = ac_constraints();
    auto one = optimize(d, cs, sp);
    sp.workers = 3;
    auto three = optimize(d, cs, sp);
    EXPECT_EQ(serialize(one.best), serialize(three.best));
    EXPECT_EQ(one.island, three.island);
    EXPECT_EQ(one.objective, three.objective);
}

TEST(Optimize, RespectsProgramSizeLimit) {
    SearchParams sp;
    sp.seed = 9;
    sp.iterations = 500;
    sp.max_program_bytes = 60;
    auto d = brick_dict();
    auto res = optimize(d, ConstraintSet{{EnclosedVolumeAtLeast{1}, 50}}, sp);
    EXPECT_LE(program_length(res.best), 60u);
}

TEST(Optimize, RejectsBadParams) {
    SearchParams sp;
    sp.iterations = 0;
    EXPECT_THROW(optimize(brick_dict(), ac_constraints(), sp), BadLiteral);
    sp.iterations = 1;
    sp.cooling = 1.0;
    EXPECT_THROW(optimize(brick_dict(), ac_constraints(), sp), BadLiteral);
    sp.cooling = 0.5;
    sp.move_weights = {0, 0, 0, 0, 0, 0};
    EXPECT_THROW(optimize(brick_dict(), ac_constraints(), sp), BadLiteral);
}

// ---------------------------------------------------------------------------
// properties

TEST(DesignerProperty, ObjectiveNonNegativeAndZeroIffClean) {
    Rng rng(61);
    auto d = brick_dict();
    ConstraintSet cs{{Stability{2}, 3}, {MaterialAtMost{6}, 1}};
    for (int i = 0; i < 200; ++i) {
        Program p = domus::testing::random_program(rng, 1, 4);
        auto bd = objective_breakdown(p, d, cs, Dims{8, 8, 8});
        if (bd.total == kInfeasible) continue;
        EXPECT_GE(bd.total, 0.0);
        auto s = execute(p, Dims{8, 8, 8});
        bool clean = cover(s, d).residual.empty() && eval_constraints(s, cs).total == 0;
        EXPECT_EQ(bd.total == 0, clean);
    }
}
