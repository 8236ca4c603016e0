#include <fstream>
#include <random>

#include "test_util.hpp"
#include "tracelearn/dsl.hpp"

using namespace tracelearn;
using tl_test::data_path;
using tl_test::motivating_env;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

NodePtr truth_program() {
    return parse_program(slurp(data_path("motivating/truth.prog")));
}

}  // namespace

TEST_CASE("eval_bool evaluates fact atoms under a valuation") {
    Environment e0 = motivating_env();
    Valuation sigma{{"v", "s1"}, {"w", "b1"}, {"u", "s2"}};

    REQUIRE(eval_bool(CondNode::prop("dirty", Slot::var("v")), sigma, e0));
    REQUIRE_FALSE(eval_bool(CondNode::prop("dirty", Slot::var("u")), sigma, e0));
    REQUIRE(eval_bool(CondNode::rel("on-top-of", Slot::var("v"), Slot::var("w")), sigma, e0));
    REQUIRE(eval_bool(
        CondNode::conj(CondNode::prop("dirty", Slot::var("v")),
                       CondNode::rel("on-top-of", Slot::var("v"), Slot::var("w"))),
        sigma, e0));
    REQUIRE(eval_bool(CondNode::neg(CondNode::prop("dirty", Slot::var("u"))), sigma, e0));
    REQUIRE(eval_bool(CondNode::disj(CondNode::prop("dirty", Slot::var("u")),
                                     CondNode::prop("clean", Slot::var("u"))),
                      sigma, e0));
    REQUIRE(eval_bool(CondNode::prop("dirty", Slot::lit("s3")), sigma, e0));

    REQUIRE_ERROR_CODE(eval_bool(CondNode::prop("dirty", Slot::var("zz")), sigma, e0),
                       "UnboundVariable");
    REQUIRE_ERROR_CODE(eval_bool(CondNode::hole(), sigma, e0), "HolePresent");
}

TEST_CASE("run reproduces the golden demonstration byte for byte") {
    Environment e0 = motivating_env();
    RunResult r = run(truth_program(), e0);
    REQUIRE(print_trace(r.trace) == slurp(data_path("motivating/demo.trace")));
    REQUIRE(r.trace.size() == 12);
    // end state: all dirty sheets are inside bins, bins closed again
    REQUIRE(r.final_env.has_rel("inside-of", "s1", "bn1"));
    REQUIRE(r.final_env.has_rel("inside-of", "s3", "bn2"));
    REQUIRE(r.final_env.has_rel("inside-of", "s4", "bn2"));
    REQUIRE(r.final_env.has_prop("closed", "bn1"));
    REQUIRE(r.final_env.current_loc == "r2");

    SECTION("running is deterministic") {
        RunResult r2 = run(truth_program(), e0);
        REQUIRE(r2.trace == r.trace);
        REQUIRE(r2.final_env == r.final_env);
    }
}

TEST_CASE("replaying the trace through apply_action agrees with run") {
    Environment e0 = motivating_env();
    RunResult r = run(truth_program(), e0);
    Environment e = e0;
    for (const auto& ev : r.trace) {
        if (ev.is_goto)
            e.current_loc = ev.args[0];
        else
            e = apply_action(e, ev.action, ev.args);
    }
    REQUIRE(e == r.final_env);
}

TEST_CASE("foreach snapshots its scan at loop entry") {
    Environment e0 = motivating_env();
    NodePtr p = parse_program("foreach (v in scanObj(sheet)) { actUnary(grab, v); }");
    RunResult r = run(p, e0);
    // grabbing s1 moves it out of r1, but the snapshot still yields s2 next
    Trace expect{act_event("grab", {"s1"}), act_event("grab", {"s2"})};
    REQUIRE(r.trace == expect);
}

TEST_CASE("skip runs with no trace and no state change") {
    Environment e0 = motivating_env();
    RunResult r = run(prog::skip(), e0);
    REQUIRE(r.trace.empty());
    REQUIRE(r.final_env == e0);
}

TEST_CASE("let binds the nth scanned entity and range-checks the index") {
    Environment e0 = motivating_env();
    NodePtr ok = parse_program(
        "let v := getNth(scanObj(sheet), 1);\n"
        "actUnary(grab, v);\n");
    RunResult r = run(ok, e0);
    REQUIRE(r.trace == Trace{act_event("grab", {"s2"})});

    NodePtr bad = parse_program("let v := getNth(scanObj(bin), 3);\n");
    REQUIRE_ERROR_CODE(run(bad, e0), "IndexOutOfRange");
}

TEST_CASE("run rejects programs with holes") {
    Environment e0 = motivating_env();
    NodePtr p = parse_program("actUnary(open, ??:bin);");
    REQUIRE(has_holes(p));
    REQUIRE_ERROR_CODE(run(p, e0), "HolePresent");
}

TEST_CASE("scoping is lexical with shadowing") {
    // use before binding
    REQUIRE_ERROR_CODE(parse_program("actUnary(grab, v);"), "UnboundVariable");
    // a let does not escape its block
    REQUIRE_ERROR_CODE(parse_program("if (checkProp(dirty, w)) { skip; }\n"
                                     "foreach (w in scanObj(sheet)) { skip; }\n"),
                       "UnboundVariable");
    // goto must target a location variable
    REQUIRE_ERROR_CODE(parse_program("foreach (v in scanObj(sheet)) { goto(v); }"),
                       "TypeError");
    REQUIRE_ERROR_CODE(parse_program("foreach (v in scanLoc(room)) { actUnary(grab, v); }"),
                       "TypeError");

    // shadowing: the inner loop variable wins, and the outer binding returns
    Environment e0 = motivating_env();
    NodePtr p = parse_program(
        "foreach (v in scanLoc(room)) {\n"
        "  goto(v);\n"
        "  foreach (v in scanObj(bin)) {\n"
        "    actUnary(open, v);\n"
        "  }\n"
        "  goto(v);\n"
        "}\n");
    RunResult r = run(p, e0);
    Trace expect{goto_event("r1"), act_event("open", {"bn1"}), goto_event("r1"),
                 goto_event("r2"), act_event("open", {"bn2"}), goto_event("r2")};
    REQUIRE(r.trace == expect);
}

TEST_CASE("consistent compares traces and treats errors as inconsistent") {
    Environment e0 = motivating_env();
    Trace demo = load_trace(data_path("motivating/demo.trace"));
    std::vector<Demonstration> demos{{e0, demo}};

    REQUIRE(consistent(truth_program(), demos));

    // dropping the conditional grabs the clean sheet too: trace differs
    NodePtr unconditional = parse_program(
        "foreach (v1 in scanLoc(room)) {\n"
        "  goto(v1);\n"
        "  let v2 := getNth(scanObj(bin), 0);\n"
        "  actUnary(open, v2);\n"
        "  foreach (v4 in scanObj(sheet)) {\n"
        "    actUnary(grab, v4);\n"
        "    actBinary(put-in, v4, v2);\n"
        "  }\n"
        "  actUnary(close, v2);\n"
        "}\n");
    REQUIRE_FALSE(consistent(unconditional, demos));

    // a program that errors (put-in before open) is inconsistent
    NodePtr erroring = parse_program(
        "let v2 := getNth(scanObj(bin), 0);\n"
        "let v4 := getNth(scanObj(sheet), 0);\n"
        "actBinary(put-in, v4, v2);\n");
    REQUIRE_FALSE(consistent(erroring, demos));
}

TEST_CASE("trace files parse and print exactly") {
    std::string text = slurp(data_path("motivating/demo.trace"));
    Trace t = parse_trace(text);
    REQUIRE(t.size() == 12);
    REQUIRE(print_trace(t) == text);
    REQUIRE(t[0] == goto_event("r1"));
    REQUIRE(t[3] == act_event("put-in", {"s1", "bn1"}));

    REQUIRE_ERROR_CODE(parse_trace("jump r1\n"), "BadTraceFile");
    REQUIRE_ERROR_CODE(parse_trace("goto r1 r2\n"), "BadTraceFile");
    REQUIRE_ERROR_CODE(parse_trace("act open\n"), "BadTraceFile");
}

TEST_CASE("program text round-trips through parse and print") {
    std::string text = slurp(data_path("motivating/truth.prog"));
    NodePtr p = parse_program(text);
    REQUIRE(print_program(parse_program(print_program(p))) == print_program(p));

    // partial program with every hole kind
    std::string partial =
        "foreach (v1 in scanLoc(??)) {\n"
        "  goto(??:room);\n"
        "  let v2 := getNth(scanObj(bin), ??);\n"
        "  actUnary(open, ??:bin);\n"
        "  foreach (v3 in scanObj(??)) {\n"
        "    if (??) {\n"
        "      actUnary(grab, ??:sheet);\n"
        "    }\n"
        "    if (checkProp(??, v3) && checkRel(??, v3, v3)) {\n"
        "      skip;\n"
        "    }\n"
        "  }\n"
        "}\n";
    NodePtr q = parse_program(partial);
    REQUIRE(print_program(parse_program(print_program(q))) == print_program(q));
    auto holes = list_holes(q);
    std::vector<HoleKind> kinds;
    for (const auto& h : holes) kinds.push_back(h.kind);
    REQUIRE(kinds == std::vector<HoleKind>{
                         HoleKind::LocType, HoleKind::Var, HoleKind::Index,
                         HoleKind::Var, HoleKind::ObjType, HoleKind::Cond,
                         HoleKind::Var, HoleKind::PropName, HoleKind::RelName});
}

TEST_CASE("substitute_hole fills exactly the addressed hole") {
    NodePtr p = parse_program(
        "foreach (v in scanObj(??)) {\n"
        "  actUnary(grab, ??:sheet);\n"
        "  if (??) { skip; }\n"
        "}\n");
    auto holes = list_holes(p);
    REQUIRE(holes.size() == 3);
    REQUIRE(holes[0].kind == HoleKind::ObjType);
    REQUIRE(holes[1].kind == HoleKind::Var);
    REQUIRE(holes[1].expected_type == "sheet");
    REQUIRE(holes[2].kind == HoleKind::Cond);

    Fill f;
    f.text = "sheet";
    NodePtr p1 = substitute_hole(p, 0, f);
    REQUIRE(list_holes(p1).size() == 2);
    REQUIRE(print_program(p1).find("scanObj(sheet)") != std::string::npos);

    Fill fv;
    fv.text = "v";
    NodePtr p2 = substitute_hole(p1, 0, fv);
    REQUIRE(print_program(p2).find("grab, v") != std::string::npos);

    Fill fc;
    fc.cond = CondNode::prop("dirty", Slot::var("v", "sheet"));
    NodePtr p3 = substitute_hole(p2, 0, fc);
    REQUIRE_FALSE(has_holes(p3));
    REQUIRE(print_program(p3).find("checkProp(dirty, v)") != std::string::npos);

    REQUIRE_ERROR_CODE(substitute_hole(p3, 0, fc), "BadHole");
}

namespace {

// random program generator for the round-trip fuzz
struct Fuzz {
    std::mt19937 rng;
    explicit Fuzz(unsigned seed) : rng(seed) {}

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

    std::string name(const char* prefix) {
        return std::string(prefix) + std::to_string(pick(4));
    }

    Slot slot(std::vector<std::string>& scope) {
        int c = pick(3);
        if (c == 0 || scope.empty()) return Slot::hole(name("ty"));
        if (c == 1) return Slot::lit(name("id"));
        return Slot::var(scope[pick((int)scope.size())]);
    }

    CondPtr cond(std::vector<std::string>& scope, int depth) {
        int c = pick(depth > 0 ? 6 : 4);
        switch (c) {
            case 0: return CondNode::hole();
            case 1: return CondNode::prop(name("p-p"), slot(scope));
            case 2: return CondNode::prop_hole(slot(scope));
            case 3:
                return pick(2) ? CondNode::rel(name("r-r"), slot(scope), slot(scope))
                               : CondNode::rel_hole(slot(scope), slot(scope));
            case 4: return CondNode::neg(cond(scope, depth - 1));
            default:
                return pick(2) ? CondNode::conj(cond(scope, depth - 1), cond(scope, depth - 1))
                               : CondNode::disj(cond(scope, depth - 1), cond(scope, depth - 1));
        }
    }

    Scan scan() {
        bool obj = pick(2);
        if (pick(3) == 0) return obj ? Scan::obj_hole() : Scan::loc_hole();
        return obj ? Scan::objects(name("ty")) : Scan::locations(name("lty"));
    }

    NodePtr stmt(std::vector<std::string>& scope, std::vector<std::string>& locscope,
                 int depth) {
        int c = pick(depth > 0 ? 8 : 5);
        switch (c) {
            case 0: return prog::skip();
            case 1: return prog::act1(name("a-a"), slot(scope));
            case 2: return prog::act2(name("b"), slot(scope), slot(scope));
            case 3: {
                if (locscope.empty() || pick(2))
                    return prog::goto_(Slot::hole(name("lty")));
                return prog::goto_(Slot::var(locscope[pick((int)locscope.size())]));
            }
            case 4: {
                std::string v = "v" + std::to_string((int)scope.size() + (int)locscope.size());
                Scan s = scan();
                NodePtr n = pick(2) ? prog::let(v, s, pick(3)) : prog::let_hole_index(v, s);
                (s.over_objects ? scope : locscope).push_back(v);
                return n;
            }
            case 5: return prog::if_(cond(scope, 2), block(scope, locscope, depth - 1));
            default: {
                std::string v = "w" + std::to_string((int)scope.size() + (int)locscope.size());
                Scan s = scan();
                auto scope2 = scope;
                auto locscope2 = locscope;
                (s.over_objects ? scope2 : locscope2).push_back(v);
                return prog::foreach(v, s, block(scope2, locscope2, depth - 1));
            }
        }
    }

    NodePtr block(std::vector<std::string> scope, std::vector<std::string> locscope,
                  int depth) {
        int n = 1 + pick(3);
        std::vector<NodePtr> kids;
        for (int i = 0; i < n; ++i) kids.push_back(stmt(scope, locscope, depth));
        if (kids.size() == 1) return kids[0];
        return prog::seq(std::move(kids));
    }
};

}  // namespace

TEST_CASE("parse of print is the identity on 1000 random programs") {
    Fuzz fz(20260818);
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> scope, locscope;
        NodePtr p = fz.block(scope, locscope, 3);
        std::string text = print_program(p);
        NodePtr q;
        try {
            q = parse_program(text);
        } catch (const Error& e) {
            INFO(text);
            FAIL(std::string("parse failed: ") + e.what());
        }
        INFO(text);
        REQUIRE(print_program(q) == text);
    }
}
