#include <atomic>
#include <chrono>
#include <random>
#include <set>
#include <thread>

#include <catch2/catch_amalgamated.hpp>

#include "json.hpp"
#include "test_util.hpp"
#include "tracelearn/completer.hpp"
#include "tracelearn/http_scorer.hpp"

using namespace tracelearn;
using tl_test::data_path;
using tl_test::motivating_env;

namespace {

Demonstration motivating_demo() {
    return {motivating_env(), load_trace(data_path("motivating/demo.trace"))};
}

NodePtr truth_program() {
    std::ifstream in(data_path("motivating/truth.prog"));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_program(ss.str());
}

// The motivating sketch: control flow fixed, every scan type, the getNth
// index, and the grab condition still open.
NodePtr motivating_sketch() {
    using namespace prog;
    return foreach ("v1", Scan::loc_hole(),
                    seq({
                        goto_(Slot::var("v1")),
                        let_hole_index("v2", Scan::obj_hole()),
                        act1("open", Slot::var("v2")),
                        foreach ("v3", Scan::obj_hole(),
                                 seq({
                                     foreach ("v4", Scan::obj_hole(),
                                              seq({
                                                  if_(CondNode::hole(),
                                                      seq({
                                                          act1("grab", Slot::var("v4")),
                                                          act2("put-in", Slot::var("v4"),
                                                               Slot::var("v2")),
                                                      })),
                                              })),
                                 })),
                        act1("close", Slot::var("v2")),
                    }));
}

// Same sketch with everything committed except the bed scan and the
// condition: the state whose prompt the masked-model figure shows.
NodePtr masked_partial() {
    using namespace prog;
    return foreach ("v1", Scan::locations("room"),
                    seq({
                        goto_(Slot::var("v1")),
                        let("v2", Scan::objects("bin"), 0),
                        act1("open", Slot::var("v2")),
                        foreach ("v3", Scan::obj_hole(),
                                 seq({
                                     foreach ("v4", Scan::objects("sheet"),
                                              seq({
                                                  if_(CondNode::hole(),
                                                      seq({
                                                          act1("grab", Slot::var("v4")),
                                                          act2("put-in", Slot::var("v4"),
                                                               Slot::var("v2")),
                                                      })),
                                              })),
                                 })),
                        act1("close", Slot::var("v2")),
                    }));
}

// masked_partial with the bed scan committed too: only the condition is open.
NodePtr cond_only_partial() {
    NodePtr p = masked_partial();
    return substitute_hole(p, 0, Fill{"bed", -1, nullptr});
}

// Loop-without-if shape: no completion can skip the clean sheet.
NodePtr unconditional_sketch() {
    using namespace prog;
    return foreach ("v1", Scan::loc_hole(),
                    seq({
                        goto_(Slot::var("v1")),
                        let_hole_index("v2", Scan::obj_hole()),
                        act1("open", Slot::var("v2")),
                        foreach ("v3", Scan::obj_hole(),
                                 seq({
                                     act1("grab", Slot::var("v3")),
                                     act2("put-in", Slot::var("v3"), Slot::var("v2")),
                                 })),
                        act1("close", Slot::var("v2")),
                    }));
}

// One grab guarded by an open condition, against a one-event demo. Small
// enough to brute-force.
NodePtr mini_sketch() {
    using namespace prog;
    return foreach ("v", Scan::obj_hole(),
                    seq({
                        if_(CondNode::hole(), seq({act1("grab", Slot::var("v"))})),
                    }));
}

Demonstration mini_demo() {
    Environment e = motivating_env();
    return {e, {act_event("grab", {"s1"})}};
}

// Exhaustive depth-first enumeration over the same Fill sets, used as the
// completeness oracle for the worklist search.
bool brute_force_finds(const NodePtr& p, const std::vector<Demonstration>& demos,
                       int max_index, int max_atoms) {
    if (!has_holes(p)) return consistent(p, demos);
    HoleRef h = list_holes(p)[0];   // plain preorder, unlike the search
    auto cands = detail::fill_impl(p, h, demos, max_index, max_atoms);
    for (const auto& c : cands)
        if (brute_force_finds(substitute_hole(p, h.ordinal, c.fill), demos,
                              max_index, max_atoms))
            return true;
    return false;
}

int count_masks(const std::string& s) {
    int n = 0;
    for (size_t pos = 0; (pos = s.find("[M]_", pos)) != std::string::npos; ++pos)
        ++n;
    return n;
}

}  // namespace

TEST_CASE("next_hole picks scan holes first, then vars, conds, indices") {
    NodePtr sk = motivating_sketch();
    auto holes = list_holes(sk);
    REQUIRE(holes.size() == 6);
    REQUIRE(holes[0].kind == HoleKind::LocType);
    REQUIRE(holes[1].kind == HoleKind::ObjType);
    REQUIRE(holes[2].kind == HoleKind::Index);
    REQUIRE(holes[5].kind == HoleKind::Cond);

    HoleRef h = next_hole(sk);
    CHECK(h.kind == HoleKind::LocType);
    CHECK(h.ordinal == 0);

    // Scan hole before the earlier-in-preorder index hole.
    NodePtr masked = masked_partial();
    h = next_hole(masked);
    CHECK(h.kind == HoleKind::ObjType);

    // Cond before index even though the index comes first in preorder.
    {
        using namespace prog;
        NodePtr p = seq({let_hole_index("v2", Scan::objects("bin")),
                         if_(CondNode::hole(), seq({act1("open", Slot::var("v2"))}))});
        HoleRef nh = next_hole(p);
        CHECK(nh.kind == HoleKind::Cond);
        CHECK(nh.ordinal == 1);
    }

    // Var before cond.
    {
        using namespace prog;
        NodePtr p = seq({let("v2", Scan::objects("bin"), 0),
                         if_(CondNode::hole(), seq({act1("open", Slot::hole("bin"))}))});
        HoleRef nh = next_hole(p);
        CHECK(nh.kind == HoleKind::Var);
    }

    // Single hole: that hole.
    {
        using namespace prog;
        NodePtr p = let_hole_index("v2", Scan::objects("bin"));
        HoleRef nh = next_hole(p);
        CHECK(nh.kind == HoleKind::Index);
        CHECK(nh.ordinal == 0);
    }

    REQUIRE_ERROR_CODE(next_hole(truth_program()), "NoHoles");
}

TEST_CASE("scope_at mirrors hole ordinals and binder regions") {
    NodePtr p = cond_only_partial();
    auto holes = list_holes(p);
    REQUIRE(holes.size() == 1);
    REQUIRE(holes[0].kind == HoleKind::Cond);

    auto scope = scope_at(p, 0);
    REQUIRE(scope.size() == 4);
    CHECK(scope[0].name == "v1");
    CHECK(scope[0].type == "room");
    CHECK_FALSE(scope[0].over_objects);
    CHECK(scope[1].name == "v2");
    CHECK(scope[1].type == "bin");
    CHECK(scope[1].let_bound);
    CHECK(scope[2].name == "v3");
    CHECK(scope[2].type == "bed");
    CHECK(scope[3].name == "v4");
    CHECK(scope[3].type == "sheet");

    // A Let's own scan and index holes do not see the Let's binder.
    {
        using namespace prog;
        NodePtr q = seq({let("a", Scan::objects("bin"), 0),
                         let_hole_index("b", Scan::obj_hole())});
        auto at_scan = scope_at(q, 0);
        REQUIRE(at_scan.size() == 1);
        CHECK(at_scan[0].name == "a");
        auto at_index = scope_at(q, 1);
        REQUIRE(at_index.size() == 1);
        CHECK(at_index[0].name == "a");
    }

    // A Foreach binder is not visible after its body ends.
    {
        using namespace prog;
        NodePtr q = seq({foreach ("x", Scan::objects("bed"),
                                  seq({act1("open", Slot::var("x"))})),
                         act1("grab", Slot::hole("bed"))});
        auto sc = scope_at(q, 0);
        CHECK(sc.empty());
    }

    REQUIRE_ERROR_CODE(scope_at(p, 7), "BadHole");
}

TEST_CASE("fill: scan types come from the vocabulary in declared order") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    NodePtr sk = motivating_sketch();

    auto locs = fill(sk, list_holes(sk)[0], demos);
    REQUIRE(locs.size() == 1);
    CHECK(locs[0].text == "room");

    auto objs = fill(sk, list_holes(sk)[1], demos);
    REQUIRE(objs.size() == 4);
    CHECK(objs[0].text == "bed");
    CHECK(objs[1].text == "sheet");
    CHECK(objs[2].text == "bin");
    CHECK(objs[3].text == "chair");
}

TEST_CASE("fill: variables in scope of the required type") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    using namespace prog;

    NodePtr p = seq({let("v2", Scan::objects("bin"), 0),
                     act1("open", Slot::hole("bin"))});
    auto cands = fill(p, list_holes(p)[0], demos);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].text == "v2");

    // Declaration order, outermost first.
    NodePtr q = foreach ("w1", Scan::objects("bin"),
                         seq({let("w2", Scan::objects("bin"), 0),
                              act1("open", Slot::hole("bin"))}));
    auto both = fill(q, list_holes(q)[0], demos);
    REQUIRE(both.size() == 2);
    CHECK(both[0].text == "w1");
    CHECK(both[1].text == "w2");

    // No in-scope variable of the required type: a dead sketch.
    NodePtr dead = seq({let("v2", Scan::objects("bin"), 0),
                        act1("grab", Slot::hole("chair"))});
    REQUIRE_ERROR_CODE(fill(dead, list_holes(dead)[0], demos),
                       "EmptyCandidateSet");
}

TEST_CASE("fill: index range is 0..max") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    using namespace prog;
    NodePtr p = let_hole_index("v2", Scan::objects("bin"));
    auto cands = fill(p, list_holes(p)[0], demos, 2);
    REQUIRE(cands.size() == 3);
    CHECK(cands[0].text == "0");
    CHECK(cands[0].fill.index == 0);
    CHECK(cands[1].text == "1");
    CHECK(cands[2].text == "2");

    auto wide = fill(p, list_holes(p)[0], demos, 4);
    REQUIRE(wide.size() == 5);
    CHECK(wide[4].text == "4");
}

TEST_CASE("fill: condition grammar over in-scope object variables") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    NodePtr p = cond_only_partial();
    HoleRef h = list_holes(p)[0];
    auto cands = fill(p, h, demos);

    // Object vars v2, v3, v4 give 3*5 prop atoms and 6 ordered pairs * 3
    // relations; location var v1 takes part in no atom.
    const int atoms = 15 + 18;
    const int singles = 2 * atoms;
    const int pairs = atoms * (atoms - 1) / 2;
    REQUIRE((int)cands.size() == singles + 2 * 4 * pairs);

    std::set<std::string> texts;
    for (const auto& c : cands) texts.insert(c.text);
    CHECK(texts.size() == cands.size());   // deduplicated

    CHECK(cands[0].text == "checkProp(dirty, v2)");
    CHECK(cands[atoms].text == "!checkProp(dirty, v2)");

    CondPtr target = CondNode::conj(
        CondNode::prop("dirty", Slot::var("v4", "sheet")),
        CondNode::rel("on-top-of", Slot::var("v4", "sheet"),
                      Slot::var("v3", "bed")));
    CHECK(texts.count(print_cond(target)) == 1);

    // No atom mentions the location variable.
    for (const auto& c : cands) CHECK(c.text.find("v1") == std::string::npos);

    // Atom bound 1: literals only.
    auto small = fill(p, h, demos, 2, 1);
    REQUIRE((int)small.size() == singles);

    // Atom bound 3 brings in three-literal chains.
    auto wide = detail::fill_impl(p, h, demos, 2, 3);
    CondPtr triple = CondNode::conj(
        CondNode::conj(CondNode::prop("dirty", Slot::var("v2", "bin")),
                       CondNode::prop("clean", Slot::var("v2", "bin"))),
        CondNode::prop("dirty", Slot::var("v3", "bed")));
    std::set<std::string> wide_texts;
    for (const auto& c : wide) wide_texts.insert(c.text);
    CHECK(wide_texts.count(print_cond(triple)) == 1);
}

TEST_CASE("render_prompt: masked motivating program, pinned") {
    NodePtr p = masked_partial();
    auto holes = list_holes(p);
    REQUIRE(holes.size() == 2);

    std::string want =
        "For each room; Go to room; Look for bins; Open a bin; "
        "For each [M]_1 do; For each sheet do; "
        "If [M]_2, grab sheet and put sheet in bin; Close bin.";
    CHECK(render_prompt(p, holes[0]) == want);
    CHECK(render_prompt(p, holes[1]) == want);
    CHECK(count_masks(render_prompt(p)) == 2);
}

TEST_CASE("render_prompt: complete program has zero masks") {
    std::string s = render_prompt(truth_program());
    CHECK(count_masks(s) == 0);
    CHECK(s ==
          "For each room; Go to room; Look for bins; Open a bin; "
          "For each bed do; For each sheet do; "
          "If sheet is dirty and sheet is on-top-of bed, "
          "grab sheet and put sheet in bin; Close bin.");
}

TEST_CASE("render_prompt: committed atom stays inline, one mask left") {
    using namespace prog;
    NodePtr p = foreach (
        "v1", Scan::locations("room"),
        seq({
            goto_(Slot::var("v1")),
            let("v2", Scan::objects("bin"), 0),
            act1("open", Slot::var("v2")),
            foreach ("v3", Scan::objects("bed"),
                     seq({
                         foreach ("v4", Scan::objects("sheet"),
                                  seq({
                                      if_(CondNode::conj(
                                              CondNode::prop("dirty",
                                                             Slot::var("v4", "sheet")),
                                              CondNode::rel_hole(
                                                  Slot::var("v4", "sheet"),
                                                  Slot::var("v3", "bed"))),
                                          seq({
                                              act1("grab", Slot::var("v4")),
                                              act2("put-in", Slot::var("v4"),
                                                   Slot::var("v2")),
                                          })),
                                  })),
                     })),
            act1("close", Slot::var("v2")),
        }));
    std::string s = render_prompt(p);
    CHECK(count_masks(s) == 1);
    CHECK(s.find("If sheet is dirty and sheet is [M]_1 bed") != std::string::npos);

    // Negated literals read as "is not".
    NodePtr q = if_(CondNode::neg(CondNode::prop("dirty", Slot::var("v", "sheet"))),
                    prog::seq({prog::act1("grab", Slot::var("v"))}));
    NodePtr wrapped = prog::foreach ("v", Scan::objects("sheet"), prog::seq({q}));
    CHECK(render_prompt(wrapped).find("sheet is not dirty") != std::string::npos);
}

TEST_CASE("render_prompt: index holes are never prompted") {
    NodePtr sk = motivating_sketch();
    auto holes = list_holes(sk);
    REQUIRE(holes[2].kind == HoleKind::Index);
    REQUIRE_ERROR_CODE(render_prompt(sk, holes[2]), "UnsupportedHoleKind");
}

TEST_CASE("co-occurrence table parsing") {
    CoocTable t = CoocTable::parse("sheet bed 2\n# comment line\n\nbin bed 0.5\n");
    CHECK(t.weight("sheet", "bed") == 2.0);
    CHECK(t.weight("bed", "sheet") == 2.0);
    CHECK(t.weight("bed", "bin") == 0.5);
    CHECK(t.weight("sheet", "bin") == 0.0);

    CHECK(CoocTable::parse("a b 1\na b 2\n").weight("a", "b") == 3.0);
    CHECK(CoocTable::parse("x y 4 # trailing comment\n").weight("x", "y") == 4.0);

    REQUIRE_ERROR_CODE(CoocTable::parse("a b\n"), "BadCooccurrence");
    REQUIRE_ERROR_CODE(CoocTable::parse("a b heavy\n"), "BadCooccurrence");
    REQUIRE_ERROR_CODE(CoocTable::parse("a b 1 extra\n"), "BadCooccurrence");
    REQUIRE_ERROR_CODE(CoocTable::load(data_path("nope.cooc")), "FileNotFound");
}

TEST_CASE("default scorer: demo presence and co-occurrence") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    using namespace prog;
    PartialProgram partial{foreach ("v4", Scan::objects("sheet"), skip()), 1.0, {}};
    HoleRef h{0, HoleKind::ObjType, ""};
    auto cand = [](const std::string& t) { return Candidate{Fill{t, -1, nullptr}, t}; };

    SECTION("co-occurrence against committed names dominates") {
        CoocTable t;
        t.add("sheet", "bed", 2.0);
        DefaultModel m(t);
        std::vector<Candidate> cs = {cand("bed"), cand("chair"), cand("mug")};
        auto ws = m.score_all(cs, partial, h, demos);
        CHECK(ws[0] == 3.0);   // 1 + cooc 2; beds never appear in the demo
        CHECK(ws[1] == 1.0);
        CHECK(ws[2] == 1.0);
        CHECK(ws[0] > ws[1]);
        CHECK(ws[0] > ws[2]);
    }

    SECTION("demo-present types get the +3 bump") {
        DefaultModel m;
        std::vector<Candidate> cs = {cand("bin"), cand("chair")};
        auto ws = m.score_all(cs, partial, h, demos);
        CHECK(ws[0] == 4.0);
        CHECK(ws[1] == 1.0);
    }

    SECTION("empty table: demo-absent candidates tie") {
        DefaultModel m;
        std::vector<Candidate> cs = {cand("bed"), cand("chair"), cand("mug")};
        auto ws = m.score_all(cs, partial, h, demos);
        CHECK(ws[0] == ws[1]);
        CHECK(ws[1] == ws[2]);
    }

    SECTION("single candidate normalizes to probability 1") {
        DefaultModel m;
        std::vector<Candidate> cs = {cand("bed")};
        auto ws = m.score_all(cs, partial, h, demos);
        CHECK(ws[0] / ws[0] == 1.0);
    }

    SECTION("score and score_all agree") {
        CoocTable t;
        t.add("sheet", "bed", 2.0);
        DefaultModel m(t);
        std::vector<Candidate> cs = {cand("bed"), cand("bin")};
        auto ws = m.score_all(cs, partial, h, demos);
        CHECK(ws[0] == m.score(cs[0], partial, h, demos));
        CHECK(ws[1] == m.score(cs[1], partial, h, demos));
    }
}

TEST_CASE("worklist: max score out, FIFO among ties") {
    Worklist wl;
    auto pp = [](double s) { return PartialProgram{prog::skip(), s, {}}; };

    PartialProgram a = pp(1.0);
    a.derivation.emplace_back(HoleRef{0, HoleKind::Var, ""}, "first");
    PartialProgram b = pp(1.0);
    b.derivation.emplace_back(HoleRef{0, HoleKind::Var, ""}, "second");

    wl.push(pp(0.5));
    wl.push(a);
    wl.push(pp(0.25));
    wl.push(b);
    REQUIRE(wl.size() == 4);

    PartialProgram x = wl.pop();
    CHECK(x.score == 1.0);
    CHECK(x.derivation[0].second == "first");
    x = wl.pop();
    CHECK(x.score == 1.0);
    CHECK(x.derivation[0].second == "second");
    CHECK(wl.pop().score == 0.5);
    CHECK(wl.pop().score == 0.25);
    REQUIRE(wl.empty());
    REQUIRE_ERROR_CODE(wl.pop(), "EmptyWorklist");

    // Randomized: pops between pushes never increase.
    std::mt19937 rng(7);
    Worklist w2;
    int pending = 0;
    for (int round = 0; round < 200; ++round) {
        if (pending == 0 || rng() % 2) {
            w2.push(pp((double)(rng() % 1000 + 1) / 1000.0));
            ++pending;
        } else {
            double prev = w2.pop().score;
            --pending;
            while (pending > 0 && rng() % 2) {
                double next = w2.pop().score;
                --pending;
                CHECK(next <= prev);
                prev = next;
            }
        }
    }
}

TEST_CASE("complete_sketch: zero-hole sketches return after one dequeue") {
    auto demos = std::vector<Demonstration>{motivating_demo()};

    auto r = complete_sketch(truth_program(), demos, DefaultModel());
    REQUIRE(r.reason == "solved");
    REQUIRE(r.program != nullptr);
    CHECK(r.stats.dequeued == 1);
    CHECK(prog_equal(r.program, truth_program()));

    // Inconsistent zero-hole sketch: dropped, worklist exhausts.
    NodePtr wrong = prog::seq({prog::act1("open", Slot::lit("bn1", "bin"))});
    auto r2 = complete_sketch(wrong, demos, DefaultModel());
    CHECK(r2.reason == "exhausted");
    CHECK(r2.program == nullptr);
    CHECK(r2.stats.dequeued == 1);
}

TEST_CASE("complete_sketch: motivating sketch solves and replays the demo") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    auto r = complete_sketch(motivating_sketch(), demos, DefaultModel());
    REQUIRE(r.reason == "solved");
    REQUIRE(r.program != nullptr);
    REQUIRE_FALSE(has_holes(r.program));

    // Independent re-check, not trusting the search's own consistency call.
    RunResult rr = run(r.program, demos[0].env);
    CHECK(rr.trace == demos[0].trace);
    CHECK(r.stats.pruned > 0);
}

TEST_CASE("complete_sketch: unconditional sketch is unrealizable, exhausts") {
    auto demos = std::vector<Demonstration>{motivating_demo()};

    CompleteOptions on;
    auto r = complete_sketch(unconditional_sketch(), demos, DefaultModel(), on);
    CHECK(r.reason == "exhausted");
    CHECK(r.program == nullptr);
    CHECK(r.stats.pruned > 0);

    CompleteOptions off;
    off.prune = false;
    auto r2 = complete_sketch(unconditional_sketch(), demos, DefaultModel(), off);
    CHECK(r2.reason == "exhausted");
    CHECK(r2.program == nullptr);

    // Pruning never hurts: it visits a subset of the partial programs.
    CHECK(r.stats.dequeued <= r2.stats.dequeued);
    CHECK(r.stats.enqueued <= r2.stats.enqueued);
}

TEST_CASE("complete_sketch: dead variable holes drop the branch quietly") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    using namespace prog;
    NodePtr dead = foreach ("v1", Scan::objects("bed"),
                            seq({act1("open", Slot::hole("chair"))}));
    for (bool prune : {true, false}) {
        CompleteOptions opt;
        opt.prune = prune;
        auto r = complete_sketch(dead, demos, DefaultModel(), opt);
        CHECK(r.reason == "exhausted");
        CHECK(r.program == nullptr);
    }
}

TEST_CASE("complete_sketch: limits trip with their reason codes") {
    auto demos = std::vector<Demonstration>{motivating_demo()};

    CompleteOptions budget;
    budget.node_budget = 3;
    auto r = complete_sketch(motivating_sketch(), demos, DefaultModel(), budget);
    CHECK(r.reason == "node-budget");
    CHECK(r.program == nullptr);
    CHECK(r.stats.enqueued == 3);

    CompleteOptions late;
    late.deadline = std::chrono::steady_clock::now() - std::chrono::milliseconds(1);
    auto r2 = complete_sketch(motivating_sketch(), demos, DefaultModel(), late);
    CHECK(r2.reason == "deadline");
    CHECK(r2.stats.dequeued == 0);

    std::atomic<bool> stop{true};
    CompleteOptions cancelled;
    cancelled.cancel = &stop;
    auto r3 = complete_sketch(motivating_sketch(), demos, DefaultModel(), cancelled);
    CHECK(r3.reason == "cancelled");
}

TEST_CASE("complete_sketch: bounded completeness against brute force") {
    auto demos = std::vector<Demonstration>{mini_demo()};

    // Realizable: dirty(v) picks exactly s1 in room r1.
    NodePtr realizable = mini_sketch();
    bool brute = brute_force_finds(realizable, demos, 2, 2);
    auto r = complete_sketch(realizable, demos, UniformModel());
    REQUIRE(brute);
    CHECK(r.reason == "solved");
    REQUIRE(r.program != nullptr);
    CHECK(consistent(r.program, demos));

    // Unrealizable: no condition, so some type grabs the wrong set.
    NodePtr unrealizable =
        prog::foreach ("v", Scan::obj_hole(),
                       prog::seq({prog::act1("grab", Slot::var("v"))}));
    bool brute2 = brute_force_finds(unrealizable, demos, 2, 2);
    auto r2 = complete_sketch(unrealizable, demos, UniformModel());
    REQUIRE_FALSE(brute2);
    CHECK(r2.reason == "exhausted");
    CHECK(r2.program == nullptr);
}

TEST_CASE("complete_sketch: scorer neutrality with pruning off") {
    auto demos = std::vector<Demonstration>{mini_demo()};
    CoocTable t;
    t.add("sheet", "bed", 5.0);
    t.add("grab", "chair", 2.0);

    auto enumerate = [&](const CompletionModel& m) {
        std::set<std::string> seen;
        CompleteOptions opt;
        opt.prune = false;
        opt.max_cond_atoms = 1;
        opt.on_complete = [&](const PartialProgram& pp) {
            seen.insert(print_program(pp.ast));
            return false;
        };
        auto r = complete_sketch(mini_sketch(), demos, m, opt);
        CHECK(r.reason == "exhausted");
        return seen;
    };

    auto uniform_set = enumerate(UniformModel());
    auto default_set = enumerate(DefaultModel(t));
    CHECK(uniform_set == default_set);
    // 4 object types, 5 single atoms plus their negations each.
    CHECK(uniform_set.size() == 4 * 10);
}

TEST_CASE("complete_sketch: scores are products of normalized steps") {
    auto demos = std::vector<Demonstration>{mini_demo()};
    std::vector<double> scores;
    CompleteOptions opt;
    opt.prune = false;
    opt.max_cond_atoms = 1;
    opt.on_complete = [&](const PartialProgram& pp) {
        REQUIRE(pp.derivation.size() == 2);
        scores.push_back(pp.score);
        return false;
    };
    auto r = complete_sketch(mini_sketch(), demos, UniformModel(), opt);
    REQUIRE(r.reason == "exhausted");
    REQUIRE(scores.size() == 40);
    for (double s : scores) {
        CHECK(s > 0.0);
        CHECK(s <= 1.0);
        // Uniform scorer: 1/4 for the scan type, 1/10 for the condition.
        CHECK_THAT(s, Catch::Matchers::WithinRel(0.025, 1e-12));
    }
}

TEST_CASE("http scorer falls back to the default model when unreachable") {
    auto demos = std::vector<Demonstration>{motivating_demo()};
    using namespace prog;
    PartialProgram partial{foreach ("v4", Scan::objects("sheet"), skip()), 1.0, {}};
    HoleRef h{0, HoleKind::ObjType, ""};
    auto cand = [](const std::string& t) { return Candidate{Fill{t, -1, nullptr}, t}; };
    std::vector<Candidate> cs = {cand("bin"), cand("chair")};

    HttpModel http("http://127.0.0.1:9/score");
    DefaultModel dflt;
    CHECK(http.name() == "http");
    CHECK(http.score_all(cs, partial, h, demos) ==
          dflt.score_all(cs, partial, h, demos));
    CHECK(http.score(cs[0], partial, h, demos) ==
          dflt.score(cs[0], partial, h, demos));
}

TEST_CASE("http scorer uses endpoint scores when the endpoint answers") {
    httplib::Server svr;
    std::string got_prompt;
    svr.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        got_prompt = body.at("prompt").get<std::string>();
        nlohmann::json scores = nlohmann::json::object();
        for (const auto& c : body.at("candidates")) {
            std::string t = c.get<std::string>();
            scores[t] = (t == "chair") ? 9.0 : 0.5;
        }
        res.set_content(nlohmann::json{{"scores", scores}}.dump(),
                        "application/json");
    });
    int port = svr.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        SUCCEED("loopback listen unavailable in this environment");
        return;
    }
    std::thread th([&] { svr.listen_after_bind(); });
    svr.wait_until_ready();

    auto demos = std::vector<Demonstration>{motivating_demo()};
    NodePtr p = prog::foreach ("v4", Scan::obj_hole(), prog::skip());
    PartialProgram partial{p, 1.0, {}};
    HoleRef h = list_holes(p)[0];
    auto cand = [](const std::string& t) { return Candidate{Fill{t, -1, nullptr}, t}; };
    std::vector<Candidate> cs = {cand("bin"), cand("chair")};

    HttpModel http("http://127.0.0.1:" + std::to_string(port) + "/score");
    auto ws = http.score_all(cs, partial, h, demos);
    svr.stop();
    th.join();

    REQUIRE(ws.size() == 2);
    CHECK(ws[0] == 0.5);
    CHECK(ws[1] == 9.0);
    CHECK(got_prompt == "For each [M]_1.");
}

TEST_CASE("http scorer rejects nonpositive endpoint scores") {
    httplib::Server svr;
    svr.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json scores = nlohmann::json::object();
        for (const auto& c : body.at("candidates"))
            scores[c.get<std::string>()] = -1.0;
        res.set_content(nlohmann::json{{"scores", scores}}.dump(),
                        "application/json");
    });
    int port = svr.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        SUCCEED("loopback listen unavailable in this environment");
        return;
    }
    std::thread th([&] { svr.listen_after_bind(); });
    svr.wait_until_ready();

    auto demos = std::vector<Demonstration>{motivating_demo()};
    using namespace prog;
    PartialProgram partial{foreach ("v4", Scan::objects("sheet"), skip()), 1.0, {}};
    HoleRef h{0, HoleKind::ObjType, ""};
    auto cand = [](const std::string& t) { return Candidate{Fill{t, -1, nullptr}, t}; };
    std::vector<Candidate> cs = {cand("bin"), cand("chair")};

    HttpModel http("http://127.0.0.1:" + std::to_string(port) + "/score");
    DefaultModel dflt;
    auto ws = http.score_all(cs, partial, h, demos);
    svr.stop();
    th.join();

    CHECK(ws == dflt.score_all(cs, partial, h, demos));
}
