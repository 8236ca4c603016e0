#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "tracelearn/sketcher.hpp"

using namespace tracelearn;

namespace {

const char* kMotivatingRegex =
    "(G[room] A[open,bin] (((A[grab,sheet] A[put-in,sheet,bin])?)*)* "
    "A[close,bin])*";

const char* kFigureSketch =
    "foreach (v1 in scanLoc(??)) {\n"
    "  goto(??:room);\n"
    "  let v4 := getNth(scanObj(bin), ??);\n"
    "  actUnary(open, ??:bin);\n"
    "  foreach (v2 in scanObj(??)) {\n"
    "    foreach (v3 in scanObj(??)) {\n"
    "      if (??) {\n"
    "        actUnary(grab, ??:sheet);\n"
    "        actBinary(put-in, ??:sheet, ??:bin);\n"
    "      }\n"
    "    }\n"
    "  }\n"
    "  actUnary(close, ??:bin);\n"
    "}\n";

const char* kFigureSketchNoLet =
    "foreach (v1 in scanLoc(??)) {\n"
    "  goto(??:room);\n"
    "  actUnary(open, ??:bin);\n"
    "  foreach (v2 in scanObj(??)) {\n"
    "    foreach (v3 in scanObj(??)) {\n"
    "      if (??) {\n"
    "        actUnary(grab, ??:sheet);\n"
    "        actBinary(put-in, ??:sheet, ??:bin);\n"
    "      }\n"
    "    }\n"
    "  }\n"
    "  actUnary(close, ??:bin);\n"
    "}\n";

std::vector<Sketch> take(SketchStream& st, size_t n) {
    std::vector<Sketch> out;
    while (out.size() < n) {
        auto s = st.next();
        if (!s) break;
        out.push_back(*s);
    }
    return out;
}

std::vector<Sketch> drain(RegexPtr r, int max_extra, size_t cap = 100000) {
    SketchStream st(std::move(r), max_extra);
    return take(st, cap);
}

struct HoleCounts {
    int loop_scans = 0;
    int args = 0;
    int conds = 0;
    int let_scans = 0;
    int let_indices = 0;

    int total() const {
        return loop_scans + args + conds + let_scans + let_indices;
    }
};

void count_holes(const NodePtr& n, HoleCounts& c) {
    switch (n->kind) {
        case ProgramNode::Kind::ActUnary:
            c.args += n->arg1.is_hole();
            break;
        case ProgramNode::Kind::ActBinary:
            c.args += n->arg1.is_hole();
            c.args += n->arg2.is_hole();
            break;
        case ProgramNode::Kind::Goto:
            c.args += n->arg1.is_hole();
            break;
        case ProgramNode::Kind::If:
            c.conds += (n->cond && n->cond->kind == CondNode::Kind::Hole);
            count_holes(n->body, c);
            break;
        case ProgramNode::Kind::Foreach:
            c.loop_scans += n->scan.is_hole;
            count_holes(n->body, c);
            break;
        case ProgramNode::Kind::Let:
            c.let_scans += n->scan.is_hole;
            c.let_indices += n->index_is_hole;
            break;
        case ProgramNode::Kind::Seq:
            for (const auto& k : n->seq) count_holes(k, c);
            break;
        default:
            break;
    }
}

void collect_binders(const NodePtr& n, std::vector<std::string>& out) {
    switch (n->kind) {
        case ProgramNode::Kind::Let:
            out.push_back(n->var);
            break;
        case ProgramNode::Kind::Foreach:
            out.push_back(n->var);
            collect_binders(n->body, out);
            break;
        case ProgramNode::Kind::If:
            collect_binders(n->body, out);
            break;
        case ProgramNode::Kind::Seq:
            for (const auto& k : n->seq) collect_binders(k, out);
            break;
        default:
            break;
    }
}

// Erases lets and maps the sketch skeleton back onto a regex.
RegexPtr erase_to_regex(const NodePtr& n) {
    switch (n->kind) {
        case ProgramNode::Kind::ActUnary:
            return rx::tok(Token::act(n->action, n->arg1.type));
        case ProgramNode::Kind::ActBinary:
            return rx::tok(Token::act(n->action, n->arg1.type, n->arg2.type));
        case ProgramNode::Kind::Goto:
            return rx::tok(Token::go(n->arg1.type));
        case ProgramNode::Kind::If:
            return rx::opt(erase_to_regex(n->body));
        case ProgramNode::Kind::Foreach:
            return rx::star(erase_to_regex(n->body));
        case ProgramNode::Kind::Seq: {
            std::vector<RegexPtr> kids;
            for (const auto& k : n->seq) kids.push_back(erase_to_regex(k));
            return rx::concat(std::move(kids));
        }
        default:
            return rx::eps();
    }
}

void collect_tokens(const RegexPtr& r, std::vector<Token>& out) {
    if (r->kind == Regex::Kind::Tok) {
        for (const auto& t : out)
            if (t == r->tok) return;
        out.push_back(r->tok);
        return;
    }
    for (const auto& k : r->kids) collect_tokens(k, out);
}

void all_strings(const std::vector<Token>& alphabet, size_t max_len,
                 AbstractString& cur, std::vector<AbstractString>& out) {
    out.push_back(cur);
    if (cur.size() == max_len) return;
    for (const auto& t : alphabet) {
        cur.push_back(t);
        all_strings(alphabet, max_len, cur, out);
        cur.pop_back();
    }
}

// Exhaustive oracle: can a single committed-type let make p complete?
bool one_let_fixable(const NodePtr& p, const std::vector<Scan>& scans) {
    std::vector<std::pair<std::vector<int>, int>> slots;
    std::vector<int> addr;
    detail::collect_slots(detail::block_stmts(p), addr, slots);
    for (const auto& slot : slots) {
        for (const Scan& s : scans) {
            std::vector<detail::LetInsert> ins{{slot.first, slot.second, s, 0}};
            int counter = detail::count_binders(p);
            NodePtr q = detail::insert_lets(p, ins, counter);
            if (is_perception_complete(q)) return true;
        }
    }
    return false;
}

std::vector<Scan> committed_scans() {
    std::vector<Scan> out;
    for (const char* t : {"room", "bin", "sheet"}) {
        out.push_back(Scan::objects(t));
        out.push_back(Scan::locations(t));
    }
    return out;
}

}  // namespace

TEST_CASE("motivating regex yields the nested-loop sketch early") {
    RegexPtr r = regex_parse(kMotivatingRegex);
    SketchStream st(r);
    auto sketches = take(st, 2);
    REQUIRE(sketches.size() == 2);

    // all-object skeletons come first: object scan holes satisfy every
    // object use optimistically, so only the goto needs a repair let, and
    // zero loc-loops orders before the location-outer skeleton
    NodePtr obj_outer = parse_program(
        "foreach (v1 in scanObj(??)) {\n"
        "  let v4 := getNth(scanLoc(room), ??);\n"
        "  goto(??:room);\n"
        "  actUnary(open, ??:bin);\n"
        "  foreach (v2 in scanObj(??)) {\n"
        "    foreach (v3 in scanObj(??)) {\n"
        "      if (??) {\n"
        "        actUnary(grab, ??:sheet);\n"
        "        actBinary(put-in, ??:sheet, ??:bin);\n"
        "      }\n"
        "    }\n"
        "  }\n"
        "  actUnary(close, ??:bin);\n"
        "}\n");
    INFO(print_program(sketches[0].prog));
    CHECK(prog_equal(sketches[0].prog, obj_outer));
    CHECK(sketches[0].repair_lets == 1);
    CHECK(sketches[0].loc_loops == 0);

    NodePtr expected = parse_program(kFigureSketch);
    INFO(print_program(sketches[1].prog));
    CHECK(prog_equal(sketches[1].prog, expected));
    CHECK(sketches[1].repair_lets == 1);
    CHECK(sketches[1].extra_lets == 0);
    CHECK(sketches[1].loc_loops == 1);
    CHECK(sketches[1].lets_inserted() == 1);
    CHECK(regex_equal(sketches[1].origin, r));
}

TEST_CASE("single goto token becomes a loopless sketch with one repair let") {
    auto sketches = drain(regex_parse("G[room]"), kDefaultMaxExtraLets);
    REQUIRE(!sketches.empty());
    NodePtr expected = parse_program(
        "let v1 := getNth(scanLoc(room), ??);\n"
        "goto(??:room);\n");
    INFO(print_program(sketches[0].prog));
    CHECK(prog_equal(sketches[0].prog, expected));
    CHECK(sketches[0].repair_lets == 1);
    CHECK(sketches[0].loc_loops == 0);

    // two slots, each taking scanObj or scanLoc: 4 single lets plus
    // 10 multisets of two
    REQUIRE(sketches.size() == 15);
    for (size_t i = 0; i < sketches.size(); ++i) {
        int extra = i == 0 ? 0 : (i <= 4 ? 1 : 2);
        CHECK(sketches[i].extra_lets == extra);
    }
}

TEST_CASE("two stars produce exactly four skeletons before let variants") {
    auto sketches =
        drain(regex_parse("(G[room])* (A[grab,sheet])*"), kDefaultMaxExtraLets, 40);
    REQUIRE(sketches.size() >= 5);
    for (int i = 0; i < 4; ++i) CHECK(sketches[i].extra_lets == 0);
    CHECK(sketches[4].extra_lets > 0);

    std::set<std::string> shapes;
    for (int i = 0; i < 4; ++i) shapes.insert(print_program(sketches[i].prog));
    CHECK(shapes.size() == 4);

    // preferred kinds first: loc loop over rooms, obj loop over sheets
    NodePtr expected = parse_program(
        "foreach (v1 in scanLoc(??)) {\n"
        "  goto(??:room);\n"
        "}\n"
        "foreach (v2 in scanObj(??)) {\n"
        "  actUnary(grab, ??:sheet);\n"
        "}\n");
    CHECK(prog_equal(sketches[0].prog, expected));
    CHECK(sketches[0].repair_lets == 0);

    int repair[4];
    int locs[4];
    for (int i = 0; i < 4; ++i) {
        repair[i] = sketches[i].repair_lets;
        locs[i] = sketches[i].loc_loops;
    }
    CHECK(repair[0] == 0);
    CHECK(locs[0] == 1);
    CHECK(repair[1] == 1);
    CHECK(locs[1] == 0);
    CHECK(repair[2] == 1);
    CHECK(locs[2] == 2);
    CHECK(repair[3] == 2);
    CHECK(locs[3] == 1);
}

TEST_CASE("perception completeness identifies the first unperceived use") {
    NodePtr broken = parse_program(kFigureSketchNoLet);
    PerceptionNeed w;
    REQUIRE_FALSE(is_perception_complete(broken, &w));
    CHECK(w.stmt->kind == ProgramNode::Kind::ActUnary);
    CHECK(w.stmt->action == "open");
    CHECK(w.type == "bin");
    CHECK_FALSE(w.want_location);

    CHECK(is_perception_complete(parse_program(kFigureSketch)));
    CHECK(is_perception_complete(prog::skip()));
    CHECK(is_perception_complete(
        parse_program("foreach (v1 in scanObj(??)) {\n  skip;\n}\n")));

    PerceptionNeed g;
    REQUIRE_FALSE(is_perception_complete(parse_program("goto(??:room);"), &g));
    CHECK(g.stmt->kind == ProgramNode::Kind::Goto);
    CHECK(g.want_location);
    CHECK(g.type == "room");

    // a location scan does not perceive objects of the same type name
    CHECK_FALSE(is_perception_complete(parse_program(
        "let v1 := getNth(scanLoc(bin), ??);\nactUnary(open, ??:bin);")));
    // a committed scan of a different type does not satisfy the use
    CHECK_FALSE(is_perception_complete(parse_program(
        "let v1 := getNth(scanObj(sheet), ??);\nactUnary(open, ??:bin);")));
    // an uncommitted scan hole satisfies it optimistically
    CHECK(is_perception_complete(parse_program(
        "let v1 := getNth(scanObj(??), ??);\nactUnary(open, ??:bin);")));
}

TEST_CASE("let scope ends with its block") {
    // the let inside the if body must not satisfy the later use
    NodePtr p = parse_program(
        "if (??) {\n"
        "  let v1 := getNth(scanObj(bin), ??);\n"
        "  actUnary(open, ??:bin);\n"
        "}\n"
        "actUnary(close, ??:bin);\n");
    PerceptionNeed w;
    REQUIRE_FALSE(is_perception_complete(p, &w));
    CHECK(w.stmt->action == "close");

    // loop scans are visible inside the body only
    NodePtr q = parse_program(
        "foreach (v1 in scanObj(bin)) {\n"
        "  skip;\n"
        "}\n"
        "actUnary(open, ??:bin);\n");
    REQUIRE_FALSE(is_perception_complete(q));
}

TEST_CASE("repair restores the figure sketch exactly") {
    NodePtr broken = parse_program(kFigureSketchNoLet);
    int added = 0;
    NodePtr fixed = repair_perception(broken, &added);
    CHECK(added == 1);
    INFO(print_program(fixed));
    CHECK(prog_equal(fixed, parse_program(kFigureSketch)));
    REQUIRE(is_perception_complete(fixed));

    NodePtr complete = parse_program(kFigureSketch);
    CHECK(repair_perception(complete).get() == complete.get());
}

TEST_CASE("repair is minimal against exhaustive insertion") {
    NodePtr broken = parse_program(kFigureSketchNoLet);
    REQUIRE_FALSE(is_perception_complete(broken));
    CHECK(one_let_fixable(broken, committed_scans()));

    NodePtr two = parse_program(
        "actUnary(open, ??:bin);\nactUnary(grab, ??:sheet);\n");
    CHECK_FALSE(one_let_fixable(two, committed_scans()));
    int added = 0;
    NodePtr fixed = repair_perception(two, &added);
    CHECK(added == 2);
    REQUIRE(is_perception_complete(fixed));
    NodePtr expected = parse_program(
        "let v1 := getNth(scanObj(bin), ??);\n"
        "actUnary(open, ??:bin);\n"
        "let v2 := getNth(scanObj(sheet), ??);\n"
        "actUnary(grab, ??:sheet);\n");
    INFO(print_program(fixed));
    CHECK(prog_equal(fixed, expected));
}

TEST_CASE("repair covers all uses from the shallowest common scope") {
    // both loops act on bins; the let must land before the first loop,
    // not inside either one
    NodePtr p = parse_program(
        "foreach (v1 in scanLoc(??)) {\n"
        "  actUnary(open, ??:bin);\n"
        "}\n"
        "foreach (v2 in scanLoc(??)) {\n"
        "  actUnary(close, ??:bin);\n"
        "}\n");
    int added = 0;
    NodePtr fixed = repair_perception(p, &added);
    CHECK(added == 1);
    REQUIRE(is_perception_complete(fixed));
    NodePtr expected = parse_program(
        "let v3 := getNth(scanObj(bin), ??);\n"
        "foreach (v1 in scanLoc(??)) {\n"
        "  actUnary(open, ??:bin);\n"
        "}\n"
        "foreach (v2 in scanLoc(??)) {\n"
        "  actUnary(close, ??:bin);\n"
        "}\n");
    INFO(print_program(fixed));
    CHECK(prog_equal(fixed, expected));
}

TEST_CASE("alternation and bounded repetition are rejected") {
    REQUIRE_ERROR_CODE(SketchStream(regex_parse("A[grab,sheet] | A[close,bin]")),
                       "AltPresent");
    REQUIRE_ERROR_CODE(SketchStream(regex_parse("A[grab,sheet]^2")),
                       "UnsupportedRegex");
}

TEST_CASE("emitted sketches are complete, scope valid, and countable") {
    RegexPtr r = regex_parse(kMotivatingRegex);
    SketchStream st(r);
    auto sketches = take(st, 60);
    REQUIRE(sketches.size() == 60);
    for (const auto& s : sketches) {
        CAPTURE(print_program(s.prog));
        CHECK(is_perception_complete(s.prog));

        NodePtr reparsed = parse_program(print_program(s.prog));
        CHECK(prog_equal(reparsed, s.prog));

        HoleCounts c;
        count_holes(s.prog, c);
        CHECK(static_cast<int>(list_holes(s.prog).size()) == c.total());
        // every loop scan, act arg, and cond of a sketch is a hole; every
        // let carries an index hole
        CHECK(c.let_indices == s.lets_inserted());
        CHECK(c.let_scans == s.extra_lets);

        std::vector<std::string> binders;
        collect_binders(s.prog, binders);
        std::set<std::string> unique(binders.begin(), binders.end());
        CHECK(unique.size() == binders.size());
    }
}

TEST_CASE("stream order is phase major then let count") {
    auto sketches = drain(regex_parse(kMotivatingRegex), 2, 400);
    bool saw_extra = false;
    int prev_repair = -1;
    int prev_locs = -1;
    int prev_variant_total = -1;
    for (const auto& s : sketches) {
        if (s.extra_lets > 0) {
            saw_extra = true;
            CHECK(s.lets_inserted() >= prev_variant_total);
            prev_variant_total = s.lets_inserted();
        } else {
            REQUIRE_FALSE(saw_extra);
            bool ordered =
                std::tie(prev_repair, prev_locs) <=
                std::tie(s.repair_lets, s.loc_loops);
            CHECK(ordered);
            prev_repair = s.repair_lets;
            prev_locs = s.loc_loops;
        }
    }
    CHECK(saw_extra);
}

TEST_CASE("erasing lets recovers the originating regex language") {
    for (const char* txt :
         {kMotivatingRegex, "(G[room])* (A[grab,sheet])*",
          "G[room] (A[open,bin] A[close,bin]?)*"}) {
        RegexPtr origin = regex_parse(txt);
        std::vector<Token> alphabet;
        collect_tokens(origin, alphabet);
        std::vector<AbstractString> strings;
        AbstractString cur;
        all_strings(alphabet, 4, cur, strings);

        auto sketches = drain(origin, 2, 12);
        REQUIRE(!sketches.empty());
        for (const auto& s : sketches) {
            RegexPtr back = erase_to_regex(s.prog);
            CAPTURE(txt, print_program(s.prog), regex_print(back));
            for (const auto& str : strings)
                CHECK(matches(back, str) == matches(origin, str));
        }
    }
}

TEST_CASE("max extra lets zero stops after the skeletons") {
    auto sketches = drain(regex_parse("(G[room])* (A[grab,sheet])*"), 0);
    CHECK(sketches.size() == 4);
    for (const auto& s : sketches) CHECK(s.extra_lets == 0);
}
