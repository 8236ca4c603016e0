#pragma once

// The policy language: programs over typed scans with loops, conditionals,
// let bindings, and typed holes, plus the reference interpreter.

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tracelearn/env.hpp"

namespace tracelearn {

enum class HoleKind { ObjType, LocType, Var, Cond, Index, PropName, RelName };

inline const char* hole_kind_name(HoleKind k) {
    switch (k) {
        case HoleKind::ObjType: return "objtype";
        case HoleKind::LocType: return "loctype";
        case HoleKind::Var: return "var";
        case HoleKind::Cond: return "cond";
        case HoleKind::Index: return "index";
        case HoleKind::PropName: return "propname";
        case HoleKind::RelName: return "relname";
    }
    return "?";
}

// An argument position: a variable reference, a ground entity id (these only
// appear in partially evaluated programs), or a typed hole.
struct Slot {
    enum class Tag { Var, Literal, Hole };
    Tag tag = Tag::Hole;
    std::string name;   // variable name or entity id
    std::string type;   // committed entity type; may be empty when unknown

    static Slot var(std::string n, std::string t = "") {
        return Slot{Tag::Var, std::move(n), std::move(t)};
    }
    static Slot lit(std::string n, std::string t = "") {
        return Slot{Tag::Literal, std::move(n), std::move(t)};
    }
    static Slot hole(std::string t) { return Slot{Tag::Hole, "", std::move(t)}; }

    bool is_hole() const { return tag == Tag::Hole; }
    bool operator==(const Slot&) const = default;
};

struct Scan {
    bool over_objects = true;   // scanObj vs scanLoc
    std::string type;           // committed type; empty while a hole
    bool is_hole = false;

    static Scan objects(std::string t) { return Scan{true, std::move(t), false}; }
    static Scan locations(std::string t) { return Scan{false, std::move(t), false}; }
    static Scan obj_hole() { return Scan{true, "", true}; }
    static Scan loc_hole() { return Scan{false, "", true}; }

    bool operator==(const Scan&) const = default;
};

struct CondNode;
using CondPtr = std::shared_ptr<const CondNode>;

struct CondNode {
    enum class Kind { Prop, Rel, And, Or, Not, Hole };
    Kind kind = Kind::Hole;
    std::string name;           // property / relation name
    bool name_is_hole = false;
    Slot a, b;                  // Prop uses a; Rel uses a and b
    CondPtr l, r;               // And/Or children; Not uses l

    static CondPtr prop(std::string p, Slot v) {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::Prop;
        n->name = std::move(p);
        n->a = std::move(v);
        return n;
    }
    static CondPtr prop_hole(Slot v) {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::Prop;
        n->name_is_hole = true;
        n->a = std::move(v);
        return n;
    }
    static CondPtr rel(std::string r_, Slot x, Slot y) {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::Rel;
        n->name = std::move(r_);
        n->a = std::move(x);
        n->b = std::move(y);
        return n;
    }
    static CondPtr rel_hole(Slot x, Slot y) {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::Rel;
        n->name_is_hole = true;
        n->a = std::move(x);
        n->b = std::move(y);
        return n;
    }
    static CondPtr conj(CondPtr x, CondPtr y) {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::And;
        n->l = std::move(x);
        n->r = std::move(y);
        return n;
    }
    static CondPtr disj(CondPtr x, CondPtr y) {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::Or;
        n->l = std::move(x);
        n->r = std::move(y);
        return n;
    }
    static CondPtr neg(CondPtr x) {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::Not;
        n->l = std::move(x);
        return n;
    }
    static CondPtr hole() {
        auto n = std::make_shared<CondNode>();
        n->kind = Kind::Hole;
        return n;
    }
};

inline bool cond_equal(const CondPtr& a, const CondPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind || a->name != b->name ||
        a->name_is_hole != b->name_is_hole || !(a->a == b->a) || !(a->b == b->b))
        return false;
    return cond_equal(a->l, b->l) && cond_equal(a->r, b->r);
}

struct ProgramNode;
using NodePtr = std::shared_ptr<const ProgramNode>;

struct ProgramNode {
    enum class Kind {
        Skip,
        ActUnary,
        ActBinary,
        Goto,
        If,
        Foreach,
        Let,
        Seq,
        Infeasible,   // partial evaluation found a guaranteed runtime failure
    };
    Kind kind = Kind::Skip;
    std::string action;          // ActUnary / ActBinary
    Slot arg1, arg2;             // action args; Goto target in arg1
    CondPtr cond;                // If
    std::string var;             // Foreach / Let binder
    Scan scan;                   // Foreach / Let
    int index = -1;              // Let: getNth position
    bool index_is_hole = false;
    NodePtr body;                // If / Foreach
    std::vector<NodePtr> seq;    // Seq children
};

namespace prog {

inline NodePtr skip() {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::Skip;
    return n;
}
inline NodePtr infeasible() {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::Infeasible;
    return n;
}
inline NodePtr act1(std::string a, Slot x) {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::ActUnary;
    n->action = std::move(a);
    n->arg1 = std::move(x);
    return n;
}
inline NodePtr act2(std::string a, Slot x, Slot y) {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::ActBinary;
    n->action = std::move(a);
    n->arg1 = std::move(x);
    n->arg2 = std::move(y);
    return n;
}
inline NodePtr goto_(Slot target) {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::Goto;
    n->arg1 = std::move(target);
    return n;
}
inline NodePtr if_(CondPtr c, NodePtr body) {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::If;
    n->cond = std::move(c);
    n->body = std::move(body);
    return n;
}
inline NodePtr foreach (std::string v, Scan s, NodePtr body) {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::Foreach;
    n->var = std::move(v);
    n->scan = std::move(s);
    n->body = std::move(body);
    return n;
}
inline NodePtr let(std::string v, Scan s, int index, bool index_hole = false) {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::Let;
    n->var = std::move(v);
    n->scan = std::move(s);
    n->index = index;
    n->index_is_hole = index_hole;
    return n;
}
inline NodePtr let_hole_index(std::string v, Scan s) {
    return let(std::move(v), std::move(s), -1, true);
}
inline NodePtr seq(std::vector<NodePtr> children) {
    auto n = std::make_shared<ProgramNode>();
    n->kind = ProgramNode::Kind::Seq;
    n->seq = std::move(children);
    return n;
}

}  // namespace prog

inline bool prog_equal(const NodePtr& a, const NodePtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind || a->action != b->action || !(a->arg1 == b->arg1) ||
        !(a->arg2 == b->arg2) || a->var != b->var || !(a->scan == b->scan) ||
        a->index != b->index || a->index_is_hole != b->index_is_hole)
        return false;
    if (!cond_equal(a->cond, b->cond)) return false;
    if (!prog_equal(a->body, b->body)) return false;
    if (a->seq.size() != b->seq.size()) return false;
    for (size_t i = 0; i < a->seq.size(); ++i)
        if (!prog_equal(a->seq[i], b->seq[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Hole enumeration and substitution.
//
// Holes are addressed by their ordinal in a canonical preorder walk: scans
// before loop bodies, a Let's scan before its index, an If's condition before
// its body, action arguments left to right.

struct HoleRef {
    int ordinal = -1;
    HoleKind kind = HoleKind::Var;
    std::string expected_type;   // Var holes only
};

namespace detail {

inline void collect_cond_holes(const CondPtr& c, std::vector<HoleRef>& out) {
    if (!c) return;
    switch (c->kind) {
        case CondNode::Kind::Hole:
            out.push_back({(int)out.size(), HoleKind::Cond, ""});
            break;
        case CondNode::Kind::Prop:
            if (c->name_is_hole) out.push_back({(int)out.size(), HoleKind::PropName, ""});
            if (c->a.is_hole()) out.push_back({(int)out.size(), HoleKind::Var, c->a.type});
            break;
        case CondNode::Kind::Rel:
            if (c->name_is_hole) out.push_back({(int)out.size(), HoleKind::RelName, ""});
            if (c->a.is_hole()) out.push_back({(int)out.size(), HoleKind::Var, c->a.type});
            if (c->b.is_hole()) out.push_back({(int)out.size(), HoleKind::Var, c->b.type});
            break;
        case CondNode::Kind::Not:
            collect_cond_holes(c->l, out);
            break;
        case CondNode::Kind::And:
        case CondNode::Kind::Or:
            collect_cond_holes(c->l, out);
            collect_cond_holes(c->r, out);
            break;
    }
}

inline void collect_holes(const NodePtr& n, std::vector<HoleRef>& out) {
    if (!n) return;
    auto scan_hole = [&](const Scan& s) {
        if (s.is_hole)
            out.push_back({(int)out.size(),
                           s.over_objects ? HoleKind::ObjType : HoleKind::LocType, ""});
    };
    auto slot_hole = [&](const Slot& s) {
        if (s.is_hole()) out.push_back({(int)out.size(), HoleKind::Var, s.type});
    };
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
        case ProgramNode::Kind::Infeasible:
            break;
        case ProgramNode::Kind::ActUnary:
            slot_hole(n->arg1);
            break;
        case ProgramNode::Kind::ActBinary:
            slot_hole(n->arg1);
            slot_hole(n->arg2);
            break;
        case ProgramNode::Kind::Goto:
            slot_hole(n->arg1);
            break;
        case ProgramNode::Kind::If:
            collect_cond_holes(n->cond, out);
            collect_holes(n->body, out);
            break;
        case ProgramNode::Kind::Foreach:
            scan_hole(n->scan);
            collect_holes(n->body, out);
            break;
        case ProgramNode::Kind::Let:
            scan_hole(n->scan);
            if (n->index_is_hole) out.push_back({(int)out.size(), HoleKind::Index, ""});
            break;
        case ProgramNode::Kind::Seq:
            for (const auto& c : n->seq) collect_holes(c, out);
            break;
    }
}

}  // namespace detail

inline std::vector<HoleRef> list_holes(const NodePtr& p) {
    std::vector<HoleRef> out;
    detail::collect_holes(p, out);
    return out;
}

inline bool has_holes(const NodePtr& p) { return !list_holes(p).empty(); }

// A fill value for one hole. Which members matter depends on the hole's kind.
struct Fill {
    std::string text;   // type / variable / property / relation name
    int index = -1;     // Index holes
    CondPtr cond;       // Cond holes
};

namespace detail {

inline CondPtr subst_cond(const CondPtr& c, int& remaining, const Fill& f, bool& done);

inline Slot subst_slot(const Slot& s, int& remaining, const Fill& f, bool& done) {
    if (done || !s.is_hole()) return s;
    if (remaining-- == 0) {
        done = true;
        return Slot::var(f.text, s.type);
    }
    return s;
}

inline CondPtr subst_cond(const CondPtr& c, int& remaining, const Fill& f, bool& done) {
    if (!c || done) return c;
    switch (c->kind) {
        case CondNode::Kind::Hole:
            if (remaining-- == 0) {
                done = true;
                return f.cond;
            }
            return c;
        case CondNode::Kind::Prop:
        case CondNode::Kind::Rel: {
            CondNode copy = *c;
            bool changed = false;
            if (c->name_is_hole && remaining-- == 0) {
                done = true;
                copy.name = f.text;
                copy.name_is_hole = false;
                changed = true;
            }
            Slot a = subst_slot(copy.a, remaining, f, done);
            if (!(a == copy.a)) { copy.a = a; changed = true; }
            if (c->kind == CondNode::Kind::Rel) {
                Slot b = subst_slot(copy.b, remaining, f, done);
                if (!(b == copy.b)) { copy.b = b; changed = true; }
            }
            return changed ? std::make_shared<CondNode>(copy) : c;
        }
        case CondNode::Kind::Not: {
            CondPtr l = subst_cond(c->l, remaining, f, done);
            if (l == c->l) return c;
            CondNode copy = *c;
            copy.l = l;
            return std::make_shared<CondNode>(copy);
        }
        case CondNode::Kind::And:
        case CondNode::Kind::Or: {
            CondPtr l = subst_cond(c->l, remaining, f, done);
            CondPtr r = subst_cond(c->r, remaining, f, done);
            if (l == c->l && r == c->r) return c;
            CondNode copy = *c;
            copy.l = l;
            copy.r = r;
            return std::make_shared<CondNode>(copy);
        }
    }
    return c;
}

inline NodePtr subst_node(const NodePtr& n, int& remaining, const Fill& f, bool& done) {
    if (!n || done) return n;
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
        case ProgramNode::Kind::Infeasible:
            return n;
        case ProgramNode::Kind::ActUnary:
        case ProgramNode::Kind::ActBinary:
        case ProgramNode::Kind::Goto: {
            ProgramNode copy = *n;
            bool changed = false;
            Slot a = subst_slot(copy.arg1, remaining, f, done);
            if (!(a == copy.arg1)) { copy.arg1 = a; changed = true; }
            if (n->kind == ProgramNode::Kind::ActBinary) {
                Slot b = subst_slot(copy.arg2, remaining, f, done);
                if (!(b == copy.arg2)) { copy.arg2 = b; changed = true; }
            }
            return changed ? std::make_shared<ProgramNode>(copy) : n;
        }
        case ProgramNode::Kind::If: {
            CondPtr c = subst_cond(n->cond, remaining, f, done);
            NodePtr b = subst_node(n->body, remaining, f, done);
            if (c == n->cond && b == n->body) return n;
            ProgramNode copy = *n;
            copy.cond = c;
            copy.body = b;
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::Foreach: {
            ProgramNode copy = *n;
            bool changed = false;
            if (n->scan.is_hole) {
                if (remaining-- == 0) {
                    done = true;
                    copy.scan.type = f.text;
                    copy.scan.is_hole = false;
                    changed = true;
                }
            }
            NodePtr b = subst_node(copy.body, remaining, f, done);
            if (b != copy.body) { copy.body = b; changed = true; }
            return changed ? std::make_shared<ProgramNode>(copy) : n;
        }
        case ProgramNode::Kind::Let: {
            ProgramNode copy = *n;
            bool changed = false;
            if (n->scan.is_hole) {
                if (remaining-- == 0) {
                    done = true;
                    copy.scan.type = f.text;
                    copy.scan.is_hole = false;
                    changed = true;
                }
            }
            if (!done && n->index_is_hole) {
                if (remaining-- == 0) {
                    done = true;
                    copy.index = f.index;
                    copy.index_is_hole = false;
                    changed = true;
                }
            }
            return changed ? std::make_shared<ProgramNode>(copy) : n;
        }
        case ProgramNode::Kind::Seq: {
            std::vector<NodePtr> kids = n->seq;
            bool changed = false;
            for (auto& k : kids) {
                NodePtr nk = subst_node(k, remaining, f, done);
                if (nk != k) { k = nk; changed = true; }
            }
            if (!changed) return n;
            ProgramNode copy = *n;
            copy.seq = std::move(kids);
            return std::make_shared<ProgramNode>(copy);
        }
    }
    return n;
}

}  // namespace detail

// Replace the hole with the given preorder ordinal. The ordinal must exist.
inline NodePtr substitute_hole(const NodePtr& p, int ordinal, const Fill& f) {
    int remaining = ordinal;
    bool done = false;
    NodePtr out = detail::subst_node(p, remaining, f, done);
    if (!done) fail("BadHole", "no hole with ordinal " + std::to_string(ordinal));
    return out;
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline void print_slot(std::ostream& os, const Slot& s) {
    switch (s.tag) {
        case Slot::Tag::Var: os << s.name; break;
        case Slot::Tag::Literal: os << "@" << s.name; break;
        case Slot::Tag::Hole: os << "??:" << s.type; break;
    }
}

inline void print_cond(std::ostream& os, const CondPtr& c, int parent_prec) {
    // precedence: Or = 1, And = 2, Not = 3, atoms = 4
    if (!c) { os << "??"; return; }
    auto name_of = [](const CondNode& n) { return n.name_is_hole ? std::string("??") : n.name; };
    switch (c->kind) {
        case CondNode::Kind::Hole:
            os << "??";
            break;
        case CondNode::Kind::Prop:
            os << "checkProp(" << name_of(*c) << ", ";
            print_slot(os, c->a);
            os << ")";
            break;
        case CondNode::Kind::Rel:
            os << "checkRel(" << name_of(*c) << ", ";
            print_slot(os, c->a);
            os << ", ";
            print_slot(os, c->b);
            os << ")";
            break;
        case CondNode::Kind::Not:
            os << "!";
            print_cond(os, c->l, 3);
            break;
        case CondNode::Kind::And: {
            bool wrap = parent_prec > 2;
            if (wrap) os << "(";
            print_cond(os, c->l, 2);
            os << " && ";
            print_cond(os, c->r, 2);
            if (wrap) os << ")";
            break;
        }
        case CondNode::Kind::Or: {
            bool wrap = parent_prec > 1;
            if (wrap) os << "(";
            print_cond(os, c->l, 1);
            os << " || ";
            print_cond(os, c->r, 1);
            if (wrap) os << ")";
            break;
        }
    }
}

inline void print_scan(std::ostream& os, const Scan& s) {
    os << (s.over_objects ? "scanObj(" : "scanLoc(");
    os << (s.is_hole ? "??" : s.type) << ")";
}

inline void print_node(std::ostream& os, const NodePtr& n, int indent) {
    std::string pad(indent * 2, ' ');
    if (!n) return;
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
            os << pad << "skip;\n";
            break;
        case ProgramNode::Kind::Infeasible:
            os << pad << "infeasible;\n";
            break;
        case ProgramNode::Kind::ActUnary:
            os << pad << "actUnary(" << n->action << ", ";
            print_slot(os, n->arg1);
            os << ");\n";
            break;
        case ProgramNode::Kind::ActBinary:
            os << pad << "actBinary(" << n->action << ", ";
            print_slot(os, n->arg1);
            os << ", ";
            print_slot(os, n->arg2);
            os << ");\n";
            break;
        case ProgramNode::Kind::Goto:
            os << pad << "goto(";
            print_slot(os, n->arg1);
            os << ");\n";
            break;
        case ProgramNode::Kind::If:
            os << pad << "if (";
            print_cond(os, n->cond, 0);
            os << ") {\n";
            print_node(os, n->body, indent + 1);
            os << pad << "}\n";
            break;
        case ProgramNode::Kind::Foreach:
            os << pad << "foreach (" << n->var << " in ";
            print_scan(os, n->scan);
            os << ") {\n";
            print_node(os, n->body, indent + 1);
            os << pad << "}\n";
            break;
        case ProgramNode::Kind::Let:
            os << pad << "let " << n->var << " := getNth(";
            print_scan(os, n->scan);
            os << ", ";
            if (n->index_is_hole)
                os << "??";
            else
                os << n->index;
            os << ");\n";
            break;
        case ProgramNode::Kind::Seq:
            for (const auto& c : n->seq) print_node(os, c, indent);
            break;
    }
}

}  // namespace detail

inline std::string print_program(const NodePtr& p) {
    std::ostringstream os;
    detail::print_node(os, p, 0);
    return os.str();
}

inline std::string print_cond(const CondPtr& c) {
    std::ostringstream os;
    detail::print_cond(os, c, 0);
    return os.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Lexer {
    std::string src;
    size_t pos = 0;
    int line = 1;

    explicit Lexer(std::string s) : src(std::move(s)) {}

    void skip_ws() {
        while (pos < src.size()) {
            char c = src[pos];
            if (c == '\n') { ++line; ++pos; }
            else if (std::isspace((unsigned char)c)) ++pos;
            else if (c == '#') {
                while (pos < src.size() && src[pos] != '\n') ++pos;
            } else break;
        }
    }

    [[noreturn]] void err(const std::string& msg) const {
        fail("ParseError", "line " + std::to_string(line) + ": " + msg);
    }

    bool ident_char(char c) const {
        return std::isalnum((unsigned char)c) || c == '_' || c == '-';
    }

    // peek the next token without consuming
    std::string peek() {
        size_t p = pos;
        int l = line;
        std::string t = next();
        pos = p;
        line = l;
        return t;
    }

    std::string next() {
        skip_ws();
        if (pos >= src.size()) return "";
        char c = src[pos];
        if (std::isalpha((unsigned char)c) || c == '_') {
            size_t start = pos;
            while (pos < src.size() && ident_char(src[pos])) ++pos;
            return src.substr(start, pos - start);
        }
        if (std::isdigit((unsigned char)c)) {
            size_t start = pos;
            while (pos < src.size() && std::isdigit((unsigned char)src[pos])) ++pos;
            return src.substr(start, pos - start);
        }
        if (src.compare(pos, 2, "??") == 0) { pos += 2; return "??"; }
        if (src.compare(pos, 2, ":=") == 0) { pos += 2; return ":="; }
        if (src.compare(pos, 2, "&&") == 0) { pos += 2; return "&&"; }
        if (src.compare(pos, 2, "||") == 0) { pos += 2; return "||"; }
        ++pos;
        return std::string(1, c);
    }

    void expect(const std::string& tok) {
        std::string t = next();
        if (t != tok) err("expected '" + tok + "', got '" + (t.empty() ? "<eof>" : t) + "'");
    }

    bool eof() {
        skip_ws();
        return pos >= src.size();
    }
};

struct Parser {
    Lexer lx;

    explicit Parser(std::string s) : lx(std::move(s)) {}

    bool is_ident(const std::string& t) const {
        if (t.empty()) return false;
        return std::isalpha((unsigned char)t[0]) || t[0] == '_';
    }

    Slot parse_slot() {
        std::string t = lx.next();
        if (t == "??") {
            lx.expect(":");
            std::string ty = lx.next();
            if (!is_ident(ty)) lx.err("expected a type after '??:'");
            return Slot::hole(ty);
        }
        if (t == "@") {
            std::string id = lx.next();
            if (!is_ident(id)) lx.err("expected an entity id after '@'");
            return Slot::lit(id);
        }
        if (!is_ident(t)) lx.err("expected a variable, '@id', or '??:type'");
        return Slot::var(t);
    }

    CondPtr parse_atom() {
        std::string t = lx.next();
        if (t == "??") return CondNode::hole();
        if (t == "(") {
            CondPtr c = parse_or();
            lx.expect(")");
            return c;
        }
        if (t == "!") {
            return CondNode::neg(parse_atom());
        }
        if (t == "checkProp") {
            lx.expect("(");
            std::string name = lx.next();
            bool hole = name == "??";
            if (!hole && !is_ident(name)) lx.err("expected a property name or '??'");
            lx.expect(",");
            Slot v = parse_slot();
            lx.expect(")");
            if (hole) return CondNode::prop_hole(v);
            return CondNode::prop(name, v);
        }
        if (t == "checkRel") {
            lx.expect("(");
            std::string name = lx.next();
            bool hole = name == "??";
            if (!hole && !is_ident(name)) lx.err("expected a relation name or '??'");
            lx.expect(",");
            Slot x = parse_slot();
            lx.expect(",");
            Slot y = parse_slot();
            lx.expect(")");
            if (hole) return CondNode::rel_hole(x, y);
            return CondNode::rel(name, x, y);
        }
        lx.err("expected a condition, got '" + t + "'");
    }

    CondPtr parse_and() {
        CondPtr c = parse_atom();
        while (lx.peek() == "&&") {
            lx.next();
            c = CondNode::conj(c, parse_atom());
        }
        return c;
    }

    CondPtr parse_or() {
        CondPtr c = parse_and();
        while (lx.peek() == "||") {
            lx.next();
            c = CondNode::disj(c, parse_and());
        }
        return c;
    }

    Scan parse_scan() {
        std::string t = lx.next();
        bool over_obj;
        if (t == "scanObj") over_obj = true;
        else if (t == "scanLoc") over_obj = false;
        else lx.err("expected scanObj or scanLoc, got '" + t + "'");
        lx.expect("(");
        std::string ty = lx.next();
        Scan s;
        s.over_objects = over_obj;
        if (ty == "??") {
            s.is_hole = true;
        } else if (is_ident(ty)) {
            s.type = ty;
        } else {
            lx.err("expected a type or '??'");
        }
        lx.expect(")");
        return s;
    }

    NodePtr parse_stmt() {
        std::string t = lx.next();
        if (t == "skip") { lx.expect(";"); return prog::skip(); }
        if (t == "infeasible") { lx.expect(";"); return prog::infeasible(); }
        if (t == "goto") {
            lx.expect("(");
            Slot s = parse_slot();
            lx.expect(")");
            lx.expect(";");
            return prog::goto_(s);
        }
        if (t == "actUnary") {
            lx.expect("(");
            std::string a = lx.next();
            if (!is_ident(a)) lx.err("expected an action name");
            lx.expect(",");
            Slot x = parse_slot();
            lx.expect(")");
            lx.expect(";");
            return prog::act1(a, x);
        }
        if (t == "actBinary") {
            lx.expect("(");
            std::string a = lx.next();
            if (!is_ident(a)) lx.err("expected an action name");
            lx.expect(",");
            Slot x = parse_slot();
            lx.expect(",");
            Slot y = parse_slot();
            lx.expect(")");
            lx.expect(";");
            return prog::act2(a, x, y);
        }
        if (t == "let") {
            std::string v = lx.next();
            if (!is_ident(v)) lx.err("expected a variable name after let");
            lx.expect(":=");
            lx.expect("getNth");
            lx.expect("(");
            Scan s = parse_scan();
            lx.expect(",");
            std::string idx = lx.next();
            NodePtr n;
            if (idx == "??") {
                n = prog::let_hole_index(v, s);
            } else {
                bool numeric = !idx.empty() &&
                               std::all_of(idx.begin(), idx.end(), [](char c) {
                                   return std::isdigit((unsigned char)c);
                               });
                if (!numeric) lx.err("expected an index or '??'");
                n = prog::let(v, s, std::stoi(idx));
            }
            lx.expect(")");
            lx.expect(";");
            return n;
        }
        if (t == "foreach") {
            lx.expect("(");
            std::string v = lx.next();
            if (!is_ident(v)) lx.err("expected a loop variable");
            lx.expect("in");
            Scan s = parse_scan();
            lx.expect(")");
            NodePtr body = parse_block();
            return prog::foreach(v, s, body);
        }
        if (t == "if") {
            lx.expect("(");
            CondPtr c = parse_or();
            lx.expect(")");
            NodePtr body = parse_block();
            return prog::if_(c, body);
        }
        lx.err("expected a statement, got '" + (t.empty() ? "<eof>" : t) + "'");
    }

    NodePtr parse_block() {
        lx.expect("{");
        std::vector<NodePtr> kids;
        while (lx.peek() != "}") {
            if (lx.eof()) lx.err("unterminated block");
            kids.push_back(parse_stmt());
        }
        lx.expect("}");
        if (kids.size() == 1) return kids[0];
        return prog::seq(std::move(kids));
    }

    NodePtr parse_program() {
        std::vector<NodePtr> kids;
        while (!lx.eof()) kids.push_back(parse_stmt());
        if (kids.empty()) return prog::skip();
        if (kids.size() == 1) return kids[0];
        return prog::seq(std::move(kids));
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Scope checking and slot type annotation.
//
// Lexical scoping: a Let is visible for the remainder of its enclosing
// sequence; loop variables shadow outer bindings of the same name. The pass
// rejects unbound variable references and annotates every Var slot with the
// type committed by its binder (or leaves it empty when the binder's scan is
// still a hole).

namespace detail {

struct BindInfo {
    bool is_location = false;
    std::string type;   // empty when the binder scan type is a hole
};

using ScopeStack = std::vector<std::map<std::string, BindInfo>>;

inline const BindInfo* lookup(const ScopeStack& scopes, const std::string& v) {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
        auto f = it->find(v);
        if (f != it->end()) return &f->second;
    }
    return nullptr;
}

inline Slot annotate_slot(const Slot& s, const ScopeStack& scopes,
                          bool want_location, const std::string& where) {
    if (s.tag == Slot::Tag::Var) {
        const BindInfo* b = lookup(scopes, s.name);
        if (!b) fail("UnboundVariable", where + ": variable '" + s.name + "' is not in scope");
        if (b->is_location != want_location)
            fail("TypeError", where + ": variable '" + s.name + "' binds a " +
                                  (b->is_location ? "location" : "object") +
                                  ", which cannot be used here");
        Slot out = s;
        out.type = b->type;
        return out;
    }
    return s;
}

inline CondPtr annotate_cond(const CondPtr& c, const ScopeStack& scopes) {
    if (!c) return c;
    switch (c->kind) {
        case CondNode::Kind::Hole:
            return c;
        case CondNode::Kind::Prop: {
            CondNode copy = *c;
            copy.a = annotate_slot(c->a, scopes, false, "checkProp");
            return std::make_shared<CondNode>(copy);
        }
        case CondNode::Kind::Rel: {
            CondNode copy = *c;
            copy.a = annotate_slot(c->a, scopes, false, "checkRel");
            copy.b = annotate_slot(c->b, scopes, false, "checkRel");
            return std::make_shared<CondNode>(copy);
        }
        case CondNode::Kind::Not: {
            CondNode copy = *c;
            copy.l = annotate_cond(c->l, scopes);
            return std::make_shared<CondNode>(copy);
        }
        case CondNode::Kind::And:
        case CondNode::Kind::Or: {
            CondNode copy = *c;
            copy.l = annotate_cond(c->l, scopes);
            copy.r = annotate_cond(c->r, scopes);
            return std::make_shared<CondNode>(copy);
        }
    }
    return c;
}

inline NodePtr annotate_node(const NodePtr& n, ScopeStack& scopes) {
    if (!n) return n;
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
        case ProgramNode::Kind::Infeasible:
            return n;
        case ProgramNode::Kind::Goto: {
            ProgramNode copy = *n;
            copy.arg1 = annotate_slot(n->arg1, scopes, true, "goto");
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::ActUnary: {
            ProgramNode copy = *n;
            copy.arg1 = annotate_slot(n->arg1, scopes, false, n->action);
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::ActBinary: {
            ProgramNode copy = *n;
            copy.arg1 = annotate_slot(n->arg1, scopes, false, n->action);
            copy.arg2 = annotate_slot(n->arg2, scopes, false, n->action);
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::If: {
            ProgramNode copy = *n;
            copy.cond = annotate_cond(n->cond, scopes);
            scopes.emplace_back();
            copy.body = annotate_node(n->body, scopes);
            scopes.pop_back();
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::Foreach: {
            ProgramNode copy = *n;
            scopes.emplace_back();
            scopes.back()[n->var] =
                BindInfo{!n->scan.over_objects, n->scan.is_hole ? "" : n->scan.type};
            copy.body = annotate_node(n->body, scopes);
            scopes.pop_back();
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::Let: {
            scopes.back()[n->var] =
                BindInfo{!n->scan.over_objects, n->scan.is_hole ? "" : n->scan.type};
            return n;
        }
        case ProgramNode::Kind::Seq: {
            ProgramNode copy = *n;
            copy.seq.clear();
            for (const auto& k : n->seq) copy.seq.push_back(annotate_node(k, scopes));
            return std::make_shared<ProgramNode>(copy);
        }
    }
    return n;
}

}  // namespace detail

// Re-derive slot type annotations from binders and reject scope errors.
inline NodePtr resolve_scopes(const NodePtr& p) {
    detail::ScopeStack scopes;
    scopes.emplace_back();
    return detail::annotate_node(p, scopes);
}

inline NodePtr parse_program(const std::string& text) {
    detail::Parser parser(text);
    NodePtr p = parser.parse_program();
    return resolve_scopes(p);
}

// ---------------------------------------------------------------------------
// Traces

struct TraceEvent {
    bool is_goto = false;
    std::string action;              // empty for goto
    std::vector<std::string> args;   // location id, or action arguments

    bool operator==(const TraceEvent&) const = default;
};

using Trace = std::vector<TraceEvent>;

inline TraceEvent goto_event(std::string loc) {
    return TraceEvent{true, "", {std::move(loc)}};
}
inline TraceEvent act_event(std::string action, std::vector<std::string> args) {
    return TraceEvent{false, std::move(action), std::move(args)};
}

inline std::string print_trace(const Trace& t) {
    std::ostringstream os;
    for (const auto& e : t) {
        if (e.is_goto) {
            os << "goto " << e.args[0] << "\n";
        } else {
            os << "act " << e.action;
            for (const auto& a : e.args) os << " " << a;
            os << "\n";
        }
    }
    return os.str();
}

inline Trace parse_trace(const std::string& text) {
    Trace out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> words;
        std::string w;
        while (ls >> w) {
            if (w[0] == '#') break;
            words.push_back(w);
        }
        if (words.empty()) continue;
        auto err = [&](const std::string& msg) {
            fail("BadTraceFile", "line " + std::to_string(lineno) + ": " + msg);
        };
        if (words[0] == "goto") {
            if (words.size() != 2) err("goto takes exactly one location id");
            out.push_back(goto_event(words[1]));
        } else if (words[0] == "act") {
            if (words.size() < 3 || words.size() > 4)
                err("act takes an action name and one or two object ids");
            out.push_back(act_event(words[1], {words.begin() + 2, words.end()}));
        } else {
            err("expected 'goto' or 'act', got '" + words[0] + "'");
        }
    }
    return out;
}

inline Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("FileNotFound", "cannot open trace file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_trace(ss.str());
}

inline void save_trace(const Trace& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("FileNotFound", "cannot write trace file: " + path);
    out << print_trace(t);
}

struct Demonstration {
    Environment env;
    Trace trace;
};

// ---------------------------------------------------------------------------
// Interpreter

using Valuation = std::map<std::string, std::string>;

inline bool eval_bool(const CondPtr& c, const Valuation& sigma, const Environment& e) {
    if (!c) fail("HolePresent", "cannot evaluate an empty condition");
    auto resolve = [&](const Slot& s) -> std::string {
        switch (s.tag) {
            case Slot::Tag::Literal:
                return s.name;
            case Slot::Tag::Var: {
                auto it = sigma.find(s.name);
                if (it == sigma.end())
                    fail("UnboundVariable", "condition references unbound variable '" + s.name + "'");
                return it->second;
            }
            case Slot::Tag::Hole:
                fail("HolePresent", "condition contains an unfilled argument hole");
        }
        return "";
    };
    switch (c->kind) {
        case CondNode::Kind::Hole:
            fail("HolePresent", "condition contains an unfilled hole");
        case CondNode::Kind::Prop:
            if (c->name_is_hole) fail("HolePresent", "condition contains an unfilled property hole");
            return e.has_prop(c->name, resolve(c->a));
        case CondNode::Kind::Rel:
            if (c->name_is_hole) fail("HolePresent", "condition contains an unfilled relation hole");
            return e.has_rel(c->name, resolve(c->a), resolve(c->b));
        case CondNode::Kind::Not:
            return !eval_bool(c->l, sigma, e);
        case CondNode::Kind::And:
            return eval_bool(c->l, sigma, e) && eval_bool(c->r, sigma, e);
        case CondNode::Kind::Or:
            return eval_bool(c->l, sigma, e) || eval_bool(c->r, sigma, e);
    }
    return false;
}

struct RunResult {
    Trace trace;
    Environment final_env;
};

namespace detail {

struct RunState {
    Environment env;
    Trace trace;
    std::vector<std::map<std::string, std::string>> value_scopes;

    std::string value_of(const std::string& v) const {
        for (auto it = value_scopes.rbegin(); it != value_scopes.rend(); ++it) {
            auto f = it->find(v);
            if (f != it->end()) return f->second;
        }
        fail("UnboundVariable", "variable '" + v + "' has no value");
    }

    Valuation flatten() const {
        Valuation out;
        for (const auto& scope : value_scopes)
            for (const auto& [k, v] : scope) out[k] = v;
        return out;
    }
};

inline std::string resolve_slot_value(const RunState& st, const Slot& s) {
    switch (s.tag) {
        case Slot::Tag::Literal:
            return s.name;
        case Slot::Tag::Var:
            return st.value_of(s.name);
        case Slot::Tag::Hole:
            fail("HolePresent", "cannot run a program with holes");
    }
    return "";
}

inline std::vector<std::string> eval_scan(const RunState& st, const Scan& s) {
    if (s.is_hole) fail("HolePresent", "cannot run a program with a scan hole");
    if (s.over_objects) return st.env.objs(st.env.current_loc, s.type);
    return st.env.locs(s.type);
}

inline void run_node(const NodePtr& n, RunState& st) {
    if (!n) return;
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
            break;
        case ProgramNode::Kind::Infeasible:
            fail("Infeasible", "program reached an infeasible marker");
        case ProgramNode::Kind::Goto: {
            std::string loc = resolve_slot_value(st, n->arg1);
            if (!st.env.has_location(loc))
                fail("TypeError", "goto target '" + loc + "' is not a location");
            st.env.current_loc = loc;
            st.trace.push_back(goto_event(loc));
            break;
        }
        case ProgramNode::Kind::ActUnary: {
            std::string a = resolve_slot_value(st, n->arg1);
            apply_action_inplace(st.env, n->action, {a});
            st.trace.push_back(act_event(n->action, {a}));
            break;
        }
        case ProgramNode::Kind::ActBinary: {
            std::string a = resolve_slot_value(st, n->arg1);
            std::string b = resolve_slot_value(st, n->arg2);
            apply_action_inplace(st.env, n->action, {a, b});
            st.trace.push_back(act_event(n->action, {a, b}));
            break;
        }
        case ProgramNode::Kind::If: {
            Valuation sigma = st.flatten();
            if (eval_bool(n->cond, sigma, st.env)) {
                st.value_scopes.emplace_back();
                run_node(n->body, st);
                st.value_scopes.pop_back();
            }
            break;
        }
        case ProgramNode::Kind::Foreach: {
            // snapshot semantics: the iteration list is fixed at loop entry
            std::vector<std::string> items = eval_scan(st, n->scan);
            for (const auto& item : items) {
                st.value_scopes.emplace_back();
                st.value_scopes.back()[n->var] = item;
                run_node(n->body, st);
                st.value_scopes.pop_back();
            }
            break;
        }
        case ProgramNode::Kind::Let: {
            if (n->index_is_hole) fail("HolePresent", "cannot run a program with an index hole");
            std::vector<std::string> items = eval_scan(st, n->scan);
            if (n->index < 0 || n->index >= (int)items.size())
                fail("IndexOutOfRange",
                     "getNth(" + std::string(n->scan.over_objects ? "scanObj" : "scanLoc") +
                         "(" + n->scan.type + "), " + std::to_string(n->index) +
                         ") on a list of length " + std::to_string(items.size()));
            st.value_scopes.back()[n->var] = items[n->index];
            break;
        }
        case ProgramNode::Kind::Seq:
            for (const auto& k : n->seq) run_node(k, st);
            break;
    }
}

}  // namespace detail

inline RunResult run(const NodePtr& p, const Environment& e) {
    if (has_holes(p)) fail("HolePresent", "cannot run a program with holes");
    detail::RunState st;
    st.env = e;
    st.value_scopes.emplace_back();
    detail::run_node(p, st);
    return RunResult{std::move(st.trace), std::move(st.env)};
}

// A program is consistent with a demonstration set when it reproduces every
// demo trace exactly; any runtime error counts as inconsistent.
inline bool consistent(const NodePtr& p, const std::vector<Demonstration>& demos) {
    for (const auto& d : demos) {
        try {
            RunResult r = run(p, d.env);
            if (!(r.trace == d.trace)) return false;
        } catch (const Error&) {
            return false;
        }
    }
    return true;
}

}  // namespace tracelearn
