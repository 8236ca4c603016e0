#pragma once

// Sketch completion: a probability-ordered worklist search over partial
// programs. Each step picks one hole, asks a scoring model to rank the
// well-typed candidate fills, and enqueues the children; incomplete programs
// are pruned against the demonstrations before they are ever expanded.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tracelearn/pruner.hpp"

namespace tracelearn {

inline constexpr int kDefaultMaxGetnthIndex = 2;
inline constexpr int kDefaultMaxCondAtoms = 2;
inline constexpr std::uint64_t kDefaultNodeBudget = 200000;

// A sketch at some intermediate completion state. score is the product of
// the normalized per-step model probabilities, so it always stays in (0, 1];
// derivation records (hole, chosen fill) pairs in the order they were made.
struct PartialProgram {
    NodePtr ast;
    double score = 1.0;
    std::vector<std::pair<HoleRef, std::string>> derivation;
};

// One candidate fill for a hole, with a canonical display text used for
// scoring requests, derivations, and deduplication.
struct Candidate {
    Fill fill;
    std::string text;
};

// ---------------------------------------------------------------------------
// Scope resolution
//
// Holes are addressed by the same preorder ordinals list_holes uses, so this
// walk mirrors its traversal exactly: a Foreach binder covers its body, a Let
// binder covers the remaining statements of the enclosing block, and neither
// scan nor index of a binding statement sees its own variable.

struct VarBinding {
    std::string name;
    std::string type;          // empty while the binder's scan is a hole
    bool over_objects = true;
    bool let_bound = false;
};

namespace detail {

struct ScopeWalk {
    int target = -1;
    int next = 0;
    bool found = false;
    std::vector<VarBinding> scope;

    void bump() {
        if (!found && next++ == target) found = true;
    }
    void scan(const Scan& s) {
        if (s.is_hole) bump();
    }
    void slot(const Slot& s) {
        if (s.is_hole()) bump();
    }
    void cond(const CondPtr& c) {
        if (!c || found) return;
        switch (c->kind) {
            case CondNode::Kind::Hole:
                bump();
                break;
            case CondNode::Kind::Prop:
                if (c->name_is_hole) bump();
                slot(c->a);
                break;
            case CondNode::Kind::Rel:
                if (c->name_is_hole) bump();
                slot(c->a);
                slot(c->b);
                break;
            case CondNode::Kind::Not:
                cond(c->l);
                break;
            case CondNode::Kind::And:
            case CondNode::Kind::Or:
                cond(c->l);
                cond(c->r);
                break;
        }
    }
    void node(const NodePtr& n) {
        if (!n || found) return;
        switch (n->kind) {
            case ProgramNode::Kind::Skip:
            case ProgramNode::Kind::Infeasible:
                break;
            case ProgramNode::Kind::ActUnary:
                slot(n->arg1);
                break;
            case ProgramNode::Kind::ActBinary:
                slot(n->arg1);
                if (!found) slot(n->arg2);
                break;
            case ProgramNode::Kind::Goto:
                slot(n->arg1);
                break;
            case ProgramNode::Kind::If:
                cond(n->cond);
                if (!found) node(n->body);
                break;
            case ProgramNode::Kind::Foreach:
                scan(n->scan);
                if (!found) {
                    scope.push_back(
                        {n->var, n->scan.type, n->scan.over_objects, false});
                    node(n->body);
                    if (!found) scope.pop_back();
                }
                break;
            case ProgramNode::Kind::Let:
                scan(n->scan);
                if (n->index_is_hole) bump();
                break;
            case ProgramNode::Kind::Seq: {
                size_t base = scope.size();
                for (const auto& k : n->seq) {
                    node(k);
                    if (found) return;
                    if (k->kind == ProgramNode::Kind::Let)
                        scope.push_back({k->var, k->scan.type,
                                         k->scan.over_objects, true});
                }
                scope.resize(base);
                break;
            }
        }
    }
};

}  // namespace detail

// Variables visible at the hole with the given ordinal, outermost first.
inline std::vector<VarBinding> scope_at(const NodePtr& p, int ordinal) {
    detail::ScopeWalk w;
    w.target = ordinal;
    w.node(p);
    if (!w.found) fail("BadHole", "no hole with ordinal " + std::to_string(ordinal));
    return w.scope;
}

// ---------------------------------------------------------------------------
// Hole selection
//
// Scan-type holes are picked before everything else: they decide the types
// of every variable bound downstream, so filling them first both sharpens
// pruning and shrinks the variable/condition candidate sets. Within a class,
// preorder position decides.

inline HoleRef next_hole(const NodePtr& p) {
    auto holes = list_holes(p);
    if (holes.empty()) fail("NoHoles", "program has no holes");
    auto rank = [](HoleKind k) {
        switch (k) {
            case HoleKind::ObjType:
            case HoleKind::LocType: return 0;
            case HoleKind::Var: return 1;
            case HoleKind::Cond:
            case HoleKind::PropName:
            case HoleKind::RelName: return 2;
            case HoleKind::Index: return 3;
        }
        return 4;
    };
    const HoleRef* best = &holes[0];
    for (const auto& h : holes)
        if (rank(h.kind) < rank(best->kind)) best = &h;
    return *best;
}

// ---------------------------------------------------------------------------
// Fill: the ordered candidate set for one hole

namespace detail {

inline CondPtr signed_atom(const CondPtr& a, bool positive) {
    return positive ? a : CondNode::neg(a);
}

// All conjunctive / disjunctive combinations of up to max_atoms literals,
// singles (and their negations) first, then conjunction blocks before
// disjunction blocks, subsets in lexicographic index order, sign patterns
// from all-positive downward. Or and Not share the atom bound.
inline std::vector<CondPtr> cond_formulas(const std::vector<CondPtr>& atoms,
                                          int max_atoms) {
    std::vector<CondPtr> out;
    for (const auto& a : atoms) out.push_back(a);
    for (const auto& a : atoms) out.push_back(CondNode::neg(a));
    for (int k = 2; k <= max_atoms && k <= (int)atoms.size(); ++k) {
        std::vector<int> idx(k);
        for (int i = 0; i < k; ++i) idx[i] = i;
        std::vector<std::vector<int>> subsets;
        while (true) {
            subsets.push_back(idx);
            int i = k - 1;
            while (i >= 0 && idx[i] == (int)atoms.size() - k + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
        }
        for (bool conj : {true, false}) {
            for (const auto& sub : subsets) {
                for (unsigned signs = 0; signs < (1u << k); ++signs) {
                    CondPtr f;
                    for (int i = 0; i < k; ++i) {
                        // all-positive first; the last atom's sign flips
                        // fastest.
                        CondPtr lit = signed_atom(
                            atoms[sub[i]], !((signs >> (k - 1 - i)) & 1));
                        if (!f)
                            f = lit;
                        else
                            f = conj ? CondNode::conj(f, lit)
                                     : CondNode::disj(f, lit);
                    }
                    out.push_back(f);
                }
            }
        }
    }
    return out;
}

inline std::vector<Candidate> fill_impl(const NodePtr& ast, const HoleRef& h,
                                        const std::vector<Demonstration>& demos,
                                        int max_getnth_index,
                                        int max_cond_atoms) {
    if (demos.empty())
        fail("BadArgument", "fill requires at least one demonstration");
    const Vocabulary& vocab = *demos[0].env.vocab;
    std::vector<Candidate> out;
    auto text_cand = [&](const std::string& t) {
        out.push_back({Fill{t, -1, nullptr}, t});
    };
    switch (h.kind) {
        case HoleKind::ObjType:
            for (const auto& t : vocab.object_types) text_cand(t);
            break;
        case HoleKind::LocType:
            for (const auto& t : vocab.location_types) text_cand(t);
            break;
        case HoleKind::PropName:
            for (const auto& p : vocab.properties) text_cand(p);
            break;
        case HoleKind::RelName:
            for (const auto& r : vocab.relations) text_cand(r);
            break;
        case HoleKind::Var:
            for (const auto& b : scope_at(ast, h.ordinal)) {
                if (b.type.empty()) continue;
                if (h.expected_type.empty() || b.type == h.expected_type)
                    text_cand(b.name);
            }
            break;
        case HoleKind::Index:
            for (int i = 0; i <= max_getnth_index; ++i)
                out.push_back({Fill{"", i, nullptr}, std::to_string(i)});
            break;
        case HoleKind::Cond: {
            std::vector<VarBinding> vars;
            for (const auto& b : scope_at(ast, h.ordinal))
                if (b.over_objects && !b.type.empty()) vars.push_back(b);
            std::vector<CondPtr> atoms;
            for (const auto& b : vars)
                for (const auto& p : vocab.properties)
                    atoms.push_back(CondNode::prop(p, Slot::var(b.name, b.type)));
            for (const auto& b1 : vars)
                for (const auto& b2 : vars) {
                    if (b1.name == b2.name) continue;
                    for (const auto& r : vocab.relations)
                        atoms.push_back(CondNode::rel(
                            r, Slot::var(b1.name, b1.type),
                            Slot::var(b2.name, b2.type)));
                }
            int bound = std::max(1, max_cond_atoms);
            for (const auto& f : cond_formulas(atoms, bound))
                out.push_back({Fill{"", -1, f}, print_cond(f)});
            break;
        }
    }
    // Stable dedup by display text.
    std::set<std::string> seen;
    std::vector<Candidate> dedup;
    for (auto& c : out)
        if (seen.insert(c.text).second) dedup.push_back(std::move(c));
    return dedup;
}

}  // namespace detail

inline std::vector<Candidate> fill(const NodePtr& ast, const HoleRef& h,
                                   const std::vector<Demonstration>& demos,
                                   int max_getnth_index = kDefaultMaxGetnthIndex,
                                   int max_cond_atoms = kDefaultMaxCondAtoms) {
    auto out = detail::fill_impl(ast, h, demos, max_getnth_index, max_cond_atoms);
    if (out.empty())
        fail("EmptyCandidateSet",
             std::string("no candidates for ") + hole_kind_name(h.kind) +
                 " hole " + std::to_string(h.ordinal));
    return out;
}

// ---------------------------------------------------------------------------
// Prompt rendering
//
// A syntax-directed English reading of the partial program, one clause per
// statement. Unfilled type and condition holes become numbered masks;
// variable references read as their binder's type, with "a" on the first
// mention of a let-bound entity.

namespace detail {

struct PromptWalk {
    struct VInfo {
        std::string name;
        std::string type;
        bool let_bound = false;
        bool used = false;
    };
    std::vector<std::string> clauses;
    std::vector<VInfo> scope;
    int masks = 0;

    std::string mask() { return "[M]_" + std::to_string(++masks); }

    static std::string cap(std::string s) {
        if (!s.empty()) s[0] = (char)std::toupper((unsigned char)s[0]);
        return s;
    }

    std::string ref(const Slot& s) {
        switch (s.tag) {
            case Slot::Tag::Literal:
                return s.name;
            case Slot::Tag::Hole:
                return s.type.empty() ? mask() : s.type;
            case Slot::Tag::Var:
                for (auto it = scope.rbegin(); it != scope.rend(); ++it)
                    if (it->name == s.name) {
                        if (it->type.empty()) return "it";
                        if (it->let_bound && !it->used) {
                            it->used = true;
                            return "a " + it->type;
                        }
                        return it->type;
                    }
                return "it";
        }
        return "it";
    }

    std::string cond(const CondPtr& c, bool negate = false) {
        if (!c) return mask();
        std::string is = negate ? " is not " : " is ";
        switch (c->kind) {
            case CondNode::Kind::Hole:
                return mask();
            case CondNode::Kind::Prop:
                return ref(c->a) + is + (c->name_is_hole ? mask() : c->name);
            case CondNode::Kind::Rel:
                return ref(c->a) + is + (c->name_is_hole ? mask() : c->name) +
                       " " + ref(c->b);
            case CondNode::Kind::Not:
                if (c->l && (c->l->kind == CondNode::Kind::Prop ||
                             c->l->kind == CondNode::Kind::Rel))
                    return cond(c->l, !negate);
                return "not (" + cond(c->l) + ")";
            case CondNode::Kind::And:
                return cond(c->l) + " and " + cond(c->r);
            case CondNode::Kind::Or:
                return cond(c->l) + " or " + cond(c->r);
        }
        return mask();
    }

    std::string action_clause(const NodePtr& n) {
        if (n->kind == ProgramNode::Kind::ActUnary)
            return n->action + " " + ref(n->arg1);
        std::string verb = n->action, prep = "with";
        auto dash = n->action.find('-');
        if (dash != std::string::npos) {
            verb = n->action.substr(0, dash);
            prep = n->action.substr(dash + 1);
        }
        return verb + " " + ref(n->arg1) + " " + prep + " " + ref(n->arg2);
    }

    // Statements inside an If render as one clause: lowercase fragments
    // joined with "and".
    std::string inline_body(const NodePtr& n) {
        std::vector<std::string> parts;
        size_t base = scope.size();
        inline_stmts(n, parts);
        scope.resize(base);
        std::string out;
        for (size_t i = 0; i < parts.size(); ++i) {
            if (i) out += " and ";
            out += parts[i];
        }
        return out;
    }

    void inline_stmts(const NodePtr& n, std::vector<std::string>& parts) {
        if (!n) return;
        switch (n->kind) {
            case ProgramNode::Kind::Skip:
            case ProgramNode::Kind::Infeasible:
                break;
            case ProgramNode::Kind::ActUnary:
            case ProgramNode::Kind::ActBinary:
                parts.push_back(action_clause(n));
                break;
            case ProgramNode::Kind::Goto:
                parts.push_back("go to " + ref(n->arg1));
                break;
            case ProgramNode::Kind::If:
                parts.push_back("if " + cond(n->cond) + ", " +
                                inline_body(n->body));
                break;
            case ProgramNode::Kind::Foreach: {
                std::string hdr = n->scan.is_hole ? mask() : n->scan.type;
                scope.push_back({n->var, n->scan.type, false, false});
                parts.push_back("for each " + hdr + " do " +
                                inline_body(n->body));
                scope.pop_back();
                break;
            }
            case ProgramNode::Kind::Let:
                parts.push_back("look for " + (n->scan.is_hole
                                                   ? mask()
                                                   : n->scan.type + "s"));
                scope.push_back({n->var, n->scan.type, true, false});
                break;
            case ProgramNode::Kind::Seq:
                for (const auto& k : n->seq) inline_stmts(k, parts);
                break;
        }
    }

    void stmt(const NodePtr& n, int depth) {
        if (!n) return;
        switch (n->kind) {
            case ProgramNode::Kind::Skip:
            case ProgramNode::Kind::Infeasible:
                break;
            case ProgramNode::Kind::ActUnary:
            case ProgramNode::Kind::ActBinary:
                clauses.push_back(cap(action_clause(n)));
                break;
            case ProgramNode::Kind::Goto:
                clauses.push_back("Go to " + ref(n->arg1));
                break;
            case ProgramNode::Kind::If:
                clauses.push_back("If " + cond(n->cond) + ", " +
                                  inline_body(n->body));
                break;
            case ProgramNode::Kind::Foreach: {
                std::string hdr = n->scan.is_hole ? mask() : n->scan.type;
                clauses.push_back("For each " + hdr +
                                  (depth > 0 ? " do" : ""));
                scope.push_back({n->var, n->scan.type, false, false});
                stmt(n->body, depth + 1);
                scope.pop_back();
                break;
            }
            case ProgramNode::Kind::Let:
                clauses.push_back("Look for " + (n->scan.is_hole
                                                     ? mask()
                                                     : n->scan.type + "s"));
                scope.push_back({n->var, n->scan.type, true, false});
                break;
            case ProgramNode::Kind::Seq: {
                size_t base = scope.size();
                for (const auto& k : n->seq) stmt(k, depth);
                scope.resize(base);
                break;
            }
        }
    }
};

}  // namespace detail

inline std::string render_prompt(const NodePtr& p) {
    detail::PromptWalk w;
    w.stmt(p, 0);
    std::string out;
    for (size_t i = 0; i < w.clauses.size(); ++i) {
        out += w.clauses[i];
        out += (i + 1 < w.clauses.size()) ? "; " : ".";
    }
    return out;
}

inline std::string render_prompt(const NodePtr& p, const HoleRef& h) {
    if (h.kind == HoleKind::Index)
        fail("UnsupportedHoleKind", "index holes are never prompted");
    return render_prompt(p);
}

// ---------------------------------------------------------------------------
// Co-occurrence table: `nameA nameB weight` per line, `#` comments

struct CoocTable {
    std::map<std::pair<std::string, std::string>, double> weights;

    void add(std::string a, std::string b, double w) {
        if (b < a) std::swap(a, b);
        weights[{std::move(a), std::move(b)}] += w;
    }
    double weight(std::string a, std::string b) const {
        if (b < a) std::swap(a, b);
        auto it = weights.find({a, b});
        return it == weights.end() ? 0.0 : it->second;
    }

    static CoocTable parse(const std::string& text) {
        CoocTable t;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            std::string a, b, ws, extra;
            if (!(ls >> a)) continue;
            if (!(ls >> b >> ws) || (ls >> extra))
                fail("BadCooccurrence",
                     "line " + std::to_string(lineno) +
                         ": expected 'nameA nameB weight'");
            try {
                size_t used = 0;
                double w = std::stod(ws, &used);
                if (used != ws.size() || !std::isfinite(w))
                    throw std::invalid_argument(ws);
                t.add(a, b, w);
            } catch (const std::exception&) {
                fail("BadCooccurrence", "line " + std::to_string(lineno) +
                                            ": bad weight '" + ws + "'");
            }
        }
        return t;
    }

    static CoocTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail("FileNotFound", "cannot open co-occurrence file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }
};

// ---------------------------------------------------------------------------
// Scoring models

class CompletionModel {
  public:
    virtual ~CompletionModel() = default;
    virtual std::string name() const = 0;
    // Positive weight for one candidate; the search normalizes over the
    // candidate set of a hole. Must be safely callable from concurrent tasks.
    virtual double score(const Candidate& c, const PartialProgram& partial,
                         const HoleRef& h,
                         const std::vector<Demonstration>& demos) const = 0;
    virtual std::vector<double> score_all(
        const std::vector<Candidate>& cs, const PartialProgram& partial,
        const HoleRef& h, const std::vector<Demonstration>& demos) const {
        std::vector<double> out;
        out.reserve(cs.size());
        for (const auto& c : cs) out.push_back(score(c, partial, h, demos));
        return out;
    }
};

class UniformModel final : public CompletionModel {
  public:
    std::string name() const override { return "uniform"; }
    double score(const Candidate&, const PartialProgram&, const HoleRef&,
                 const std::vector<Demonstration>&) const override {
        return 1.0;
    }
};

namespace detail {

// Entity names a candidate commits to, for demo-presence and co-occurrence.
inline std::vector<std::string> candidate_names(const Candidate& c,
                                                const HoleRef& h) {
    switch (h.kind) {
        case HoleKind::ObjType:
        case HoleKind::LocType:
        case HoleKind::PropName:
        case HoleKind::RelName:
            return {c.text};
        case HoleKind::Var:
            if (!h.expected_type.empty()) return {h.expected_type};
            return {};
        case HoleKind::Index:
            return {};
        case HoleKind::Cond: {
            std::vector<std::string> out;
            std::function<void(const CondPtr&)> walk = [&](const CondPtr& n) {
                if (!n) return;
                if (!n->name.empty() && !n->name_is_hole)
                    out.push_back(n->name);
                walk(n->l);
                walk(n->r);
            };
            walk(c.fill.cond);
            return out;
        }
    }
    return {};
}

inline std::set<std::string> demo_type_names(
    const std::vector<Demonstration>& demos) {
    std::set<std::string> out;
    for (const auto& d : demos)
        for (const auto& tok : abstract_trace(d.trace, d.env))
            for (const auto& ty : tok.types) out.insert(ty);
    return out;
}

inline void committed_cond_names(const CondPtr& c, std::set<std::string>& out) {
    if (!c) return;
    if (!c->name.empty() && !c->name_is_hole) out.insert(c->name);
    committed_cond_names(c->l, out);
    committed_cond_names(c->r, out);
}

inline void committed_names(const NodePtr& n, std::set<std::string>& out) {
    if (!n) return;
    auto slot = [&](const Slot& s) {
        if (s.tag == Slot::Tag::Literal && !s.name.empty()) out.insert(s.name);
        if (!s.type.empty()) out.insert(s.type);
    };
    if (!n->action.empty()) out.insert(n->action);
    if (!n->scan.is_hole && !n->scan.type.empty()) out.insert(n->scan.type);
    slot(n->arg1);
    slot(n->arg2);
    committed_cond_names(n->cond, out);
    committed_names(n->body, out);
    for (const auto& k : n->seq) committed_names(k, out);
}

}  // namespace detail

// The shipped deterministic scorer: +3 when the candidate names something the
// demonstrations actually touch, plus any co-occurrence weight against names
// already committed in the partial program, plus a baseline of 1.
class DefaultModel final : public CompletionModel {
  public:
    DefaultModel() = default;
    explicit DefaultModel(CoocTable t) : cooc_(std::move(t)) {}

    std::string name() const override { return "default"; }

    double score(const Candidate& c, const PartialProgram& partial,
                 const HoleRef& h,
                 const std::vector<Demonstration>& demos) const override {
        std::set<std::string> committed;
        detail::committed_names(partial.ast, committed);
        return weigh(c, h, detail::demo_type_names(demos), committed);
    }

    std::vector<double> score_all(
        const std::vector<Candidate>& cs, const PartialProgram& partial,
        const HoleRef& h,
        const std::vector<Demonstration>& demos) const override {
        std::set<std::string> committed;
        detail::committed_names(partial.ast, committed);
        std::set<std::string> demo_names = detail::demo_type_names(demos);
        std::vector<double> out;
        out.reserve(cs.size());
        for (const auto& c : cs)
            out.push_back(weigh(c, h, demo_names, committed));
        return out;
    }

  private:
    double weigh(const Candidate& c, const HoleRef& h,
                 const std::set<std::string>& demo_names,
                 const std::set<std::string>& committed) const {
        double w = 1.0;
        auto names = detail::candidate_names(c, h);
        for (const auto& n : names)
            if (demo_names.count(n)) {
                w += 3.0;
                break;
            }
        for (const auto& n : names)
            for (const auto& m : committed) w += cooc_.weight(n, m);
        return w;
    }

    CoocTable cooc_;
};

// ---------------------------------------------------------------------------
// Worklist: max-score priority queue, FIFO among equal scores

class Worklist {
  public:
    void push(PartialProgram p) {
        heap_.push(Entry{std::move(p), seq_++});
    }
    PartialProgram pop() {
        if (heap_.empty()) fail("EmptyWorklist", "pop from empty worklist");
        PartialProgram out = heap_.top().pp;
        heap_.pop();
        return out;
    }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

  private:
    struct Entry {
        PartialProgram pp;
        std::uint64_t seq;
    };
    struct Less {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.pp.score != b.pp.score) return a.pp.score < b.pp.score;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, Less> heap_;
    std::uint64_t seq_ = 0;
};

// ---------------------------------------------------------------------------
// The search

struct CompleteOptions {
    bool prune = true;
    int max_getnth_index = kDefaultMaxGetnthIndex;
    int max_cond_atoms = kDefaultMaxCondAtoms;
    std::uint64_t node_budget = kDefaultNodeBudget;
    std::optional<std::chrono::steady_clock::time_point> deadline;
    int widen_after = kDefaultWidenAfter;
    // Cooperative cancellation, shared across concurrent sketch tasks.
    std::atomic<bool>* cancel = nullptr;
    // Enumeration hook: when set it replaces the consistency check and sees
    // every complete program in dequeue order; returning true accepts the
    // program and stops the search.
    std::function<bool(const PartialProgram&)> on_complete;
};

struct CompleteStats {
    std::uint64_t dequeued = 0;
    std::uint64_t enqueued = 0;
    std::uint64_t pruned = 0;
    std::uint64_t consistency_checks = 0;
};

struct CompleteResult {
    NodePtr program;      // null when no completion was found
    std::string reason;   // solved | exhausted | node-budget | deadline | cancelled
    CompleteStats stats;
};

namespace detail {

// Serialize a residual program for the prune memo. Undecidable conditions are
// masked: the regex over-approximation never reads them, so partials that
// differ only there share one verdict.
inline void prune_key_walk(const NodePtr& n, std::string& out) {
    if (!n) {
        out += ';';
        return;
    }
    auto slot = [&](const Slot& s) {
        switch (s.tag) {
            case Slot::Tag::Var: out += 'v'; out += s.name; break;
            case Slot::Tag::Literal: out += 'l'; out += s.name; break;
            case Slot::Tag::Hole: out += '?'; out += s.type; break;
        }
        out += ',';
    };
    auto scan = [&](const Scan& s) {
        out += s.over_objects ? 'O' : 'L';
        if (s.is_hole)
            out += '?';
        else
            out += s.type;
        out += ',';
    };
    switch (n->kind) {
        case ProgramNode::Kind::Skip: out += 'k'; break;
        case ProgramNode::Kind::Infeasible: out += 'x'; break;
        case ProgramNode::Kind::Goto:
            out += 'g';
            slot(n->arg1);
            break;
        case ProgramNode::Kind::ActUnary:
            out += 'a';
            out += n->action;
            out += ',';
            slot(n->arg1);
            break;
        case ProgramNode::Kind::ActBinary:
            out += 'b';
            out += n->action;
            out += ',';
            slot(n->arg1);
            slot(n->arg2);
            break;
        case ProgramNode::Kind::If:
            out += 'i';
            prune_key_walk(n->body, out);
            break;
        case ProgramNode::Kind::Foreach:
            out += 'f';
            out += n->var;
            out += ',';
            scan(n->scan);
            prune_key_walk(n->body, out);
            break;
        case ProgramNode::Kind::Let:
            out += 'm';
            out += n->var;
            out += ',';
            scan(n->scan);
            if (n->index_is_hole)
                out += '?';
            else
                out += std::to_string(n->index);
            out += ',';
            break;
        case ProgramNode::Kind::Seq:
            out += '(';
            for (const auto& k : n->seq) prune_key_walk(k, out);
            out += ')';
            break;
    }
}

}  // namespace detail

// A resumable sketch completion. The search state (worklist, prune memo,
// counters) lives in the session so a scheduler can advance many completions
// in bounded slices instead of running each to termination.
class CompletionSession {
  public:
    CompletionSession(NodePtr sketch, const std::vector<Demonstration>& demos,
                      const CompletionModel& model, CompleteOptions opt = {})
        : demos_(&demos), model_(&model), opt_(std::move(opt)) {
        if (!sketch) fail("BadArgument", "completion requires a sketch");
        if (demos.empty())
            fail("BadArgument", "completion requires at least one demonstration");
        if (opt_.prune) {
            // Per-demo abstraction computed once; regex verdicts are memoized
            // by the residual's masked shape, which is all the
            // over-approximation depends on.
            memo_.reserve(demos.size());
            for (const auto& d : demos) {
                PruneMemo m{abstract_env(d.env), abstract_trace(d.trace, d.env),
                            {}};
                m.aenv.compact();
                memo_.push_back(std::move(m));
            }
        }
        wl_.push(PartialProgram{std::move(sketch), 1.0, {}});
        st_.enqueued = 1;
    }

    // Advance the search by at most step_nodes dequeues (0 = no slice limit).
    // Terminal reasons: solved | exhausted | node-budget | deadline |
    // cancelled; a slice that ends first reports "running" and the next call
    // resumes where this one stopped.
    CompleteResult step(std::uint64_t step_nodes = 0) {
        if (done_) return {result_, reason_, st_};
        std::uint64_t left = step_nodes;
        while (!wl_.empty()) {
            if (opt_.cancel && opt_.cancel->load(std::memory_order_relaxed))
                return finish(nullptr, "cancelled");
            if (opt_.deadline &&
                std::chrono::steady_clock::now() > *opt_.deadline)
                return finish(nullptr, "deadline");
            if (step_nodes) {
                if (left == 0) return {nullptr, "running", st_};
                --left;
            }
            PartialProgram cur = wl_.pop();
            ++st_.dequeued;
            if (!has_holes(cur.ast)) {
                if (opt_.on_complete) {
                    if (opt_.on_complete(cur))
                        return finish(cur.ast, "solved");
                    continue;
                }
                ++st_.consistency_checks;
                if (consistent(cur.ast, *demos_))
                    return finish(cur.ast, "solved");
                continue;
            }
            if (opt_.prune && pruned(cur.ast)) {
                ++st_.pruned;
                continue;
            }
            HoleRef h = next_hole(cur.ast);
            auto cands = detail::fill_impl(cur.ast, h, *demos_,
                                           opt_.max_getnth_index,
                                           opt_.max_cond_atoms);
            if (cands.empty()) continue;   // dead branch, nothing to plug in
            std::vector<double> ws = model_->score_all(cands, cur, h, *demos_);
            double sum = 0.0;
            for (auto& w : ws) {
                if (!(w > 0.0) || !std::isfinite(w)) w = 1e-12;
                sum += w;
            }
            for (size_t i = 0; i < cands.size(); ++i) {
                if (st_.enqueued >= opt_.node_budget)
                    return finish(nullptr, "node-budget");
                PartialProgram child;
                child.ast = substitute_hole(cur.ast, h.ordinal, cands[i].fill);
                child.score = cur.score * (ws[i] / sum);
                child.derivation = cur.derivation;
                child.derivation.emplace_back(h, cands[i].text);
                wl_.push(std::move(child));
                ++st_.enqueued;
            }
        }
        return finish(nullptr, "exhausted");
    }

    bool done() const { return done_; }
    const CompleteStats& stats() const { return st_; }

  private:
    struct PruneMemo {
        AbstractEnvironment aenv;
        AbstractString atrace;
        std::unordered_map<std::string, char> verdicts;
    };

    CompleteResult finish(NodePtr program, const char* reason) {
        done_ = true;
        result_ = std::move(program);
        reason_ = reason;
        return {result_, reason_, st_};
    }

    bool pruned(const NodePtr& ast) {
        for (size_t di = 0; di < demos_->size(); ++di) {
            NodePtr resid = partial_eval(ast, (*demos_)[di].env);
            if (has_infeasible(resid)) return true;
            std::string key;
            detail::prune_key_walk(resid, key);
            auto& vmap = memo_[di].verdicts;
            auto it = vmap.find(key);
            bool good;
            if (it != vmap.end()) {
                good = it->second != 0;
            } else {
                RegexPtr r =
                    prog_to_regex(resid, memo_[di].aenv, opt_.widen_after);
                good = matches(r, memo_[di].atrace);
                vmap.emplace(std::move(key), good ? 1 : 0);
            }
            if (!good) return true;
        }
        return false;
    }

    const std::vector<Demonstration>* demos_;
    const CompletionModel* model_;
    CompleteOptions opt_;
    std::vector<PruneMemo> memo_;
    Worklist wl_;
    CompleteStats st_;
    bool done_ = false;
    NodePtr result_;
    std::string reason_;
};

inline CompleteResult complete_sketch(const NodePtr& sketch,
                                      const std::vector<Demonstration>& demos,
                                      const CompletionModel& model,
                                      const CompleteOptions& opt = {}) {
    CompletionSession session(sketch, demos, model, opt);
    return session.step();
}

}  // namespace tracelearn
