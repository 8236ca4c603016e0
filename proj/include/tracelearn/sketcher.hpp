// Sketch inference: translates an alternation-free regex over abstract trace
// tokens into program sketches with typed holes, checks/repairs perception
// completeness, and enumerates let-insertion variants in a fixed order.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tracelearn/dsl.hpp"
#include "tracelearn/regex.hpp"

namespace tracelearn {

inline constexpr int kDefaultMaxExtraLets = 2;

struct Sketch {
    NodePtr prog;
    RegexPtr origin;
    int repair_lets = 0;   // lets inserted to reach perception completeness
    int extra_lets = 0;    // additional speculative lets
    int loc_loops = 0;     // loops scanning locations

    int lets_inserted() const { return repair_lets + extra_lets; }
};

// First statement whose argument type has no preceding scan of the right
// kind in scope.
struct PerceptionNeed {
    NodePtr stmt;
    bool want_location = false;
    std::string type;
};

namespace detail {

// ---- block utilities ------------------------------------------------------
//
// A block is a statement list; Seq nodes hold one explicitly, anything else
// is a singleton. Block addresses are statement-index paths from the root:
// addr [i0, i1] names the block of stmts[i0]'s body's stmt i1's body.

inline std::vector<NodePtr> block_stmts(const NodePtr& n) {
    if (n->kind == ProgramNode::Kind::Seq) return n->seq;
    return {n};
}

inline NodePtr make_block(std::vector<NodePtr> stmts) {
    if (stmts.empty()) return prog::skip();
    if (stmts.size() == 1) return stmts[0];
    return prog::seq(std::move(stmts));
}

inline bool has_body(const NodePtr& n) {
    return n->kind == ProgramNode::Kind::If ||
           n->kind == ProgramNode::Kind::Foreach;
}

// ---- regex -> skeleton ----------------------------------------------------

inline const Token* first_token(const RegexPtr& r) {
    switch (r->kind) {
        case Regex::Kind::Tok:
            return &r->tok;
        case Regex::Kind::Eps:
            return nullptr;
        default:
            for (const auto& k : r->kids)
                if (const Token* t = first_token(k)) return t;
            return nullptr;
    }
}

// Preorder list of Star nodes with their preferred loop kind: a loop whose
// body begins with a goto walks locations, everything else walks objects.
inline void star_preferences(const RegexPtr& r, std::vector<bool>& prefer_loc) {
    if (r->kind == Regex::Kind::Star) {
        const Token* t = first_token(r->kids[0]);
        prefer_loc.push_back(t != nullptr && t->is_goto);
    }
    if (r->kind != Regex::Kind::Tok && r->kind != Regex::Kind::Eps)
        for (const auto& k : r->kids) star_preferences(k, prefer_loc);
}

inline NodePtr token_stmt(const Token& t) {
    if (t.is_goto) return prog::goto_(Slot::hole(t.types[0]));
    if (t.types.size() == 1)
        return prog::act1(t.action, Slot::hole(t.types[0]));
    return prog::act2(t.action, Slot::hole(t.types[0]), Slot::hole(t.types[1]));
}

// Builds the skeleton for one loop-kind assignment. Returns nullptr for an
// empty (epsilon) fragment. Fresh binders are numbered v1, v2, ... in
// program order.
inline NodePtr skeleton(const RegexPtr& r, const std::vector<bool>& star_is_loc,
                        size_t& si, int& counter) {
    switch (r->kind) {
        case Regex::Kind::Eps:
            return nullptr;
        case Regex::Kind::Tok:
            return token_stmt(r->tok);
        case Regex::Kind::Concat: {
            std::vector<NodePtr> parts;
            for (const auto& k : r->kids)
                if (NodePtr s = skeleton(k, star_is_loc, si, counter))
                    parts.push_back(std::move(s));
            if (parts.empty()) return nullptr;
            return make_block(std::move(parts));
        }
        case Regex::Kind::Star: {
            bool loc = star_is_loc[si++];
            std::string v = "v" + std::to_string(++counter);
            NodePtr body = skeleton(r->kids[0], star_is_loc, si, counter);
            return prog::foreach(std::move(v),
                                 loc ? Scan::loc_hole() : Scan::obj_hole(),
                                 body ? body : prog::skip());
        }
        case Regex::Kind::Opt: {
            NodePtr body = skeleton(r->kids[0], star_is_loc, si, counter);
            return prog::if_(CondNode::hole(), body ? body : prog::skip());
        }
        case Regex::Kind::Alt:
            fail("AltPresent", "sketch translation requires an alternation-free regex");
        default:
            fail("UnsupportedRegex", "bounded repetition has no sketch form");
    }
}

// ---- perception analysis --------------------------------------------------

struct ScanAvail {
    bool is_loc = false;
    bool committed = false;
    std::string type;
};

struct UseSite {
    bool want_loc = false;
    std::string type;
    std::vector<int> block;   // address of the enclosing block
    int idx = 0;              // statement index within it
    NodePtr stmt;
};

class PerceptionWalk {
public:
    explicit PerceptionWalk(bool stop_at_first) : stop_(stop_at_first) {}

    std::vector<UseSite> run(const NodePtr& root) {
        frames_.clear();
        unsat_.clear();
        std::vector<int> addr;
        walk_block(block_stmts(root), addr);
        return std::move(unsat_);
    }

private:
    bool satisfied(bool want_loc, const std::string& type) const {
        for (const auto& frame : frames_)
            for (const auto& s : frame)
                if (s.is_loc == want_loc && (!s.committed || s.type == type))
                    return true;
        return false;
    }

    void need(bool want_loc, const Slot& slot, const std::vector<int>& addr,
              int idx, const NodePtr& stmt) {
        if (!slot.is_hole()) return;   // bound vars were scanned at binding
        if (satisfied(want_loc, slot.type)) return;
        unsat_.push_back({want_loc, slot.type, addr, idx, stmt});
    }

    void walk_block(const std::vector<NodePtr>& stmts, std::vector<int>& addr) {
        frames_.emplace_back();
        for (int i = 0; i < static_cast<int>(stmts.size()); ++i) {
            if (stop_ && !unsat_.empty()) break;
            const NodePtr& s = stmts[i];
            switch (s->kind) {
                case ProgramNode::Kind::Goto:
                    need(true, s->arg1, addr, i, s);
                    break;
                case ProgramNode::Kind::ActUnary:
                    need(false, s->arg1, addr, i, s);
                    break;
                case ProgramNode::Kind::ActBinary:
                    need(false, s->arg1, addr, i, s);
                    need(false, s->arg2, addr, i, s);
                    break;
                case ProgramNode::Kind::Let:
                    frames_.back().push_back(
                        {!s->scan.over_objects, !s->scan.is_hole, s->scan.type});
                    break;
                case ProgramNode::Kind::Foreach: {
                    frames_.emplace_back();
                    frames_.back().push_back(
                        {!s->scan.over_objects, !s->scan.is_hole, s->scan.type});
                    addr.push_back(i);
                    walk_block(block_stmts(s->body), addr);
                    addr.pop_back();
                    frames_.pop_back();
                    break;
                }
                case ProgramNode::Kind::If: {
                    frames_.emplace_back();
                    addr.push_back(i);
                    walk_block(block_stmts(s->body), addr);
                    addr.pop_back();
                    frames_.pop_back();
                    break;
                }
                case ProgramNode::Kind::Seq:
                    // nested sequences share the enclosing frame; sketches
                    // never produce them, but arbitrary programs may
                    addr.push_back(i);
                    walk_block(block_stmts(s), addr);
                    addr.pop_back();
                    break;
                default:
                    break;
            }
        }
        frames_.pop_back();
    }

    bool stop_;
    std::vector<std::vector<ScanAvail>> frames_;
    std::vector<UseSite> unsat_;
};

// ---- let insertion --------------------------------------------------------

struct LetInsert {
    std::vector<int> block;
    int pos = 0;            // insert before original statement index pos
    Scan scan;
    int order = 0;          // stable order among inserts at one position
};

inline NodePtr insert_rebuild(const std::vector<NodePtr>& stmts,
                              std::vector<int>& addr,
                              const std::vector<LetInsert>& ins, int& counter) {
    std::vector<NodePtr> out;
    for (int i = 0; i <= static_cast<int>(stmts.size()); ++i) {
        std::vector<const LetInsert*> here;
        for (const auto& li : ins)
            if (li.block == addr && li.pos == i) here.push_back(&li);
        std::sort(here.begin(), here.end(),
                  [](const LetInsert* a, const LetInsert* b) {
                      return a->order < b->order;
                  });
        for (const LetInsert* li : here)
            out.push_back(prog::let_hole_index("v" + std::to_string(++counter),
                                               li->scan));
        if (i == static_cast<int>(stmts.size())) break;
        const NodePtr& s = stmts[i];
        if (has_body(s)) {
            addr.push_back(i);
            NodePtr body =
                insert_rebuild(block_stmts(s->body), addr, ins, counter);
            addr.pop_back();
            auto copy = std::make_shared<ProgramNode>(*s);
            copy->body = std::move(body);
            out.push_back(std::move(copy));
        } else if (s->kind == ProgramNode::Kind::Seq) {
            addr.push_back(i);
            out.push_back(insert_rebuild(s->seq, addr, ins, counter));
            addr.pop_back();
        } else {
            out.push_back(s);
        }
    }
    return make_block(std::move(out));
}

inline NodePtr insert_lets(const NodePtr& root, const std::vector<LetInsert>& ins,
                           int& counter) {
    if (ins.empty()) return root;
    std::vector<int> addr;
    return insert_rebuild(block_stmts(root), addr, ins, counter);
}

inline int count_binders(const NodePtr& n) {
    int c = 0;
    switch (n->kind) {
        case ProgramNode::Kind::Let:
            return 1;
        case ProgramNode::Kind::Foreach:
            return 1 + count_binders(n->body);
        case ProgramNode::Kind::If:
            return count_binders(n->body);
        case ProgramNode::Kind::Seq:
            for (const auto& k : n->seq) c += count_binders(k);
            return c;
        default:
            return 0;
    }
}

// Insertion slots for speculative lets, in program order: one before each
// statement of each block. A let at the end of a block can never be used.
inline void collect_slots(const std::vector<NodePtr>& stmts,
                          std::vector<int>& addr,
                          std::vector<std::pair<std::vector<int>, int>>& out) {
    for (int i = 0; i < static_cast<int>(stmts.size()); ++i) {
        out.emplace_back(addr, i);
        const NodePtr& s = stmts[i];
        if (has_body(s)) {
            addr.push_back(i);
            collect_slots(block_stmts(s->body), addr, out);
            addr.pop_back();
        }
    }
}

}  // namespace detail

// True iff every act argument type has a preceding scanObj of that type in
// scope and every goto type a preceding scanLoc. Scan-type holes count
// optimistically. On failure, fills *witness with the first violation.
inline bool is_perception_complete(const NodePtr& p,
                                   PerceptionNeed* witness = nullptr) {
    detail::PerceptionWalk walk(true);
    auto unsat = walk.run(p);
    if (unsat.empty()) return true;
    if (witness != nullptr)
        *witness = {unsat[0].stmt, unsat[0].want_loc, unsat[0].type};
    return false;
}

// Inserts the minimum number of `let v := getNth(scan(T), ??)` bindings that
// make the program perception-complete: one per missing (kind, type), placed
// immediately before the first use at the shallowest scope covering all uses.
inline NodePtr repair_perception(const NodePtr& p, int* lets_added = nullptr) {
    detail::PerceptionWalk walk(false);
    auto unsat = walk.run(p);
    if (lets_added != nullptr) *lets_added = 0;
    if (unsat.empty()) return p;

    struct Group {
        bool want_loc;
        std::string type;
        std::vector<const detail::UseSite*> uses;
    };
    std::vector<Group> groups;
    for (const auto& u : unsat) {
        Group* g = nullptr;
        for (auto& cand : groups)
            if (cand.want_loc == u.want_loc && cand.type == u.type) g = &cand;
        if (g == nullptr) {
            groups.push_back({u.want_loc, u.type, {}});
            g = &groups.back();
        }
        g->uses.push_back(&u);
    }

    std::vector<detail::LetInsert> ins;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        std::vector<int> lca = g.uses[0]->block;
        for (const auto* u : g.uses) {
            size_t n = 0;
            while (n < lca.size() && n < u->block.size() &&
                   lca[n] == u->block[n])
                ++n;
            lca.resize(n);
        }
        int pos = -1;
        for (const auto* u : g.uses) {
            int lift = u->block.size() == lca.size()
                           ? u->idx
                           : u->block[lca.size()];
            if (pos < 0 || lift < pos) pos = lift;
        }
        Scan s = g.want_loc ? Scan::locations(g.type) : Scan::objects(g.type);
        ins.push_back({lca, pos, s, static_cast<int>(gi)});
    }

    int counter = detail::count_binders(p);
    NodePtr fixed = detail::insert_lets(p, ins, counter);
    if (lets_added != nullptr) *lets_added = static_cast<int>(ins.size());
    return fixed;
}

// Enumerates sketches for an alternation-free regex: first every loop-kind
// assignment (each Star scans locations or objects), perception-repaired;
// then variants with up to max_extra_lets speculative lets inserted at every
// program point. Order: fewer lets, then fewer location loops, then position.
class SketchStream {
public:
    explicit SketchStream(RegexPtr r, int max_extra_lets = kDefaultMaxExtraLets)
        : origin_(std::move(r)) {
        std::vector<bool> prefer_loc;
        detail::star_preferences(origin_, prefer_loc);
        const int n = static_cast<int>(prefer_loc.size());
        if (n > 12)
            fail("TooManyLoops", "regex has " + std::to_string(n) + " stars");

        for (long e = 0; e < (1L << n); ++e) {
            Base b;
            b.assign.resize(n);
            b.enum_idx = e;
            for (int i = 0; i < n; ++i) {
                bool flip = (e >> (n - 1 - i)) & 1;
                b.assign[i] = flip ? !prefer_loc[i] : prefer_loc[i];
                if (b.assign[i]) ++b.loc_loops;
            }
            size_t si = 0;
            int counter = 0;
            NodePtr skel =
                detail::skeleton(origin_, b.assign, si, counter);
            if (!skel) skel = prog::skip();
            b.prog = repair_perception(skel, &b.repair_lets);
            b.binders = detail::count_binders(b.prog);
            std::vector<int> addr;
            detail::collect_slots(detail::block_stmts(b.prog), addr, b.slots);
            bases_.push_back(std::move(b));
        }
        std::stable_sort(bases_.begin(), bases_.end(),
                         [](const Base& a, const Base& b) {
                             return std::tie(a.repair_lets, a.loc_loops,
                                             a.enum_idx) <
                                    std::tie(b.repair_lets, b.loc_loops,
                                             b.enum_idx);
                         });

        for (int bi = 0; bi < static_cast<int>(bases_.size()); ++bi) {
            const Base& b = bases_[bi];
            std::vector<std::pair<int, int>> items;
            for (int s = 0; s < static_cast<int>(b.slots.size()); ++s) {
                items.emplace_back(s, 0);
                items.emplace_back(s, 1);
            }
            if (items.empty()) continue;
            // nondecreasing index sequences give each multiset of lets once,
            // in lexicographic order
            for (int e = 1; e <= max_extra_lets; ++e) {
                std::vector<int> pick(e, 0);
                while (true) {
                    Variant v;
                    v.base = bi;
                    for (int idx : pick) v.lets.push_back(items[idx]);
                    variants_.push_back(std::move(v));
                    int j = e - 1;
                    while (j >= 0 && pick[j] == static_cast<int>(items.size()) - 1)
                        --j;
                    if (j < 0) break;
                    int nv = pick[j] + 1;
                    for (int t = j; t < e; ++t) pick[t] = nv;
                }
            }
        }
        std::stable_sort(
            variants_.begin(), variants_.end(),
            [this](const Variant& x, const Variant& y) {
                const Base& bx = bases_[x.base];
                const Base& by = bases_[y.base];
                int lx = bx.repair_lets + static_cast<int>(x.lets.size());
                int ly = by.repair_lets + static_cast<int>(y.lets.size());
                return std::tie(lx, bx.loc_loops, x.base, x.lets) <
                       std::tie(ly, by.loc_loops, y.base, y.lets);
            });
    }

    std::optional<Sketch> next() {
        if (base_pos_ < bases_.size()) {
            const Base& b = bases_[base_pos_++];
            return Sketch{b.prog, origin_, b.repair_lets, 0, b.loc_loops};
        }
        if (var_pos_ < variants_.size()) {
            const Variant& v = variants_[var_pos_++];
            const Base& b = bases_[v.base];
            std::vector<detail::LetInsert> ins;
            for (size_t i = 0; i < v.lets.size(); ++i) {
                const auto& slot = b.slots[v.lets[i].first];
                Scan s = v.lets[i].second ? Scan::loc_hole() : Scan::obj_hole();
                ins.push_back(
                    {slot.first, slot.second, s, static_cast<int>(i)});
            }
            int counter = b.binders;
            NodePtr p = detail::insert_lets(b.prog, ins, counter);
            return Sketch{p, origin_, b.repair_lets,
                          static_cast<int>(v.lets.size()), b.loc_loops};
        }
        return std::nullopt;
    }

private:
    struct Base {
        NodePtr prog;
        std::vector<bool> assign;
        long enum_idx = 0;
        int repair_lets = 0;
        int loc_loops = 0;
        int binders = 0;
        std::vector<std::pair<std::vector<int>, int>> slots;
    };
    struct Variant {
        int base = 0;
        std::vector<std::pair<int, int>> lets;   // (slot index, 1 = scanLoc)
    };

    RegexPtr origin_;
    std::vector<Base> bases_;
    std::vector<Variant> variants_;
    size_t base_pos_ = 0;
    size_t var_pos_ = 0;
};

inline SketchStream regex_to_sketches(RegexPtr r,
                                      int max_extra_lets = kDefaultMaxExtraLets) {
    return SketchStream(std::move(r), max_extra_lets);
}

}  // namespace tracelearn
