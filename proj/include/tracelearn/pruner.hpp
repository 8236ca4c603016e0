#pragma once

// Trace-compatibility pruning for partial programs.
//
// compatible(p, d) asks whether any completion of the partial program p could
// reproduce demonstration d.  A "false" answer is a proof; "true" is merely
// inconclusive.  The check runs in three stages:
//
//   1. partial_eval  - specialize p against d's start environment, executing
//                      everything that does not depend on a hole;
//   2. prog_to_regex - over-approximate the residual's possible traces by a
//                      regular expression over abstract tokens, using an
//                      abstract environment to bound loop iteration counts;
//   3. matches       - test d's abstracted trace for membership.

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tracelearn/dsl.hpp"
#include "tracelearn/env.hpp"
#include "tracelearn/regex.hpp"

namespace tracelearn {

inline constexpr int kDefaultWidenAfter = 8;
inline constexpr int kCardCap = 16;

// ---------------------------------------------------------------------------
// Abstract environments: a set of possible robot locations plus, for every
// (location, object type) pair, either the exact set of objects sitting there
// or "unknown".  The robot's inventory appears as the pseudo-location loc_r.

struct AbsCell {
    bool top = false;
    std::set<std::string> objs;   // meaningful only when !top

    static AbsCell exact(std::set<std::string> s) { return AbsCell{false, std::move(s)}; }
    static AbsCell unknown() { return AbsCell{true, {}}; }

    void make_top() {
        top = true;
        objs.clear();
    }

    bool operator==(const AbsCell& o) const {
        return top == o.top && (top || objs == o.objs);
    }
};

struct AbstractEnvironment {
    const Environment* base = nullptr;
    std::set<std::string> cur_locs;
    std::map<std::pair<std::string, std::string>, AbsCell> cells;   // (loc, type)

    const AbsCell* cell(const std::string& loc, const std::string& type) const {
        auto it = cells.find({loc, type});
        return it == cells.end() ? nullptr : &it->second;
    }
    AbsCell& cell_mut(const std::string& loc, const std::string& type) {
        return cells[{loc, type}];
    }

    // An absent cell reads as exactly-empty, so dropping empty entries keeps
    // the meaning while making the copies inside fixpoints much cheaper.
    void compact() {
        for (auto it = cells.begin(); it != cells.end();)
            it = !it->second.top && it->second.objs.empty() ? cells.erase(it)
                                                            : std::next(it);
    }

    // Base-environment id lists by type, computed once and shared by every
    // copy of this abstract state ("" collects everything). Not for use from
    // multiple threads on the same instance.
    const std::set<std::string>& objs_of_type(const std::string& ty) const {
        ensure_tdoms();
        auto it = tdoms->objs.find(ty);
        if (it == tdoms->objs.end()) {
            std::set<std::string> s;
            for (const auto& o : base->objects)
                if (ty.empty() || o.type == ty) s.insert(o.id);
            it = tdoms->objs.emplace(ty, std::move(s)).first;
        }
        return it->second;
    }
    const std::set<std::string>& locs_of_type(const std::string& ty) const {
        ensure_tdoms();
        auto it = tdoms->locs.find(ty);
        if (it == tdoms->locs.end()) {
            std::set<std::string> s;
            for (const auto& [id, t] : base->locations)
                if (ty.empty() || t == ty) s.insert(id);
            it = tdoms->locs.emplace(ty, std::move(s)).first;
        }
        return it->second;
    }

  private:
    struct TypeDomains {
        std::map<std::string, std::set<std::string>> objs, locs;
    };
    mutable std::shared_ptr<TypeDomains> tdoms;
    void ensure_tdoms() const {
        if (!tdoms) tdoms = std::make_shared<TypeDomains>();
    }
};

inline AbstractEnvironment abstract_env(const Environment& e) {
    AbstractEnvironment a;
    a.base = &e;
    a.cur_locs.insert(e.current_loc);
    std::vector<std::string> locs{kRobotLoc};
    for (const auto& [id, ty] : e.locations) {
        (void)ty;
        locs.push_back(id);
    }
    for (const auto& loc : locs)
        for (const auto& ty : e.vocab->object_types) a.cells[{loc, ty}] = AbsCell::exact({});
    for (const auto& o : e.objects) {
        auto it = a.cells.find({o.loc, o.type});
        if (it != a.cells.end()) it->second.objs.insert(o.id);
    }
    return a;
}

inline bool cell_leq(const AbsCell& a, const AbsCell& b) {
    if (b.top) return true;
    if (a.top) return false;
    return a.objs == b.objs;
}

inline AbsCell cell_join(const AbsCell& a, const AbsCell& b) {
    if (a.top || b.top) return AbsCell::unknown();
    if (a.objs == b.objs) return a;
    return AbsCell::unknown();
}

namespace detail {
inline const AbsCell& cell_or_empty(const AbstractEnvironment& a, const std::string& loc,
                                    const std::string& type) {
    static const AbsCell empty{};
    const AbsCell* c = a.cell(loc, type);
    return c ? *c : empty;
}
}   // namespace detail

inline bool abs_leq(const AbstractEnvironment& a, const AbstractEnvironment& b);

inline bool abs_equal(const AbstractEnvironment& a, const AbstractEnvironment& b) {
    // semantic equality: absent and exactly-empty cells are the same state
    return abs_leq(a, b) && abs_leq(b, a);
}

inline bool abs_leq(const AbstractEnvironment& a, const AbstractEnvironment& b) {
    if (!std::includes(b.cur_locs.begin(), b.cur_locs.end(), a.cur_locs.begin(),
                       a.cur_locs.end()))
        return false;
    for (const auto& [key, ca] : a.cells)
        if (!cell_leq(ca, detail::cell_or_empty(b, key.first, key.second))) return false;
    for (const auto& [key, cb] : b.cells)
        if (!a.cells.count(key) && !cell_leq(AbsCell{}, cb)) return false;
    return true;
}

inline AbstractEnvironment abs_join(const AbstractEnvironment& a, const AbstractEnvironment& b) {
    AbstractEnvironment out;
    out.base = a.base ? a.base : b.base;
    out.cur_locs = a.cur_locs;
    out.cur_locs.insert(b.cur_locs.begin(), b.cur_locs.end());
    out.cells = a.cells;
    for (const auto& [key, cb] : b.cells) {
        auto it = out.cells.find(key);
        if (it == out.cells.end())
            out.cells[key] = cell_join(AbsCell{}, cb);
        else
            it->second = cell_join(it->second, cb);
    }
    for (auto& [key, c] : out.cells)
        if (!b.cells.count(key)) c = cell_join(c, AbsCell{});
    return out;
}

// ---------------------------------------------------------------------------
// Scan cardinalities: the set of lengths a scan could yield, with `star`
// standing in for "unbounded" when an unknown cell is involved.

struct CardSet {
    std::set<int> counts;
    bool star = false;
};

namespace detail {

}   // namespace detail

inline CardSet scan_cards(const AbstractEnvironment& a, const Scan& s) {
    CardSet out;
    auto add_obj_type = [&](const std::string& ty) {
        for (const auto& loc : a.cur_locs) {
            const AbsCell& c = detail::cell_or_empty(a, loc, ty);
            if (c.top)
                out.star = true;
            else
                out.counts.insert((int)c.objs.size());
        }
    };
    if (!s.over_objects) {
        if (!s.is_hole) {
            out.counts.insert((int)a.locs_of_type(s.type).size());
        } else {
            for (const auto& ty : a.base->vocab->location_types)
                out.counts.insert((int)a.locs_of_type(ty).size());
        }
    } else if (!s.is_hole) {
        add_obj_type(s.type);
    } else {
        for (const auto& ty : a.base->vocab->object_types) add_obj_type(ty);
    }
    if ((int)out.counts.size() > kCardCap) {
        int lo = *out.counts.begin();
        int hi = *out.counts.rbegin();
        out.counts = {lo, hi};
        out.star = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Variable domains and the abstract transformer.

using VarDomains = std::map<std::string, std::set<std::string>>;

namespace detail {

using VarTypes = std::map<std::string, std::string>;

inline std::set<std::string> scan_domain(const AbstractEnvironment& a, const Scan& s) {
    if (!s.over_objects) return a.locs_of_type(s.is_hole ? "" : s.type);
    if (s.is_hole) return a.objs_of_type("");
    std::set<std::string> out;
    for (const auto& loc : a.cur_locs) {
        const AbsCell& c = cell_or_empty(a, loc, s.type);
        if (c.top) {
            const auto& all = a.objs_of_type(s.type);
            out.insert(all.begin(), all.end());
        } else {
            out.insert(c.objs.begin(), c.objs.end());
        }
    }
    return out;
}

inline std::set<std::string> let_domain(const AbstractEnvironment& a, const ProgramNode& n) {
    // getNth pins the value when the scanned list is fully known
    if (!n.index_is_hole && !n.scan.is_hole && n.index >= 0) {
        std::vector<std::string> items;
        bool exact = false;
        if (!n.scan.over_objects) {
            for (const auto& [id, t] : a.base->locations)
                if (t == n.scan.type) items.push_back(id);
            exact = true;
        } else if (a.cur_locs.size() == 1) {
            const AbsCell& c = cell_or_empty(a, *a.cur_locs.begin(), n.scan.type);
            if (!c.top) {
                for (const auto& o : a.base->objects)
                    if (o.type == n.scan.type && c.objs.count(o.id)) items.push_back(o.id);
                exact = true;
            }
        }
        if (exact && n.index < (int)items.size()) return {items[n.index]};
    }
    return scan_domain(a, n.scan);
}

inline std::set<std::string> slot_dom(const AbstractEnvironment& a, const Slot& s, bool loc,
                                      const VarDomains& doms, const VarTypes& vt) {
    switch (s.tag) {
        case Slot::Tag::Literal:
            return {s.name};
        case Slot::Tag::Var: {
            auto it = doms.find(s.name);
            if (it != doms.end() && !it->second.empty()) return it->second;
            auto t = vt.find(s.name);
            std::string ty = t == vt.end() ? "" : t->second;
            return loc ? a.locs_of_type(ty) : a.objs_of_type(ty);
        }
        case Slot::Tag::Hole:
            return loc ? a.locs_of_type(s.type) : a.objs_of_type(s.type);
    }
    return {};
}

inline void move_objects(AbstractEnvironment& a, const std::set<std::string>& movers,
                         const std::set<std::string>& dests) {
    std::vector<const ObjectDecl*> ms;
    for (const auto& m : movers)
        if (const ObjectDecl* od = a.base->object(m)) ms.push_back(od);
    if (ms.empty() || dests.empty()) return;
    if (ms.size() == 1 && dests.size() == 1) {
        // destination and mover both certain: relocate exactly
        const ObjectDecl* m = ms[0];
        for (auto& [key, c] : a.cells)
            if (key.second == m->type && !c.top) c.objs.erase(m->id);
        AbsCell& dst = a.cell_mut(*dests.begin(), m->type);
        if (!dst.top) dst.objs.insert(m->id);
        return;
    }
    std::set<std::string> mover_types;
    for (const ObjectDecl* m : ms) mover_types.insert(m->type);
    for (auto& [key, c] : a.cells) {
        if (c.top || !mover_types.count(key.second)) continue;
        for (const auto& o : c.objs)
            if (movers.count(o)) {
                c.make_top();
                break;
            }
    }
    for (const auto& d : dests)
        for (const auto& ty : mover_types) a.cell_mut(d, ty).make_top();
}

inline void abs_apply_action(AbstractEnvironment& a, const std::string& action,
                             const std::vector<Slot>& args, const VarDomains& doms,
                             const VarTypes& vt) {
    const ActionRule* rule = a.base->vocab->rule(action);
    if (!rule || (int)args.size() != rule->arity) {
        // unknown action: assume it could scatter anything anywhere,
        // including into cells the map does not carry yet
        for (const auto& ty : a.base->vocab->object_types) {
            a.cell_mut(kRobotLoc, ty).make_top();
            for (const auto& [id, lty] : a.base->locations) {
                (void)lty;
                a.cell_mut(id, ty).make_top();
            }
        }
        return;
    }
    for (const auto& ef : rule->effects) {
        if (ef.op != EffectOp::MoveToRobot && ef.op != EffectOp::MoveToCurrent &&
            ef.op != EffectOp::MoveToLocOf)
            continue;   // relations and properties are not tracked
        std::set<std::string> movers = slot_dom(a, args[ef.a], false, doms, vt);
        std::set<std::string> dests;
        if (ef.op == EffectOp::MoveToRobot) {
            dests.insert(kRobotLoc);
        } else if (ef.op == EffectOp::MoveToCurrent) {
            dests = a.cur_locs;
        } else {
            for (const auto& r : slot_dom(a, args[ef.b], false, doms, vt)) {
                const ObjectDecl* od = a.base->object(r);
                if (!od) continue;
                for (const auto& [key, c] : a.cells) {
                    if (key.second != od->type) continue;
                    if (c.top || c.objs.count(r)) dests.insert(key.first);
                }
            }
        }
        move_objects(a, movers, dests);
    }
}

inline AbstractEnvironment loop_invariant_ctx(const AbstractEnvironment& entry,
                                              const NodePtr& body, const Scan& scan,
                                              const std::string& var, int widen_after,
                                              const VarDomains& doms0, const VarTypes& vt0);

inline void abs_exec(AbstractEnvironment& a, const NodePtr& n, const VarDomains& doms,
                     const VarTypes& vt, int widen_after) {
    if (!n) return;
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
        case ProgramNode::Kind::Infeasible:
        case ProgramNode::Kind::Let:
            // a Let binds for its block's remaining statements; the Seq case
            // threads that binding, and a bare Let has no scope to bind in
            return;
        case ProgramNode::Kind::Goto: {
            auto d = slot_dom(a, n->arg1, true, doms, vt);
            a.cur_locs.insert(d.begin(), d.end());
            return;
        }
        case ProgramNode::Kind::ActUnary:
            abs_apply_action(a, n->action, {n->arg1}, doms, vt);
            return;
        case ProgramNode::Kind::ActBinary:
            abs_apply_action(a, n->action, {n->arg1, n->arg2}, doms, vt);
            return;
        case ProgramNode::Kind::If: {
            AbstractEnvironment taken = a;
            abs_exec(taken, n->body, doms, vt, widen_after);
            a = abs_join(a, taken);
            return;
        }
        case ProgramNode::Kind::Foreach:
            a = loop_invariant_ctx(a, n->body, n->scan, n->var, widen_after, doms, vt);
            return;
        case ProgramNode::Kind::Seq: {
            // bindings stay local to the block; copy the maps only if one occurs
            VarDomains own_doms;
            VarTypes own_vt;
            const VarDomains* d = &doms;
            const VarTypes* t = &vt;
            for (const auto& k : n->seq) {
                if (!k) continue;
                if (k->kind == ProgramNode::Kind::Let) {
                    if (d != &own_doms) {
                        own_doms = *d;
                        own_vt = *t;
                        d = &own_doms;
                        t = &own_vt;
                    }
                    own_doms[k->var] = let_domain(a, *k);
                    own_vt[k->var] = k->scan.is_hole ? "" : k->scan.type;
                } else {
                    abs_exec(a, k, *d, *t, widen_after);
                }
            }
            return;
        }
    }
}

inline AbstractEnvironment loop_invariant_ctx(const AbstractEnvironment& entry,
                                              const NodePtr& body, const Scan& scan,
                                              const std::string& var, int widen_after,
                                              const VarDomains& doms0, const VarTypes& vt0) {
    AbstractEnvironment acc = entry;
    acc.compact();
    VarDomains doms = doms0;
    VarTypes vt = vt0;
    vt[var] = scan.is_hole ? "" : scan.type;
    doms[var] = scan_domain(acc, scan);
    // only a concrete object scan reads the abstract cells, so only that
    // domain can change as the invariant grows
    const bool dom_varies = scan.over_objects && !scan.is_hole;
    for (int iter = 0;; ++iter) {
        if (dom_varies && iter > 0) doms[var] = scan_domain(acc, scan);
        AbstractEnvironment after = acc;
        abs_exec(after, body, doms, vt, widen_after);
        AbstractEnvironment next = abs_join(acc, after);
        if (abs_equal(next, acc)) return acc;
        if (iter >= widen_after) {
            // give up on unstable coordinates
            for (auto& [key, c] : next.cells) {
                if (!(c == cell_or_empty(acc, key.first, key.second))) c.make_top();
            }
            if (next.cur_locs != acc.cur_locs) {
                next.cur_locs.clear();
                for (const auto& [id, ty] : acc.base->locations) {
                    (void)ty;
                    next.cur_locs.insert(id);
                }
            }
        }
        acc = std::move(next);
    }
}

}   // namespace detail

inline AbstractEnvironment loop_invariant(const AbstractEnvironment& entry, const NodePtr& body,
                                          const Scan& scan, const std::string& var,
                                          int widen_after = kDefaultWidenAfter) {
    return detail::loop_invariant_ctx(entry, body, scan, var, widen_after, {}, {});
}

inline void update_abs_env(AbstractEnvironment& a, const NodePtr& stmt,
                           const VarDomains& doms = {},
                           int widen_after = kDefaultWidenAfter) {
    detail::abs_exec(a, stmt, doms, {}, widen_after);
}

// ---------------------------------------------------------------------------
// Capture-correct substitution of a value for a free variable.

namespace detail {

inline Slot subst_slot_var(const Slot& s, const std::string& var, const Slot& val) {
    return (s.tag == Slot::Tag::Var && s.name == var) ? val : s;
}

inline CondPtr subst_var_cond(const CondPtr& c, const std::string& var, const Slot& val) {
    if (!c) return c;
    switch (c->kind) {
        case CondNode::Kind::Hole:
            return c;
        case CondNode::Kind::Prop:
        case CondNode::Kind::Rel: {
            Slot a = subst_slot_var(c->a, var, val);
            Slot b = subst_slot_var(c->b, var, val);
            if (a == c->a && b == c->b) return c;
            CondNode copy = *c;
            copy.a = a;
            copy.b = b;
            return std::make_shared<CondNode>(copy);
        }
        case CondNode::Kind::Not: {
            CondPtr l = subst_var_cond(c->l, var, val);
            if (l == c->l) return c;
            CondNode copy = *c;
            copy.l = l;
            return std::make_shared<CondNode>(copy);
        }
        case CondNode::Kind::And:
        case CondNode::Kind::Or: {
            CondPtr l = subst_var_cond(c->l, var, val);
            CondPtr r = subst_var_cond(c->r, var, val);
            if (l == c->l && r == c->r) return c;
            CondNode copy = *c;
            copy.l = l;
            copy.r = r;
            return std::make_shared<CondNode>(copy);
        }
    }
    return c;
}

inline NodePtr subst_var(const NodePtr& n, const std::string& var, const Slot& val) {
    if (!n) return n;
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
        case ProgramNode::Kind::Infeasible:
        case ProgramNode::Kind::Let:
            // a Let's scan and index contain no variable references
            return n;
        case ProgramNode::Kind::Goto:
        case ProgramNode::Kind::ActUnary:
        case ProgramNode::Kind::ActBinary: {
            Slot a1 = subst_slot_var(n->arg1, var, val);
            Slot a2 = subst_slot_var(n->arg2, var, val);
            if (a1 == n->arg1 && a2 == n->arg2) return n;
            ProgramNode copy = *n;
            copy.arg1 = a1;
            copy.arg2 = a2;
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::If: {
            CondPtr c = subst_var_cond(n->cond, var, val);
            NodePtr b = subst_var(n->body, var, val);
            if (c == n->cond && b == n->body) return n;
            ProgramNode copy = *n;
            copy.cond = c;
            copy.body = b;
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::Foreach: {
            if (n->var == var) return n;   // shadowed throughout the body
            NodePtr b = subst_var(n->body, var, val);
            if (b == n->body) return n;
            ProgramNode copy = *n;
            copy.body = b;
            return std::make_shared<ProgramNode>(copy);
        }
        case ProgramNode::Kind::Seq: {
            std::vector<NodePtr> kids;
            kids.reserve(n->seq.size());
            bool changed = false;
            bool shadowed = false;
            for (const auto& k : n->seq) {
                if (shadowed || !k) {
                    kids.push_back(k);
                    continue;
                }
                NodePtr nk = subst_var(k, var, val);
                if (nk != k) changed = true;
                kids.push_back(nk);
                if (k->kind == ProgramNode::Kind::Let && k->var == var) shadowed = true;
            }
            if (!changed) return n;
            ProgramNode copy = *n;
            copy.seq = std::move(kids);
            return std::make_shared<ProgramNode>(copy);
        }
    }
    return n;
}

}   // namespace detail

// ---------------------------------------------------------------------------
// Partial evaluation.  Everything determined by the concrete start environment
// is executed; statements touched by a hole are kept verbatim and the facts
// they might disturb are tainted so later statements cannot rely on them.

namespace detail {

struct PEState {
    Environment world;
    bool cur_known = true;
    bool poisoned = false;
    std::set<std::string> tainted_props;
    std::set<std::string> tainted_rels;
    std::set<std::string> tainted_types;   // object placement, "" taints all
    int fresh = 0;
};

inline bool prop_tainted(const PEState& st, const std::string& p) {
    return st.tainted_props.count("") || st.tainted_props.count(p);
}
inline bool rel_tainted(const PEState& st, const std::string& r) {
    return st.tainted_rels.count("") || st.tainted_rels.count(r);
}
inline bool type_tainted(const PEState& st, const std::string& ty) {
    return st.tainted_types.count("") || st.tainted_types.count(ty);
}

inline void taint_action(PEState& st, const std::string& action, const std::vector<Slot>& args,
                         const VarTypes& vt) {
    const ActionRule* rule = st.world.vocab->rule(action);
    if (!rule || (int)args.size() != rule->arity) {
        st.tainted_props.insert("");
        st.tainted_rels.insert("");
        st.tainted_types.insert("");
        return;
    }
    auto arg_type = [&](const Slot& s) -> std::string {
        switch (s.tag) {
            case Slot::Tag::Literal: {
                const ObjectDecl* o = st.world.object(s.name);
                return o ? o->type : "";
            }
            case Slot::Tag::Var: {
                auto it = vt.find(s.name);
                return it == vt.end() ? "" : it->second;
            }
            case Slot::Tag::Hole:
                return s.type;
        }
        return "";
    };
    for (const auto& ef : rule->effects) {
        switch (ef.op) {
            case EffectOp::AddProp:
            case EffectOp::DelProp:
                st.tainted_props.insert(ef.name);
                break;
            case EffectOp::AddRel:
            case EffectOp::DelRel:
            case EffectOp::ClearRelFirst:
                st.tainted_rels.insert(ef.name);
                break;
            case EffectOp::MoveToRobot:
            case EffectOp::MoveToCurrent:
            case EffectOp::MoveToLocOf:
                st.tainted_types.insert(arg_type(args[ef.a]));
                break;
        }
    }
}

inline void taint_body(PEState& st, const NodePtr& n, VarTypes vt) {
    if (!n) return;
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
        case ProgramNode::Kind::Infeasible:
        case ProgramNode::Kind::Let:
            return;
        case ProgramNode::Kind::Goto:
            st.cur_known = false;
            return;
        case ProgramNode::Kind::ActUnary:
            taint_action(st, n->action, {n->arg1}, vt);
            return;
        case ProgramNode::Kind::ActBinary:
            taint_action(st, n->action, {n->arg1, n->arg2}, vt);
            return;
        case ProgramNode::Kind::If:
            taint_body(st, n->body, vt);
            return;
        case ProgramNode::Kind::Foreach:
            vt[n->var] = n->scan.is_hole ? "" : n->scan.type;
            taint_body(st, n->body, vt);
            return;
        case ProgramNode::Kind::Seq:
            for (const auto& k : n->seq) {
                if (!k) continue;
                if (k->kind == ProgramNode::Kind::Let)
                    vt[k->var] = k->scan.is_hole ? "" : k->scan.type;
                else
                    taint_body(st, k, vt);
            }
            return;
    }
}

inline bool cond_ground(const CondPtr& c) {
    if (!c) return false;
    switch (c->kind) {
        case CondNode::Kind::Hole:
            return false;
        case CondNode::Kind::Prop:
            return !c->name_is_hole && c->a.tag == Slot::Tag::Literal;
        case CondNode::Kind::Rel:
            return !c->name_is_hole && c->a.tag == Slot::Tag::Literal &&
                   c->b.tag == Slot::Tag::Literal;
        case CondNode::Kind::Not:
            return cond_ground(c->l);
        case CondNode::Kind::And:
        case CondNode::Kind::Or:
            return cond_ground(c->l) && cond_ground(c->r);
    }
    return false;
}

inline bool cond_untainted(const PEState& st, const CondPtr& c) {
    if (!c) return true;
    switch (c->kind) {
        case CondNode::Kind::Hole:
            return true;
        case CondNode::Kind::Prop:
            return !prop_tainted(st, c->name);
        case CondNode::Kind::Rel:
            return !rel_tainted(st, c->name);
        case CondNode::Kind::Not:
            return cond_untainted(st, c->l);
        case CondNode::Kind::And:
        case CondNode::Kind::Or:
            return cond_untainted(st, c->l) && cond_untainted(st, c->r);
    }
    return true;
}

inline bool guard_untainted(const PEState& st, const ActionRule& r) {
    for (const auto& g : r.guard)
        if (g.is_rel ? rel_tainted(st, g.name) : prop_tainted(st, g.name)) return false;
    return true;
}

inline void pe_flatten(const NodePtr& n, std::vector<NodePtr>& out) {
    if (!n || n->kind == ProgramNode::Kind::Skip) return;
    if (n->kind == ProgramNode::Kind::Seq) {
        for (const auto& k : n->seq) pe_flatten(k, out);
        return;
    }
    out.push_back(n);
}

inline void pe_poison(PEState& st, std::vector<NodePtr>& out) {
    out.push_back(prog::infeasible());
    st.poisoned = true;
}

inline void pe_action(const NodePtr& n, const std::vector<Slot>& args, PEState& st,
                      const VarTypes& vt, std::vector<NodePtr>& out) {
    const ActionRule* rule = st.world.vocab->rule(n->action);
    if (!rule || (int)args.size() != rule->arity) {
        pe_poison(st, out);
        return;
    }
    bool all_lit = true;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i].tag != Slot::Tag::Literal) {
            all_lit = false;
            continue;
        }
        // literal arguments fail identically under every completion
        const ObjectDecl* o = st.world.object(args[i].name);
        const std::string& want = rule->param_types[i];
        if (!o || (want != "any" && o->type != want)) {
            pe_poison(st, out);
            return;
        }
    }
    if (all_lit && guard_untainted(st, *rule)) {
        std::vector<std::string> names;
        for (const auto& s : args) names.push_back(s.name);
        try {
            apply_action_inplace(st.world, n->action, names);
        } catch (const Error&) {
            pe_poison(st, out);
            return;
        }
        out.push_back(n);
        return;
    }
    out.push_back(n);
    taint_action(st, n->action, args, vt);
}

inline void pe_block(std::vector<NodePtr> stmts, PEState& st, VarTypes vt,
                     std::vector<NodePtr>& out) {
    auto scan_evaluable = [&](const Scan& s) {
        if (s.is_hole) return false;
        if (!s.over_objects) return true;
        return st.cur_known && !type_tainted(st, s.type);
    };
    auto scan_items = [&](const Scan& s) {
        return s.over_objects ? st.world.objs(st.world.current_loc, s.type)
                              : st.world.locs(s.type);
    };
    // substitute a binding into the remaining statements of this block,
    // stopping at a rebinding of the same name
    auto bind_rest = [](std::vector<NodePtr>& v, size_t from, const std::string& var,
                        const Slot& val) {
        for (size_t j = from; j < v.size(); ++j) {
            v[j] = subst_var(v[j], var, val);
            if (v[j] && v[j]->kind == ProgramNode::Kind::Let && v[j]->var == var) break;
        }
    };

    for (size_t i = 0; i < stmts.size(); ++i) {
        if (st.poisoned) return;
        const NodePtr n = stmts[i];
        if (!n || n->kind == ProgramNode::Kind::Skip) continue;
        switch (n->kind) {
            case ProgramNode::Kind::Skip:
                break;
            case ProgramNode::Kind::Infeasible:
                pe_poison(st, out);
                return;
            case ProgramNode::Kind::Goto:
                if (n->arg1.tag == Slot::Tag::Literal) {
                    if (!st.world.has_location(n->arg1.name)) {
                        pe_poison(st, out);
                        return;
                    }
                    st.world.current_loc = n->arg1.name;
                    st.cur_known = true;
                } else {
                    st.cur_known = false;
                }
                out.push_back(n);
                break;
            case ProgramNode::Kind::ActUnary:
                pe_action(n, {n->arg1}, st, vt, out);
                break;
            case ProgramNode::Kind::ActBinary:
                pe_action(n, {n->arg1, n->arg2}, st, vt, out);
                break;
            case ProgramNode::Kind::If: {
                bool decided = false, taken = false;
                if (cond_ground(n->cond) && cond_untainted(st, n->cond)) {
                    try {
                        taken = eval_bool(n->cond, Valuation{}, st.world);
                        decided = true;
                    } catch (const Error&) {
                        decided = false;
                    }
                }
                if (!decided) {
                    out.push_back(n);
                    taint_body(st, n->body, vt);
                } else if (taken) {
                    std::vector<NodePtr> kids;
                    pe_flatten(n->body, kids);
                    pe_block(std::move(kids), st, vt, out);
                    if (st.poisoned) return;
                }
                break;
            }
            case ProgramNode::Kind::Foreach:
                if (scan_evaluable(n->scan)) {
                    for (const auto& item : scan_items(n->scan)) {
                        NodePtr body =
                            subst_var(n->body, n->var, Slot::lit(item, n->scan.type));
                        std::vector<NodePtr> kids;
                        pe_flatten(body, kids);
                        pe_block(std::move(kids), st, vt, out);
                        if (st.poisoned) return;
                    }
                } else {
                    out.push_back(n);
                    VarTypes vt2 = vt;
                    vt2[n->var] = n->scan.is_hole ? "" : n->scan.type;
                    taint_body(st, n->body, vt2);
                }
                break;
            case ProgramNode::Kind::Let: {
                bool ev = scan_evaluable(n->scan);
                std::vector<std::string> items;
                if (ev) items = scan_items(n->scan);
                if (ev && n->index_is_hole && items.empty()) {
                    // every index is out of range on an empty list
                    pe_poison(st, out);
                    return;
                }
                if (ev && !n->index_is_hole) {
                    if (n->index < 0 || n->index >= (int)items.size()) {
                        pe_poison(st, out);
                        return;
                    }
                    bind_rest(stmts, i + 1, n->var,
                              Slot::lit(items[n->index], n->scan.type));
                    break;   // the binding itself evaporates
                }
                // kept: rename the binder so spliced copies cannot collide
                std::string fresh = "pe" + std::to_string(++st.fresh);
                ProgramNode copy = *n;
                copy.var = fresh;
                out.push_back(std::make_shared<ProgramNode>(copy));
                std::string ty = n->scan.is_hole ? "" : n->scan.type;
                bind_rest(stmts, i + 1, n->var, Slot::var(fresh, ty));
                vt[fresh] = ty;
                break;
            }
            case ProgramNode::Kind::Seq: {
                std::vector<NodePtr> kids;
                pe_flatten(n, kids);
                pe_block(std::move(kids), st, vt, out);
                if (st.poisoned) return;
                break;
            }
        }
    }
}

}   // namespace detail

inline NodePtr partial_eval(const NodePtr& p, const Environment& env) {
    detail::PEState st;
    st.world = env;
    std::vector<NodePtr> stmts, out;
    detail::pe_flatten(p, stmts);
    detail::pe_block(std::move(stmts), st, {}, out);
    if (out.empty()) return prog::skip();
    if (out.size() == 1) return out[0];
    return prog::seq(std::move(out));
}

inline bool has_infeasible(const NodePtr& n) {
    if (!n) return false;
    if (n->kind == ProgramNode::Kind::Infeasible) return true;
    if (has_infeasible(n->body)) return true;
    for (const auto& k : n->seq)
        if (has_infeasible(k)) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Residual program to regex.

namespace detail {

inline std::string slot_token_type(const AbstractEnvironment& a, const Slot& s, bool loc,
                                   const VarTypes& vt) {
    switch (s.tag) {
        case Slot::Tag::Literal: {
            if (loc) {
                const std::string* t = a.base->location_type(s.name);
                return t ? *t : "?";
            }
            const ObjectDecl* o = a.base->object(s.name);
            return o ? o->type : "?";
        }
        case Slot::Tag::Var: {
            auto it = vt.find(s.name);
            return it == vt.end() || it->second.empty() ? "?" : it->second;
        }
        case Slot::Tag::Hole:
            return s.type.empty() ? "?" : s.type;
    }
    return "?";
}

inline RegexPtr p2r(const NodePtr& n, AbstractEnvironment& a, VarDomains& doms, VarTypes& vt,
                    int widen_after) {
    if (!n) return rx::eps();
    switch (n->kind) {
        case ProgramNode::Kind::Skip:
        case ProgramNode::Kind::Infeasible:
            return rx::eps();
        case ProgramNode::Kind::Goto: {
            std::string ty = slot_token_type(a, n->arg1, true, vt);
            auto d = slot_dom(a, n->arg1, true, doms, vt);
            a.cur_locs.insert(d.begin(), d.end());
            return rx::tok(Token::go(ty));
        }
        case ProgramNode::Kind::ActUnary: {
            std::string t1 = slot_token_type(a, n->arg1, false, vt);
            abs_apply_action(a, n->action, {n->arg1}, doms, vt);
            return rx::tok(Token::act(n->action, t1));
        }
        case ProgramNode::Kind::ActBinary: {
            std::string t1 = slot_token_type(a, n->arg1, false, vt);
            std::string t2 = slot_token_type(a, n->arg2, false, vt);
            abs_apply_action(a, n->action, {n->arg1, n->arg2}, doms, vt);
            return rx::tok(Token::act(n->action, t1, t2));
        }
        case ProgramNode::Kind::If: {
            AbstractEnvironment taken = a;
            VarDomains d2 = doms;
            VarTypes vt2 = vt;
            RegexPtr body = p2r(n->body, taken, d2, vt2, widen_after);
            a = abs_join(a, taken);
            return rx::opt(body);
        }
        case ProgramNode::Kind::Foreach: {
            CardSet cards = scan_cards(a, n->scan);
            AbstractEnvironment inv =
                loop_invariant_ctx(a, n->body, n->scan, n->var, widen_after, doms, vt);
            VarDomains d2 = doms;
            VarTypes vt2 = vt;
            d2[n->var] = scan_domain(inv, n->scan);
            vt2[n->var] = n->scan.is_hole ? "" : n->scan.type;
            AbstractEnvironment benv = inv;
            RegexPtr body = p2r(n->body, benv, d2, vt2, widen_after);
            a = std::move(inv);
            if (cards.star) return rx::star_power(body);
            std::vector<RegexPtr> alts;
            for (int c : cards.counts) {
                if (c == 0)
                    alts.push_back(rx::eps());
                else if (c == 1)
                    alts.push_back(body);
                else
                    alts.push_back(rx::power(body, c));
            }
            return rx::alt(std::move(alts));
        }
        case ProgramNode::Kind::Let:
            doms[n->var] = let_domain(a, *n);
            vt[n->var] = n->scan.is_hole ? "" : n->scan.type;
            return rx::eps();
        case ProgramNode::Kind::Seq: {
            std::vector<RegexPtr> kids;
            for (const auto& k : n->seq) {
                RegexPtr r = p2r(k, a, doms, vt, widen_after);
                if (r->kind != Regex::Kind::Eps) kids.push_back(r);
            }
            return rx::concat(std::move(kids));
        }
    }
    return rx::eps();
}

}   // namespace detail

inline RegexPtr prog_to_regex(const NodePtr& p, const AbstractEnvironment& start,
                              int widen_after = kDefaultWidenAfter) {
    AbstractEnvironment a = start;
    a.compact();
    VarDomains doms;
    detail::VarTypes vt;
    return detail::p2r(p, a, doms, vt, widen_after);
}

// ---------------------------------------------------------------------------
// The compatibility check itself.

inline bool compatible(const NodePtr& partial, const Demonstration& d,
                       int widen_after = kDefaultWidenAfter) {
    NodePtr residual = partial_eval(partial, d.env);
    if (has_infeasible(residual)) return false;
    AbstractEnvironment a = abstract_env(d.env);
    RegexPtr r = prog_to_regex(residual, a, widen_after);
    return matches(r, abstract_trace(d.trace, d.env));
}

}   // namespace tracelearn
