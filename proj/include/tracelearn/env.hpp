#pragma once

// Symbolic household environments: typed locations and objects, unary
// property facts, binary relation facts, and data-driven action rules.

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tracelearn {

using Json = nlohmann::ordered_json;

// All library failures carry a stable machine-readable code plus a
// human-readable message. Tests match on the code.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
    throw Error(code, msg);
}

// The distinguished carry location: grabbed objects live here. It is not a
// declared location and can never be the robot's current location.
inline const std::string kRobotLoc = "loc_r";

// One guard atom of an action rule, interpreted over the rule's parameters.
struct GuardAtom {
    bool is_rel = false;
    std::string name;
    int a = 0;   // parameter index
    int b = 0;   // second parameter index (relations only)
    bool negated = false;

    bool operator==(const GuardAtom&) const = default;
};

// Effects are a small fixed vocabulary of state edits over parameters.
enum class EffectOp {
    AddProp,
    DelProp,
    AddRel,
    DelRel,
    ClearRelFirst,   // drop every (o, *) pair of the named relation
    MoveToRobot,     // object moves to loc_r
    MoveToLocOf,     // object a moves to the location of object b
    MoveToCurrent,   // object moves to the robot's current location
};

struct Effect {
    EffectOp op = EffectOp::AddProp;
    std::string name;   // property or relation name; empty for moves
    int a = 0;
    int b = 0;

    bool operator==(const Effect&) const = default;
};

struct ActionRule {
    std::string name;
    int arity = 1;
    std::vector<std::string> param_types;   // "any" admits every object type
    std::vector<GuardAtom> guard;
    std::vector<Effect> effects;

    bool operator==(const ActionRule&) const = default;
};

// The default registry: household actions with the usual guards. Environment
// files may override any of these or add their own.
inline std::vector<ActionRule> default_action_rules() {
    auto prop = [](EffectOp op, const std::string& n, int i) {
        return Effect{op, n, i, 0};
    };
    std::vector<ActionRule> rules;
    rules.push_back({"open", 1, {"any"},
                     {},
                     {prop(EffectOp::AddProp, "opened", 0),
                      prop(EffectOp::DelProp, "closed", 0)}});
    rules.push_back({"close", 1, {"any"},
                     {},
                     {prop(EffectOp::AddProp, "closed", 0),
                      prop(EffectOp::DelProp, "opened", 0)}});
    rules.push_back({"grab", 1, {"any"},
                     {},
                     {Effect{EffectOp::MoveToRobot, "", 0, 0},
                      Effect{EffectOp::ClearRelFirst, "on-top-of", 0, 0},
                      Effect{EffectOp::ClearRelFirst, "inside-of", 0, 0},
                      Effect{EffectOp::ClearRelFirst, "next-to", 0, 0}}});
    rules.push_back({"sweep", 1, {"any"},
                     {},
                     {prop(EffectOp::AddProp, "clean", 0),
                      prop(EffectOp::DelProp, "dirty", 0)}});
    rules.push_back({"turn-off", 1, {"any"},
                     {},
                     {prop(EffectOp::AddProp, "off", 0),
                      prop(EffectOp::DelProp, "on", 0)}});
    rules.push_back({"put-in", 2, {"any", "any"},
                     {GuardAtom{false, "opened", 1, 0, false}},
                     {prop(EffectOp::DelProp, "empty", 1),
                      Effect{EffectOp::AddRel, "inside-of", 0, 1}}});
    rules.push_back({"pour-into", 2, {"any", "any"},
                     {},
                     {prop(EffectOp::AddProp, "empty", 0)}});
    rules.push_back({"scrub-with", 2, {"any", "any"},
                     {},
                     {prop(EffectOp::AddProp, "clean", 0),
                      prop(EffectOp::DelProp, "dirty", 0)}});
    return rules;
}

struct Vocabulary {
    std::vector<std::string> location_types;
    std::vector<std::string> object_types;
    std::vector<std::string> properties;
    std::vector<std::string> relations;
    std::vector<std::string> unary_actions;
    std::vector<std::string> binary_actions;
    std::vector<ActionRule> actions;

    bool operator==(const Vocabulary&) const = default;

    bool has_location_type(const std::string& t) const {
        return std::find(location_types.begin(), location_types.end(), t) !=
               location_types.end();
    }
    bool has_object_type(const std::string& t) const {
        return std::find(object_types.begin(), object_types.end(), t) !=
               object_types.end();
    }
    bool has_property(const std::string& p) const {
        return std::find(properties.begin(), properties.end(), p) !=
               properties.end();
    }
    bool has_relation(const std::string& r) const {
        return std::find(relations.begin(), relations.end(), r) !=
               relations.end();
    }

    const ActionRule* rule(const std::string& name) const {
        for (const auto& r : actions)
            if (r.name == name) return &r;
        return nullptr;
    }

    int action_arity(const std::string& name) const {
        for (const auto& a : unary_actions)
            if (a == name) return 1;
        for (const auto& a : binary_actions)
            if (a == name) return 2;
        return 0;
    }

    void validate() const {
        auto check_names = [](const std::vector<std::string>& v,
                              const std::string& kind) {
            std::set<std::string> seen;
            for (const auto& n : v) {
                if (n.empty()) fail("BadVocabulary", "empty " + kind + " name");
                if (n.find_first_of(" \t\n") != std::string::npos)
                    fail("BadVocabulary", kind + " name contains whitespace: '" + n + "'");
                if (!seen.insert(n).second)
                    fail("BadVocabulary", "duplicate " + kind + " name: " + n);
            }
        };
        check_names(location_types, "location type");
        check_names(object_types, "object type");
        check_names(properties, "property");
        check_names(relations, "relation");
        check_names(unary_actions, "unary action");
        check_names(binary_actions, "binary action");
        for (const auto& a : unary_actions)
            for (const auto& b : binary_actions)
                if (a == b) fail("BadVocabulary", "action declared with both arities: " + a);
        for (const auto& a : unary_actions)
            if (!rule(a)) fail("BadVocabulary", "no rule for action: " + a);
        for (const auto& b : binary_actions)
            if (!rule(b)) fail("BadVocabulary", "no rule for action: " + b);
        std::set<std::string> rule_names;
        for (const auto& r : actions) {
            if (!rule_names.insert(r.name).second)
                fail("BadVocabulary", "duplicate action rule: " + r.name);
            int declared = action_arity(r.name);
            if (declared == 0)
                fail("BadVocabulary", "rule for undeclared action: " + r.name);
            if (declared != r.arity)
                fail("BadVocabulary", "rule arity disagrees with declaration: " + r.name);
            if ((int)r.param_types.size() != r.arity)
                fail("BadVocabulary", "rule paramTypes size mismatch: " + r.name);
            for (const auto& t : r.param_types)
                if (t != "any" && !has_object_type(t))
                    fail("BadVocabulary", "rule " + r.name + " names unknown type: " + t);
            for (const auto& g : r.guard) {
                if (g.a < 0 || g.a >= r.arity || (g.is_rel && (g.b < 0 || g.b >= r.arity)))
                    fail("BadVocabulary", "guard parameter index out of range in " + r.name);
                if (g.is_rel ? !has_relation(g.name) : !has_property(g.name))
                    fail("BadVocabulary", "guard of " + r.name + " names unknown fact: " + g.name);
            }
            for (const auto& e : r.effects) {
                bool needs_b = e.op == EffectOp::AddRel || e.op == EffectOp::DelRel ||
                               e.op == EffectOp::MoveToLocOf;
                if (e.a < 0 || e.a >= r.arity || (needs_b && (e.b < 0 || e.b >= r.arity)))
                    fail("BadVocabulary", "effect parameter index out of range in " + r.name);
                switch (e.op) {
                    case EffectOp::AddProp:
                    case EffectOp::DelProp:
                        if (!has_property(e.name))
                            fail("BadVocabulary", "effect of " + r.name + " names unknown property: " + e.name);
                        break;
                    case EffectOp::AddRel:
                    case EffectOp::DelRel:
                    case EffectOp::ClearRelFirst:
                        if (!has_relation(e.name))
                            fail("BadVocabulary", "effect of " + r.name + " names unknown relation: " + e.name);
                        break;
                    default:
                        break;
                }
            }
        }
    }
};

struct ObjectDecl {
    std::string id;
    std::string type;
    std::string loc;

    bool operator==(const ObjectDecl&) const = default;
};

class Environment {
public:
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<std::pair<std::string, std::string>> locations;  // id, type
    std::vector<ObjectDecl> objects;
    std::string current_loc;
    std::map<std::string, std::set<std::string>> props;  // property -> objects
    std::map<std::string, std::set<std::pair<std::string, std::string>>> rels;

    bool operator==(const Environment& o) const {
        bool vocab_eq = (vocab == o.vocab) ||
                        (vocab && o.vocab && *vocab == *o.vocab);
        return vocab_eq && locations == o.locations && objects == o.objects &&
               current_loc == o.current_loc && props == o.props && rels == o.rels;
    }

    bool has_location(const std::string& id) const {
        for (const auto& [lid, _] : locations)
            if (lid == id) return true;
        return false;
    }

    const std::string* location_type(const std::string& id) const {
        for (const auto& [lid, t] : locations)
            if (lid == id) return &t;
        return nullptr;
    }

    const ObjectDecl* object(const std::string& id) const {
        for (const auto& o : objects)
            if (o.id == id) return &o;
        return nullptr;
    }

    // Objects of the given type at the given location, in declaration order.
    std::vector<std::string> objs(const std::string& loc,
                                  const std::string& type) const {
        if (!has_location(loc) && loc != kRobotLoc)
            fail("UnknownLocation", "objs: unknown location '" + loc + "'");
        if (!vocab->has_object_type(type))
            fail("UnknownType", "objs: undeclared object type '" + type + "'");
        std::vector<std::string> out;
        for (const auto& o : objects)
            if (o.loc == loc && o.type == type) out.push_back(o.id);
        return out;
    }

    // Locations of the given type, in declaration order.
    std::vector<std::string> locs(const std::string& type) const {
        if (!vocab->has_location_type(type))
            fail("UnknownType", "locs: undeclared location type '" + type + "'");
        std::vector<std::string> out;
        for (const auto& [id, t] : locations)
            if (t == type) out.push_back(id);
        return out;
    }

    bool has_prop(const std::string& p, const std::string& obj) const {
        auto it = props.find(p);
        return it != props.end() && it->second.count(obj) > 0;
    }

    bool has_rel(const std::string& r, const std::string& a,
                 const std::string& b) const {
        auto it = rels.find(r);
        return it != rels.end() && it->second.count({a, b}) > 0;
    }

    void validate() const {
        if (!vocab) fail("BadEnvironment", "missing vocabulary");
        vocab->validate();
        std::set<std::string> ids;
        for (const auto& [id, t] : locations) {
            if (id == kRobotLoc) fail("BadEnvironment", "location id reserves loc_r");
            if (!ids.insert(id).second) fail("BadEnvironment", "duplicate location id: " + id);
            if (!vocab->has_location_type(t))
                fail("BadEnvironment", "location " + id + " has undeclared type: " + t);
        }
        for (const auto& o : objects) {
            if (!ids.insert(o.id).second)
                fail("BadEnvironment", "duplicate id: " + o.id);
            if (!vocab->has_object_type(o.type))
                fail("BadEnvironment", "object " + o.id + " has undeclared type: " + o.type);
            if (o.loc != kRobotLoc && !has_location(o.loc))
                fail("BadEnvironment", "object " + o.id + " placed at unknown location: " + o.loc);
        }
        if (current_loc == kRobotLoc || !has_location(current_loc))
            fail("BadEnvironment", "currentLoc is not a declared location: " + current_loc);
        for (const auto& [p, objs_] : props) {
            if (!vocab->has_property(p))
                fail("BadEnvironment", "undeclared property in facts: " + p);
            for (const auto& o : objs_)
                if (!object(o)) fail("BadEnvironment", "property " + p + " names unknown object: " + o);
        }
        for (const auto& [r, pairs] : rels) {
            if (!vocab->has_relation(r))
                fail("BadEnvironment", "undeclared relation in facts: " + r);
            for (const auto& [a, b] : pairs) {
                if (!object(a)) fail("BadEnvironment", "relation " + r + " names unknown object: " + a);
                if (!object(b)) fail("BadEnvironment", "relation " + r + " names unknown object: " + b);
            }
        }
    }
};

namespace detail {

inline void apply_action_inplace(Environment& e, const std::string& action,
                                 const std::vector<std::string>& args) {
    const ActionRule* rule = e.vocab->rule(action);
    if (!rule) fail("UnknownAction", "no such action: " + action);
    if ((int)args.size() != rule->arity)
        fail("ArityMismatch", action + " expects " + std::to_string(rule->arity) +
                                  " argument(s), got " + std::to_string(args.size()));
    std::vector<const ObjectDecl*> os;
    for (int i = 0; i < rule->arity; ++i) {
        const ObjectDecl* o = e.object(args[i]);
        if (!o) fail("UnknownObject", action + ": unknown object '" + args[i] + "'");
        const std::string& want = rule->param_types[i];
        if (want != "any" && o->type != want)
            fail("TypeError", action + ": argument " + std::to_string(i + 1) +
                                  " must be a " + want + ", got " + o->type);
        os.push_back(o);
    }
    for (const auto& g : rule->guard) {
        bool holds = g.is_rel ? e.has_rel(g.name, args[g.a], args[g.b])
                              : e.has_prop(g.name, args[g.a]);
        if (holds == g.negated)
            fail("ActionPrecondition",
                 action + ": requires " + std::string(g.negated ? "not " : "") +
                     g.name + "(" + args[g.a] +
                     (g.is_rel ? ", " + args[g.b] : "") + ")");
    }
    for (const auto& ef : rule->effects) {
        switch (ef.op) {
            case EffectOp::AddProp:
                e.props[ef.name].insert(args[ef.a]);
                break;
            case EffectOp::DelProp: {
                auto it = e.props.find(ef.name);
                if (it != e.props.end()) {
                    it->second.erase(args[ef.a]);
                    if (it->second.empty()) e.props.erase(it);
                }
                break;
            }
            case EffectOp::AddRel:
                e.rels[ef.name].insert({args[ef.a], args[ef.b]});
                break;
            case EffectOp::DelRel: {
                auto it = e.rels.find(ef.name);
                if (it != e.rels.end()) {
                    it->second.erase({args[ef.a], args[ef.b]});
                    if (it->second.empty()) e.rels.erase(it);
                }
                break;
            }
            case EffectOp::ClearRelFirst: {
                auto it = e.rels.find(ef.name);
                if (it != e.rels.end()) {
                    std::erase_if(it->second, [&](const auto& pr) {
                        return pr.first == args[ef.a];
                    });
                    if (it->second.empty()) e.rels.erase(it);
                }
                break;
            }
            case EffectOp::MoveToRobot:
            case EffectOp::MoveToLocOf:
            case EffectOp::MoveToCurrent: {
                std::string dest = kRobotLoc;
                if (ef.op == EffectOp::MoveToLocOf) dest = os[ef.b]->loc;
                if (ef.op == EffectOp::MoveToCurrent) dest = e.current_loc;
                for (auto& o : e.objects)
                    if (o.id == args[ef.a]) o.loc = dest;
                break;
            }
        }
    }
}

}  // namespace detail

// Environments are values: applying an action yields a fresh state.
inline Environment apply_action(const Environment& e, const std::string& action,
                                const std::vector<std::string>& args) {
    Environment out = e;
    detail::apply_action_inplace(out, action, args);
    return out;
}

// ---------------------------------------------------------------------------
// JSON serialization

namespace detail {

inline std::vector<std::string> string_array(const Json& j, const std::string& path) {
    if (!j.is_array()) fail("BadEnvFile", path + ": expected an array");
    std::vector<std::string> out;
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string())
            fail("BadEnvFile", path + "[" + std::to_string(i) + "]: expected a string");
        out.push_back(j[i].get<std::string>());
    }
    return out;
}

inline const Json& field(const Json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) fail("BadEnvFile", path + ": missing field '" + key + "'");
    return *it;
}

inline ActionRule rule_from_json(const Json& j, const std::string& path) {
    ActionRule r;
    r.name = field(j, "name", path).get<std::string>();
    r.arity = field(j, "arity", path).get<int>();
    r.param_types = string_array(field(j, "paramTypes", path), path + ".paramTypes");
    if (j.contains("guard")) {
        for (size_t i = 0; i < j["guard"].size(); ++i) {
            const Json& g = j["guard"][i];
            std::string gp = path + ".guard[" + std::to_string(i) + "]";
            GuardAtom atom;
            std::string kind = field(g, "kind", gp).get<std::string>();
            if (kind != "prop" && kind != "rel")
                fail("BadEnvFile", gp + ".kind: expected 'prop' or 'rel'");
            atom.is_rel = kind == "rel";
            atom.name = field(g, "name", gp).get<std::string>();
            const Json& args = field(g, "args", gp);
            if (!args.is_array() || args.size() != (atom.is_rel ? 2u : 1u))
                fail("BadEnvFile", gp + ".args: wrong arity");
            atom.a = args[0].get<int>();
            if (atom.is_rel) atom.b = args[1].get<int>();
            if (g.contains("negated")) atom.negated = g["negated"].get<bool>();
            r.guard.push_back(atom);
        }
    }
    static const std::map<std::string, EffectOp> ops = {
        {"add-prop", EffectOp::AddProp},        {"del-prop", EffectOp::DelProp},
        {"add-rel", EffectOp::AddRel},          {"del-rel", EffectOp::DelRel},
        {"clear-rel-first", EffectOp::ClearRelFirst},
        {"move-to-robot", EffectOp::MoveToRobot},
        {"move-to-loc-of", EffectOp::MoveToLocOf},
        {"move-to-current", EffectOp::MoveToCurrent},
    };
    if (j.contains("effects")) {
        for (size_t i = 0; i < j["effects"].size(); ++i) {
            const Json& ej = j["effects"][i];
            std::string ep = path + ".effects[" + std::to_string(i) + "]";
            Effect ef;
            std::string op = field(ej, "op", ep).get<std::string>();
            auto it = ops.find(op);
            if (it == ops.end()) fail("BadEnvFile", ep + ".op: unknown op '" + op + "'");
            ef.op = it->second;
            if (ej.contains("name")) ef.name = ej["name"].get<std::string>();
            const Json& args = field(ej, "args", ep);
            if (!args.is_array() || args.empty())
                fail("BadEnvFile", ep + ".args: expected a non-empty array");
            ef.a = args[0].get<int>();
            if (args.size() > 1) ef.b = args[1].get<int>();
            r.effects.push_back(ef);
        }
    }
    return r;
}

inline Json rule_to_json(const ActionRule& r) {
    Json j;
    j["name"] = r.name;
    j["arity"] = r.arity;
    j["paramTypes"] = r.param_types;
    Json guard = Json::array();
    for (const auto& g : r.guard) {
        Json gj;
        gj["kind"] = g.is_rel ? "rel" : "prop";
        gj["name"] = g.name;
        gj["args"] = g.is_rel ? Json::array({g.a, g.b}) : Json::array({g.a});
        if (g.negated) gj["negated"] = true;
        guard.push_back(gj);
    }
    j["guard"] = guard;
    static const std::map<EffectOp, std::string> ops = {
        {EffectOp::AddProp, "add-prop"},        {EffectOp::DelProp, "del-prop"},
        {EffectOp::AddRel, "add-rel"},          {EffectOp::DelRel, "del-rel"},
        {EffectOp::ClearRelFirst, "clear-rel-first"},
        {EffectOp::MoveToRobot, "move-to-robot"},
        {EffectOp::MoveToLocOf, "move-to-loc-of"},
        {EffectOp::MoveToCurrent, "move-to-current"},
    };
    Json effects = Json::array();
    for (const auto& e : r.effects) {
        Json ej;
        ej["op"] = ops.at(e.op);
        if (!e.name.empty()) ej["name"] = e.name;
        bool has_b = e.op == EffectOp::AddRel || e.op == EffectOp::DelRel ||
                     e.op == EffectOp::MoveToLocOf;
        ej["args"] = has_b ? Json::array({e.a, e.b}) : Json::array({e.a});
        effects.push_back(ej);
    }
    j["effects"] = effects;
    return j;
}

}  // namespace detail

inline Environment env_from_json(const Json& j) {
    using detail::field;
    using detail::string_array;
    if (!j.is_object()) fail("BadEnvFile", "top level: expected an object");

    auto vocab = std::make_shared<Vocabulary>();
    const Json& vj = field(j, "vocabulary", "$");
    vocab->location_types = string_array(field(vj, "locationTypes", "vocabulary"), "vocabulary.locationTypes");
    vocab->object_types = string_array(field(vj, "objectTypes", "vocabulary"), "vocabulary.objectTypes");
    vocab->properties = string_array(field(vj, "properties", "vocabulary"), "vocabulary.properties");
    vocab->relations = string_array(field(vj, "relations", "vocabulary"), "vocabulary.relations");
    vocab->unary_actions = string_array(field(vj, "unaryActions", "vocabulary"), "vocabulary.unaryActions");
    vocab->binary_actions = string_array(field(vj, "binaryActions", "vocabulary"), "vocabulary.binaryActions");

    // Explicit rules first; fall back to the default registry by name.
    std::set<std::string> have;
    if (vj.contains("actions")) {
        for (size_t i = 0; i < vj["actions"].size(); ++i) {
            ActionRule r = detail::rule_from_json(
                vj["actions"][i], "vocabulary.actions[" + std::to_string(i) + "]");
            have.insert(r.name);
            vocab->actions.push_back(std::move(r));
        }
    }
    for (const auto& d : default_action_rules()) {
        if (have.count(d.name)) continue;
        if (vocab->action_arity(d.name) == d.arity) vocab->actions.push_back(d);
    }

    Environment e;
    e.vocab = vocab;
    const Json& locs = field(j, "locations", "$");
    for (size_t i = 0; i < locs.size(); ++i) {
        std::string p = "locations[" + std::to_string(i) + "]";
        e.locations.emplace_back(field(locs[i], "id", p).get<std::string>(),
                                 field(locs[i], "type", p).get<std::string>());
    }
    e.current_loc = field(j, "currentLoc", "$").get<std::string>();
    const Json& objs = field(j, "objects", "$");
    for (size_t i = 0; i < objs.size(); ++i) {
        std::string p = "objects[" + std::to_string(i) + "]";
        e.objects.push_back({field(objs[i], "id", p).get<std::string>(),
                             field(objs[i], "type", p).get<std::string>(),
                             field(objs[i], "loc", p).get<std::string>()});
    }
    if (j.contains("properties")) {
        for (size_t i = 0; i < j["properties"].size(); ++i) {
            const Json& f = j["properties"][i];
            if (!f.is_array() || f.size() != 2)
                fail("BadEnvFile", "properties[" + std::to_string(i) + "]: expected [prop, objId]");
            e.props[f[0].get<std::string>()].insert(f[1].get<std::string>());
        }
    }
    if (j.contains("relations")) {
        for (size_t i = 0; i < j["relations"].size(); ++i) {
            const Json& f = j["relations"][i];
            if (!f.is_array() || f.size() != 3)
                fail("BadEnvFile", "relations[" + std::to_string(i) + "]: expected [rel, objId, objId]");
            e.rels[f[0].get<std::string>()].insert(
                {f[1].get<std::string>(), f[2].get<std::string>()});
        }
    }
    try {
        e.validate();
    } catch (const Error& err) {
        if (err.code() == "BadVocabulary" || err.code() == "BadEnvironment")
            fail("BadEnvFile", err.what());
        throw;
    }
    return e;
}

inline Json env_to_json(const Environment& e) {
    Json j;
    Json vj;
    vj["locationTypes"] = e.vocab->location_types;
    vj["objectTypes"] = e.vocab->object_types;
    vj["properties"] = e.vocab->properties;
    vj["relations"] = e.vocab->relations;
    vj["unaryActions"] = e.vocab->unary_actions;
    vj["binaryActions"] = e.vocab->binary_actions;
    Json actions = Json::array();
    for (const auto& r : e.vocab->actions) actions.push_back(detail::rule_to_json(r));
    vj["actions"] = actions;
    j["vocabulary"] = vj;
    Json locs = Json::array();
    for (const auto& [id, t] : e.locations) {
        Json lj;
        lj["id"] = id;
        lj["type"] = t;
        locs.push_back(lj);
    }
    j["locations"] = locs;
    j["currentLoc"] = e.current_loc;
    Json objs = Json::array();
    for (const auto& o : e.objects) {
        Json oj;
        oj["id"] = o.id;
        oj["type"] = o.type;
        oj["loc"] = o.loc;
        objs.push_back(oj);
    }
    j["objects"] = objs;
    Json props = Json::array();
    for (const auto& [p, members] : e.props)
        for (const auto& o : members) props.push_back(Json::array({p, o}));
    j["properties"] = props;
    Json rels = Json::array();
    for (const auto& [r, pairs] : e.rels)
        for (const auto& [a, b] : pairs) rels.push_back(Json::array({r, a, b}));
    j["relations"] = rels;
    return j;
}

inline Environment load_env(const std::string& path);
inline void save_env(const Environment& e, const std::string& path);

}  // namespace tracelearn

#include <fstream>
#include <sstream>

namespace tracelearn {

inline Environment load_env(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("FileNotFound", "cannot open environment file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& ex) {
        fail("BadEnvFile", path + ": " + ex.what());
    }
    return env_from_json(j);
}

inline void save_env(const Environment& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("FileNotFound", "cannot write environment file: " + path);
    out << env_to_json(e).dump(2) << "\n";
}

}  // namespace tracelearn
