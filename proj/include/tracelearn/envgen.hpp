#pragma once

// Synthetic environment generator. Produces deterministic households at three
// sizes (easy / medium / hard) with the standard demo entities embedded, so
// the canonical tasks run unchanged on any generated environment.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tracelearn/env.hpp"

namespace tracelearn {

namespace detail {

// The first four types are the demo entities; the next ten form the per-room
// kit that the benchmark tasks operate on; the rest are filler furniture.
inline const std::vector<std::string>& object_catalog() {
    static const std::vector<std::string> names = {
        "bed",      "sheet",   "bin",      "chair",    "door",     "lamp",
        "plate",    "drawer",  "cloth",    "basket",   "apple",    "crate",
        "bottle",   "sink",    "table",    "sofa",     "cup",      "mug",
        "fork",     "spoon",   "knife",    "bowl",     "pan",      "pot",
        "kettle",   "toaster", "blender",  "towel",    "pillow",   "blanket",
        "rug",      "mirror",  "clock",    "vase",     "book",     "shelf",
        "desk",     "stool",   "bench",    "cabinet",  "fridge",   "oven",
        "stove",    "microwave", "fan",    "heater",   "bucket",   "mop",
        "broom",    "sponge",  "soap",     "brush",    "comb",     "hanger",
        "box",      "jar",     "can",      "tray",     "plant",    "flower",
        "frame",    "candle",  "remote",   "phone",    "laptop",   "monitor",
        "keyboard", "speaker", "camera",   "radio",    "guitar",   "ball",
        "toy",      "puzzle",  "marker",   "pencil",   "eraser",   "folder",
        "stapler",  "scissors"};
    return names;
}

struct ScaleSpec {
    int object_types;
    int rooms;
    int fillers;
    int filler_prop_facts;
};

// Totals: instances = 8 demo + 10*rooms kit + (rooms-2) bins + fillers;
// property facts = 8 demo + 10*rooms kit + 2*(rooms-2) bins + filler quota.
inline ScaleSpec scale_spec(const std::string& scale) {
    if (scale == "easy") return {40, 4, 90, 557};      // 140 objects, 609 facts
    if (scale == "medium") return {60, 6, 223, 2379};  // 295 objects, 2455 facts
    if (scale == "hard") return {80, 12, 971, 13796};  // 1109 objects, 13944 facts
    fail("BadScale", "unknown scale: " + scale + " (want easy|medium|hard)");
}

}  // namespace detail

inline Environment gen_env(const std::string& scale, std::uint64_t seed) {
    const detail::ScaleSpec spec = detail::scale_spec(scale);
    const auto& catalog = detail::object_catalog();
    std::mt19937_64 rng(seed);

    auto vocab = std::make_shared<Vocabulary>();
    vocab->location_types = {"room"};
    vocab->object_types.assign(catalog.begin(),
                               catalog.begin() + spec.object_types);
    vocab->properties = {"dirty", "clean", "opened", "closed", "empty",
                         "on",    "off",   "heavy",  "small",  "wooden",
                         "metal", "plastic", "red",  "blue",   "green",
                         "round", "flat",  "tall",   "new",    "old"};
    vocab->relations = {"on-top-of", "inside-of", "next-to"};
    vocab->unary_actions = {"open", "close", "grab", "sweep", "turn-off"};
    vocab->binary_actions = {"put-in", "pour-into", "scrub-with"};
    for (const auto& rule : default_action_rules())
        if (vocab->action_arity(rule.name) == rule.arity)
            vocab->actions.push_back(rule);

    Environment env;
    env.vocab = vocab;
    for (int k = 1; k <= spec.rooms; ++k)
        env.locations.emplace_back("r" + std::to_string(k), "room");
    env.current_loc = "r1";

    auto add = [&](const std::string& id, const std::string& type,
                   const std::string& loc) {
        env.objects.push_back({id, type, loc});
    };
    auto prop = [&](const std::string& p, const std::string& id) {
        env.props[p].insert(id);
    };
    auto rel = [&](const std::string& r, const std::string& a,
                   const std::string& b) {
        env.rels[r].insert({a, b});
    };

    // The demo household, verbatim.
    add("b1", "bed", "r1");
    add("s1", "sheet", "r1");
    add("s2", "sheet", "r1");
    add("bn1", "bin", "r1");
    add("b2", "bed", "r2");
    add("s3", "sheet", "r2");
    add("s4", "sheet", "r2");
    add("bn2", "bin", "r2");
    prop("dirty", "s1");
    prop("clean", "s2");
    prop("closed", "bn1");
    prop("empty", "bn1");
    prop("dirty", "s3");
    prop("dirty", "s4");
    prop("closed", "bn2");
    prop("empty", "bn2");
    rel("on-top-of", "s1", "b1");
    rel("on-top-of", "s2", "b1");
    rel("on-top-of", "s3", "b2");
    rel("on-top-of", "s4", "b2");

    // Per-room kit: ten fixtures with fixed starting facts (ten facts a room),
    // plus a bin in each room beyond the first two.
    for (int k = 1; k <= spec.rooms; ++k) {
        std::string r = "r" + std::to_string(k);
        std::string n = std::to_string(k);
        add("door" + n, "door", r);
        prop("opened", "door" + n);
        add("lamp" + n, "lamp", r);
        prop("on", "lamp" + n);
        add("plate" + n, "plate", r);
        prop("dirty", "plate" + n);
        add("drawer" + n, "drawer", r);
        prop("closed", "drawer" + n);
        prop("empty", "drawer" + n);
        add("cloth" + n, "cloth", r);
        add("basket" + n, "basket", r);
        prop("opened", "basket" + n);
        prop("empty", "basket" + n);
        add("apple" + n, "apple", r);
        add("crate" + n, "crate", r);
        prop("opened", "crate" + n);
        prop("empty", "crate" + n);
        add("bottle" + n, "bottle", r);
        add("sink" + n, "sink", r);
        prop("empty", "sink" + n);
        rel("next-to", "bottle" + n, "crate" + n);
    }
    for (int k = 3; k <= spec.rooms; ++k) {
        std::string n = std::to_string(k);
        add("bin" + n, "bin", "r" + std::to_string(k));
        prop("closed", "bin" + n);
        prop("empty", "bin" + n);
    }

    // Fillers round-robin over the non-demo types and the rooms. Ids continue
    // each type's counter past the kit instances.
    std::vector<std::string> eligible(vocab->object_types.begin() + 4,
                                      vocab->object_types.end());
    std::map<std::string, int> counter;
    for (size_t i = 0; i < 10; ++i) counter[eligible[i]] = spec.rooms;
    std::vector<std::string> filler_ids;
    filler_ids.reserve(spec.fillers);
    for (int i = 0; i < spec.fillers; ++i) {
        const std::string& type = eligible[i % eligible.size()];
        std::string id = type + std::to_string(++counter[type]);
        add(id, type, "r" + std::to_string(i % spec.rooms + 1));
        filler_ids.push_back(id);
    }

    // Each filler draws a 17-candidate property list (one pick per exclusive
    // pair, then the neutral traits) in a seeded shuffle; facts are dealt
    // round-robin across objects until the quota is met.
    static const char* kNeutral[] = {"heavy", "small", "wooden", "metal",
                                     "plastic", "red", "blue", "green",
                                     "round", "flat", "tall", "new", "old"};
    std::vector<std::vector<std::string>> menus;
    menus.reserve(filler_ids.size());
    for (size_t i = 0; i < filler_ids.size(); ++i) {
        std::vector<std::string> menu;
        menu.push_back(rng() % 2 ? "dirty" : "clean");
        menu.push_back(rng() % 2 ? "opened" : "closed");
        menu.push_back(rng() % 2 ? "on" : "off");
        menu.push_back("empty");
        menu.insert(menu.end(), std::begin(kNeutral), std::end(kNeutral));
        for (size_t j = menu.size(); j > 1; --j)
            std::swap(menu[j - 1], menu[rng() % j]);
        menus.push_back(std::move(menu));
    }
    int quota = spec.filler_prop_facts;
    for (size_t pass = 0; quota > 0; ++pass) {
        if (pass >= 17)
            fail("BadScale", "filler property quota exceeds the menu capacity");
        for (size_t i = 0; i < filler_ids.size() && quota > 0; ++i) {
            if (pass >= menus[i].size()) continue;
            prop(menus[i][pass], filler_ids[i]);
            --quota;
        }
    }

    env.validate();
    return env;
}

}  // namespace tracelearn
