#pragma once

// Regex inference from positive samples, and the candidate stream that feeds
// the synthesis loop. Learning runs in two phases: tandem-repeat folding
// compresses each sample (adjacent repeats become Kleene stars, where an
// existing star absorbs further copies of its body), then per-sample results
// are anti-unified by sequence alignment with Opt for gaps and Alt for
// mismatches. Rewriting enumerates loop-shape variants of the learned regex.

#include <optional>
#include <queue>
#include <set>

#include "tracelearn/regex.hpp"

namespace tracelearn {

namespace detail {

inline bool is_star_elem(const RegexPtr& r) { return r->kind == Regex::Kind::Star; }
inline bool is_elidable(const RegexPtr& r) {
    return r->kind == Regex::Kind::Star || r->kind == Regex::Kind::Opt;
}

inline std::vector<RegexPtr> star_body_elems(const RegexPtr& star) {
    const RegexPtr& body = star->kids[0];
    if (body->kind == Regex::Kind::Concat) return body->kids;
    return {body};
}

inline bool equal_run(const std::vector<RegexPtr>& v, size_t at,
                      const std::vector<RegexPtr>& body) {
    if (at + body.size() > v.size()) return false;
    for (size_t k = 0; k < body.size(); ++k)
        if (!regex_equal(v[at + k], body[k])) return false;
    return true;
}

// element-level anti-unification: zero cost when one side subsumes the other
inline std::pair<int, RegexPtr> au_elem(const RegexPtr& x, const RegexPtr& y) {
    if (regex_equal(x, y)) return {0, x};
    auto subsumes = [](const RegexPtr& w, const RegexPtr& inner) {
        return (w->kind == Regex::Kind::Opt || w->kind == Regex::Kind::Star) &&
               regex_equal(w->kids[0], inner);
    };
    if (subsumes(x, y)) return {0, x};
    if (subsumes(y, x)) return {0, y};
    return {2, rx::alt({x, y})};
}

struct AuOut {
    int cost = 0;
    std::vector<RegexPtr> merged;
};

// Sequence alignment of two element lists. In fold mode the right side must
// be an instance of the left (no insertions, no gaps, no mismatches): stars
// on either side may stand for repeated copies of their body on the other,
// and left-side stars and opts may be skipped by the right. In full mode
// gaps become Opt and mismatches become Alt, so alignment always succeeds.
inline AuOut au_align(const std::vector<RegexPtr>& a, const std::vector<RegexPtr>& b,
                      bool fold_mode) {
    const int INF = 1 << 28;
    int n = (int)a.size(), m = (int)b.size();
    std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, INF));
    struct Mv {
        int kind = -1;   // 0 match, 1 absorbL, 2 absorbR, 3 elideL, 4 elideR,
                         // 5 gapL, 6 gapR; absorb k = elements consumed opposite
        int k = 0;
    };
    std::vector<std::vector<Mv>> mv(n + 1, std::vector<Mv>(m + 1));
    cost[n][m] = 0;

    for (int i = n; i >= 0; --i) {
        for (int j = m; j >= 0; --j) {
            if (i == n && j == m) continue;
            int best = INF;
            Mv bm;
            auto consider = [&](int c, int kind, int k) {
                if (c < INF && c < best) {
                    best = c;
                    bm = {kind, k};
                }
            };
            if (i < n && j < m)
                consider(au_elem(a[i], b[j]).first + cost[i + 1][j + 1], 0, 0);
            if (fold_mode) {
                // consuming absorbs: the star and c >= 1 copies of its body
                // on the other side go together
                if (i < n && is_star_elem(a[i])) {
                    auto body = star_body_elems(a[i]);
                    int k = (int)body.size();
                    for (int c = 1; j + c * k <= m; ++c) {
                        if (!equal_run(b, j + (c - 1) * k, body)) break;
                        consider(cost[i + 1][j + c * k], 1, c * k);
                    }
                }
                if (j < m && is_star_elem(b[j])) {
                    auto body = star_body_elems(b[j]);
                    int k = (int)body.size();
                    for (int c = 1; i + c * k <= n; ++c) {
                        if (!equal_run(a, i + (c - 1) * k, body)) break;
                        consider(cost[i + c * k][j + 1], 2, c * k);
                    }
                }
                if (i < n && is_elidable(a[i])) consider(cost[i + 1][j], 3, 0);
            } else {
                // non-consuming absorbs: the star stays put and eats one body
                // copy from the other side; elides and gaps close the rest
                if (i < n && is_star_elem(a[i])) {
                    auto body = star_body_elems(a[i]);
                    int k = (int)body.size();
                    if (equal_run(b, j, body)) consider(cost[i][j + k], 1, k);
                }
                if (j < m && is_star_elem(b[j])) {
                    auto body = star_body_elems(b[j]);
                    int k = (int)body.size();
                    if (equal_run(a, i, body)) consider(cost[i + k][j], 2, k);
                }
                if (i < n && is_elidable(a[i])) consider(cost[i + 1][j], 3, 0);
                if (j < m && is_elidable(b[j])) consider(cost[i][j + 1], 4, 0);
                if (i < n) consider(1 + cost[i + 1][j], 5, 0);
                if (j < m) consider(1 + cost[i][j + 1], 6, 0);
            }
            cost[i][j] = best;
            mv[i][j] = bm;
        }
    }

    AuOut out;
    out.cost = cost[0][0];
    if (out.cost >= INF) return out;
    int i = 0, j = 0;
    while (i < n || j < m) {
        Mv m_ = mv[i][j];
        switch (m_.kind) {
            case 0:
                out.merged.push_back(au_elem(a[i], b[j]).second);
                ++i, ++j;
                break;
            case 1:
                if (fold_mode) out.merged.push_back(a[i]), ++i;
                j += m_.k;
                break;
            case 2:
                if (fold_mode) out.merged.push_back(b[j]), ++j;
                i += m_.k;
                break;
            case 3:
                out.merged.push_back(a[i]), ++i;
                break;
            case 4:
                out.merged.push_back(b[j]), ++j;
                break;
            case 5:
                out.merged.push_back(rx::opt(a[i])), ++i;
                break;
            case 6:
                out.merged.push_back(rx::opt(b[j])), ++j;
                break;
            default:
                fail("Internal", "au_align reconstruction lost its path");
        }
    }
    return out;
}

// Tandem-repeat folding: scan for the shortest pattern with at least one
// following instance (largest instance first), replace the run by a star
// over the merged pattern, restart.
inline std::vector<RegexPtr> fold_repeats(std::vector<RegexPtr> items) {
    for (;;) {
        bool folded = false;
        int n = (int)items.size();
        for (int p = 1; !folded && p < n; ++p) {
            for (int i = 0; !folded && i + p < n; ++i) {
                std::vector<RegexPtr> pat(items.begin() + i, items.begin() + i + p);
                int pos = i + p, reps = 1;
                for (;;) {
                    int took = 0;
                    for (int q = n - pos; q >= 1; --q) {
                        AuOut r = au_align(
                            pat, {items.begin() + pos, items.begin() + pos + q}, true);
                        if (r.cost == 0) {
                            pat = std::move(r.merged);
                            took = q;
                            break;
                        }
                    }
                    if (!took) break;
                    pos += took;
                    ++reps;
                }
                if (reps >= 2) {
                    std::vector<RegexPtr> out(items.begin(), items.begin() + i);
                    out.push_back(rx::star(rx::concat(std::move(pat))));
                    out.insert(out.end(), items.begin() + pos, items.end());
                    items = std::move(out);
                    folded = true;
                }
            }
        }
        if (!folded) return items;
    }
}

inline std::vector<RegexPtr> sample_elems(const AbstractString& s) {
    std::vector<RegexPtr> out;
    out.reserve(s.size());
    for (const auto& t : s) out.push_back(rx::tok(t));
    return out;
}

// Goto-delimited block folding. Traces that repeat a goto-led routine with a
// varying (possibly zero) number of inner iterations defeat the greedy tandem
// scan, which locks onto a period straddling block boundaries. Cutting each
// sample before every goto token, folding the blocks individually, and
// anti-unifying them yields the routine body directly; the star of that body
// covers every sample. Returns null when the shape does not apply (a sample
// that does not open with a goto, or fewer than two blocks overall).
inline RegexPtr block_fold(const std::vector<AbstractString>& samples) {
    std::vector<std::vector<RegexPtr>> blocks;
    for (const auto& s : samples) {
        if (s.empty() || !s[0].is_goto) return nullptr;
        size_t i = 0;
        while (i < s.size()) {
            size_t j = i + 1;
            while (j < s.size() && !s[j].is_goto) ++j;
            blocks.push_back(
                fold_repeats(sample_elems({s.begin() + i, s.begin() + j})));
            i = j;
        }
    }
    if (blocks.size() < 2) return nullptr;
    std::vector<RegexPtr> merged = blocks[0];
    for (size_t i = 1; i < blocks.size(); ++i)
        merged = fold_repeats(au_align(merged, blocks[i], false).merged);
    return rx::star(rx::concat(std::move(merged)));
}

}  // namespace detail

inline bool alt_free(const RegexPtr& r) {
    if (r->kind == Regex::Kind::Alt) return false;
    for (const auto& k : r->kids)
        if (!alt_free(k)) return false;
    return true;
}

inline RegexPtr learn_regex(const std::vector<AbstractString>& samples) {
    if (samples.empty()) fail("EmptySamples", "cannot learn a regex from zero samples");

    std::vector<AbstractString> unique;
    std::set<std::string> seen;
    for (const auto& s : samples)
        if (seen.insert(abstract_print(s)).second) unique.push_back(s);

    std::vector<RegexPtr> merged = detail::fold_repeats(detail::sample_elems(unique[0]));
    for (size_t i = 1; i < unique.size(); ++i) {
        std::vector<RegexPtr> next = detail::fold_repeats(detail::sample_elems(unique[i]));
        merged = detail::fold_repeats(detail::au_align(merged, next, false).merged);
    }
    RegexPtr learned = rx::concat(std::move(merged));

    auto accepts_all = [&](const RegexPtr& r) {
        for (const auto& s : samples)
            if (!matches(r, s)) return false;
        return true;
    };
    bool learned_ok = accepts_all(learned);

    RegexPtr blocked = detail::block_fold(unique);
    if (blocked && accepts_all(blocked) &&
        (!learned_ok || regex_size(blocked) < regex_size(learned)))
        return blocked;

    if (!learned_ok) {
        // alignment is meant to be sound by construction; fall back to the
        // literal disjunction rather than ship a lossy generalization
        std::vector<RegexPtr> branches;
        for (const auto& u : unique) branches.push_back(rx::concat(detail::sample_elems(u)));
        return rx::alt(std::move(branches));
    }
    return learned;
}

// ---------------------------------------------------------------------------
// One-step rewrites. Four rules, each applied at every eligible position:
//   (x|y)*  ->  (x y?)*
//   (x|y)*  ->  (x? y)*
//   (x|y)*  ->  ((x y)?)*
//   x*      ->  (x*)*
// Star-of-concat bodies are treated as binary splits of their element list so
// the first three rules reach loops the learner folded directly. The last
// rule is blocked when it would stack onto an existing star pair, which keeps
// it to one application per star.

namespace detail {

inline std::vector<RegexPtr> rewrite_subtree(const RegexPtr& r, bool parent_is_star) {
    std::vector<RegexPtr> out;
    if (r->kind == Regex::Kind::Star) {
        const RegexPtr& body = r->kids[0];
        if (body->kind == Regex::Kind::Alt || body->kind == Regex::Kind::Concat) {
            int n = (int)body->kids.size();
            auto part = [&](int from, int to) -> RegexPtr {
                std::vector<RegexPtr> ks(body->kids.begin() + from, body->kids.begin() + to);
                return body->kind == Regex::Kind::Alt ? rx::alt(std::move(ks))
                                                      : rx::concat(std::move(ks));
            };
            for (int m = 1; m < n; ++m)
                out.push_back(rx::star(rx::concat({part(0, m), rx::opt(part(m, n))})));
            for (int m = 1; m < n; ++m)
                out.push_back(rx::star(rx::concat({rx::opt(part(0, m)), part(m, n)})));
            if (body->kind == Regex::Kind::Alt) {
                for (int m = 1; m < n; ++m)
                    out.push_back(rx::star(rx::opt(rx::concat({part(0, m), part(m, n)}))));
            } else {
                out.push_back(rx::star(rx::opt(body)));
            }
        }
        if (!parent_is_star && body->kind != Regex::Kind::Star)
            out.push_back(rx::star(rx::star(body)));
    }
    bool star_here = r->kind == Regex::Kind::Star;
    for (size_t c = 0; c < r->kids.size(); ++c) {
        for (const RegexPtr& v : rewrite_subtree(r->kids[c], star_here)) {
            auto copy = std::make_shared<Regex>(*r);
            copy->kids[c] = v;
            out.push_back(copy);
        }
    }
    return out;
}

}  // namespace detail

inline std::vector<RegexPtr> rewrite_once(const RegexPtr& r) {
    return detail::rewrite_subtree(r, false);
}

// ---------------------------------------------------------------------------

struct RegexCandidate {
    RegexPtr regex;
    int rewrite_count = 0;
};

// Breadth-first exploration of the rewrite space, ordered by (rewriteCount,
// size, insertion order). Only alternation-free candidates that accept every
// sample are handed out; everything else stays internal as rewrite fodder.
class RegexCandidateStream {
public:
    static constexpr int kDefaultMaxRegexes = 64;
    static constexpr long kMaxExpansions = 8192;

    RegexCandidateStream(std::vector<AbstractString> samples,
                         int max_regexes = kDefaultMaxRegexes)
        : RegexCandidateStream(learn_regex(samples), samples, max_regexes) {}

    RegexCandidateStream(RegexPtr seed, std::vector<AbstractString> samples,
                         int max_regexes = kDefaultMaxRegexes)
        : samples_(std::move(samples)), max_emit_(max_regexes), base_(std::move(seed)) {
        push(base_, 0);
    }

    const RegexPtr& base() const { return base_; }

    std::optional<RegexCandidate> next() {
        while (emitted_ < max_emit_ && pops_ < kMaxExpansions && !pending_.empty()) {
            Item it = pending_.top();
            pending_.pop();
            ++pops_;
            for (const RegexPtr& v : rewrite_once(it.r)) push(v, it.count + 1);
            if (alt_free(it.r) && accepts_all(it.r)) {
                ++emitted_;
                return RegexCandidate{it.r, it.count};
            }
        }
        return std::nullopt;
    }

private:
    struct Item {
        RegexPtr r;
        int count = 0;
        int size = 0;
        long seq = 0;
    };
    struct Cmp {
        bool operator()(const Item& a, const Item& b) const {
            return std::tie(a.count, a.size, a.seq) > std::tie(b.count, b.size, b.seq);
        }
    };

    void push(const RegexPtr& r, int count) {
        if (!seen_.insert(regex_print(r)).second) return;
        pending_.push({r, count, regex_size(r), next_seq_++});
    }

    bool accepts_all(const RegexPtr& r) const {
        for (const auto& s : samples_)
            if (!matches(r, s)) return false;
        return true;
    }

    std::vector<AbstractString> samples_;
    int max_emit_ = kDefaultMaxRegexes;
    RegexPtr base_;
    std::priority_queue<Item, std::vector<Item>, Cmp> pending_;
    std::set<std::string> seen_;
    int emitted_ = 0;
    long pops_ = 0;
    long next_seq_ = 0;
};

}  // namespace tracelearn
