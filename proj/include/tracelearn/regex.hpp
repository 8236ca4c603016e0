#pragma once

// Regular expressions over abstracted trace alphabets: goto tokens carry a
// location type, action tokens carry the action name plus argument types.
// Bounded repetition (Power) is matched with counters on the NFA rather than
// by expansion.

#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tracelearn/dsl.hpp"

namespace tracelearn {

struct Token {
    bool is_goto = false;
    std::string action;               // empty for goto tokens
    std::vector<std::string> types;   // one entry for goto/unary, two for binary

    static Token go(std::string loc_type) {
        return Token{true, "", {std::move(loc_type)}};
    }
    static Token act(std::string a, std::string t1) {
        return Token{false, std::move(a), {std::move(t1)}};
    }
    static Token act(std::string a, std::string t1, std::string t2) {
        return Token{false, std::move(a), {std::move(t1), std::move(t2)}};
    }

    bool operator==(const Token&) const = default;
    bool operator<(const Token& o) const {
        return std::tie(is_goto, action, types) < std::tie(o.is_goto, o.action, o.types);
    }

    // A pattern type of "?" stands for a not-yet-committed type and admits
    // anything in that position.
    bool admits(const Token& concrete) const {
        if (is_goto != concrete.is_goto || action != concrete.action) return false;
        if (types.size() != concrete.types.size()) return false;
        for (size_t i = 0; i < types.size(); ++i)
            if (types[i] != "?" && types[i] != concrete.types[i]) return false;
        return true;
    }
};

using AbstractString = std::vector<Token>;

inline std::string token_print(const Token& t) {
    std::string out = t.is_goto ? "G[" : "A[" + t.action + ",";
    for (size_t i = 0; i < t.types.size(); ++i) {
        if (i) out += ",";
        out += t.types[i];
    }
    return out + "]";
}

inline std::string abstract_print(const AbstractString& s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += " ";
        out += token_print(s[i]);
    }
    return out;
}

// α: concrete trace events to type-level tokens.
inline AbstractString abstract_trace(const Trace& t, const Environment& e) {
    AbstractString out;
    for (const auto& ev : t) {
        if (ev.is_goto) {
            const std::string* ty = e.location_type(ev.args[0]);
            if (!ty) fail("UnknownLocation", "trace visits unknown location: " + ev.args[0]);
            out.push_back(Token::go(*ty));
        } else {
            Token tok;
            tok.is_goto = false;
            tok.action = ev.action;
            for (const auto& id : ev.args) {
                const ObjectDecl* o = e.object(id);
                if (!o) fail("UnknownObject", "trace acts on unknown object: " + id);
                tok.types.push_back(o->type);
            }
            out.push_back(tok);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

struct Regex;
using RegexPtr = std::shared_ptr<const Regex>;

struct Regex {
    enum class Kind { Eps, Tok, Concat, Star, Opt, Alt, Power, StarPower };
    Kind kind = Kind::Eps;
    Token tok;
    std::vector<RegexPtr> kids;
    int power = 0;   // Power only
};

namespace rx {

inline RegexPtr eps() {
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::Eps;
    return r;
}
inline RegexPtr tok(Token t) {
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::Tok;
    r->tok = std::move(t);
    return r;
}
inline RegexPtr concat(std::vector<RegexPtr> kids) {
    if (kids.empty()) return eps();
    if (kids.size() == 1) return kids[0];
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::Concat;
    r->kids = std::move(kids);
    return r;
}
inline RegexPtr star(RegexPtr k) {
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::Star;
    r->kids = {std::move(k)};
    return r;
}
inline RegexPtr opt(RegexPtr k) {
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::Opt;
    r->kids = {std::move(k)};
    return r;
}
inline RegexPtr alt(std::vector<RegexPtr> kids) {
    if (kids.empty()) return eps();
    if (kids.size() == 1) return kids[0];
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::Alt;
    r->kids = std::move(kids);
    return r;
}
inline RegexPtr power(RegexPtr k, int n) {
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::Power;
    r->kids = {std::move(k)};
    r->power = n;
    return r;
}
inline RegexPtr star_power(RegexPtr k) {
    auto r = std::make_shared<Regex>();
    r->kind = Regex::Kind::StarPower;
    r->kids = {std::move(k)};
    return r;
}

}  // namespace rx

inline bool regex_equal(const RegexPtr& a, const RegexPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind || !(a->tok == b->tok) || a->power != b->power ||
        a->kids.size() != b->kids.size())
        return false;
    for (size_t i = 0; i < a->kids.size(); ++i)
        if (!regex_equal(a->kids[i], b->kids[i])) return false;
    return true;
}

inline int regex_size(const RegexPtr& r) {
    if (!r) return 0;
    int n = 1;
    for (const auto& k : r->kids) n += regex_size(k);
    return n;
}

// ---------------------------------------------------------------------------
// Printing and parsing.
//
// Syntax: tokens as above; postfix * ? ^n and *! (a loop whose repetition
// count is unknown); | for alternation; juxtaposition for concatenation;
// parentheses for grouping; "eps" for the empty string.

namespace detail {

inline int rx_prec(Regex::Kind k) {
    switch (k) {
        case Regex::Kind::Alt: return 1;
        case Regex::Kind::Concat: return 2;
        case Regex::Kind::Eps:
        case Regex::Kind::Tok: return 4;
        default: return 3;   // postfix operators
    }
}

inline void rx_print(std::ostream& os, const RegexPtr& r, int parent_prec) {
    bool wrap = rx_prec(r->kind) < parent_prec;
    if (wrap) os << "(";
    switch (r->kind) {
        case Regex::Kind::Eps:
            os << "eps";
            break;
        case Regex::Kind::Tok:
            os << token_print(r->tok);
            break;
        case Regex::Kind::Concat:
            for (size_t i = 0; i < r->kids.size(); ++i) {
                if (i) os << " ";
                rx_print(os, r->kids[i], 2);
            }
            break;
        case Regex::Kind::Alt:
            for (size_t i = 0; i < r->kids.size(); ++i) {
                if (i) os << " | ";
                rx_print(os, r->kids[i], 1);
            }
            break;
        case Regex::Kind::Star:
            rx_print(os, r->kids[0], 4);
            os << "*";
            break;
        case Regex::Kind::Opt:
            rx_print(os, r->kids[0], 4);
            os << "?";
            break;
        case Regex::Kind::Power:
            rx_print(os, r->kids[0], 4);
            os << "^" << r->power;
            break;
        case Regex::Kind::StarPower:
            rx_print(os, r->kids[0], 4);
            os << "*!";
            break;
    }
    if (wrap) os << ")";
}

}  // namespace detail

inline std::string regex_print(const RegexPtr& r) {
    std::ostringstream os;
    detail::rx_print(os, r, 0);
    return os.str();
}

namespace detail {

struct RxParser {
    std::string src;
    size_t pos = 0;

    explicit RxParser(std::string s) : src(std::move(s)) {}

    [[noreturn]] void err(const std::string& msg) {
        fail("RegexParseError", msg + " at offset " + std::to_string(pos));
    }

    void skip_ws() {
        while (pos < src.size() && std::isspace((unsigned char)src[pos])) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) { ++pos; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    std::string ident() {
        skip_ws();
        size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum((unsigned char)src[pos]) || src[pos] == '_' ||
                src[pos] == '-' || src[pos] == '?'))
            ++pos;
        if (pos == start) err("expected a name");
        return src.substr(start, pos - start);
    }

    Token token(bool is_goto) {
        Token t;
        t.is_goto = is_goto;
        if (!eat('[')) err("expected '['");
        if (is_goto) {
            t.types.push_back(ident());
        } else {
            t.action = ident();
            if (!eat(',')) err("expected ','");
            t.types.push_back(ident());
            if (eat(',')) t.types.push_back(ident());
        }
        if (!eat(']')) err("expected ']'");
        return t;
    }

    RegexPtr atom() {
        skip_ws();
        if (pos >= src.size()) err("unexpected end of regex");
        char c = src[pos];
        if (c == '(') {
            ++pos;
            RegexPtr r = alternation();
            if (!eat(')')) err("expected ')'");
            return r;
        }
        if (c == 'G' || c == 'A') {
            ++pos;
            return rx::tok(token(c == 'G'));
        }
        if (src.compare(pos, 3, "eps") == 0) {
            pos += 3;
            return rx::eps();
        }
        err(std::string("unexpected character '") + c + "'");
    }

    RegexPtr postfix() {
        RegexPtr r = atom();
        for (;;) {
            skip_ws();
            if (pos >= src.size()) break;
            char c = src[pos];
            if (c == '*') {
                ++pos;
                if (pos < src.size() && src[pos] == '!') {
                    ++pos;
                    r = rx::star_power(r);
                } else {
                    r = rx::star(r);
                }
            } else if (c == '?') {
                ++pos;
                r = rx::opt(r);
            } else if (c == '^') {
                ++pos;
                skip_ws();
                size_t start = pos;
                while (pos < src.size() && std::isdigit((unsigned char)src[pos])) ++pos;
                if (pos == start) err("expected a repetition count after '^'");
                r = rx::power(r, std::stoi(src.substr(start, pos - start)));
            } else {
                break;
            }
        }
        return r;
    }

    bool at_atom_start() {
        char c = peek();
        return c == '(' || c == 'G' || c == 'A' ||
               (c == 'e' && src.compare(pos, 3, "eps") == 0);
    }

    RegexPtr sequence() {
        std::vector<RegexPtr> kids;
        kids.push_back(postfix());
        while (at_atom_start()) kids.push_back(postfix());
        return rx::concat(std::move(kids));
    }

    RegexPtr alternation() {
        std::vector<RegexPtr> kids;
        kids.push_back(sequence());
        while (eat('|')) kids.push_back(sequence());
        return rx::alt(std::move(kids));
    }
};

}  // namespace detail

inline RegexPtr regex_parse(const std::string& text) {
    detail::RxParser p(text);
    RegexPtr r = p.alternation();
    p.skip_ws();
    if (p.pos != p.src.size())
        fail("RegexParseError", "trailing input at offset " + std::to_string(p.pos));
    return r;
}

// ---------------------------------------------------------------------------
// Matching: epsilon-NFA with counters for bounded repetition. A configuration
// is a state plus the values of the counters currently in scope; bounded
// loops never expand their bodies.

namespace detail {

struct Nfa {
    enum class Op { None, Init, IncrLoop, IncrExit };
    struct Edge {
        int to = 0;
        int tok = -1;       // index into tokens, -1 for epsilon
        Op op = Op::None;   // counter operation riding an epsilon edge
        int counter = -1;
        int bound = 0;
    };
    std::vector<std::vector<Edge>> edges;
    std::vector<Token> tokens;
    int start = 0, accept = 0, ncounters = 0;

    int state() {
        edges.emplace_back();
        return (int)edges.size() - 1;
    }
    void eps_edge(int a, int b, Op op = Op::None, int counter = -1, int bound = 0) {
        edges[a].push_back({b, -1, op, counter, bound});
    }
    void tok_edge(int a, int b, const Token& t) {
        tokens.push_back(t);
        edges[a].push_back({b, (int)tokens.size() - 1, Op::None, -1, 0});
    }
};

inline void nfa_build(Nfa& n, const RegexPtr& r, int from, int to) {
    switch (r->kind) {
        case Regex::Kind::Eps:
            n.eps_edge(from, to);
            break;
        case Regex::Kind::Tok:
            n.tok_edge(from, to, r->tok);
            break;
        case Regex::Kind::Concat: {
            int prev = from;
            for (size_t i = 0; i < r->kids.size(); ++i) {
                int next = (i + 1 == r->kids.size()) ? to : n.state();
                nfa_build(n, r->kids[i], prev, next);
                prev = next;
            }
            break;
        }
        case Regex::Kind::Alt:
            for (const auto& k : r->kids) nfa_build(n, k, from, to);
            break;
        case Regex::Kind::Star:
        case Regex::Kind::StarPower: {
            int s = n.state(), e = n.state();
            n.eps_edge(from, s);
            n.eps_edge(from, to);
            nfa_build(n, r->kids[0], s, e);
            n.eps_edge(e, s);
            n.eps_edge(e, to);
            break;
        }
        case Regex::Kind::Opt: {
            n.eps_edge(from, to);
            nfa_build(n, r->kids[0], from, to);
            break;
        }
        case Regex::Kind::Power: {
            if (r->power <= 0) {
                n.eps_edge(from, to);
                break;
            }
            int c = n.ncounters++;
            int s = n.state(), e = n.state();
            n.eps_edge(from, s, Nfa::Op::Init, c);
            nfa_build(n, r->kids[0], s, e);
            n.eps_edge(e, s, Nfa::Op::IncrLoop, c, r->power);
            n.eps_edge(e, to, Nfa::Op::IncrExit, c, r->power);
            break;
        }
    }
}

inline Nfa nfa_compile(const RegexPtr& r) {
    Nfa n;
    n.start = n.state();
    n.accept = n.state();
    nfa_build(n, r, n.start, n.accept);
    return n;
}

using Config = std::pair<int, std::vector<int>>;

inline void nfa_closure(const Nfa& n, std::set<Config>& configs) {
    std::vector<Config> work(configs.begin(), configs.end());
    while (!work.empty()) {
        Config c = std::move(work.back());
        work.pop_back();
        for (const auto& e : n.edges[c.first]) {
            if (e.tok != -1) continue;
            Config next = c;
            next.first = e.to;
            switch (e.op) {
                case Nfa::Op::None:
                    break;
                case Nfa::Op::Init:
                    next.second[e.counter] = 0;
                    break;
                case Nfa::Op::IncrLoop:
                    if (c.second[e.counter] + 1 >= e.bound) continue;
                    next.second[e.counter] = c.second[e.counter] + 1;
                    break;
                case Nfa::Op::IncrExit:
                    if (c.second[e.counter] + 1 != e.bound) continue;
                    next.second[e.counter] = 0;   // dead outside the loop
                    break;
            }
            if (configs.insert(next).second) work.push_back(next);
        }
    }
}

}  // namespace detail

inline bool matches(const RegexPtr& r, const AbstractString& s) {
    detail::Nfa n = detail::nfa_compile(r);
    std::set<detail::Config> configs;
    configs.insert({n.start, std::vector<int>(n.ncounters, 0)});
    detail::nfa_closure(n, configs);
    for (const auto& tok : s) {
        std::set<detail::Config> next;
        for (const auto& c : configs) {
            for (const auto& e : n.edges[c.first]) {
                if (e.tok == -1) continue;
                if (n.tokens[e.tok].admits(tok)) next.insert({e.to, c.second});
            }
        }
        if (next.empty()) return false;
        detail::nfa_closure(n, next);
        configs = std::move(next);
    }
    for (const auto& c : configs)
        if (c.first == n.accept) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Structural normalization: flatten sequences, drop epsilons, and refold
// adjacent repeats into powers. Used when printing derived abstractions so
// that unrolled loops read back as bounded repetition.

namespace detail {

inline RegexPtr normalize_rec(const RegexPtr& r);

inline std::vector<RegexPtr> fold_powers(std::vector<RegexPtr> items) {
    // shortest period first, leftmost first; restart after every fold
    for (;;) {
        bool changed = false;
        for (int period = 1; !changed && period <= (int)items.size() / 2; ++period) {
            for (int i = 0; !changed && i + 2 * period <= (int)items.size(); ++i) {
                // count consecutive repeats of items[i..i+period)
                int reps = 1;
                while (i + (reps + 1) * period <= (int)items.size()) {
                    bool same = true;
                    for (int k = 0; k < period; ++k) {
                        if (!regex_equal(items[i + k], items[i + reps * period + k])) {
                            same = false;
                            break;
                        }
                    }
                    if (!same) break;
                    ++reps;
                }
                if (reps < 2) continue;
                std::vector<RegexPtr> body(items.begin() + i, items.begin() + i + period);
                RegexPtr folded = rx::power(rx::concat(std::move(body)), reps);
                std::vector<RegexPtr> out(items.begin(), items.begin() + i);
                out.push_back(folded);
                out.insert(out.end(), items.begin() + i + reps * period, items.end());
                items = std::move(out);
                changed = true;
            }
        }
        if (!changed) return items;
    }
}

inline RegexPtr normalize_rec(const RegexPtr& r) {
    switch (r->kind) {
        case Regex::Kind::Eps:
        case Regex::Kind::Tok:
            return r;
        case Regex::Kind::Star:
            return rx::star(normalize_rec(r->kids[0]));
        case Regex::Kind::StarPower:
            return rx::star_power(normalize_rec(r->kids[0]));
        case Regex::Kind::Opt:
            return rx::opt(normalize_rec(r->kids[0]));
        case Regex::Kind::Power: {
            RegexPtr k = normalize_rec(r->kids[0]);
            if (r->power == 0) return rx::eps();
            if (r->power == 1) return k;
            return rx::power(k, r->power);
        }
        case Regex::Kind::Alt: {
            std::vector<RegexPtr> kids;
            for (const auto& k : r->kids) {
                RegexPtr nk = normalize_rec(k);
                if (nk->kind == Regex::Kind::Alt)
                    kids.insert(kids.end(), nk->kids.begin(), nk->kids.end());
                else
                    kids.push_back(nk);
            }
            return rx::alt(std::move(kids));
        }
        case Regex::Kind::Concat: {
            std::vector<RegexPtr> kids;
            for (const auto& k : r->kids) {
                RegexPtr nk = normalize_rec(k);
                if (nk->kind == Regex::Kind::Eps) continue;
                if (nk->kind == Regex::Kind::Concat)
                    kids.insert(kids.end(), nk->kids.begin(), nk->kids.end());
                else
                    kids.push_back(nk);
            }
            kids = fold_powers(std::move(kids));
            return rx::concat(std::move(kids));
        }
    }
    return r;
}

}  // namespace detail

inline RegexPtr regex_normalize(const RegexPtr& r) { return detail::normalize_rec(r); }

}  // namespace tracelearn
