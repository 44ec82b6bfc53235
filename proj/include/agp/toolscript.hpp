#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "agp/errors.hpp"

// A single-expression scripting language for tool behavior. A program maps a
// JSON input object to a JSON output value; bare identifiers read fields of
// the input, `input` is the whole object. Example sources:
//
//   input                 echo
//   a + b                 add the fields "a" and "b"
//   concat(upper(s), "!") string manipulation
//   fail("boom")          deterministic runtime error
//
// Compilation errors are reported as BuildFailure with a position;
// evaluation errors as ExecutionError.
namespace agp::toolscript {

using json = nlohmann::json;

namespace detail {

enum class Tok {
    End, Number, String, Ident,
    Plus, Minus, Star, Slash, Percent,
    Eq, Ne, Lt, Le, Gt, Ge,
    LParen, RParen, LBracket, RBracket, Comma, Dot,
    And, Or, Not, True, False, Null, Input,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0;
    std::size_t pos = 0;
};

inline std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorKind::BuildFailure,
                    "at offset " + std::to_string(i) + ": " + msg);
    };
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
        Token t; t.pos = i;
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = i;
            while (i < src.size() && (std::isdigit(static_cast<unsigned char>(src[i])) ||
                                       src[i] == '.' || src[i] == 'e' || src[i] == 'E' ||
                                       ((src[i] == '+' || src[i] == '-') && i > start &&
                                        (src[i - 1] == 'e' || src[i - 1] == 'E'))))
                ++i;
            t.kind = Tok::Number;
            t.text = src.substr(start, i - start);
            try {
                std::size_t used = 0;
                t.number = std::stod(t.text, &used);
                if (used != t.text.size()) fail("bad number literal '" + t.text + "'");
            } catch (const std::exception&) {
                fail("bad number literal '" + t.text + "'");
            }
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) ||
                                       src[i] == '_'))
                ++i;
            t.text = src.substr(start, i - start);
            if (t.text == "and") t.kind = Tok::And;
            else if (t.text == "or") t.kind = Tok::Or;
            else if (t.text == "not") t.kind = Tok::Not;
            else if (t.text == "true") t.kind = Tok::True;
            else if (t.text == "false") t.kind = Tok::False;
            else if (t.text == "null") t.kind = Tok::Null;
            else if (t.text == "input") t.kind = Tok::Input;
            else t.kind = Tok::Ident;
        } else if (c == '"') {
            ++i;
            std::string s;
            bool closed = false;
            while (i < src.size()) {
                if (src[i] == '\\' && i + 1 < src.size()) {
                    const char e = src[i + 1];
                    if (e == 'n') s.push_back('\n');
                    else if (e == 't') s.push_back('\t');
                    else s.push_back(e);
                    i += 2;
                } else if (src[i] == '"') {
                    ++i; closed = true; break;
                } else {
                    s.push_back(src[i++]);
                }
            }
            if (!closed) fail("unterminated string literal");
            t.kind = Tok::String;
            t.text = std::move(s);
        } else {
            auto two = [&](char a, char b) {
                return c == a && i + 1 < src.size() && src[i + 1] == b;
            };
            if (two('=', '=')) { t.kind = Tok::Eq; i += 2; }
            else if (two('!', '=')) { t.kind = Tok::Ne; i += 2; }
            else if (two('<', '=')) { t.kind = Tok::Le; i += 2; }
            else if (two('>', '=')) { t.kind = Tok::Ge; i += 2; }
            else {
                switch (c) {
                    case '+': t.kind = Tok::Plus; break;
                    case '-': t.kind = Tok::Minus; break;
                    case '*': t.kind = Tok::Star; break;
                    case '/': t.kind = Tok::Slash; break;
                    case '%': t.kind = Tok::Percent; break;
                    case '<': t.kind = Tok::Lt; break;
                    case '>': t.kind = Tok::Gt; break;
                    case '(': t.kind = Tok::LParen; break;
                    case ')': t.kind = Tok::RParen; break;
                    case '[': t.kind = Tok::LBracket; break;
                    case ']': t.kind = Tok::RBracket; break;
                    case ',': t.kind = Tok::Comma; break;
                    case '.': t.kind = Tok::Dot; break;
                    default: fail(std::string("unexpected character '") + c + "'");
                }
                ++i;
            }
        }
        out.push_back(std::move(t));
    }
    out.push_back(Token{Tok::End, "", 0, i});
    return out;
}

struct Node {
    enum class Kind {
        Literal, InputRef, FieldRef, Member, Index, Unary, Binary, Call
    } kind;
    json literal;
    std::string name;  // field name, member name, call target or operator
    std::vector<std::unique_ptr<Node>> children;
};

using NodePtr = std::unique_ptr<Node>;

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    NodePtr parse() {
        NodePtr e = parse_or();
        expect(Tok::End, "end of input");
        return e;
    }

private:
    const Token& peek() const { return toks_[idx_]; }
    Token take() { return toks_[idx_++]; }
    bool accept(Tok k) {
        if (peek().kind == k) { ++idx_; return true; }
        return false;
    }
    void expect(Tok k, const std::string& what) {
        if (peek().kind != k)
            throw Error(ErrorKind::BuildFailure,
                        "at offset " + std::to_string(peek().pos) + ": expected " + what);
        ++idx_;
    }
    static NodePtr mk(Node::Kind k) {
        auto n = std::make_unique<Node>();
        n->kind = k;
        return n;
    }
    NodePtr binary(const char* op, NodePtr lhs, NodePtr rhs) {
        auto n = mk(Node::Kind::Binary);
        n->name = op;
        n->children.push_back(std::move(lhs));
        n->children.push_back(std::move(rhs));
        return n;
    }

    NodePtr parse_or() {
        NodePtr lhs = parse_and();
        while (accept(Tok::Or)) lhs = binary("or", std::move(lhs), parse_and());
        return lhs;
    }
    NodePtr parse_and() {
        NodePtr lhs = parse_cmp();
        while (accept(Tok::And)) lhs = binary("and", std::move(lhs), parse_cmp());
        return lhs;
    }
    NodePtr parse_cmp() {
        NodePtr lhs = parse_add();
        const Tok k = peek().kind;
        const char* op = nullptr;
        switch (k) {
            case Tok::Eq: op = "=="; break;
            case Tok::Ne: op = "!="; break;
            case Tok::Lt: op = "<"; break;
            case Tok::Le: op = "<="; break;
            case Tok::Gt: op = ">"; break;
            case Tok::Ge: op = ">="; break;
            default: return lhs;
        }
        ++idx_;
        return binary(op, std::move(lhs), parse_add());
    }
    NodePtr parse_add() {
        NodePtr lhs = parse_mul();
        for (;;) {
            if (accept(Tok::Plus)) lhs = binary("+", std::move(lhs), parse_mul());
            else if (accept(Tok::Minus)) lhs = binary("-", std::move(lhs), parse_mul());
            else return lhs;
        }
    }
    NodePtr parse_mul() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept(Tok::Star)) lhs = binary("*", std::move(lhs), parse_unary());
            else if (accept(Tok::Slash)) lhs = binary("/", std::move(lhs), parse_unary());
            else if (accept(Tok::Percent)) lhs = binary("%", std::move(lhs), parse_unary());
            else return lhs;
        }
    }
    NodePtr parse_unary() {
        if (accept(Tok::Minus)) {
            auto n = mk(Node::Kind::Unary);
            n->name = "-";
            n->children.push_back(parse_unary());
            return n;
        }
        if (accept(Tok::Not)) {
            auto n = mk(Node::Kind::Unary);
            n->name = "not";
            n->children.push_back(parse_unary());
            return n;
        }
        return parse_postfix();
    }
    NodePtr parse_postfix() {
        NodePtr base = parse_primary();
        for (;;) {
            if (accept(Tok::Dot)) {
                if (peek().kind != Tok::Ident)
                    throw Error(ErrorKind::BuildFailure,
                                "at offset " + std::to_string(peek().pos) +
                                    ": expected member name after '.'");
                auto n = mk(Node::Kind::Member);
                n->name = take().text;
                n->children.push_back(std::move(base));
                base = std::move(n);
            } else if (accept(Tok::LBracket)) {
                auto n = mk(Node::Kind::Index);
                n->children.push_back(std::move(base));
                n->children.push_back(parse_or());
                expect(Tok::RBracket, "']'");
                base = std::move(n);
            } else {
                return base;
            }
        }
    }
    NodePtr parse_primary() {
        Token t = take();
        switch (t.kind) {
            case Tok::Number: {
                auto n = mk(Node::Kind::Literal);
                n->literal = t.number;
                return n;
            }
            case Tok::String: {
                auto n = mk(Node::Kind::Literal);
                n->literal = t.text;
                return n;
            }
            case Tok::True: { auto n = mk(Node::Kind::Literal); n->literal = true; return n; }
            case Tok::False: { auto n = mk(Node::Kind::Literal); n->literal = false; return n; }
            case Tok::Null: { auto n = mk(Node::Kind::Literal); n->literal = nullptr; return n; }
            case Tok::Input: return mk(Node::Kind::InputRef);
            case Tok::LParen: {
                NodePtr e = parse_or();
                expect(Tok::RParen, "')'");
                return e;
            }
            case Tok::Ident: {
                if (accept(Tok::LParen)) {
                    auto n = mk(Node::Kind::Call);
                    n->name = t.text;
                    if (!accept(Tok::RParen)) {
                        do n->children.push_back(parse_or());
                        while (accept(Tok::Comma));
                        expect(Tok::RParen, "')'");
                    }
                    return n;
                }
                auto n = mk(Node::Kind::FieldRef);
                n->name = t.text;
                return n;
            }
            default:
                throw Error(ErrorKind::BuildFailure,
                            "at offset " + std::to_string(t.pos) + ": unexpected token");
        }
    }

    std::vector<Token> toks_;
    std::size_t idx_ = 0;
};

inline json make_number(double v) {
    if (std::isfinite(v) && std::floor(v) == v && std::abs(v) < 9.0e15)
        return json(static_cast<std::int64_t>(v));
    return json(v);
}

inline double need_number(const json& v, const char* ctx) {
    if (!v.is_number())
        throw Error(ErrorKind::ExecutionError, std::string(ctx) + " requires a number, got " +
                                                   v.dump());
    return v.get<double>();
}

inline bool truthy(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_null()) return false;
    if (v.is_number()) return v.get<double>() != 0.0;
    if (v.is_string()) return !v.get<std::string>().empty();
    return !v.empty();
}

inline std::string stringify(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

inline json eval(const Node& n, const json& input);

inline json eval_call(const Node& n, const json& input) {
    std::vector<json> args;
    args.reserve(n.children.size());
    for (const auto& c : n.children) args.push_back(eval(*c, input));
    auto arity = [&](std::size_t want) {
        if (args.size() != want)
            throw Error(ErrorKind::ExecutionError,
                        n.name + "() expects " + std::to_string(want) + " argument(s)");
    };
    if (n.name == "concat") {
        std::string out;
        for (const auto& a : args) out += stringify(a);
        return out;
    }
    if (n.name == "upper" || n.name == "lower") {
        arity(1);
        std::string s = stringify(args[0]);
        for (auto& c : s)
            c = static_cast<char>(n.name == "upper" ? std::toupper(static_cast<unsigned char>(c))
                                                    : std::tolower(static_cast<unsigned char>(c)));
        return s;
    }
    if (n.name == "trim") {
        arity(1);
        std::string s = stringify(args[0]);
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }
    if (n.name == "len") {
        arity(1);
        if (args[0].is_string())
            return make_number(static_cast<double>(args[0].get<std::string>().size()));
        return make_number(static_cast<double>(args[0].size()));
    }
    if (n.name == "str") { arity(1); return stringify(args[0]); }
    if (n.name == "num") {
        arity(1);
        if (args[0].is_number()) return args[0];
        if (args[0].is_string()) {
            try {
                return make_number(std::stod(args[0].get<std::string>()));
            } catch (const std::exception&) {
                throw Error(ErrorKind::ExecutionError,
                            "num(): cannot convert " + args[0].dump());
            }
        }
        throw Error(ErrorKind::ExecutionError, "num(): cannot convert " + args[0].dump());
    }
    if (n.name == "contains") {
        arity(2);
        return stringify(args[0]).find(stringify(args[1])) != std::string::npos;
    }
    if (n.name == "abs") { arity(1); return make_number(std::abs(need_number(args[0], "abs"))); }
    if (n.name == "min" || n.name == "max") {
        arity(2);
        const double a = need_number(args[0], n.name.c_str());
        const double b = need_number(args[1], n.name.c_str());
        return make_number(n.name == "min" ? std::min(a, b) : std::max(a, b));
    }
    if (n.name == "if") {
        arity(3);
        return truthy(args[0]) ? args[1] : args[2];
    }
    if (n.name == "get") {
        arity(3);
        if (args[0].is_object() && args[1].is_string() &&
            args[0].contains(args[1].get<std::string>()))
            return args[0][args[1].get<std::string>()];
        return args[2];
    }
    if (n.name == "fail") {
        throw Error(ErrorKind::ExecutionError,
                    args.empty() ? std::string("tool failure") : stringify(args[0]));
    }
    throw Error(ErrorKind::ExecutionError, "unknown function '" + n.name + "'");
}

inline json eval(const Node& n, const json& input) {
    switch (n.kind) {
        case Node::Kind::Literal:
            return n.literal.is_number() ? make_number(n.literal.get<double>()) : n.literal;
        case Node::Kind::InputRef:
            return input;
        case Node::Kind::FieldRef: {
            if (input.is_object() && input.contains(n.name)) return input[n.name];
            throw Error(ErrorKind::ExecutionError, "undefined input field '" + n.name + "'");
        }
        case Node::Kind::Member: {
            const json base = eval(*n.children[0], input);
            if (base.is_object() && base.contains(n.name)) return base[n.name];
            throw Error(ErrorKind::ExecutionError, "no member '" + n.name + "' in " + base.dump());
        }
        case Node::Kind::Index: {
            const json base = eval(*n.children[0], input);
            const json key = eval(*n.children[1], input);
            if (base.is_array() && key.is_number()) {
                const auto i = static_cast<std::size_t>(key.get<double>());
                if (i >= base.size())
                    throw Error(ErrorKind::ExecutionError, "index out of range");
                return base[i];
            }
            if (base.is_object() && key.is_string() && base.contains(key.get<std::string>()))
                return base[key.get<std::string>()];
            throw Error(ErrorKind::ExecutionError, "cannot index " + base.dump());
        }
        case Node::Kind::Unary: {
            const json v = eval(*n.children[0], input);
            if (n.name == "-") return make_number(-need_number(v, "unary -"));
            return !truthy(v);
        }
        case Node::Kind::Binary: {
            if (n.name == "and") {
                const json lhs = eval(*n.children[0], input);
                if (!truthy(lhs)) return false;
                return truthy(eval(*n.children[1], input));
            }
            if (n.name == "or") {
                const json lhs = eval(*n.children[0], input);
                if (truthy(lhs)) return true;
                return truthy(eval(*n.children[1], input));
            }
            const json a = eval(*n.children[0], input);
            const json b = eval(*n.children[1], input);
            if (n.name == "==") return a == b;
            if (n.name == "!=") return a != b;
            if (n.name == "+") {
                if (a.is_string() && b.is_string())
                    return a.get<std::string>() + b.get<std::string>();
                return make_number(need_number(a, "+") + need_number(b, "+"));
            }
            if (n.name == "-") return make_number(need_number(a, "-") - need_number(b, "-"));
            if (n.name == "*") return make_number(need_number(a, "*") * need_number(b, "*"));
            if (n.name == "/") {
                const double d = need_number(b, "/");
                if (d == 0.0) throw Error(ErrorKind::ExecutionError, "division by zero");
                return make_number(need_number(a, "/") / d);
            }
            if (n.name == "%") {
                const double d = need_number(b, "%");
                if (d == 0.0) throw Error(ErrorKind::ExecutionError, "modulo by zero");
                return make_number(std::fmod(need_number(a, "%"), d));
            }
            // ordered comparisons: numbers numerically, strings lexicographically
            if (a.is_string() && b.is_string()) {
                const auto& sa = a.get_ref<const std::string&>();
                const auto& sb = b.get_ref<const std::string&>();
                if (n.name == "<") return sa < sb;
                if (n.name == "<=") return sa <= sb;
                if (n.name == ">") return sa > sb;
                return sa >= sb;
            }
            const double x = need_number(a, n.name.c_str());
            const double y = need_number(b, n.name.c_str());
            if (n.name == "<") return x < y;
            if (n.name == "<=") return x <= y;
            if (n.name == ">") return x > y;
            return x >= y;
        }
        case Node::Kind::Call:
            return eval_call(n, input);
    }
    throw Error(ErrorKind::ExecutionError, "corrupt program");
}

}  // namespace detail

// Compiled program handle. Compilation is pure; evaluation is const and
// reentrant, so one compiled program may back many instances.
class Program {
public:
    static Program compile(const std::string& source) {
        if (source.find_first_not_of(" \t\r\n") == std::string::npos)
            throw Error(ErrorKind::BuildFailure, "empty tool source");
        Program p;
        p.source_ = source;
        p.root_ = detail::Parser(detail::lex(source)).parse();
        return p;
    }

    json run(const json& input) const { return detail::eval(*root_, input); }

    const std::string& source() const { return source_; }

private:
    std::string source_;
    std::shared_ptr<detail::Node> root_;
};

}  // namespace agp::toolscript
