#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "stein/errors.hpp"
#include "stein/math.hpp"

namespace stein {

// Value/derivative pair for forward-mode differentiation.
struct Dual {
    double v = 0.0;
    double d = 0.0;
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }

// Parsed scalar function of x1..xn with exact forward-mode partials.
class Expr {
  public:
    static Expr parse(const std::string& text, int dimension);

    int dimension() const { return dim_; }

    double eval(std::span<const double> x) const {
        check_arity(x.size());
        return eval_node<double>(root_, x, 0);
    }

    // d/dx_k at x (1-based k). Kink conventions: |.|' is 0 at 0, min/max
    // follow the first attaining argument.
    double partial(int k, std::span<const double> x) const { return eval_dual(k, x).d; }

    Dual eval_dual(int k, std::span<const double> x) const {
        check_arity(x.size());
        if (k < 1 || k > dim_) throw domain_error("partial: coordinate out of range");
        return eval_node<Dual>(root_, x, k);
    }

    // Convenience for one-variable functions.
    double eval1(double x) const { return eval(std::span<const double>(&x, 1)); }
    double partial1(double x) const { return partial(1, std::span<const double>(&x, 1)); }

    std::string to_string() const { return print_node(root_); }
    const std::string& source() const { return source_; }

    std::vector<int> variables_used() const {
        std::vector<bool> seen(static_cast<std::size_t>(dim_) + 1, false);
        for (const Node& n : nodes_)
            if (n.kind == NodeKind::variable) seen[static_cast<std::size_t>(n.var)] = true;
        std::vector<int> out;
        for (int i = 1; i <= dim_; ++i)
            if (seen[static_cast<std::size_t>(i)]) out.push_back(i);
        return out;
    }

    bool depends_only_on(int k) const {
        auto used = variables_used();
        return used.empty() || (used.size() == 1 && used[0] == k);
    }

    bool structurally_equal(const Expr& other) const {
        return dim_ == other.dim_ && nodes_equal(root_, other, other.root_);
    }

  private:
    enum class NodeKind { constant, variable, unary, binary, nary };
    enum class UnaryOp { neg, exp, log, sin, cos, tanh, abs, sqrt };
    enum class BinaryOp { add, sub, mul, div, pow };
    enum class NaryOp { min, max, sum };

    struct Node {
        NodeKind kind{};
        double value = 0.0;
        int var = 0;
        UnaryOp uop{};
        BinaryOp bop{};
        NaryOp nop{};
        std::vector<int> kids;
        std::size_t pos = 0;
    };

    void check_arity(std::size_t len) const {
        if (static_cast<int>(len) != dim_)
            throw domain_error("eval: expected " + std::to_string(dim_) + " coordinates, got " +
                               std::to_string(len));
    }

    template <class T>
    static T make_const(double c);
    template <class T>
    static T make_var(double xv, bool active);

    template <class T>
    T eval_node(int idx, std::span<const double> x, int k) const {
        const Node& n = nodes_[static_cast<std::size_t>(idx)];
        switch (n.kind) {
            case NodeKind::constant:
                return make_const<T>(n.value);
            case NodeKind::variable:
                return make_var<T>(x[static_cast<std::size_t>(n.var - 1)], n.var == k);
            case NodeKind::unary: {
                T a = eval_node<T>(n.kids[0], x, k);
                return apply_unary<T>(n, a);
            }
            case NodeKind::binary: {
                T a = eval_node<T>(n.kids[0], x, k);
                T b = eval_node<T>(n.kids[1], x, k);
                return apply_binary<T>(n, a, b);
            }
            case NodeKind::nary: {
                T acc = eval_node<T>(n.kids[0], x, k);
                for (std::size_t i = 1; i < n.kids.size(); ++i) {
                    T b = eval_node<T>(n.kids[i], x, k);
                    acc = combine_nary<T>(n.nop, acc, b);
                }
                return acc;
            }
        }
        throw eval_error("corrupt expression node", n.pos);
    }

    template <class T>
    T apply_unary(const Node& n, T a) const;
    template <class T>
    T apply_binary(const Node& n, T a, T b) const;
    template <class T>
    static T combine_nary(NaryOp op, T a, T b);

    static double value_of(double x) { return x; }
    static double value_of(Dual x) { return x.v; }

    bool nodes_equal(int ia, const Expr& other, int ib) const {
        const Node& a = nodes_[static_cast<std::size_t>(ia)];
        const Node& b = other.nodes_[static_cast<std::size_t>(ib)];
        if (a.kind != b.kind || a.kids.size() != b.kids.size()) return false;
        switch (a.kind) {
            case NodeKind::constant:
                if (a.value != b.value) return false;
                break;
            case NodeKind::variable:
                if (a.var != b.var) return false;
                break;
            case NodeKind::unary:
                if (a.uop != b.uop) return false;
                break;
            case NodeKind::binary:
                if (a.bop != b.bop) return false;
                break;
            case NodeKind::nary:
                if (a.nop != b.nop) return false;
                break;
        }
        for (std::size_t i = 0; i < a.kids.size(); ++i)
            if (!nodes_equal(a.kids[i], other, b.kids[i])) return false;
        return true;
    }

    std::string print_node(int idx) const {
        const Node& n = nodes_[static_cast<std::size_t>(idx)];
        switch (n.kind) {
            case NodeKind::constant: {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", n.value);
                return buf;
            }
            case NodeKind::variable:
                return "x" + std::to_string(n.var);
            case NodeKind::unary: {
                static const char* names[] = {"-", "exp", "log", "sin", "cos", "tanh", "abs", "sqrt"};
                const char* f = names[static_cast<int>(n.uop)];
                if (n.uop == UnaryOp::neg) return std::string("(-") + print_node(n.kids[0]) + ")";
                return std::string(f) + "(" + print_node(n.kids[0]) + ")";
            }
            case NodeKind::binary: {
                static const char* ops[] = {"+", "-", "*", "/", "^"};
                return "(" + print_node(n.kids[0]) + ops[static_cast<int>(n.bop)] +
                       print_node(n.kids[1]) + ")";
            }
            case NodeKind::nary: {
                static const char* names[] = {"min", "max", "sum"};
                std::string out = std::string(names[static_cast<int>(n.nop)]) + "(";
                for (std::size_t i = 0; i < n.kids.size(); ++i) {
                    if (i) out += ",";
                    out += print_node(n.kids[i]);
                }
                return out + ")";
            }
        }
        return "?";
    }

    friend class ExprParser;

    std::vector<Node> nodes_;
    int root_ = 0;
    int dim_ = 0;
    std::string source_;
};

template <>
inline double Expr::make_const<double>(double c) {
    return c;
}
template <>
inline Dual Expr::make_const<Dual>(double c) {
    return {c, 0.0};
}
template <>
inline double Expr::make_var<double>(double xv, bool) {
    return xv;
}
template <>
inline Dual Expr::make_var<Dual>(double xv, bool active) {
    return {xv, active ? 1.0 : 0.0};
}

template <>
inline double Expr::apply_unary<double>(const Node& n, double a) const {
    switch (n.uop) {
        case UnaryOp::neg:
            return -a;
        case UnaryOp::exp:
            return std::exp(a);
        case UnaryOp::log:
            if (!(a > 0.0)) throw eval_error("log of nonpositive value", n.pos);
            return std::log(a);
        case UnaryOp::sin:
            return std::sin(a);
        case UnaryOp::cos:
            return std::cos(a);
        case UnaryOp::tanh:
            return std::tanh(a);
        case UnaryOp::abs:
            return std::fabs(a);
        case UnaryOp::sqrt:
            if (a < 0.0) throw eval_error("sqrt of negative value", n.pos);
            return std::sqrt(a);
    }
    throw eval_error("corrupt unary node", n.pos);
}

template <>
inline Dual Expr::apply_unary<Dual>(const Node& n, Dual a) const {
    switch (n.uop) {
        case UnaryOp::neg:
            return -a;
        case UnaryOp::exp: {
            double e = std::exp(a.v);
            return {e, e * a.d};
        }
        case UnaryOp::log:
            if (!(a.v > 0.0)) throw eval_error("log of nonpositive value", n.pos);
            return {std::log(a.v), a.d / a.v};
        case UnaryOp::sin:
            return {std::sin(a.v), std::cos(a.v) * a.d};
        case UnaryOp::cos:
            return {std::cos(a.v), -std::sin(a.v) * a.d};
        case UnaryOp::tanh: {
            double t = std::tanh(a.v);
            return {t, (1.0 - t * t) * a.d};
        }
        case UnaryOp::abs:
            // derivative 0 at the kink
            return {std::fabs(a.v), a.v > 0.0 ? a.d : (a.v < 0.0 ? -a.d : 0.0)};
        case UnaryOp::sqrt: {
            if (a.v < 0.0) throw eval_error("sqrt of negative value", n.pos);
            double r = std::sqrt(a.v);
            return {r, a.d == 0.0 ? 0.0 : 0.5 * a.d / r};
        }
    }
    throw eval_error("corrupt unary node", n.pos);
}

namespace detail {
inline bool is_integral_exponent(double e) {
    return std::fabs(e) < 1e15 && e == std::nearbyint(e);
}
}  // namespace detail

template <>
inline double Expr::apply_binary<double>(const Node& n, double a, double b) const {
    switch (n.bop) {
        case BinaryOp::add:
            return a + b;
        case BinaryOp::sub:
            return a - b;
        case BinaryOp::mul:
            return a * b;
        case BinaryOp::div:
            if (b == 0.0) throw eval_error("division by zero", n.pos);
            return a / b;
        case BinaryOp::pow: {
            if (detail::is_integral_exponent(b)) {
                long long e = static_cast<long long>(std::nearbyint(b));
                if (e < 0 && a == 0.0) throw eval_error("zero raised to a negative power", n.pos);
                return powi(a, e);
            }
            if (!(a > 0.0))
                throw eval_error("non-integer power requires a positive base", n.pos);
            return std::pow(a, b);
        }
    }
    throw eval_error("corrupt binary node", n.pos);
}

template <>
inline Dual Expr::apply_binary<Dual>(const Node& n, Dual a, Dual b) const {
    switch (n.bop) {
        case BinaryOp::add:
            return a + b;
        case BinaryOp::sub:
            return a - b;
        case BinaryOp::mul:
            return a * b;
        case BinaryOp::div:
            if (b.v == 0.0) throw eval_error("division by zero", n.pos);
            return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
        case BinaryOp::pow: {
            if (b.d == 0.0 && detail::is_integral_exponent(b.v)) {
                long long e = static_cast<long long>(std::nearbyint(b.v));
                if (e < 0 && a.v == 0.0) throw eval_error("zero raised to a negative power", n.pos);
                double val = powi(a.v, e);
                double grad = (e == 0) ? 0.0 : static_cast<double>(e) * powi(a.v, e - 1) * a.d;
                return {val, grad};
            }
            if (!(a.v > 0.0))
                throw eval_error("non-integer power requires a positive base", n.pos);
            double val = std::pow(a.v, b.v);
            double grad = val * (b.d * std::log(a.v) + b.v * a.d / a.v);
            return {val, grad};
        }
    }
    throw eval_error("corrupt binary node", n.pos);
}

template <>
inline double Expr::combine_nary<double>(NaryOp op, double a, double b) {
    switch (op) {
        case NaryOp::min:
            return b < a ? b : a;
        case NaryOp::max:
            return b > a ? b : a;
        case NaryOp::sum:
            return a + b;
    }
    return a;
}

template <>
inline Dual Expr::combine_nary<Dual>(NaryOp op, Dual a, Dual b) {
    switch (op) {
        case NaryOp::min:
            return b.v < a.v ? b : a;  // ties keep the first argument
        case NaryOp::max:
            return b.v > a.v ? b : a;
        case NaryOp::sum:
            return a + b;
    }
    return a;
}

// Recursive-descent parser for the expression grammar (see README):
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := ('-'|'+') unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | 'x'<index> | func '(' expr (',' expr)* ')' | '(' expr ')'
class ExprParser {
  public:
    ExprParser(const std::string& text, int dim) : text_(text), dim_(dim) {
        if (dim < 1) throw domain_error("parse: dimension must be >= 1");
    }

    Expr run() {
        Expr e;
        e.dim_ = dim_;
        e.source_ = text_;
        nodes_ = &e.nodes_;
        pos_ = 0;
        int root = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw parse_error("unexpected trailing input", pos_);
        e.root_ = root;
        return e;
    }

  private:
    using Node = Expr::Node;

    int add_node(Node n) {
        nodes_->push_back(std::move(n));
        return static_cast<int>(nodes_->size()) - 1;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) throw parse_error(std::string("expected '") + c + "'", pos_);
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            skip_ws();
            std::size_t at = pos_;
            if (accept('+'))
                lhs = binary(Expr::BinaryOp::add, lhs, parse_term(), at);
            else if (accept('-'))
                lhs = binary(Expr::BinaryOp::sub, lhs, parse_term(), at);
            else
                return lhs;
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            skip_ws();
            std::size_t at = pos_;
            if (accept('*'))
                lhs = binary(Expr::BinaryOp::mul, lhs, parse_unary(), at);
            else if (accept('/'))
                lhs = binary(Expr::BinaryOp::div, lhs, parse_unary(), at);
            else
                return lhs;
        }
    }

    int parse_unary() {
        skip_ws();
        std::size_t at = pos_;
        if (accept('-')) {
            Node n;
            n.kind = Expr::NodeKind::unary;
            n.uop = Expr::UnaryOp::neg;
            n.pos = at;
            n.kids = {parse_unary()};
            return add_node(std::move(n));
        }
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    int parse_power() {
        int base = parse_primary();
        skip_ws();
        std::size_t at = pos_;
        if (accept('^')) return binary(Expr::BinaryOp::pow, base, parse_unary(), at);
        return base;
    }

    int binary(Expr::BinaryOp op, int a, int b, std::size_t at) {
        Node n;
        n.kind = Expr::NodeKind::binary;
        n.bop = op;
        n.kids = {a, b};
        n.pos = at;
        return add_node(std::move(n));
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw parse_error("unexpected end of expression", pos_);
        std::size_t at = pos_;
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        if (accept('(')) {
            int inner = parse_expr();
            expect(')');
            return inner;
        }
        throw parse_error(std::string("unexpected character '") + c + "'", at);
    }

    int parse_number() {
        std::size_t at = pos_;
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.'))
            ++end;
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t e = end + 1;
            if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) ++e;
            if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
                ++e;
                while (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) ++e;
                end = e;
            }
        }
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(text_.substr(at, end - at), &used);
            if (used != end - at) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw parse_error("malformed number", at);
        }
        pos_ = end;
        Node n;
        n.kind = Expr::NodeKind::constant;
        n.value = v;
        n.pos = at;
        return add_node(std::move(n));
    }

    int parse_identifier() {
        std::size_t at = pos_;
        std::size_t end = pos_;
        while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) ||
                                      text_[end] == '_'))
            ++end;
        std::string id = text_.substr(at, end - at);
        pos_ = end;

        if (id.size() >= 2 && id[0] == 'x' && std::isdigit(static_cast<unsigned char>(id[1]))) {
            int index = 0;
            bool ok = id[1] != '0';
            for (std::size_t i = 1; ok && i < id.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(id[i]))) {
                    ok = false;
                    break;
                }
                index = index * 10 + (id[i] - '0');
                if (index > 1'000'000) ok = false;
            }
            if (ok) {
                if (index > dim_)
                    throw parse_error("variable " + id + " exceeds dimension " +
                                          std::to_string(dim_),
                                      at);
                Node n;
                n.kind = Expr::NodeKind::variable;
                n.var = index;
                n.pos = at;
                return add_node(std::move(n));
            }
        }

        static const std::pair<const char*, Expr::UnaryOp> unary_funcs[] = {
            {"exp", Expr::UnaryOp::exp},   {"log", Expr::UnaryOp::log},
            {"sin", Expr::UnaryOp::sin},   {"cos", Expr::UnaryOp::cos},
            {"tanh", Expr::UnaryOp::tanh}, {"abs", Expr::UnaryOp::abs},
            {"sqrt", Expr::UnaryOp::sqrt}};
        for (const auto& [name, op] : unary_funcs) {
            if (id == name) {
                expect('(');
                int arg = parse_expr();
                expect(')');
                Node n;
                n.kind = Expr::NodeKind::unary;
                n.uop = op;
                n.kids = {arg};
                n.pos = at;
                return add_node(std::move(n));
            }
        }

        static const std::pair<const char*, Expr::NaryOp> nary_funcs[] = {
            {"min", Expr::NaryOp::min}, {"max", Expr::NaryOp::max}, {"sum", Expr::NaryOp::sum}};
        for (const auto& [name, op] : nary_funcs) {
            if (id == name) {
                expect('(');
                Node n;
                n.kind = Expr::NodeKind::nary;
                n.nop = op;
                n.pos = at;
                n.kids.push_back(parse_expr());
                while (accept(',')) n.kids.push_back(parse_expr());
                expect(')');
                return add_node(std::move(n));
            }
        }

        throw parse_error("unknown identifier '" + id + "'", at);
    }

    const std::string& text_;
    int dim_;
    std::size_t pos_ = 0;
    std::vector<Node>* nodes_ = nullptr;
};

inline Expr Expr::parse(const std::string& text, int dimension) {
    return ExprParser(text, dimension).run();
}

}  // namespace stein
