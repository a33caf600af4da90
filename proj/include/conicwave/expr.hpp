#pragma once

// Arithmetic expression grammar for metric coefficients in spec files:
//   +, -, *, /, pow(a,b), sin(a), cos(a), exp(a), numbers, variables x, y, r.
// r is rewritten to 1/x at parse time so that symbolic x-derivatives are
// exact. Derivatives are produced symbolically (needed twice for the radial
// flow, once in y).

#include <cctype>
#include <memory>
#include <stdexcept>
#include <string>

#include "conicwave/common.hpp"

namespace cwave::expr {

enum class Op { Const, VarX, VarY, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Neg };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op;
    double value = 0.0;  // Op::Const
    NodePtr a, b;
};

inline NodePtr constant(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
}

inline NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    // Constant folding keeps derivative trees small.
    auto node = std::make_shared<Node>();
    node->op = op;
    node->a = a;
    node->b = b;
    const bool ca = a && a->op == Op::Const, cb = b && b->op == Op::Const;
    switch (op) {
        case Op::Add:
            if (ca && cb) return constant(a->value + b->value);
            if (ca && a->value == 0.0) return b;
            if (cb && b->value == 0.0) return a;
            break;
        case Op::Sub:
            if (ca && cb) return constant(a->value - b->value);
            if (cb && b->value == 0.0) return a;
            break;
        case Op::Mul:
            if (ca && cb) return constant(a->value * b->value);
            if ((ca && a->value == 0.0) || (cb && b->value == 0.0)) return constant(0.0);
            if (ca && a->value == 1.0) return b;
            if (cb && b->value == 1.0) return a;
            break;
        case Op::Div:
            if (ca && a->value == 0.0) return constant(0.0);
            if (cb && b->value == 1.0) return a;
            if (ca && cb && b->value != 0.0) return constant(a->value / b->value);
            break;
        case Op::Neg:
            if (ca) return constant(-a->value);
            break;
        case Op::Pow:
            if (ca && cb) return constant(std::pow(a->value, b->value));
            if (cb && b->value == 1.0) return a;
            if (cb && b->value == 0.0) return constant(1.0);
            break;
        default:
            break;
    }
    return node;
}

inline double eval(const NodePtr& n, double x, double y) {
    switch (n->op) {
        case Op::Const: return n->value;
        case Op::VarX: return x;
        case Op::VarY: return y;
        case Op::Add: return eval(n->a, x, y) + eval(n->b, x, y);
        case Op::Sub: return eval(n->a, x, y) - eval(n->b, x, y);
        case Op::Mul: return eval(n->a, x, y) * eval(n->b, x, y);
        case Op::Div: return eval(n->a, x, y) / eval(n->b, x, y);
        case Op::Pow: return std::pow(eval(n->a, x, y), eval(n->b, x, y));
        case Op::Sin: return std::sin(eval(n->a, x, y));
        case Op::Cos: return std::cos(eval(n->a, x, y));
        case Op::Exp: return std::exp(eval(n->a, x, y));
        case Op::Neg: return -eval(n->a, x, y);
    }
    return 0.0;
}

inline NodePtr derivative(const NodePtr& n, bool wrt_x) {
    const Op var = wrt_x ? Op::VarX : Op::VarY;
    switch (n->op) {
        case Op::Const: return constant(0.0);
        case Op::VarX: return constant(n->op == var ? 1.0 : 0.0);
        case Op::VarY: return constant(n->op == var ? 1.0 : 0.0);
        case Op::Add: return make(Op::Add, derivative(n->a, wrt_x), derivative(n->b, wrt_x));
        case Op::Sub: return make(Op::Sub, derivative(n->a, wrt_x), derivative(n->b, wrt_x));
        case Op::Mul:
            return make(Op::Add, make(Op::Mul, derivative(n->a, wrt_x), n->b),
                        make(Op::Mul, n->a, derivative(n->b, wrt_x)));
        case Op::Div:
            return make(Op::Div,
                        make(Op::Sub, make(Op::Mul, derivative(n->a, wrt_x), n->b),
                             make(Op::Mul, n->a, derivative(n->b, wrt_x))),
                        make(Op::Mul, n->b, n->b));
        case Op::Pow: {
            if (n->b->op == Op::Const) {
                const double p = n->b->value;
                return make(Op::Mul, constant(p),
                            make(Op::Mul, make(Op::Pow, n->a, constant(p - 1.0)),
                                 derivative(n->a, wrt_x)));
            }
            // General a^b = exp(b log a); rarely used, differentiate via exp form.
            throw std::runtime_error("expr: pow with non-constant exponent is not differentiable here");
        }
        case Op::Sin: return make(Op::Mul, make(Op::Cos, n->a), derivative(n->a, wrt_x));
        case Op::Cos:
            return make(Op::Neg, make(Op::Mul, make(Op::Sin, n->a), derivative(n->a, wrt_x)));
        case Op::Exp: return make(Op::Mul, make(Op::Exp, n->a), derivative(n->a, wrt_x));
        case Op::Neg: return make(Op::Neg, derivative(n->a, wrt_x));
    }
    return constant(0.0);
}

class Parser {
  public:
    explicit Parser(std::string text) : text_(std::move(text)) {}

    NodePtr parse() {
        NodePtr e = parse_sum();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");
        return e;
    }

  private:
    std::string text_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) {
        throw std::runtime_error("expr parse error at offset " + std::to_string(pos_) + ": " + what +
                                 " in '" + text_ + "'");
    }
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr parse_sum() {
        NodePtr e = parse_product();
        for (;;) {
            if (consume('+'))
                e = make(Op::Add, e, parse_product());
            else if (consume('-'))
                e = make(Op::Sub, e, parse_product());
            else
                return e;
        }
    }
    NodePtr parse_product() {
        NodePtr e = parse_unary();
        for (;;) {
            if (consume('*'))
                e = make(Op::Mul, e, parse_unary());
            else if (consume('/'))
                e = make(Op::Div, e, parse_unary());
            else
                return e;
        }
    }
    NodePtr parse_unary() {
        if (consume('-')) return make(Op::Neg, parse_unary());
        if (consume('+')) return parse_unary();
        return parse_atom();
    }
    NodePtr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t used = 0;
            double v = std::stod(text_.substr(pos_), &used);
            pos_ += used;
            return constant(v);
        }
        if (c == '(') {
            ++pos_;
            NodePtr e = parse_sum();
            if (!consume(')')) fail("expected ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            size_t end = pos_;
            while (end < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
                ++end;
            const std::string name = text_.substr(pos_, end - pos_);
            pos_ = end;
            if (name == "x") return make(Op::VarX);
            if (name == "y") return make(Op::VarY);
            if (name == "r") return make(Op::Div, constant(1.0), make(Op::VarX));
            if (name == "pi") return constant(kPi);
            if (name == "sin" || name == "cos" || name == "exp") {
                if (!consume('(')) fail("expected '(' after function name");
                NodePtr a = parse_sum();
                if (!consume(')')) fail("expected ')'");
                if (name == "sin") return make(Op::Sin, a);
                if (name == "cos") return make(Op::Cos, a);
                return make(Op::Exp, a);
            }
            if (name == "pow") {
                if (!consume('(')) fail("expected '(' after pow");
                NodePtr a = parse_sum();
                if (!consume(',')) fail("expected ',' in pow");
                NodePtr b = parse_sum();
                if (!consume(')')) fail("expected ')'");
                return make(Op::Pow, a, b);
            }
            fail("unknown identifier '" + name + "'");
        }
        fail("unexpected character");
    }
};

// Compiled scalar coefficient c(x, y) with symbolic first and second
// derivatives ready for metric evaluation.
struct Coefficient {
    NodePtr f, fx, fy, fxx, fxy, fyy;

    static Coefficient compile(const std::string& text) {
        Coefficient c;
        c.f = Parser(text).parse();
        c.fx = derivative(c.f, true);
        c.fy = derivative(c.f, false);
        c.fxx = derivative(c.fx, true);
        c.fxy = derivative(c.fx, false);
        c.fyy = derivative(c.fy, false);
        return c;
    }
    double operator()(double x, double y) const { return eval(f, x, y); }
};

}  // namespace cwave::expr
