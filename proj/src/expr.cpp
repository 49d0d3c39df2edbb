#include "gbsde/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace gbsde {

struct Expression::Node {
    enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Exp, Log, Abs, Min, Max, Pow };
    Op op = Op::Const;
    double value = 0.0;
    int var = 0;  // 0 = t, 1 = y, 2 = z, 3 + i = x_{i+1}
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node::Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    int num_increments;
    bool uses_t = false, uses_x = false, uses_y = false, uses_z = false;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression: " + what + " at position " + std::to_string(pos) + " in '" +
                          text + "'");
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        while (true) {
            if (eat('+'))
                lhs = make(Node::Op::Add, lhs, parse_term());
            else if (eat('-'))
                lhs = make(Node::Op::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        while (true) {
            if (eat('*'))
                lhs = make(Node::Op::Mul, lhs, parse_unary());
            else if (eat('/'))
                lhs = make(Node::Op::Div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        if (eat('-')) return make(Node::Op::Neg, parse_unary());
        if (eat('+')) return parse_unary();
        return parse_primary();
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of expression");
        char c = text[pos];
        if (c == '(') {
            ++pos;
            NodePtr inner = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* start = text.c_str() + pos;
            char* end = nullptr;
            double v = std::strtod(start, &end);
            if (end == start) fail("invalid number");
            pos += static_cast<std::size_t>(end - start);
            auto n = std::make_shared<Node>();
            n->op = Node::Op::Const;
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos;
            while (pos < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
                ++pos;
            std::string name = text.substr(start, pos - start);
            if (eat('(')) return parse_call(name);
            return parse_variable(name, start);
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_call(const std::string& name) {
        std::vector<NodePtr> args;
        args.push_back(parse_expr());
        while (eat(',')) args.push_back(parse_expr());
        if (!eat(')')) fail("expected ')' after arguments of " + name);
        auto unary = [&](Node::Op op) {
            if (args.size() != 1) fail(name + " expects one argument");
            return make(op, args[0]);
        };
        auto binary = [&](Node::Op op) {
            if (args.size() != 2) fail(name + " expects two arguments");
            return make(op, args[0], args[1]);
        };
        if (name == "exp") return unary(Node::Op::Exp);
        if (name == "log") return unary(Node::Op::Log);
        if (name == "abs") return unary(Node::Op::Abs);
        if (name == "min") return binary(Node::Op::Min);
        if (name == "max") return binary(Node::Op::Max);
        if (name == "pow") return binary(Node::Op::Pow);
        fail("unknown function '" + name + "'");
    }

    NodePtr parse_variable(const std::string& name, std::size_t start) {
        auto n = std::make_shared<Node>();
        n->op = Node::Op::Var;
        if (name == "t") {
            n->var = 0;
            uses_t = true;
        } else if (name == "y") {
            n->var = 1;
            uses_y = true;
        } else if (name == "z") {
            n->var = 2;
            uses_z = true;
        } else if (name.size() > 1 && name[0] == 'x') {
            int idx = std::atoi(name.c_str() + 1);
            if (idx < 1 || idx > num_increments) {
                pos = start;
                fail("variable '" + name + "' out of range (have x1..x" +
                     std::to_string(num_increments) + ")");
            }
            n->var = 2 + idx;
            uses_x = true;
        } else {
            pos = start;
            fail("unknown variable '" + name + "'");
        }
        return n;
    }
};

double eval_node(const Node& n, double t, Eigen::Ref<const Vector> x, double y, double z) {
    switch (n.op) {
        case Node::Op::Const:
            return n.value;
        case Node::Op::Var:
            if (n.var == 0) return t;
            if (n.var == 1) return y;
            if (n.var == 2) return z;
            return x[n.var - 3];
        case Node::Op::Add:
            return eval_node(*n.lhs, t, x, y, z) + eval_node(*n.rhs, t, x, y, z);
        case Node::Op::Sub:
            return eval_node(*n.lhs, t, x, y, z) - eval_node(*n.rhs, t, x, y, z);
        case Node::Op::Mul:
            return eval_node(*n.lhs, t, x, y, z) * eval_node(*n.rhs, t, x, y, z);
        case Node::Op::Div:
            return eval_node(*n.lhs, t, x, y, z) / eval_node(*n.rhs, t, x, y, z);
        case Node::Op::Neg:
            return -eval_node(*n.lhs, t, x, y, z);
        case Node::Op::Exp:
            return std::exp(eval_node(*n.lhs, t, x, y, z));
        case Node::Op::Log:
            return std::log(eval_node(*n.lhs, t, x, y, z));
        case Node::Op::Abs:
            return std::abs(eval_node(*n.lhs, t, x, y, z));
        case Node::Op::Min:
            return std::min(eval_node(*n.lhs, t, x, y, z), eval_node(*n.rhs, t, x, y, z));
        case Node::Op::Max:
            return std::max(eval_node(*n.lhs, t, x, y, z), eval_node(*n.rhs, t, x, y, z));
        case Node::Op::Pow:
            return std::pow(eval_node(*n.lhs, t, x, y, z), eval_node(*n.rhs, t, x, y, z));
    }
    return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text, int num_increments) {
    Parser p{text, 0, num_increments};
    NodePtr root = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing input");
    Expression e;
    e.root_ = std::move(root);
    e.text_ = text;
    e.num_increments_ = num_increments;
    e.uses_t_ = p.uses_t;
    e.uses_x_ = p.uses_x;
    e.uses_y_ = p.uses_y;
    e.uses_z_ = p.uses_z;
    return e;
}

double Expression::eval(double t, Eigen::Ref<const Vector> x, double y, double z) const {
    return eval_node(*root_, t, x, y, z);
}

}  // namespace gbsde
