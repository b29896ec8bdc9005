#include "kqsd/expr.hpp"

#include "kqsd/errors.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace kqsd {

namespace {

enum class Op {
    constant,
    var_q,
    var_p,
    add,
    sub,
    mul,
    divide,
    pow_op,
    neg,
    call1,
    call2,
};

using Fn1 = double (*)(double);
using Fn2 = double (*)(double, double);

double sign_fn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
double min_fn(double a, double b) { return std::min(a, b); }
double max_fn(double a, double b) { return std::max(a, b); }

const std::map<std::string, Fn1>& unary_table() {
    static const std::map<std::string, Fn1> table = {
        {"sin", std::sin}, {"cos", std::cos},   {"tan", std::tan},
        {"exp", std::exp}, {"log", std::log},   {"sqrt", std::sqrt},
        {"abs", std::abs}, {"sign", sign_fn},   {"tanh", std::tanh},
    };
    return table;
}

const std::map<std::string, Fn2>& binary_table() {
    static const std::map<std::string, Fn2> table = {
        {"min", min_fn}, {"max", max_fn}, {"pow", std::pow}};
    return table;
}

}  // namespace

struct Expression::Node {
    Op op = Op::constant;
    double value = 0.0;
    int index = 0;
    Fn1 fn1 = nullptr;
    Fn2 fn2 = nullptr;
    std::shared_ptr<const Node> a, b;

    double eval(const Vec& q, const Vec& p) const {
        switch (op) {
            case Op::constant: return value;
            case Op::var_q: return q[index];
            case Op::var_p: return p[index];
            case Op::add: return a->eval(q, p) + b->eval(q, p);
            case Op::sub: return a->eval(q, p) - b->eval(q, p);
            case Op::mul: return a->eval(q, p) * b->eval(q, p);
            case Op::divide: return a->eval(q, p) / b->eval(q, p);
            case Op::pow_op: return std::pow(a->eval(q, p), b->eval(q, p));
            case Op::neg: return -a->eval(q, p);
            case Op::call1: return fn1(a->eval(q, p));
            case Op::call2: return fn2(a->eval(q, p), b->eval(q, p));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    int dim = 1;

    [[noreturn]] void fail(const std::string& why) const {
        throw ParameterError("expression error at offset " + std::to_string(pos) +
                             " in \"" + text + "\": " + why);
    }

    void skip_space() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
            ++pos;
        }
    }

    bool consume(char c) {
        skip_space();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_space();
        return pos < text.size() ? text[pos] : '\0';
    }

    NodePtr make(Expression::Node n) {
        return std::make_shared<const Expression::Node>(std::move(n));
    }

    NodePtr parse_expression() {
        NodePtr lhs = parse_term();
        while (true) {
            const char c = peek();
            if (c == '+' || c == '-') {
                ++pos;
                NodePtr rhs = parse_term();
                Expression::Node n;
                n.op = c == '+' ? Op::add : Op::sub;
                n.a = lhs;
                n.b = rhs;
                lhs = make(std::move(n));
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        while (true) {
            const char c = peek();
            if (c == '*' || c == '/') {
                ++pos;
                NodePtr rhs = parse_unary();
                Expression::Node n;
                n.op = c == '*' ? Op::mul : Op::divide;
                n.a = lhs;
                n.b = rhs;
                lhs = make(std::move(n));
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (consume('-')) {
            Expression::Node n;
            n.op = Op::neg;
            n.a = parse_unary();
            return make(std::move(n));
        }
        (void)consume('+');
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (peek() == '^') {
            ++pos;
            // Right associative; exponent may itself be signed.
            NodePtr expo = parse_unary();
            Expression::Node n;
            n.op = Op::pow_op;
            n.a = base;
            n.b = expo;
            return make(std::move(n));
        }
        return base;
    }

    NodePtr parse_atom() {
        skip_space();
        if (pos >= text.size()) fail("unexpected end of input");
        const char c = text[pos];
        if (c == '(') {
            ++pos;
            NodePtr inner = parse_expression();
            if (!consume(')')) fail("missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return parse_number();
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            return parse_identifier();
        }
        fail("unexpected character");
    }

    NodePtr parse_number() {
        std::size_t end = 0;
        double v = 0.0;
        try {
            v = std::stod(text.substr(pos), &end);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos += end;
        Expression::Node n;
        n.op = Op::constant;
        n.value = v;
        return make(std::move(n));
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
            ++pos;
        }
        const std::string name = text.substr(start, pos - start);
        if (name == "pi") {
            Expression::Node n;
            n.op = Op::constant;
            n.value = M_PI;
            return make(std::move(n));
        }
        if (name[0] == 'q' || name[0] == 'p') {
            const bool momentum = name[0] == 'p';
            int index = 0;
            bool coordinate = name.size() == 1;
            if (name.size() > 1) {
                coordinate = true;
                for (std::size_t i = 1; i < name.size(); ++i) {
                    if (!std::isdigit(static_cast<unsigned char>(name[i]))) {
                        coordinate = false;
                        break;
                    }
                }
                if (coordinate) index = std::stoi(name.substr(1));
            }
            if (coordinate) {
                if (index >= dim) fail("coordinate " + name + " exceeds dimension");
                Expression::Node n;
                n.op = momentum ? Op::var_p : Op::var_q;
                n.index = index;
                return make(std::move(n));
            }
        }
        if (auto it = unary_table().find(name); it != unary_table().end()) {
            if (!consume('(')) fail(name + " needs an argument list");
            NodePtr a = parse_expression();
            if (!consume(')')) fail("missing ')'");
            Expression::Node n;
            n.op = Op::call1;
            n.fn1 = it->second;
            n.a = a;
            return make(std::move(n));
        }
        if (auto it = binary_table().find(name); it != binary_table().end()) {
            if (!consume('(')) fail(name + " needs an argument list");
            NodePtr a = parse_expression();
            if (!consume(',')) fail(name + " needs two arguments");
            NodePtr b = parse_expression();
            if (!consume(')')) fail("missing ')'");
            Expression::Node n;
            n.op = Op::call2;
            n.fn2 = it->second;
            n.a = a;
            n.b = b;
            return make(std::move(n));
        }
        fail("unknown identifier \"" + name + "\"");
    }
};

}  // namespace

Expression Expression::parse(const std::string& text, int dim) {
    Parser parser{text, 0, dim};
    NodePtr root = parser.parse_expression();
    parser.skip_space();
    if (parser.pos != text.size()) parser.fail("trailing characters");
    return Expression(text, std::move(root));
}

Expression::Expression(std::string text, std::shared_ptr<const Node> root)
    : text_(std::move(text)), root_(std::move(root)) {}

double Expression::eval(const Vec& q, const Vec& p) const { return root_->eval(q, p); }

Expression::Expression(Expression&&) noexcept = default;
Expression& Expression::operator=(Expression&&) noexcept = default;
Expression::Expression(const Expression&) = default;
Expression& Expression::operator=(const Expression&) = default;
Expression::~Expression() = default;

}  // namespace kqsd
