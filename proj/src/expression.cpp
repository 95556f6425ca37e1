#include "qgamma/expression.hpp"

#include <cctype>
#include <cmath>
#include <memory>
#include <vector>

#include "qgamma/errors.hpp"

namespace qgamma {

namespace {

using Node = std::function<double(const PointN&)>;

class Parser {
public:
    Parser(const std::string& text, int n) : text_(text), n_(n) {}

    Node parse() {
        Node root = expression();
        skip();
        if (pos_ != text_.size()) fail("unexpected character");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ValidationError("expression: " + what + " at position " + std::to_string(pos_) + " in '" + text_ + "'");
    }

    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Node expression() {
        Node lhs = term();
        for (;;) {
            if (accept('+')) {
                Node rhs = term();
                lhs = [lhs, rhs](const PointN& x) { return lhs(x) + rhs(x); };
            } else if (accept('-')) {
                Node rhs = term();
                lhs = [lhs, rhs](const PointN& x) { return lhs(x) - rhs(x); };
            } else {
                return lhs;
            }
        }
    }

    Node term() {
        Node lhs = unary();
        for (;;) {
            if (accept('*')) {
                Node rhs = unary();
                lhs = [lhs, rhs](const PointN& x) { return lhs(x) * rhs(x); };
            } else if (accept('/')) {
                Node rhs = unary();
                lhs = [lhs, rhs](const PointN& x) { return lhs(x) / rhs(x); };
            } else {
                return lhs;
            }
        }
    }

    Node unary() {
        if (accept('-')) {
            Node inner = unary();
            return [inner](const PointN& x) { return -inner(x); };
        }
        if (accept('+')) return unary();
        return power();
    }

    Node power() {
        Node base = primary();
        if (accept('^')) {
            Node exponent = unary();
            return [base, exponent](const PointN& x) { return std::pow(base(x), exponent(x)); };
        }
        return base;
    }

    Node primary() {
        skip();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (accept('(')) {
            Node inner = expression();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            const double value = std::stod(text_.substr(pos_), &used);
            pos_ += used;
            return [value](const PointN&) { return value; };
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            const std::string name = text_.substr(start, pos_ - start);
            if (accept('(')) return call(name);
            return variable(name);
        }
        fail("unexpected character");
    }

    Node variable(const std::string& name) {
        if (name == "r") return [](const PointN& x) { return x.norm(); };
        if (name == "pi") return [](const PointN&) { return M_PI; };
        int index = -1;
        if (name == "x" || name == "y" || name == "z") {
            index = name == "x" ? 0 : (name == "y" ? 1 : 2);
        } else if (name.size() >= 2 && name[0] == 'x' && std::isdigit(static_cast<unsigned char>(name[1]))) {
            index = std::stoi(name.substr(1)) - 1;
        }
        if (index < 0 || index >= n_) fail("unknown variable '" + name + "'");
        return [index](const PointN& x) { return x[index]; };
    }

    Node call(const std::string& name) {
        std::vector<Node> args;
        if (!accept(')')) {
            do {
                args.push_back(expression());
            } while (accept(','));
            if (!accept(')')) fail("expected ')'");
        }
        auto unary_fn = [&](double (*fn)(double)) -> Node {
            if (args.size() != 1) fail("function '" + name + "' takes one argument");
            Node a = args[0];
            return [a, fn](const PointN& x) { return fn(a(x)); };
        };
        if (name == "exp") return unary_fn([](double v) { return std::exp(v); });
        if (name == "log") return unary_fn([](double v) { return std::log(v); });
        if (name == "sqrt") return unary_fn([](double v) { return std::sqrt(v); });
        if (name == "abs") return unary_fn([](double v) { return std::abs(v); });
        if (name == "sin") return unary_fn([](double v) { return std::sin(v); });
        if (name == "cos") return unary_fn([](double v) { return std::cos(v); });
        if (name == "tanh") return unary_fn([](double v) { return std::tanh(v); });
        if (name == "pow") {
            if (args.size() != 2) fail("function 'pow' takes two arguments");
            Node a = args[0], b = args[1];
            return [a, b](const PointN& x) { return std::pow(a(x), b(x)); };
        }
        fail("unknown function '" + name + "'");
    }

    std::string text_;
    int n_;
    std::size_t pos_ = 0;
};

}  // namespace

ScalarField parse_expression(const std::string& text, int n) {
    return Parser(text, n).parse();
}

}  // namespace qgamma
