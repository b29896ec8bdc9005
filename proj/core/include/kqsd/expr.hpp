#pragma once

#include "kqsd/types.hpp"

#include <memory>
#include <string>

namespace kqsd {

// Arithmetic expression over phase-space coordinates, compiled once and
// evaluated per point.  Variables: q0..qN, p0..pN (q, p alias q0, p0).
// Operators: + - * / ^ with unary minus; functions: sin cos tan exp log sqrt
// abs sign tanh min max pow.
class Expression {
  public:
    struct Node;

    static Expression parse(const std::string& text, int dim);

    double eval(const Vec& q, const Vec& p) const;
    const std::string& text() const { return text_; }

    Expression(Expression&&) noexcept;
    Expression& operator=(Expression&&) noexcept;
    Expression(const Expression&);
    Expression& operator=(const Expression&);
    ~Expression();

  private:
    Expression(std::string text, std::shared_ptr<const Node> root);

    std::string text_;
    std::shared_ptr<const Node> root_;
};

}  // namespace kqsd
