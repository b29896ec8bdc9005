#pragma once

#include "kqsd/types.hpp"

#include <functional>
#include <vector>

namespace kqsd {

// Nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule of the given order (exact for polynomials of degree 2*order-1).
QuadratureRule gauss_legendre(int order);

// Composite Gauss-Legendre on [a, b] with `cells` equal cells.
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    int cells = 256, int order = 8);

// Adaptive tensor quadrature over the box [lo, hi] in R^k.  Splits the longest
// axis while a coarse/fine disagreement exceeds the tolerance; every cell is
// refined at least down to edge length min_cell so narrow features cannot be
// stepped over silently.
double integrate_box(const std::function<double(const Vec&)>& f, const Vec& lo,
                     const Vec& hi, double rel_tol = 1e-4, double min_cell = 0.0,
                     int max_depth = 40);

}  // namespace kqsd
