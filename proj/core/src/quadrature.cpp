#include "kqsd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kqsd {

QuadratureRule gauss_legendre(int order) {
    if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev initial guess, then Newton on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < order; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = order * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    return rule;
}

double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    int cells, int order) {
    const QuadratureRule rule = gauss_legendre(order);
    const double h = (b - a) / cells;
    double total = 0.0;
    for (int c = 0; c < cells; ++c) {
        const double mid = a + (c + 0.5) * h;
        double cell_sum = 0.0;
        for (int j = 0; j < order; ++j) {
            cell_sum += rule.weights[j] * f(mid + 0.5 * h * rule.nodes[j]);
        }
        total += 0.5 * h * cell_sum;
    }
    return total;
}

namespace {

struct BoxIntegrator {
    const std::function<double(const Vec&)>& f;
    const QuadratureRule rule = gauss_legendre(3);
    double tol_per_volume = 0.0;
    double min_cell = 0.0;
    int max_depth = 26;

    double longest_edge(const Vec& lo, const Vec& hi, int* axis) const {
        double longest = 0.0;
        for (int a = 0; a < lo.size(); ++a) {
            if (hi[a] - lo[a] > longest) {
                longest = hi[a] - lo[a];
                *axis = a;
            }
        }
        return longest;
    }

    double cell_estimate(const Vec& lo, const Vec& hi) const {
        const int k = static_cast<int>(lo.size());
        std::vector<int> idx(k, 0);
        Vec x(k);
        double total = 0.0;
        double volume = 1.0;
        for (int a = 0; a < k; ++a) volume *= 0.5 * (hi[a] - lo[a]);
        while (true) {
            double w = 1.0;
            for (int a = 0; a < k; ++a) {
                x[a] = 0.5 * (lo[a] + hi[a]) + 0.5 * (hi[a] - lo[a]) * rule.nodes[idx[a]];
                w *= rule.weights[idx[a]];
            }
            total += w * f(x);
            int a = 0;
            for (; a < k; ++a) {
                if (++idx[a] < static_cast<int>(rule.nodes.size())) break;
                idx[a] = 0;
            }
            if (a == k) break;
        }
        return total * volume;
    }

    // Uniform refinement down to min_cell; fixes the integral's scale before
    // any adaptive decision is made.
    double forced_pass(const Vec& lo, const Vec& hi, int depth) const {
        int axis = 0;
        const double longest = longest_edge(lo, hi, &axis);
        if (longest <= min_cell || depth >= max_depth) return cell_estimate(lo, hi);
        Vec mid_hi = hi, mid_lo = lo;
        mid_hi[axis] = 0.5 * (lo[axis] + hi[axis]);
        mid_lo[axis] = mid_hi[axis];
        return forced_pass(lo, mid_hi, depth + 1) + forced_pass(mid_lo, hi, depth + 1);
    }

    double adaptive(const Vec& lo, const Vec& hi, double whole, int depth) const {
        int axis = 0;
        const double longest = longest_edge(lo, hi, &axis);
        Vec mid_hi = hi, mid_lo = lo;
        mid_hi[axis] = 0.5 * (lo[axis] + hi[axis]);
        mid_lo[axis] = mid_hi[axis];
        const double left = cell_estimate(lo, mid_hi);
        const double right = cell_estimate(mid_lo, hi);
        double volume = 1.0;
        for (int a = 0; a < lo.size(); ++a) volume *= hi[a] - lo[a];
        const bool must_split = longest > min_cell;
        const bool converged = std::abs(left + right - whole) <= tol_per_volume * volume;
        if (depth >= max_depth || (converged && !must_split)) {
            return left + right;
        }
        return adaptive(lo, mid_hi, left, depth + 1) + adaptive(mid_lo, hi, right, depth + 1);
    }
};

}  // namespace

double integrate_box(const std::function<double(const Vec&)>& f, const Vec& lo,
                     const Vec& hi, double rel_tol, double min_cell, int max_depth) {
    if (lo.size() != hi.size() || lo.size() < 1) {
        throw std::invalid_argument("integration box needs matching bounds");
    }
    BoxIntegrator box{f};
    box.min_cell = min_cell;
    box.max_depth = max_depth;
    if (!(box.min_cell > 0.0)) {
        // Non-positive floor would force uniform refinement to max_depth;
        // scale fixing only needs a few levels per axis.
        double longest = 0.0;
        for (int a = 0; a < lo.size(); ++a) longest = std::max(longest, hi[a] - lo[a]);
        box.min_cell = longest / 16.0;
    }
    const double scale = std::abs(box.forced_pass(lo, hi, 0));
    double volume = 1.0;
    for (int a = 0; a < lo.size(); ++a) volume *= hi[a] - lo[a];
    box.tol_per_volume = rel_tol * (scale + 1e-300) / volume;
    return box.adaptive(lo, hi, box.cell_estimate(lo, hi), 0);
}

}  // namespace kqsd
