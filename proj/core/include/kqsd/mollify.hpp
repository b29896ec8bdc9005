#pragma once

#include "kqsd/model.hpp"
#include "kqsd/quadrature.hpp"

#include <memory>
#include <vector>

namespace kqsd {

// Smooth compactly supported averaging kernel: the tensor-product bump
// c * exp(-1/(1 - y_i^2)) over all 2d phase-space axes, scaled to support
// radius 1/n per axis, discretized by a per-axis Gauss-Legendre rule.  The
// combined node weights are normalized to sum to exactly 1, so constants are
// reproduced exactly and symmetric node placement preserves linear fields.
class MollifierKernel {
  public:
    MollifierKernel(int dim, double index_n, int order = 16);

    int dim() const { return dim_; }
    double index() const { return n_; }
    int order() const { return order_; }
    // Per-axis nodes in [-1, 1] with phi-weighted normalized weights.
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    // Support radius in the phase norm |y_q| + |y_p|.
    double support_radius() const { return 2.0 * std::sqrt(dim_) / n_; }
    double weight_sum_error() const { return weight_sum_error_; }

    // Averaged field value: sum over the tensor grid of F(q - z_q/n, p - z_p/n).
    void convolve(const VectorField& field, const Vec& q, const Vec& p, Vec& out) const;
    void convolve(const MatrixField& field, const Vec& q, const Vec& p, Mat& out) const;
    double convolve_isotropic(const MatrixField& field, const Vec& q, const Vec& p) const;

  private:
    int dim_;
    double n_;
    int order_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    double weight_sum_error_ = 0.0;
};

// Replaces F and sigma by their kernel averages; growth metadata becomes
// (a + b * r / 1, b) with r the kernel support radius (already divided by n),
// ellipticity and Hoelder constants carry over.
CoefficientModel mollify(const CoefficientModel& model, double index_n, int order = 16);

struct MollifierConvergenceRow {
    double index_n = 0.0;
    double sigma_sup_discrepancy = 0.0;  // max over the sample grid
    double f_l1_discrepancy = 0.0;       // adaptive quadrature over the compact
};

struct MollifierConvergenceReport {
    std::vector<MollifierConvergenceRow> rows;
    int grid_per_axis = 0;
    double quadrature_rel_tol = 0.0;
    bool sigma_monotone = false;  // non-increasing within tolerance
    bool f_monotone = false;
};

struct MollifierReportOptions {
    int order = 16;
    int sigma_grid_per_axis = 33;
    double l1_rel_tol = 1e-3;
    double monotonicity_grace = 1e-9;
};

// Discrepancy table over the kernel family indexed by ns, on the given compact
// product box.
MollifierConvergenceReport mollifier_convergence_report(
    const CoefficientModel& model, const std::vector<double>& ns, const Vec& q_lo,
    const Vec& q_hi, const Vec& p_lo, const Vec& p_hi,
    const MollifierReportOptions& opts = {});

}  // namespace kqsd
