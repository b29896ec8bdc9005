#pragma once

#include "kqsd/domain.hpp"
#include "kqsd/errors.hpp"
#include "kqsd/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kqsd {

class VectorField {
  public:
    virtual ~VectorField() = default;
    virtual void eval(const Vec& q, const Vec& p, Vec& out) const = 0;
};

class MatrixField {
  public:
    virtual ~MatrixField() = default;
    virtual void eval(const Vec& q, const Vec& p, Mat& out) const = 0;
    // Scalar s with value s*I when the field is isotropic; enables fast paths.
    virtual std::optional<double> isotropic_value(const Vec& q, const Vec& p) const {
        (void)q;
        (void)p;
        return std::nullopt;
    }
};

class LambdaVectorField final : public VectorField {
  public:
    using Fn = std::function<void(const Vec&, const Vec&, Vec&)>;
    explicit LambdaVectorField(Fn fn) : fn_(std::move(fn)) {}
    void eval(const Vec& q, const Vec& p, Vec& out) const override { fn_(q, p, out); }

  private:
    Fn fn_;
};

class ZeroVectorField final : public VectorField {
  public:
    void eval(const Vec&, const Vec&, Vec& out) const override { out.setZero(); }
};

// sigma(q, p) = s(q, p) * I.
class IsotropicMatrixField final : public MatrixField {
  public:
    using Fn = std::function<double(const Vec&, const Vec&)>;
    explicit IsotropicMatrixField(double constant)
        : fn_([constant](const Vec&, const Vec&) { return constant; }) {}
    explicit IsotropicMatrixField(Fn fn) : fn_(std::move(fn)) {}
    void eval(const Vec& q, const Vec& p, Mat& out) const override {
        out.setZero();
        out.diagonal().setConstant(fn_(q, p));
    }
    std::optional<double> isotropic_value(const Vec& q, const Vec& p) const override {
        return fn_(q, p);
    }

  private:
    Fn fn_;
};

// Declared analytic bounds: ellipticity c1 <= spec(sigma sigma^T) <= c2,
// anisotropic Hoelder constant c3 with exponent alpha, affine growth
// |F(x)| <= a + b |x|.
struct CoefficientBounds {
    double alpha = 0.5;
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 0.0;
    double a = 0.0;
    double b = 0.0;

    void validate() const;
};

// Extra structure present when F(q,p) = force(q) - gamma p and
// sigma = sqrt(2 gamma kT) I; enables the splitting integrator and the
// energy-based constructions.
struct LangevinForm {
    std::shared_ptr<const VectorField> force;  // position-dependent part of F
    double gamma = 1.0;
    double kT = 1.0;
    // Optional analytic potential data: force(q) = -grad_U(q) - ell(q).
    std::function<double(const Vec&)> potential;          // U(q), may be empty
    std::shared_ptr<const VectorField> grad_potential;    // may be null
    std::shared_ptr<const VectorField> ell;               // may be null
    double potential_quadratic_lower = 0.0;  // largest u with U(q) >= u/2 |q|^2

    double sigma_constant() const { return std::sqrt(2.0 * gamma * kT); }
};

class CoefficientModel {
  public:
    CoefficientModel(int dim, std::shared_ptr<const VectorField> F,
                     std::shared_ptr<const MatrixField> sigma, CoefficientBounds bounds,
                     std::string name = "custom",
                     std::optional<LangevinForm> langevin = std::nullopt);

    int dim() const { return dim_; }
    const std::string& name() const { return name_; }
    const CoefficientBounds& bounds() const { return bounds_; }
    const std::optional<LangevinForm>& langevin() const { return langevin_; }

    // Evaluations reject non-finite results, naming the offending point.
    void eval_F(const Vec& q, const Vec& p, Vec& out) const;
    void eval_sigma(const Vec& q, const Vec& p, Mat& out) const;
    std::optional<double> sigma_isotropic(const Vec& q, const Vec& p) const {
        return sigma_->isotropic_value(q, p);
    }
    // a(x) = sigma sigma^T (the full diffusion matrix in front of 1/2).
    void eval_sigma_sigma_t(const Vec& q, const Vec& p, Mat& out) const;

    const VectorField& F_field() const { return *F_; }
    const MatrixField& sigma_field() const { return *sigma_; }
    std::shared_ptr<const VectorField> F_ptr() const { return F_; }
    std::shared_ptr<const MatrixField> sigma_ptr() const { return sigma_; }

    CoefficientModel with_name(std::string name) const;

  private:
    int dim_;
    std::shared_ptr<const VectorField> F_;
    std::shared_ptr<const MatrixField> sigma_;
    CoefficientBounds bounds_;
    std::string name_;
    std::optional<LangevinForm> langevin_;
};

struct AuditCheck {
    std::string check;
    double worst_slack = 0.0;  // >= 0 means the declared bound holds on the grid
    KineticState witness;
    KineticState witness_partner;  // second point of the worst pair, when pairwise
    bool pairwise = false;
    bool passed = false;
};

struct AuditReport {
    std::vector<AuditCheck> checks;
    bool passed = false;
    std::size_t points_used = 0;
};

struct AuditOptions {
    int directions_per_point = 32;   // random unit vectors for ellipticity
    std::uint64_t seed = 0;
    double tolerance = 1e-9;         // slack below -tolerance*(scale) fails
    std::size_t max_pair_points = 4096;
};

// Checks declared ellipticity, Hoelder continuity, and affine growth on the
// supplied grid; brute force over pairs for the Hoelder part.
AuditReport audit_coefficients(const CoefficientModel& model,
                               const std::vector<KineticState>& grid,
                               const AuditOptions& opts = {});

// Uniform product grid helper for audits and scans.
std::vector<KineticState> phase_grid(const Vec& q_lo, const Vec& q_hi, const Vec& p_lo,
                                     const Vec& p_hi, int n_per_axis);

// Adds points clustered geometrically around p = 0 (pair partners for
// small-momentum Hoelder violations).
void cluster_points_near_zero_momentum(std::vector<KineticState>& grid, int dim,
                                       int levels = 12, double scale = 1.0);

}  // namespace kqsd
