#pragma once

#include "kqsd/domain.hpp"
#include "kqsd/model.hpp"
#include "kqsd/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kqsd {

// Scalar field with the derivatives the generator needs.  Missing derivative
// callbacks fall back to central finite differences on value.
struct TestFunction {
    std::function<double(const Vec& q, const Vec& p)> value;
    std::function<void(const Vec& q, const Vec& p, Vec& out)> grad_q;
    std::function<void(const Vec& q, const Vec& p, Vec& out)> grad_p;
    std::function<void(const Vec& q, const Vec& p, Mat& out)> hess_p;
    bool analytic = false;
    std::string name = "anonymous";

    void eval_grad_q(const Vec& q, const Vec& p, Vec& out) const;
    void eval_grad_p(const Vec& q, const Vec& p, Vec& out) const;
    void eval_hess_p(const Vec& q, const Vec& p, Mat& out) const;
};

TestFunction constant_test_function(double value);

// L f = p . grad_q f + F . grad_p f + 1/2 (sigma sigma^T) : hess_p f.
// When a domain is given, evaluation outside its interior is rejected.
double generator_apply(const CoefficientModel& model, const TestFunction& f,
                       const KineticState& x,
                       const CylindricalDomain* domain = nullptr);

struct SlackWitness {
    KineticState point;
    double slack = 0.0;
};

struct DriftCheckReport {
    std::string inequality;
    bool passed = false;
    double worst_slack = 0.0;       // max over grid; negative means satisfied
    double tolerance = 0.0;
    std::vector<SlackWitness> worst;  // three worst witnesses, descending slack
    std::size_t grid_points = 0;
    std::string grid_spec;

    std::string to_json() const;
};

struct LyapunovBuildError : Error {
    DriftCheckReport report;
    LyapunovBuildError(const std::string& what, DriftCheckReport rep)
        : Error(what), report(std::move(rep)) {}
};

// Bounded-position construction: phi = beta - (q.p) h(|p|) with h the
// bridged 1/|p| profile; 1 <= phi <= 2 beta - 1 on D.
struct BoundedDomainLyapunov {
    double beta = 0.0;
    double p_a = 0.0;
    double lambda = 0.0;
    double p0 = 0.0;       // 1 + p_a + 4 lambda beta
    double c_lambda = 0.0;
    TestFunction phi;
    std::shared_ptr<const CylindricalDomain> domain;
    DriftCheckReport shell_report;

    bool in_d_lambda(const Vec& q, const Vec& p) const;
};

struct BoundedBuildOptions {
    double p_scan_max = 1024.0;
    int q_grid_per_axis = 64;
    int p_per_octave = 4;
    int directions = 32;        // momentum directions for d >= 2
    std::uint64_t seed = 0;
    double margin = 1.1;        // multiplies the grid max defining c_lambda
    double tolerance = 1e-8;    // scaled by (1 + |phi|)
};

BoundedDomainLyapunov bounded_lyapunov_build(
    std::shared_ptr<const CylindricalDomain> domain, const CoefficientModel& model,
    double lambda, const BoundedBuildOptions& opts = {});

// Bridge profile h(rho) = g(rho)/rho with g = id on (0,1/2], g = 1 on [1,inf),
// quintic Hermite bridge between; exposed for gluing tests.
void bounded_h_profile(double rho, double& h, double& dh, double& ddh);

// delta = largest value in (0,gamma) with delta(gamma-delta)/2 <= alpha,
// 2 delta/(gamma-delta) <= alpha and beta^2 <= gamma(gamma-delta).
double delta_feasible(double gamma, double alpha_drift, double beta_drift);

DriftCheckReport check_drift_condition(
    const std::function<double(const Vec&)>& U, const VectorField& grad_U,
    const VectorField* ell, double alpha_drift, double beta_drift,
    const std::vector<Vec>& grid);

struct HamiltonianSpec {
    std::function<double(const Vec&)> U;           // >= 0
    std::shared_ptr<const VectorField> grad_U;
    std::shared_ptr<const VectorField> ell;        // null means identically zero
    double gamma = 1.0;
    double kT = 1.0;
    double alpha_drift = 0.0;
    double beta_drift = 0.0;
    // largest u with U(q) >= (u/2)|q|^2; negative disables the exact route
    double potential_quadratic_lower = -1.0;
    int dim = 1;
};

// Builds the spec from a model's declared Langevin structure.
HamiltonianSpec hamiltonian_spec_from_model(const CoefficientModel& model,
                                            double alpha_drift, double beta_drift);

struct HamiltonianLyapunov {
    HamiltonianSpec spec;
    double delta = 0.0;
    double epsilon = 0.0;   // gamma kT
    double kappa = 0.0;     // (gamma - delta)/2
    double c = 0.0;         // |p + kappa q|^2 <= c Hhat
    int n = 1;              // smallest n with n delta / 2 >= lambda
    double lambda = 0.0;
    double r_n = 0.0;       // B_n = {Hhat <= r_n}
    double c_n = 0.0;       // grid max of (L phi + lambda phi)+ on B_n, with margin
    TestFunction h_hat;     // 1 + H
    TestFunction phi;       // Hhat^n
    DriftCheckReport drift_report;

    double h_hat_value(const Vec& q, const Vec& p) const;
    bool in_b_n(const Vec& q, const Vec& p) const;
};

struct HamiltonianBuildOptions {
    double grid_half_width = 10.0;  // drift check and c_n grids live on this box
    int grid_per_axis = 41;
    double margin = 1.1;
    double c_grid_margin = 1.05;    // only used on the grid fallback for c
};

HamiltonianLyapunov hamiltonian_lyapunov_build(const HamiltonianSpec& spec,
                                               double lambda,
                                               const HamiltonianBuildOptions& opts = {});

// Largest generalized eigenvalue of x^T A x <= c x^T B x for symmetric A and
// positive definite B; exposed for the quadratic-form constant tests.
double max_generalized_eigenvalue(const Mat& a, const Mat& b);

// Checks L phi + lambda phi - c 1_{D_set} <= tol (1 + |phi|) pointwise.
DriftCheckReport verify_drift_inequality(
    const TestFunction& phi, const CoefficientModel& model, double lambda,
    const std::function<bool(const Vec& q, const Vec& p)>& d_set, double c_const,
    const std::vector<KineticState>& grid, const CylindricalDomain* domain = nullptr,
    std::optional<double> tolerance = std::nullopt);

}  // namespace kqsd
