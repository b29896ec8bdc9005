#include "kqsd/lyapunov.hpp"

#include "kqsd/errors.hpp"
#include "kqsd/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace kqsd {

namespace {

double fd_step(double coord) { return 1e-4 * (1.0 + std::abs(coord)); }

nlohmann::json state_to_json(const KineticState& s) {
    nlohmann::json j;
    j["q"] = std::vector<double>(s.q.data(), s.q.data() + s.q.size());
    j["p"] = std::vector<double>(s.p.data(), s.p.data() + s.p.size());
    return j;
}

void record_witness(std::vector<SlackWitness>& worst, const KineticState& x,
                    double slack) {
    // keeps the three largest slacks in descending order
    SlackWitness w{x, slack};
    auto pos = std::find_if(worst.begin(), worst.end(),
                            [&](const SlackWitness& o) { return slack > o.slack; });
    worst.insert(pos, std::move(w));
    if (worst.size() > 3) worst.pop_back();
}

}  // namespace

void TestFunction::eval_grad_q(const Vec& q, const Vec& p, Vec& out) const {
    if (grad_q) {
        grad_q(q, p, out);
        return;
    }
    out.resize(q.size());
    Vec qs = q;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double h = fd_step(q[i]);
        qs[i] = q[i] + h;
        const double fp = value(qs, p);
        qs[i] = q[i] - h;
        const double fm = value(qs, p);
        qs[i] = q[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

void TestFunction::eval_grad_p(const Vec& q, const Vec& p, Vec& out) const {
    if (grad_p) {
        grad_p(q, p, out);
        return;
    }
    out.resize(p.size());
    Vec ps = p;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double h = fd_step(p[i]);
        ps[i] = p[i] + h;
        const double fp = value(q, ps);
        ps[i] = p[i] - h;
        const double fm = value(q, ps);
        ps[i] = p[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

void TestFunction::eval_hess_p(const Vec& q, const Vec& p, Mat& out) const {
    if (hess_p) {
        hess_p(q, p, out);
        return;
    }
    const Eigen::Index d = p.size();
    out.resize(d, d);
    Vec ps = p;
    const double f0 = value(q, p);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double hi = fd_step(p[i]);
        ps[i] = p[i] + hi;
        const double fp = value(q, ps);
        ps[i] = p[i] - hi;
        const double fm = value(q, ps);
        ps[i] = p[i];
        out(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double hj = fd_step(p[j]);
            ps[i] = p[i] + hi;
            ps[j] = p[j] + hj;
            const double fpp = value(q, ps);
            ps[j] = p[j] - hj;
            const double fpm = value(q, ps);
            ps[i] = p[i] - hi;
            const double fmm = value(q, ps);
            ps[j] = p[j] + hj;
            const double fmp = value(q, ps);
            ps[i] = p[i];
            ps[j] = p[j];
            out(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            out(j, i) = out(i, j);
        }
    }
}

TestFunction constant_test_function(double value) {
    TestFunction f;
    f.value = [value](const Vec&, const Vec&) { return value; };
    f.grad_q = [](const Vec& q, const Vec&, Vec& out) { out = Vec::Zero(q.size()); };
    f.grad_p = [](const Vec&, const Vec& p, Vec& out) { out = Vec::Zero(p.size()); };
    f.hess_p = [](const Vec&, const Vec& p, Mat& out) {
        out = Mat::Zero(p.size(), p.size());
    };
    f.analytic = true;
    f.name = "constant";
    return f;
}

double generator_apply(const CoefficientModel& model, const TestFunction& f,
                       const KineticState& x, const CylindricalDomain* domain) {
    if (x.dim() != model.dim())
        throw ParameterError("generator_apply: state dimension mismatch");
    if (domain != nullptr && !domain->contains(x.q))
        throw DomainError("generator_apply: point outside the domain interior");
    if (!f.value) throw ParameterError("generator_apply: test function has no value");

    const int d = model.dim();
    Vec gq(d), gp(d), drift(d);
    f.eval_grad_q(x.q, x.p, gq);
    f.eval_grad_p(x.q, x.p, gp);
    model.eval_F(x.q, x.p, drift);

    Mat hess(d, d);
    f.eval_hess_p(x.q, x.p, hess);

    double diffusion;
    const auto iso = model.sigma_isotropic(x.q, x.p);
    if (iso) {
        diffusion = 0.5 * (*iso) * (*iso) * hess.trace();
    } else {
        Mat a(d, d);
        model.eval_sigma_sigma_t(x.q, x.p, a);
        diffusion = 0.5 * a.cwiseProduct(hess).sum();
    }
    return x.p.dot(gq) + drift.dot(gp) + diffusion;
}

std::string DriftCheckReport::to_json() const {
    nlohmann::json j;
    j["inequality"] = inequality;
    j["grid_spec"] = grid_spec;
    j["grid_points"] = grid_points;
    j["tolerance"] = tolerance;
    j["passed"] = passed;
    j["worst_slack"] = worst_slack;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& w : worst) {
        nlohmann::json e = state_to_json(w.point);
        e["slack"] = w.slack;
        arr.push_back(std::move(e));
    }
    j["worst_slacks"] = std::move(arr);
    return j.dump(2);
}

void bounded_h_profile(double rho, double& h, double& dh, double& ddh) {
    if (rho <= 0.5) {
        h = 1.0;
        dh = 0.0;
        ddh = 0.0;
        return;
    }
    if (rho >= 1.0) {
        h = 1.0 / rho;
        dh = -h * h;
        ddh = 2.0 * h * h * h;
        return;
    }
    // quintic Hermite bridge for g on [1/2, 1]: matches value/slope/curvature of
    // g = rho at 1/2 and g = 1 at 1; s = 2 rho - 1
    const double s = 2.0 * rho - 1.0;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double g = 0.5 + 0.5 * s + 2.0 * s3 - 3.5 * s2 * s2 + 1.5 * s2 * s3;
    const double gs = 0.5 + 6.0 * s2 - 14.0 * s3 + 7.5 * s2 * s2;
    const double gss = 12.0 * s - 42.0 * s2 + 30.0 * s3;
    const double g1 = 2.0 * gs;    // d g / d rho
    const double g2 = 4.0 * gss;   // d^2 g / d rho^2
    h = g / rho;
    dh = g1 / rho - g / (rho * rho);
    ddh = g2 / rho - 2.0 * g1 / (rho * rho) + 2.0 * g / (rho * rho * rho);
}

namespace {

TestFunction make_bounded_phi(double beta) {
    TestFunction f;
    f.analytic = true;
    f.name = "bounded-domain phi";
    f.value = [beta](const Vec& q, const Vec& p) {
        double h, dh, ddh;
        bounded_h_profile(p.norm(), h, dh, ddh);
        return beta - q.dot(p) * h;
    };
    f.grad_q = [](const Vec&, const Vec& p, Vec& out) {
        double h, dh, ddh;
        bounded_h_profile(p.norm(), h, dh, ddh);
        out = -h * p;
    };
    f.grad_p = [](const Vec& q, const Vec& p, Vec& out) {
        const double rho = p.norm();
        double h, dh, ddh;
        bounded_h_profile(rho, h, dh, ddh);
        out = -h * q;
        if (dh != 0.0) out -= (q.dot(p) * dh / rho) * p;
    };
    f.hess_p = [](const Vec& q, const Vec& p, Mat& out) {
        const Eigen::Index d = p.size();
        const double rho = p.norm();
        double h, dh, ddh;
        bounded_h_profile(rho, h, dh, ddh);
        if (dh == 0.0 && ddh == 0.0) {
            out = Mat::Zero(d, d);
            return;
        }
        const double qp = q.dot(p);
        out.resize(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i; j < d; ++j) {
                const double del = i == j ? 1.0 : 0.0;
                double v = -dh * (q[i] * p[j] + q[j] * p[i]) / rho;
                v -= qp * (ddh * p[i] * p[j] / (rho * rho) +
                           dh * (del / rho - p[i] * p[j] / (rho * rho * rho)));
                out(i, j) = v;
                out(j, i) = v;
            }
    };
    return f;
}

std::vector<Vec> position_grid(const CylindricalDomain& domain, int per_axis) {
    const int d = domain.dim();
    Vec lo(d), hi(d);
    switch (domain.kind()) {
        case CylindricalDomain::Kind::interval:
            lo[0] = domain.left();
            hi[0] = domain.right();
            break;
        case CylindricalDomain::Kind::ball:
            lo = domain.center().array() - domain.radius();
            hi = domain.center().array() + domain.radius();
            break;
        case CylindricalDomain::Kind::box:
            lo = domain.lo();
            hi = domain.hi();
            break;
        default:
            throw ParameterError("position_grid: domain must be bounded");
    }
    std::vector<Vec> pts;
    std::vector<int> idx(d, 0);
    Vec x(d);
    while (true) {
        for (int a = 0; a < d; ++a)
            x[a] = lo[a] + (hi[a] - lo[a]) * (idx[a] + 0.5) / per_axis;
        if (domain.contains(x)) pts.push_back(x);
        int a = 0;
        while (a < d && ++idx[a] == per_axis) idx[a++] = 0;
        if (a == d) break;
    }
    return pts;
}

std::vector<Vec> momentum_directions(int d, int n_random, std::uint64_t seed) {
    std::vector<Vec> dirs;
    for (int a = 0; a < d; ++a) {
        Vec e = Vec::Zero(d);
        e[a] = 1.0;
        dirs.push_back(e);
        dirs.push_back(-e);
    }
    if (d >= 2) {
        CounterRng rng(seed, streams::synthetic, static_cast<unsigned>(d));
        for (int k = 0; k < n_random; ++k) {
            Vec v(d);
            for (int a = 0; a < d; ++a)
                v[a] = rng.normal(static_cast<std::uint64_t>(k), a);
            const double n = v.norm();
            if (n > 1e-12) dirs.push_back(v / n);
        }
    }
    return dirs;
}

}  // namespace

bool BoundedDomainLyapunov::in_d_lambda(const Vec&, const Vec& p) const {
    return p.norm() <= p0;
}

BoundedDomainLyapunov bounded_lyapunov_build(
    std::shared_ptr<const CylindricalDomain> domain, const CoefficientModel& model,
    double lambda, const BoundedBuildOptions& opts) {
    if (!domain) throw ParameterError("bounded_lyapunov_build: null domain");
    if (!(lambda > 0.0)) throw ParameterError("bounded_lyapunov_build: lambda must be positive");
    if (domain->dim() != model.dim())
        throw ParameterError("bounded_lyapunov_build: dimension mismatch");
    const double sup_q = domain->sup_q_norm();
    if (!std::isfinite(sup_q))
        throw ParameterError("bounded_lyapunov_build: position domain must be bounded");

    BoundedDomainLyapunov out;
    out.beta = 1.0 + sup_q;
    out.lambda = lambda;
    out.phi = make_bounded_phi(out.beta);
    out.domain = domain;

    const auto q_pts = position_grid(*domain, opts.q_grid_per_axis);
    const auto dirs = momentum_directions(model.dim(), opts.directions, opts.seed);

    // shell radii: geometric ladder from 1 to p_scan_max
    std::vector<double> radii;
    const double step = std::pow(2.0, 1.0 / opts.p_per_octave);
    for (double r = 1.0; r <= opts.p_scan_max * (1.0 + 1e-12); r *= step)
        radii.push_back(r);

    // worst normalized slack of  L phi <= -|p|/2  at each radius
    std::vector<double> worst_at(radii.size(),
                                 -std::numeric_limits<double>::infinity());
    std::vector<KineticState> witness_at(radii.size());
    for (std::size_t r = 0; r < radii.size(); ++r) {
        for (const auto& dir : dirs) {
            const Vec p = radii[r] * dir;
            for (const auto& q : q_pts) {
                KineticState x{q, p, 0.0};
                const double phi_v = out.phi.value(q, p);
                const double slack =
                    (generator_apply(model, out.phi, x) + 0.5 * radii[r]) /
                    (1.0 + std::abs(phi_v));
                if (slack > worst_at[r]) {
                    worst_at[r] = slack;
                    witness_at[r] = std::move(x);
                }
            }
        }
    }

    double p_a = -1.0;
    for (double cand = 1.0; cand <= opts.p_scan_max * (1.0 + 1e-12); cand *= 2.0) {
        bool ok = true;
        for (std::size_t r = 0; r < radii.size(); ++r)
            if (radii[r] >= cand * (1.0 - 1e-12) && worst_at[r] > opts.tolerance) {
                ok = false;
                break;
            }
        if (ok) {
            p_a = cand;
            break;
        }
    }

    DriftCheckReport shell;
    shell.inequality = "L phi <= -|p|/2 on the shell p_a <= |p| <= p_scan_max";
    shell.tolerance = opts.tolerance;
    char spec_buf[160];
    std::snprintf(spec_buf, sizeof spec_buf,
                  "q grid %d per axis, %zu momentum directions, radii [1, %g] at %d per octave",
                  opts.q_grid_per_axis, dirs.size(), opts.p_scan_max, opts.p_per_octave);
    shell.grid_spec = spec_buf;
    shell.grid_points = radii.size() * dirs.size() * q_pts.size();
    {
        double w = -std::numeric_limits<double>::infinity();
        std::vector<SlackWitness> worst3;
        for (std::size_t r = 0; r < radii.size(); ++r) {
            if (p_a > 0.0 && radii[r] < p_a * (1.0 - 1e-12)) continue;
            w = std::max(w, worst_at[r]);
            record_witness(worst3, witness_at[r], worst_at[r]);
        }
        shell.worst_slack = w;
        shell.worst = std::move(worst3);
        shell.passed = p_a > 0.0;
    }

    if (p_a < 0.0)
        throw LyapunovBuildError(
            "bounded_lyapunov_build: no admissible momentum threshold below p_scan_max "
            "(model outside the assumption class on this domain)",
            shell);

    out.p_a = p_a;
    out.p0 = 1.0 + p_a + 4.0 * lambda * out.beta;
    out.shell_report = std::move(shell);

    // c_lambda: grid max of (L phi + lambda phi)+ over D_lambda = {|p| <= p0}
    double c_max = 0.0;
    const int n_rho = 129;
    for (int r = 0; r < n_rho; ++r) {
        const double rho = out.p0 * r / (n_rho - 1);
        for (const auto& dir : dirs) {
            const Vec p = rho * dir;
            for (const auto& q : q_pts) {
                const KineticState x{q, p, 0.0};
                const double v =
                    generator_apply(model, out.phi, x) + lambda * out.phi.value(q, p);
                if (v > c_max) c_max = v;
            }
            if (rho == 0.0) break;  // direction irrelevant at the origin
        }
    }
    out.c_lambda = c_max * opts.margin;
    return out;
}

double delta_feasible(double gamma, double alpha_drift, double beta_drift) {
    if (!(gamma > 0.0)) throw ParameterError("delta_feasible: gamma must be positive");
    if (!(alpha_drift > 0.0))
        throw ParameterError("delta_feasible: alpha_drift must be positive");
    if (beta_drift < 0.0 || beta_drift >= gamma)
        throw ParameterError("delta_feasible: need 0 <= beta_drift < gamma");

    const double u2 = alpha_drift * gamma / (alpha_drift + 2.0);
    const double u3 = gamma - beta_drift * beta_drift / gamma;
    const double u23 = std::min(u2, u3);
    // constraint delta(gamma-delta)/2 <= alpha only binds when gamma^2 > 8 alpha
    if (gamma * gamma > 8.0 * alpha_drift) {
        const double root = std::sqrt(gamma * gamma - 8.0 * alpha_drift);
        const double r_lo = 0.5 * (gamma - root);
        const double r_hi = 0.5 * (gamma + root);
        if (u23 >= r_hi) return u23;
        return std::min(u23, r_lo);
    }
    return u23;
}

DriftCheckReport check_drift_condition(
    const std::function<double(const Vec&)>& U, const VectorField& grad_U,
    const VectorField* ell, double alpha_drift, double beta_drift,
    const std::vector<Vec>& grid) {
    if (!U) throw ParameterError("check_drift_condition: missing potential");
    if (grid.empty()) throw ParameterError("check_drift_condition: empty grid");
    const Eigen::Index d = grid.front().size();
    const Vec zero_p = Vec::Zero(d);

    Vec gu(d), lv(d);
    DriftCheckReport rep;
    rep.inequality =
        "(grad U + ell) . q >= alpha (|q|^2 + U) + |ell|^2 / beta^2";
    rep.tolerance = 1e-12;
    rep.grid_points = grid.size();
    rep.grid_spec = std::to_string(grid.size()) + " position grid points";
    rep.worst_slack = -std::numeric_limits<double>::infinity();

    for (const auto& q : grid) {
        grad_U.eval(q, zero_p, gu);
        if (ell != nullptr)
            ell->eval(q, zero_p, lv);
        else
            lv.setZero(d);
        if (beta_drift == 0.0 && lv.squaredNorm() > 0.0)
            throw ParameterError(
                "check_drift_condition: beta_drift = 0 requires ell identically zero");
        const double uval = U(q);
        if (uval < 0.0)
            throw ParameterError("check_drift_condition: potential must be >= 0");
        const double lhs = (gu + lv).dot(q);
        double rhs = alpha_drift * (q.squaredNorm() + uval);
        if (beta_drift > 0.0) rhs += lv.squaredNorm() / (beta_drift * beta_drift);
        const double slack = (rhs - lhs) / (1.0 + std::abs(rhs));
        if (slack > rep.worst_slack) rep.worst_slack = slack;
        record_witness(rep.worst, KineticState{q, zero_p, 0.0}, slack);
    }
    rep.passed = rep.worst_slack <= rep.tolerance;
    return rep;
}

HamiltonianSpec hamiltonian_spec_from_model(const CoefficientModel& model,
                                            double alpha_drift, double beta_drift) {
    if (!model.langevin())
        throw ParameterError("hamiltonian_spec_from_model: model has no Langevin form");
    const auto& form = *model.langevin();
    if (!form.potential || !form.grad_potential)
        throw ParameterError(
            "hamiltonian_spec_from_model: Langevin form lacks analytic potential data");
    HamiltonianSpec spec;
    spec.U = form.potential;
    spec.grad_U = form.grad_potential;
    spec.ell = form.ell;
    spec.gamma = form.gamma;
    spec.kT = form.kT;
    spec.alpha_drift = alpha_drift;
    spec.beta_drift = beta_drift;
    spec.potential_quadratic_lower = form.potential_quadratic_lower;
    spec.dim = model.dim();
    return spec;
}

namespace {

TestFunction make_h_hat(const HamiltonianSpec& spec, double kappa) {
    TestFunction f;
    f.analytic = true;
    f.name = "1 + H";
    auto U = spec.U;
    auto gu = spec.grad_U;
    f.value = [U, kappa](const Vec& q, const Vec& p) {
        return 1.0 + U(q) + 0.5 * p.squaredNorm() + kappa * q.dot(p) +
               kappa * kappa * q.squaredNorm();
    };
    f.grad_q = [gu, kappa](const Vec& q, const Vec& p, Vec& out) {
        gu->eval(q, p, out);
        out += kappa * p + 2.0 * kappa * kappa * q;
    };
    f.grad_p = [kappa](const Vec& q, const Vec& p, Vec& out) {
        out = p + kappa * q;
    };
    f.hess_p = [](const Vec&, const Vec& p, Mat& out) {
        out = Mat::Identity(p.size(), p.size());
    };
    return f;
}

TestFunction make_h_hat_power(const TestFunction& h_hat, const HamiltonianSpec& spec,
                              double kappa, int n) {
    TestFunction f;
    f.analytic = true;
    f.name = "hhat^" + std::to_string(n);
    auto hv = h_hat.value;
    auto gu = spec.grad_U;
    f.value = [hv, n](const Vec& q, const Vec& p) {
        return std::pow(hv(q, p), n);
    };
    f.grad_q = [hv, gu, kappa, n](const Vec& q, const Vec& p, Vec& out) {
        const double scale = n * std::pow(hv(q, p), n - 1);
        gu->eval(q, p, out);
        out += kappa * p + 2.0 * kappa * kappa * q;
        out *= scale;
    };
    f.grad_p = [hv, kappa, n](const Vec& q, const Vec& p, Vec& out) {
        const double scale = n * std::pow(hv(q, p), n - 1);
        out = scale * (p + kappa * q);
    };
    f.hess_p = [hv, kappa, n](const Vec& q, const Vec& p, Mat& out) {
        const double h = hv(q, p);
        const double hn1 = std::pow(h, n - 1);
        const Vec w = p + kappa * q;
        out = (n * hn1) * Mat::Identity(p.size(), p.size());
        if (n > 1) out.noalias() += (n * (n - 1) * hn1 / h) * (w * w.transpose());
    };
    return f;
}

}  // namespace

double max_generalized_eigenvalue(const Mat& a, const Mat& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw ParameterError("max_generalized_eigenvalue: shape mismatch");
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> solver(a, b,
                                                         Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    if (solver.info() != Eigen::Success)
        throw ParameterError("max_generalized_eigenvalue: solver failed (B not PD?)");
    return solver.eigenvalues().maxCoeff();
}

double HamiltonianLyapunov::h_hat_value(const Vec& q, const Vec& p) const {
    return h_hat.value(q, p);
}

bool HamiltonianLyapunov::in_b_n(const Vec& q, const Vec& p) const {
    return h_hat_value(q, p) <= r_n;
}

HamiltonianLyapunov hamiltonian_lyapunov_build(const HamiltonianSpec& spec,
                                               double lambda,
                                               const HamiltonianBuildOptions& opts) {
    if (!spec.U || !spec.grad_U)
        throw ParameterError("hamiltonian_lyapunov_build: missing potential data");
    if (!(spec.gamma > 0.0) || !(spec.kT > 0.0))
        throw ParameterError("hamiltonian_lyapunov_build: need gamma > 0 and kT > 0");
    if (!(lambda > 0.0))
        throw ParameterError("hamiltonian_lyapunov_build: lambda must be positive");
    const int d = spec.dim;

    // position grid for the drift condition
    std::vector<Vec> q_grid;
    {
        std::vector<int> idx(d, 0);
        Vec x(d);
        while (true) {
            for (int a = 0; a < d; ++a)
                x[a] = -opts.grid_half_width +
                       2.0 * opts.grid_half_width * idx[a] / (opts.grid_per_axis - 1);
            q_grid.push_back(x);
            int a = 0;
            while (a < d && ++idx[a] == opts.grid_per_axis) idx[a++] = 0;
            if (a == d) break;
        }
    }

    HamiltonianLyapunov out;
    out.spec = spec;
    out.lambda = lambda;
    out.drift_report =
        check_drift_condition(spec.U, *spec.grad_U, spec.ell.get(), spec.alpha_drift,
                              spec.beta_drift, q_grid);
    if (!out.drift_report.passed)
        throw LyapunovBuildError("hamiltonian_lyapunov_build: drift condition failed",
                                 out.drift_report);

    out.delta = delta_feasible(spec.gamma, spec.alpha_drift, spec.beta_drift);
    out.epsilon = spec.gamma * spec.kT;
    out.kappa = 0.5 * (spec.gamma - out.delta);
    out.h_hat = make_h_hat(spec, out.kappa);

    const double u = spec.potential_quadratic_lower;
    if (u >= 0.0) {
        // |p + kappa q|^2 <= c Hhat via the quadratic lower bound on U;
        // dropping U to (u/2)|q|^2 only shrinks the denominator
        Mat a(2, 2), b(2, 2);
        a << out.kappa * out.kappa, out.kappa, out.kappa, 1.0;
        b << 0.5 * u + out.kappa * out.kappa, 0.5 * out.kappa, 0.5 * out.kappa, 0.5;
        out.c = max_generalized_eigenvalue(a, b);
    } else {
        double worst = 0.0;
        Vec p(d);
        for (const auto& q : q_grid)
            for (const auto& qp : q_grid) {
                p = qp;  // reuse the same ladder for momenta
                const double ratio = (p + out.kappa * q).squaredNorm() /
                                     out.h_hat.value(q, p);
                worst = std::max(worst, ratio);
            }
        out.c = worst * opts.c_grid_margin;
    }

    out.n = std::max(1, static_cast<int>(std::ceil(2.0 * lambda / out.delta - 1e-12)));
    out.r_n = 2.0 * (out.delta + d * out.epsilon + out.c * out.epsilon * (out.n - 1)) /
              out.delta;
    out.phi = make_h_hat_power(out.h_hat, spec, out.kappa, out.n);

    // c_n: grid max of (L phi + lambda phi)+ inside B_n
    auto force = [&](const Vec& q, const Vec& p, Vec& fout) {
        spec.grad_U->eval(q, p, fout);
        fout = -fout;
        if (spec.ell) {
            Vec lv(d);
            spec.ell->eval(q, p, lv);
            fout -= lv;
        }
        fout -= spec.gamma * p;
    };
    auto l_phi = [&](const Vec& q, const Vec& p) {
        Vec gq(d), gp(d), fv(d);
        Mat hp(d, d);
        out.phi.grad_q(q, p, gq);
        out.phi.grad_p(q, p, gp);
        out.phi.hess_p(q, p, hp);
        force(q, p, fv);
        return p.dot(gq) + fv.dot(gp) + out.epsilon * hp.trace();
    };
    double c_max = 0.0;
    for (const auto& q : q_grid)
        for (const auto& pp : q_grid) {
            if (out.h_hat.value(q, pp) > out.r_n) continue;
            const double v = l_phi(q, pp) + lambda * out.phi.value(q, pp);
            if (v > c_max) c_max = v;
        }
    out.c_n = c_max * opts.margin;
    return out;
}

DriftCheckReport verify_drift_inequality(
    const TestFunction& phi, const CoefficientModel& model, double lambda,
    const std::function<bool(const Vec& q, const Vec& p)>& d_set, double c_const,
    const std::vector<KineticState>& grid, const CylindricalDomain* domain,
    std::optional<double> tolerance) {
    if (grid.empty()) throw ParameterError("verify_drift_inequality: empty grid");
    const double tol = tolerance.value_or(phi.analytic ? 1e-8 : 1e-4);

    DriftCheckReport rep;
    rep.inequality = "L phi + lambda phi <= c 1_{D_set}";
    rep.tolerance = tol;
    rep.grid_points = grid.size();
    rep.grid_spec = std::to_string(grid.size()) + " phase grid points";
    rep.worst_slack = -std::numeric_limits<double>::infinity();

    for (const auto& x : grid) {
        const double phi_v = phi.value(x.q, x.p);
        double s = generator_apply(model, phi, x, domain) + lambda * phi_v;
        if (d_set && d_set(x.q, x.p)) s -= c_const;
        const double slack = s / (1.0 + std::abs(phi_v));
        if (slack > rep.worst_slack) rep.worst_slack = slack;
        record_witness(rep.worst, x, slack);
    }
    rep.passed = rep.worst_slack <= tol;
    return rep;
}

}  // namespace kqsd
