#include "kqsd/model.hpp"

#include "kqsd/rng.hpp"

#include <cmath>
#include <sstream>

namespace kqsd {

void CoefficientBounds::validate() const {
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
        throw ParameterError("alpha must lie in (0, 1)");
    }
    if (!(c1 > 0.0) || !(c2 >= c1)) {
        throw ParameterError("ellipticity needs 0 < c1 <= c2");
    }
    if (!(c3 >= 0.0) || !(a >= 0.0) || !(b >= 0.0)) {
        throw ParameterError("c3, a, b must be >= 0");
    }
}

CoefficientModel::CoefficientModel(int dim, std::shared_ptr<const VectorField> F,
                                   std::shared_ptr<const MatrixField> sigma,
                                   CoefficientBounds bounds, std::string name,
                                   std::optional<LangevinForm> langevin)
    : dim_(dim),
      F_(std::move(F)),
      sigma_(std::move(sigma)),
      bounds_(bounds),
      name_(std::move(name)),
      langevin_(std::move(langevin)) {
    if (dim_ < 1) throw ParameterError("model dimension must be >= 1");
    if (!F_ || !sigma_) throw ParameterError("model needs both F and sigma");
    bounds_.validate();
    if (langevin_) {
        if (!langevin_->force) throw ParameterError("langevin form needs a force field");
        if (!(langevin_->gamma > 0.0) || !(langevin_->kT > 0.0)) {
            throw ParameterError("langevin form needs gamma > 0 and kT > 0");
        }
    }
}

namespace {

double spectral_norm(const Mat& m) {
    if (m.rows() == 1) return std::abs(m(0, 0));
    Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

std::string point_string(const Vec& q, const Vec& p) {
    std::ostringstream os;
    os << "q=[";
    for (int i = 0; i < q.size(); ++i) os << (i ? "," : "") << q[i];
    os << "] p=[";
    for (int i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
    os << "]";
    return os.str();
}

}  // namespace

void CoefficientModel::eval_F(const Vec& q, const Vec& p, Vec& out) const {
    out.resize(dim_);
    F_->eval(q, p, out);
    if (!out.allFinite()) {
        throw EvaluationError("non-finite F at " + point_string(q, p),
                              KineticState{q, p, 0.0});
    }
}

void CoefficientModel::eval_sigma(const Vec& q, const Vec& p, Mat& out) const {
    out.resize(dim_, dim_);
    sigma_->eval(q, p, out);
    if (!out.allFinite()) {
        throw EvaluationError("non-finite sigma at " + point_string(q, p),
                              KineticState{q, p, 0.0});
    }
}

void CoefficientModel::eval_sigma_sigma_t(const Vec& q, const Vec& p, Mat& out) const {
    if (auto s = sigma_->isotropic_value(q, p)) {
        out.setZero(dim_, dim_);
        out.diagonal().setConstant((*s) * (*s));
        return;
    }
    Mat s(dim_, dim_);
    eval_sigma(q, p, s);
    out = s * s.transpose();
}

CoefficientModel CoefficientModel::with_name(std::string name) const {
    CoefficientModel copy = *this;
    copy.name_ = std::move(name);
    return copy;
}

std::vector<KineticState> phase_grid(const Vec& q_lo, const Vec& q_hi, const Vec& p_lo,
                                     const Vec& p_hi, int n_per_axis) {
    const int dim = static_cast<int>(q_lo.size());
    CompactSet box = CompactSet::phase_box(q_lo, q_hi, p_lo, p_hi);
    (void)dim;
    return box.grid(n_per_axis);
}

void cluster_points_near_zero_momentum(std::vector<KineticState>& grid, int dim,
                                       int levels, double scale) {
    Vec q = Vec::Zero(dim);
    Vec p = Vec::Zero(dim);
    grid.push_back(KineticState{q, p, 0.0});
    for (int l = 0; l < levels; ++l) {
        const double mag = scale * std::pow(0.5, l + 1);
        Vec pp = Vec::Zero(dim);
        pp[0] = mag;
        grid.push_back(KineticState{q, pp, 0.0});
        pp[0] = -mag;
        grid.push_back(KineticState{q, pp, 0.0});
    }
}

AuditReport audit_coefficients(const CoefficientModel& model,
                               const std::vector<KineticState>& grid,
                               const AuditOptions& opts) {
    if (grid.empty()) throw ParameterError("audit needs a non-empty grid");
    const int dim = model.dim();
    const auto& bounds = model.bounds();
    AuditReport report;
    report.points_used = grid.size();

    AuditCheck ell_lo{"ellipticity-lower", std::numeric_limits<double>::infinity(),
                      grid.front(), grid.front(), false, false};
    AuditCheck ell_hi{"ellipticity-upper", std::numeric_limits<double>::infinity(),
                      grid.front(), grid.front(), false, false};
    AuditCheck growth{"affine-growth", std::numeric_limits<double>::infinity(),
                      grid.front(), grid.front(), false, false};
    AuditCheck hoelder{"hoelder", std::numeric_limits<double>::infinity(), grid.front(),
                       grid.front(), true, false};

    CounterRng dirs(opts.seed, streams::synthetic, static_cast<unsigned>(dim));
    Mat a(dim, dim);
    Vec F(dim), xi(dim);
    std::vector<Mat> sigmas;
    sigmas.reserve(grid.size());

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const auto& x = grid[gi];
        model.eval_sigma_sigma_t(x.q, x.p, a);
        Mat sig(dim, dim);
        model.eval_sigma(x.q, x.p, sig);
        sigmas.push_back(sig);

        for (int k = 0; k < opts.directions_per_point; ++k) {
            double len = 0.0;
            for (int i = 0; i < dim; ++i) {
                xi[i] = dirs.normal(gi * opts.directions_per_point + k,
                                    static_cast<unsigned>(i));
                len += xi[i] * xi[i];
            }
            if (len == 0.0) {
                xi.setZero();
                xi[0] = 1.0;
            } else {
                xi /= std::sqrt(len);
            }
            const double rayleigh = xi.dot(a * xi);
            if (rayleigh - bounds.c1 < ell_lo.worst_slack) {
                ell_lo.worst_slack = rayleigh - bounds.c1;
                ell_lo.witness = x;
            }
            if (bounds.c2 - rayleigh < ell_hi.worst_slack) {
                ell_hi.worst_slack = bounds.c2 - rayleigh;
                ell_hi.witness = x;
            }
        }

        model.eval_F(x.q, x.p, F);
        const double slack = bounds.a + bounds.b * phase_norm(x.q, x.p) - F.norm();
        if (slack < growth.worst_slack) {
            growth.worst_slack = slack;
            growth.witness = x;
        }
    }

    // Pairwise Hoelder brute force, capped for cost.
    const std::size_t np = std::min(grid.size(), opts.max_pair_points);
    for (std::size_t i = 0; i < np; ++i) {
        for (std::size_t j = i + 1; j < np; ++j) {
            const auto& x = grid[i];
            const auto& y = grid[j];
            const double dq = (x.q - y.q).norm();
            const double dp = (x.p - y.p).norm();
            if (dq == 0.0 && dp == 0.0) continue;
            const double denom =
                std::pow(dq, bounds.alpha / 3.0) + std::pow(dp, bounds.alpha);
            const double diff = spectral_norm(sigmas[i] - sigmas[j]);
            const double slack = bounds.c3 * denom - diff;
            if (slack < hoelder.worst_slack) {
                hoelder.worst_slack = slack;
                hoelder.witness = x;
                hoelder.witness_partner = y;
            }
        }
    }

    const double tol = opts.tolerance;
    ell_lo.passed = ell_lo.worst_slack >= -tol * (1.0 + bounds.c1);
    ell_hi.passed = ell_hi.worst_slack >= -tol * (1.0 + bounds.c2);
    growth.passed = growth.worst_slack >= -tol * (1.0 + bounds.a);
    hoelder.passed = hoelder.worst_slack >= -tol * (1.0 + bounds.c3);

    report.checks = {ell_lo, ell_hi, hoelder, growth};
    report.passed = true;
    for (const auto& c : report.checks) report.passed = report.passed && c.passed;
    return report;
}

}  // namespace kqsd
