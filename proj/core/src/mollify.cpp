#include "kqsd/mollify.hpp"

#include <cmath>
#include <cstdio>

namespace kqsd {

namespace {

double bump(double y) {
    const double s = 1.0 - y * y;
    return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
}

}  // namespace

MollifierKernel::MollifierKernel(int dim, double index_n, int order)
    : dim_(dim), n_(index_n), order_(order) {
    if (dim < 1) throw ParameterError("kernel dimension must be >= 1");
    if (!(index_n >= 1.0)) throw ParameterError("kernel index n must be >= 1");
    if (order < 2) throw ParameterError("kernel quadrature order must be >= 2");
    const QuadratureRule rule = gauss_legendre(order);
    nodes_ = rule.nodes;
    weights_.resize(order);
    double total = 0.0;
    for (int i = 0; i < order; ++i) {
        weights_[i] = rule.weights[i] * bump(rule.nodes[i]);
        total += weights_[i];
    }
    double renorm_sum = 0.0;
    for (int i = 0; i < order; ++i) {
        weights_[i] /= total;
        renorm_sum += weights_[i];
    }
    weight_sum_error_ = std::abs(renorm_sum - 1.0);
}

namespace {

// Odometer over the 2*dim tensor axes; body receives the shifted point and the
// product weight.
template <typename Body>
void tensor_sweep(const MollifierKernel& k, const Vec& q, const Vec& p, Body&& body) {
    const int dim = k.dim();
    const int axes = 2 * dim;
    const auto& nodes = k.nodes();
    const auto& weights = k.weights();
    const int order = static_cast<int>(nodes.size());
    const double inv_n = 1.0 / k.index();
    std::vector<int> idx(axes, 0);
    Vec qs(dim), ps(dim);
    while (true) {
        double w = 1.0;
        for (int a = 0; a < axes; ++a) {
            const double shift = nodes[idx[a]] * inv_n;
            if (a < dim) {
                qs[a] = q[a] - shift;
            } else {
                ps[a - dim] = p[a - dim] - shift;
            }
            w *= weights[idx[a]];
        }
        body(qs, ps, w);
        int a = 0;
        for (; a < axes; ++a) {
            if (++idx[a] < order) break;
            idx[a] = 0;
        }
        if (a == axes) break;
    }
}

}  // namespace

void MollifierKernel::convolve(const VectorField& field, const Vec& q, const Vec& p,
                               Vec& out) const {
    out.setZero(dim_);
    Vec tmp(dim_);
    tensor_sweep(*this, q, p, [&](const Vec& qs, const Vec& ps, double w) {
        field.eval(qs, ps, tmp);
        out += w * tmp;
    });
}

void MollifierKernel::convolve(const MatrixField& field, const Vec& q, const Vec& p,
                               Mat& out) const {
    out.setZero(dim_, dim_);
    Mat tmp(dim_, dim_);
    tensor_sweep(*this, q, p, [&](const Vec& qs, const Vec& ps, double w) {
        field.eval(qs, ps, tmp);
        out += w * tmp;
    });
}

double MollifierKernel::convolve_isotropic(const MatrixField& field, const Vec& q,
                                           const Vec& p) const {
    double acc = 0.0;
    tensor_sweep(*this, q, p, [&](const Vec& qs, const Vec& ps, double w) {
        acc += w * *field.isotropic_value(qs, ps);
    });
    return acc;
}

namespace {

class MollifiedVectorField final : public VectorField {
  public:
    MollifiedVectorField(std::shared_ptr<const VectorField> base,
                         std::shared_ptr<const MollifierKernel> kernel)
        : base_(std::move(base)), kernel_(std::move(kernel)) {}
    void eval(const Vec& q, const Vec& p, Vec& out) const override {
        kernel_->convolve(*base_, q, p, out);
    }

  private:
    std::shared_ptr<const VectorField> base_;
    std::shared_ptr<const MollifierKernel> kernel_;
};

class MollifiedMatrixField final : public MatrixField {
  public:
    MollifiedMatrixField(std::shared_ptr<const MatrixField> base,
                         std::shared_ptr<const MollifierKernel> kernel, bool isotropic)
        : base_(std::move(base)), kernel_(std::move(kernel)), isotropic_(isotropic) {}
    void eval(const Vec& q, const Vec& p, Mat& out) const override {
        kernel_->convolve(*base_, q, p, out);
    }
    std::optional<double> isotropic_value(const Vec& q, const Vec& p) const override {
        if (!isotropic_) return std::nullopt;
        return kernel_->convolve_isotropic(*base_, q, p);
    }

  private:
    std::shared_ptr<const MatrixField> base_;
    std::shared_ptr<const MollifierKernel> kernel_;
    bool isotropic_;
};

}  // namespace

CoefficientModel mollify(const CoefficientModel& model, double index_n, int order) {
    auto kernel = std::make_shared<const MollifierKernel>(model.dim(), index_n, order);
    Vec origin_q = Vec::Zero(model.dim());
    Vec origin_p = Vec::Zero(model.dim());
    const bool isotropic =
        model.sigma_isotropic(origin_q, origin_p).has_value();
    CoefficientBounds bounds = model.bounds();
    bounds.a = bounds.a + bounds.b * kernel->support_radius();
    auto F = std::make_shared<const MollifiedVectorField>(model.F_ptr(), kernel);
    auto sigma =
        std::make_shared<const MollifiedMatrixField>(model.sigma_ptr(), kernel, isotropic);
    char tag[64];
    std::snprintf(tag, sizeof(tag), "%s-mollified-n%g", model.name().c_str(), index_n);
    return CoefficientModel(model.dim(), F, sigma, bounds, tag, model.langevin());
}

MollifierConvergenceReport mollifier_convergence_report(
    const CoefficientModel& model, const std::vector<double>& ns, const Vec& q_lo,
    const Vec& q_hi, const Vec& p_lo, const Vec& p_hi,
    const MollifierReportOptions& opts) {
    if (ns.empty()) throw ParameterError("convergence report needs kernel indices");
    MollifierConvergenceReport report;
    report.grid_per_axis = opts.sigma_grid_per_axis;
    report.quadrature_rel_tol = opts.l1_rel_tol;

    const int dim = model.dim();
    const int axes = 2 * dim;
    Vec lo(axes), hi(axes);
    lo.head(dim) = q_lo;
    lo.tail(dim) = p_lo;
    hi.head(dim) = q_hi;
    hi.tail(dim) = p_hi;

    const auto sigma_grid =
        phase_grid(q_lo, q_hi, p_lo, p_hi, opts.sigma_grid_per_axis);

    for (double n : ns) {
        CoefficientModel smooth = mollify(model, n, opts.order);
        MollifierConvergenceRow row;
        row.index_n = n;

        Mat s0(dim, dim), s1(dim, dim);
        for (const auto& x : sigma_grid) {
            model.eval_sigma(x.q, x.p, s0);
            smooth.eval_sigma(x.q, x.p, s1);
            row.sigma_sup_discrepancy =
                std::max(row.sigma_sup_discrepancy, (s1 - s0).norm());
        }

        Vec f0(dim), f1(dim);
        const auto integrand = [&](const Vec& x) {
            const Vec q = x.head(dim);
            const Vec p = x.tail(dim);
            model.eval_F(q, p, f0);
            smooth.eval_F(q, p, f1);
            return (f1 - f0).norm();
        };
        // The averaged field differs from the base one only within 1/n of the
        // rough set; force cells at least that fine before trusting adaptivity.
        row.f_l1_discrepancy =
            integrate_box(integrand, lo, hi, opts.l1_rel_tol, 0.25 / n);
        report.rows.push_back(row);
    }

    report.sigma_monotone = true;
    report.f_monotone = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        if (report.rows[i].sigma_sup_discrepancy >
            report.rows[i - 1].sigma_sup_discrepancy + opts.monotonicity_grace) {
            report.sigma_monotone = false;
        }
        if (report.rows[i].f_l1_discrepancy >
            report.rows[i - 1].f_l1_discrepancy + opts.monotonicity_grace) {
            report.f_monotone = false;
        }
    }
    return report;
}

}  // namespace kqsd
