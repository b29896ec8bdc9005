#include <doctest.h>

#include "kqsd/catalog.hpp"
#include "kqsd/errors.hpp"
#include "kqsd/mollify.hpp"

#include <cmath>
#include <memory>

using namespace kqsd;

namespace {
Vec v1(double x) {
    Vec v(1);
    v << x;
    return v;
}
// frozen by an independent quadrature of the kernel: 4 E|Y|
constexpr double kSignL1Constant = 1.3378159908399013;
}  // namespace

TEST_CASE("kernel weights are normalized and constants are reproduced exactly") {
    const MollifierKernel kernel(1, 8.0);
    CHECK(kernel.dim() == 1);
    CHECK(kernel.index() == 8.0);
    CHECK(kernel.weight_sum_error() < 1e-14);
    CHECK(kernel.support_radius() == doctest::Approx(2.0 / 8.0).epsilon(1e-15));

    const IsotropicMatrixField sigma(1.75);
    CHECK(kernel.convolve_isotropic(sigma, v1(0.3), v1(-0.2)) ==
          doctest::Approx(1.75).epsilon(1e-15));
}

TEST_CASE("kernel construction rejects bad parameters") {
    CHECK_THROWS_AS(MollifierKernel(0, 4.0), ParameterError);
    CHECK_THROWS_AS(MollifierKernel(1, 0.5), ParameterError);
    CHECK_THROWS_AS(MollifierKernel(1, 4.0, 1), ParameterError);
}

TEST_CASE("linear fields are fixed points of the averaging") {
    auto F = std::make_shared<const LambdaVectorField>(
        [](const Vec& q, const Vec& p, Vec& out) { out = 0.7 * q - 0.3 * p; });
    auto sigma = std::make_shared<const IsotropicMatrixField>(1.0);
    CoefficientBounds bounds;
    bounds.b = 1.0;
    const CoefficientModel model(1, F, sigma, bounds, "linear");
    const auto smoothed = mollify(model, 8.0);

    Vec exact(1), averaged(1);
    for (int i = 0; i < 25; ++i) {
        const double q = -1.2 + 0.1 * i;
        const double p = 0.9 - 0.07 * i;
        model.eval_F(v1(q), v1(p), exact);
        smoothed.eval_F(v1(q), v1(p), averaged);
        CHECK(std::abs(exact[0] - averaged[0]) <= 1e-8);
    }
}

TEST_CASE("mollified model keeps structure and adjusts growth metadata") {
    const auto base = make_catalog_model("sign-drift", {});
    const auto smoothed = mollify(base, 8.0);
    CHECK(smoothed.dim() == base.dim());
    CHECK(smoothed.name().find("mollified") != std::string::npos);
    CHECK(smoothed.bounds().b == base.bounds().b);
    CHECK(smoothed.bounds().a >= base.bounds().a);
    CHECK(smoothed.bounds().c1 == base.bounds().c1);

    // constant sigma passes through untouched
    const auto iso = smoothed.sigma_isotropic(v1(0.1), v1(0.2));
    REQUIRE(iso.has_value());
    CHECK(*iso == doctest::Approx(*base.sigma_isotropic(v1(0.1), v1(0.2)))
                      .epsilon(1e-14));
}

TEST_CASE("averaging rounds the sign discontinuity at the 1/n scale") {
    const auto base = make_catalog_model("sign-drift", {});
    const auto smoothed = mollify(base, 8.0);
    Vec out(1);
    // far from the discontinuity the field is untouched
    smoothed.eval_F(v1(0.0), v1(1.0), out);
    CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-12));
    smoothed.eval_F(v1(0.0), v1(-1.0), out);
    CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-12));
    // at the discontinuity the average is the midpoint by symmetry
    smoothed.eval_F(v1(0.0), v1(0.0), out);
    CHECK(std::abs(out[0]) < 1e-12);
    // strictly between the raw values inside the support
    smoothed.eval_F(v1(0.0), v1(0.05), out);
    CHECK(out[0] > 0.0);
    CHECK(out[0] < 1.0);
}

TEST_CASE("discrepancy table shrinks at the 1/n rate with constant sigma") {
    const auto base = make_catalog_model("sign-drift", {});
    Vec lo = v1(-1.0), hi = v1(1.0);
    MollifierReportOptions opts;
    opts.l1_rel_tol = 1e-3;
    const auto report =
        mollifier_convergence_report(base, {4.0, 8.0}, lo, hi, lo, hi, opts);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.sigma_monotone);
    CHECK(report.f_monotone);
    for (const auto& row : report.rows) CHECK(row.sigma_sup_discrepancy < 1e-12);
    CHECK(report.rows[1].f_l1_discrepancy < report.rows[0].f_l1_discrepancy);
    // n * L1 tracks the kernel's first-moment constant within 10%
    for (const auto& row : report.rows) {
        const double scaled = row.index_n * row.f_l1_discrepancy;
        CHECK(std::abs(scaled - kSignL1Constant) <= 0.1 * kSignL1Constant);
    }
}

TEST_CASE("report input validation") {
    const auto base = make_catalog_model("sign-drift", {});
    Vec lo = v1(-1.0), hi = v1(1.0);
    CHECK_THROWS_AS(
        (void)mollifier_convergence_report(base, {}, lo, hi, lo, hi),
        ParameterError);
}
