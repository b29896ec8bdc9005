#include <doctest.h>

#include "kqsd/catalog.hpp"
#include "kqsd/errors.hpp"
#include "kqsd/model.hpp"

#include <cmath>
#include <memory>

using namespace kqsd;

namespace {
Vec v1(double x) {
    Vec v(1);
    v << x;
    return v;
}
}  // namespace

TEST_CASE("harmonic catalog model evaluates F = -omega^2 q - gamma p") {
    const auto m = make_catalog_model(
        "harmonic-langevin", {{"omega", 1.5}, {"gamma", 0.7}, {"kT", 0.5}});
    CHECK(m.dim() == 1);
    Vec f(1);
    m.eval_F(v1(2.0), v1(-1.0), f);
    CHECK(f[0] == doctest::Approx(-1.5 * 1.5 * 2.0 + 0.7 * 1.0).epsilon(1e-15));

    const auto iso = m.sigma_isotropic(v1(0.0), v1(0.0));
    REQUIRE(iso.has_value());
    CHECK(*iso == doctest::Approx(std::sqrt(2.0 * 0.7 * 0.5)).epsilon(1e-15));

    Mat a(1, 1);
    m.eval_sigma_sigma_t(v1(0.0), v1(0.0), a);
    CHECK(a(0, 0) == doctest::Approx(2.0 * 0.7 * 0.5).epsilon(1e-14));

    REQUIRE(m.langevin().has_value());
    CHECK(m.langevin()->gamma == 0.7);
    CHECK(m.langevin()->kT == 0.5);
    CHECK(m.langevin()->potential(v1(2.0)) ==
          doctest::Approx(0.5 * 1.5 * 1.5 * 4.0).epsilon(1e-15));
}

TEST_CASE("catalog rejects unknown names and parameters") {
    CHECK_THROWS_AS((void)make_catalog_model("no-such-model", {}), ParameterError);
    try {
        (void)make_catalog_model("harmonic-langevin",
                                 {{"omegaa", 1.0}, {"gama", 1.0}});
        CHECK(false);
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("omegaa") != std::string::npos);
        CHECK(what.find("gama") != std::string::npos);
    }
}

TEST_CASE("catalog listing is deterministic and self-consistent") {
    const auto& entries = catalog();
    REQUIRE(!entries.empty());
    for (const auto& entry : entries) {
        std::map<std::string, double> defaults;
        const auto m = make_catalog_model(entry.name, defaults);
        CHECK(m.name() == entry.name);
        CHECK(m.dim() >= 1);
    }
}

TEST_CASE("evaluation guards against non-finite coefficient values") {
    auto bad = std::make_shared<const LambdaVectorField>(
        [](const Vec& q, const Vec&, Vec& out) { out = q / 0.0; });
    auto sigma = std::make_shared<const IsotropicMatrixField>(1.0);
    CoefficientBounds bounds;
    const CoefficientModel m(1, bad, sigma, bounds, "bad");
    Vec f(1);
    CHECK_THROWS_AS(m.eval_F(v1(1.0), v1(0.0), f), EvaluationError);
    try {
        m.eval_F(v1(3.0), v1(0.0), f);
        CHECK(false);
    } catch (const EvaluationError& e) {
        CHECK(e.point.q[0] == 3.0);
    }
}

TEST_CASE("bounds validation rejects infeasible metadata") {
    CoefficientBounds b;
    b.alpha = 0.5;
    b.c1 = 1.0;
    b.c2 = 2.0;
    CHECK_NOTHROW(b.validate());
    b.alpha = 1.0;
    CHECK_THROWS_AS(b.validate(), ParameterError);
    b.alpha = 0.5;
    b.c1 = 0.0;
    CHECK_THROWS_AS(b.validate(), ParameterError);
    b.c1 = 3.0;  // c1 > c2
    CHECK_THROWS_AS(b.validate(), ParameterError);
    b.c1 = 1.0;
    b.b = -1.0;
    CHECK_THROWS_AS(b.validate(), ParameterError);
}

TEST_CASE("coefficient audit passes a truthful model") {
    const auto m = make_catalog_model("harmonic-langevin", {});
    auto grid = phase_grid(v1(-2.0), v1(2.0), v1(-3.0), v1(3.0), 7);
    const auto report = audit_coefficients(m, grid);
    CHECK(report.passed);
    CHECK(report.points_used == grid.size());
    for (const auto& check : report.checks) CHECK(check.passed);
}

TEST_CASE("coefficient audit catches an understated growth bound") {
    auto F = std::make_shared<const LambdaVectorField>(
        [](const Vec& q, const Vec&, Vec& out) { out = 10.0 * q; });
    auto sigma = std::make_shared<const IsotropicMatrixField>(1.0);
    CoefficientBounds bounds;  // claims |F| <= 0 + 0 |x|
    const CoefficientModel m(1, F, sigma, bounds, "liar");
    auto grid = phase_grid(v1(-2.0), v1(2.0), v1(-1.0), v1(1.0), 5);
    const auto report = audit_coefficients(m, grid);
    CHECK(!report.passed);
    bool growth_failed = false;
    for (const auto& check : report.checks)
        if (!check.passed && check.check.find("growth") != std::string::npos)
            growth_failed = true;
    CHECK(growth_failed);
}

TEST_CASE("phase grid covers the product box") {
    const auto grid = phase_grid(v1(-1.0), v1(1.0), v1(0.0), v1(2.0), 4);
    CHECK(grid.size() == 16);
    for (const auto& s : grid) {
        CHECK(s.q[0] >= -1.0);
        CHECK(s.q[0] <= 1.0);
        CHECK(s.p[0] >= 0.0);
        CHECK(s.p[0] <= 2.0);
    }
    auto clustered = grid;
    cluster_points_near_zero_momentum(clustered, 1, 6, 1.0);
    CHECK(clustered.size() > grid.size());
    double smallest = 1e300;
    for (const auto& s : clustered)
        if (s.p.norm() > 0.0) smallest = std::min(smallest, s.p.norm());
    CHECK(smallest < 1e-1);
}

TEST_CASE("with_name relabels without changing evaluation") {
    const auto m = make_catalog_model("sign-drift", {});
    const auto renamed = m.with_name("renamed");
    CHECK(renamed.name() == "renamed");
    Vec f1(1), f2(1);
    m.eval_F(v1(0.3), v1(-0.4), f1);
    renamed.eval_F(v1(0.3), v1(-0.4), f2);
    CHECK(f1[0] == f2[0]);
}
