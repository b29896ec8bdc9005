#include <doctest.h>

#include "kqsd/domain.hpp"
#include "kqsd/errors.hpp"

#include <cmath>
#include <limits>
#include <memory>

using namespace kqsd;

namespace {
Vec v1(double x) {
    Vec v(1);
    v << x;
    return v;
}
Vec v2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}
}  // namespace

TEST_CASE("interval membership is the strict interior") {
    const auto d = CylindricalDomain::interval(-1.0, 2.0);
    CHECK(d.dim() == 1);
    CHECK(d.bounded());
    CHECK(d.contains(v1(0.0)));
    CHECK(d.contains(v1(1.999)));
    CHECK(!d.contains(v1(2.0)));   // boundary counts as exited
    CHECK(!d.contains(v1(-1.0)));
    CHECK(!d.contains(v1(3.0)));
    CHECK(d.signed_distance(v1(0.5)) == doctest::Approx(1.5));
    CHECK(d.signed_distance(v1(3.0)) == doctest::Approx(-1.0));
    CHECK(d.outward_normal(v1(1.9))[0] == 1.0);
    CHECK(d.outward_normal(v1(-0.9))[0] == -1.0);
    CHECK(d.project_to_boundary(v1(1.7))[0] == 2.0);
    CHECK(d.sup_q_norm() == 2.0);
}

TEST_CASE("ball geometry") {
    const auto d = CylindricalDomain::ball(v2(1.0, 0.0), 2.0);
    CHECK(d.dim() == 2);
    CHECK(d.bounded());
    CHECK(d.contains(v2(1.0, 0.0)));
    CHECK(d.contains(v2(2.5, 0.0)));
    CHECK(!d.contains(v2(3.0, 0.0)));
    CHECK(d.signed_distance(v2(1.0, 1.0)) == doctest::Approx(1.0));
    const Vec n = d.outward_normal(v2(1.0, 1.5));
    CHECK(n[0] == doctest::Approx(0.0));
    CHECK(n[1] == doctest::Approx(1.0));
    const Vec b = d.project_to_boundary(v2(1.0, 0.5));
    CHECK(b[1] == doctest::Approx(2.0));
    CHECK(d.sup_q_norm() == doctest::Approx(3.0));  // |center| + radius
}

TEST_CASE("box geometry") {
    const auto d = CylindricalDomain::box(v2(-1.0, -2.0), v2(1.0, 2.0));
    CHECK(d.contains(v2(0.0, 0.0)));
    CHECK(!d.contains(v2(1.0, 0.0)));
    CHECK(d.signed_distance(v2(0.5, 0.0)) == doctest::Approx(0.5));
    // outward normal picks the most-violated face
    const Vec n = d.outward_normal(v2(0.9, 0.0));
    CHECK(n[0] == doctest::Approx(1.0));
    CHECK(n[1] == doctest::Approx(0.0));
    CHECK(d.sup_q_norm() == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("half space normalizes its normal") {
    const auto d = CylindricalDomain::half_space(v2(2.0, 0.0), 4.0);
    CHECK(d.normal().norm() == doctest::Approx(1.0));
    // interior side is normal.q < offset with the normalized data
    CHECK(d.contains(v2(1.0, 0.0)));
    CHECK(!d.contains(v2(2.0, 0.0)));
    CHECK(!d.bounded());
    CHECK_THROWS_AS((void)d.sup_q_norm(), ParameterError);
}

TEST_CASE("full space never exits") {
    const auto d = CylindricalDomain::full_space(2);
    CHECK(d.never_exits());
    CHECK(!d.bounded());
    CHECK(d.contains(v2(1e100, -1e100)));
    CHECK(d.signed_distance(v2(0.0, 0.0)) ==
          std::numeric_limits<double>::infinity());
}

TEST_CASE("describe names the shape") {
    CHECK(CylindricalDomain::interval(-1, 1).describe().find("interval") !=
          std::string::npos);
    CHECK(CylindricalDomain::full_space(1).describe().find("full") !=
          std::string::npos);
}

TEST_CASE("phase box membership and grid") {
    const auto k = CompactSet::phase_box(v1(-1.0), v1(1.0), v1(-2.0), v1(2.0));
    CHECK(k.dim() == 1);
    CHECK(!k.is_exhaustion_member());
    CHECK(k.contains(v1(0.0), v1(0.0)));
    CHECK(!k.contains(v1(1.5), v1(0.0)));
    CHECK(!k.contains(v1(0.0), v1(2.5)));

    Vec ql, qh, pl, ph;
    k.bounding_box(ql, qh, pl, ph);
    CHECK(ql[0] == -1.0);
    CHECK(ph[0] == 2.0);

    const auto g3 = k.grid(3);
    CHECK(g3.size() == 9);  // 3 per q axis x 3 per p axis
    for (const auto& s : g3) CHECK(k.contains(s));
    // deterministic: repeated calls agree point by point
    const auto again = k.grid(3);
    for (std::size_t i = 0; i < g3.size(); ++i) {
        CHECK(g3[i].q[0] == again[i].q[0]);
        CHECK(g3[i].p[0] == again[i].p[0]);
    }
}

TEST_CASE("exhaustion member clips position, boundary gap, and momentum") {
    auto dom = std::make_shared<const CylindricalDomain>(
        CylindricalDomain::interval(-1.0, 1.0));
    const auto k = CompactSet::exhaustion_member(dom, 4.0);
    CHECK(k.is_exhaustion_member());
    CHECK(k.k() == 4.0);
    CHECK(k.contains(v1(0.0), v1(0.0)));
    CHECK(k.contains(v1(0.5), v1(3.9)));
    CHECK(!k.contains(v1(0.99), v1(0.0)));  // boundary distance below 1/k
    CHECK(!k.contains(v1(0.0), v1(4.5)));   // momentum above k
    for (const auto& s : k.grid(5)) CHECK(k.contains(s));
}
