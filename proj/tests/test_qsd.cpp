#include <doctest.h>

#include "kqsd/catalog.hpp"
#include "kqsd/errors.hpp"
#include "kqsd/qsd.hpp"

#include <cmath>
#include <vector>

using namespace kqsd;

namespace {
Vec v1(double x) {
    Vec v(1);
    v << x;
    return v;
}
KineticState s1(double q, double p) { return make_state1(q, p); }

PhaseBinning window(double q_lo, double q_hi, double p_lo, double p_hi, int bins) {
    return PhaseBinning::uniform(v1(q_lo), v1(q_hi), v1(p_lo), v1(p_hi), bins);
}
}  // namespace

TEST_CASE("binning indexes and centers round-trip") {
    const auto b = window(-1.0, 1.0, -2.0, 2.0, 4);
    CHECK(b.dim() == 1);
    CHECK(b.total_bins() == 16);
    Vec q(1), p(1);
    for (std::size_t bin = 0; bin < b.total_bins(); ++bin) {
        b.center(bin, q, p);
        CHECK(b.index(q, p) == static_cast<long>(bin));
        Vec ql(1), qh(1), pl(1), ph(1);
        b.bounds(bin, ql, qh, pl, ph);
        CHECK(q[0] > ql[0]);
        CHECK(q[0] < qh[0]);
        CHECK(p[0] > pl[0]);
        CHECK(p[0] < ph[0]);
    }
    CHECK(b.index(v1(1.5), v1(0.0)) == -1);
    CHECK(b.index(v1(0.0), v1(-3.0)) == -1);
    CHECK(b.compatible(window(-1.0, 1.0, -2.0, 2.0, 4)));
    CHECK(!b.compatible(window(-1.0, 1.0, -2.0, 2.0, 5)));
    CHECK(!b.compatible(window(-1.0, 1.1, -2.0, 2.0, 4)));
}

TEST_CASE("binned total variation") {
    const auto b = window(-1.0, 1.0, -1.0, 1.0, 2);
    BinnedMeasure x{b, std::vector<double>(b.total_bins(), 0.0), 0.0};
    BinnedMeasure y = x;
    x.weights[0] = 1.0;
    y.weights[0] = 1.0;
    CHECK(binned_tv(x, y) == 0.0);
    y.weights[0] = 0.0;
    y.weights[3] = 1.0;
    CHECK(binned_tv(x, y) == 1.0);
    y.weights[3] = 0.5;
    y.overflow = 0.5;
    CHECK(binned_tv(x, y) == 1.0);  // overflow participates
    CHECK(x.mass_in_window() == 1.0);
    CHECK(y.mass_in_window() == 0.5);
}

TEST_CASE("two deterministic particles: one kill, cloned onto the survivor") {
    const auto m = make_catalog_model("free-kinetic", {{"sigma", 0.0}});
    const auto dom = CylindricalDomain::interval(-1.0, 1.0);
    FvConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.integrator.seed = 5;
    cfg.horizon = 1.5;
    cfg.burn_in = 0.0;
    cfg.binning = window(-1.0, 1.0, -1.0, 1.0, 4);
    ThreadPool pool(1);

    const StartSampler start = [](std::uint64_t idx) {
        return idx == 0 ? make_state1(0.0, 0.5) : make_state1(0.0, -0.7);
    };
    const auto res = fleming_viot_run(start, m, dom, 2, cfg, pool);

    // particle 1 reaches q = -1 at t = 10/7 and is copied onto particle 0
    CHECK(res.estimate.kill_count == 1);
    CHECK(res.estimate.kills_post_burnin == 1);
    std::uint64_t total = 0;
    for (auto k : res.kills_per_epoch) total += k;
    CHECK(total == 1);
    REQUIRE(res.final_states.size() == 2);
    CHECK(res.final_states[0].q[0] == res.final_states[1].q[0]);
    CHECK(res.final_states[0].p[0] == res.final_states[1].p[0]);
    CHECK(res.final_states[0].p[0] == 0.5);
    CHECK(res.estimate.lambda0_hat ==
          doctest::Approx(1.0 / (2.0 * 1.5)).epsilon(1e-12));
}

TEST_CASE("simultaneous extinction aborts with the epoch") {
    const auto m = make_catalog_model("free-kinetic", {{"sigma", 0.0}});
    const auto dom = CylindricalDomain::interval(-1.0, 1.0);
    FvConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.horizon = 2.0;
    cfg.binning = window(-1.0, 1.0, -2.0, 2.0, 4);
    ThreadPool pool(1);
    const StartSampler start = [](std::uint64_t) { return make_state1(0.0, 1.0); };
    CHECK_THROWS_AS((void)fleming_viot_run(start, m, dom, 2, cfg, pool),
                    ExtinctionError);
}

TEST_CASE("particle histogram is a probability measure and thread-invariant") {
    const auto m = make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    const auto dom = CylindricalDomain::interval(-2.0, 2.0);
    FvConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.integrator.seed = 31;
    cfg.horizon = 2.0;
    cfg.burn_in = 0.5;
    cfg.binning = window(-2.0, 2.0, -4.0, 4.0, 8);
    ThreadPool pool1(1), pool2(2);
    const auto start = gaussian_start(s1(0.0, 0.0), 0.3, 0.5, 3);

    const auto a = fleming_viot_run(start, m, dom, 150, cfg, pool1);
    double mass = a.estimate.measure.overflow;
    for (double w : a.estimate.measure.weights) {
        CHECK(w >= 0.0);
        mass += w;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(a.estimate.n_particles == 150);
    CHECK(a.estimate.horizon == 2.0);
    CHECK(a.estimate.burn_in == 0.5);
    CHECK(a.estimate.dt == 0.01);
    CHECK(a.estimate.lambda0_hat >= 0.0);
    CHECK(a.estimate.lambda0_se >= 0.0);
    std::uint64_t total = 0;
    for (auto k : a.kills_per_epoch) total += k;
    CHECK(total == a.estimate.kill_count);

    const auto b = fleming_viot_run(start, m, dom, 150, cfg, pool2);
    REQUIRE(b.estimate.measure.weights.size() == a.estimate.measure.weights.size());
    for (std::size_t i = 0; i < a.estimate.measure.weights.size(); ++i)
        CHECK(a.estimate.measure.weights[i] == b.estimate.measure.weights[i]);
    CHECK(a.estimate.lambda0_hat == b.estimate.lambda0_hat);
}

TEST_CASE("a domain that never exits keeps every particle and reports zero rate") {
    const auto m = make_catalog_model("harmonic-langevin", {});
    const auto dom = CylindricalDomain::full_space(1);
    FvConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.horizon = 1.0;
    cfg.binning = window(-3.0, 3.0, -3.0, 3.0, 4);
    ThreadPool pool(1);
    const auto start = gaussian_start(s1(0.0, 0.0), 0.5, 0.5, 9);
    const auto res = fleming_viot_run(start, m, dom, 100, cfg, pool);
    CHECK(res.estimate.kill_count == 0);
    CHECK(res.estimate.lambda0_hat == 0.0);
}

TEST_CASE("decay estimate recovers an exact exponential") {
    SurvivalCurve curve;
    curve.n_samples = 1000000000ULL;
    for (int i = 0; i <= 20; ++i) {
        const double t = 0.5 * i;
        curve.t.push_back(t);
        curve.p_hat.push_back(std::exp(-0.7 * t));
        curve.ci_lo.push_back(0.0);
        curve.ci_hi.push_back(1.0);
    }
    const auto est = estimate_decay_rate(curve);
    CHECK(est.lambda0_hat == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(est.burn_in == 0.0);
    CHECK(est.points_used == 21);
}

TEST_CASE("decay estimate skips the fast transient of a two-mode curve") {
    SurvivalCurve curve;
    curve.n_samples = 1000000ULL;
    for (int i = 0; i <= 40; ++i) {
        const double t = 0.5 * i;
        curve.t.push_back(t);
        curve.p_hat.push_back(0.5 * std::exp(-2.0 * t) + 0.5 * std::exp(-0.3 * t));
        curve.ci_lo.push_back(0.0);
        curve.ci_hi.push_back(1.0);
    }
    const auto est = estimate_decay_rate(curve);
    CHECK(std::abs(est.lambda0_hat - 0.3) < 0.02);
    CHECK(est.stderror >= 0.0);
}

TEST_CASE("flat survival yields a zero rate, not an error") {
    SurvivalCurve curve;
    curve.n_samples = 100000;
    for (int i = 0; i <= 20; ++i) {
        curve.t.push_back(0.25 * i);
        curve.p_hat.push_back(1.0);
        curve.ci_lo.push_back(1.0);
        curve.ci_hi.push_back(1.0);
    }
    const auto est = estimate_decay_rate(curve);
    CHECK(est.lambda0_hat == 0.0);
}

TEST_CASE("decay estimate rejects unusable curves") {
    SurvivalCurve curve;
    CHECK_THROWS_AS((void)estimate_decay_rate(curve), ParameterError);
    curve.t = {0.0, 1.0};
    curve.p_hat = {1.0, 0.5};
    curve.n_samples = 1000;
    CHECK_THROWS_AS((void)estimate_decay_rate(curve), NonExponentialError);
}

TEST_CASE("sampling from an estimate stays inside the weighted bin") {
    const auto b = window(-1.0, 1.0, -2.0, 2.0, 4);
    QsdEstimate est;
    est.measure.binning = b;
    est.measure.weights.assign(b.total_bins(), 0.0);
    const std::size_t hot = 6;
    est.measure.weights[hot] = 1.0;
    const auto sampler = start_from_estimate(est, 123);
    Vec ql(1), qh(1), pl(1), ph(1);
    b.bounds(hot, ql, qh, pl, ph);
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto s = sampler(i);
        CHECK(s.t == 0.0);
        CHECK(s.q[0] >= ql[0]);
        CHECK(s.q[0] <= qh[0]);
        CHECK(s.p[0] >= pl[0]);
        CHECK(s.p[0] <= ph[0]);
    }
    // deterministic in the index
    CHECK(sampler(7).q[0] == sampler(7).q[0]);
}

TEST_CASE("conditioned oracle bins deterministic survivors") {
    const auto m = make_catalog_model("free-kinetic", {{"sigma", 0.0}});
    const auto dom = CylindricalDomain::interval(-1.0, 1.0);
    CmcConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.binning = window(-1.0, 1.0, -1.0, 1.0, 4);
    cfg.pilot_n = 100;
    ThreadPool pool(1);
    const auto res = conditioned_mc(point_start(s1(0.0, 0.5)), m, dom, 1.0, 400, cfg,
                                    pool);
    CHECK(res.survival_fraction == 1.0);
    CHECK(res.n_survivors == res.n_samples);
    // every survivor sits at (0.5, 0.5): one bin carries all the mass
    const long bin = cfg.binning.index(v1(0.5), v1(0.5));
    REQUIRE(bin >= 0);
    CHECK(res.measure.weights[static_cast<std::size_t>(bin)] ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("conditioned oracle scales the run toward the survivor target") {
    const auto m = make_catalog_model("free-kinetic", {{"sigma", 0.0}});
    const auto dom = CylindricalDomain::interval(-1.0, 1.0);
    CmcConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.binning = window(-1.0, 1.0, -1.0, 1.0, 4);
    cfg.pilot_n = 500;
    cfg.target_survivors = 50;
    ThreadPool pool(1);
    const auto res = conditioned_mc(point_start(s1(0.0, 0.5)), m, dom, 1.0, 10000,
                                    cfg, pool);
    // full survival: the scaled count collapses to the pilot size
    CHECK(res.n_samples == 500);
    CHECK(res.n_survivors == 500);
}

TEST_CASE("conditioned oracle refuses runs without survivors") {
    const auto m = make_catalog_model("free-kinetic", {{"sigma", 0.0}});
    const auto dom = CylindricalDomain::interval(-1.0, 1.0);
    CmcConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.binning = window(-1.0, 1.0, -2.0, 2.0, 4);
    cfg.pilot_n = 50;
    ThreadPool pool(1);
    CHECK_THROWS_AS((void)conditioned_mc(point_start(s1(0.0, 1.5)), m, dom, 1.0, 200,
                                         cfg, pool),
                    InsufficientSurvivorsError);
}
