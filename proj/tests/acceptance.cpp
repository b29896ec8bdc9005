// Acceptance gate: one line per criterion, exit code = number of failures.
#include "kqsd/catalog.hpp"
#include "kqsd/diagnostics.hpp"
#include "kqsd/domain.hpp"
#include "kqsd/errors.hpp"
#include "kqsd/experiment.hpp"
#include "kqsd/integrate.hpp"
#include "kqsd/io.hpp"
#include "kqsd/lyapunov.hpp"
#include "kqsd/model.hpp"
#include "kqsd/mollify.hpp"
#include "kqsd/parallel.hpp"
#include "kqsd/qsd.hpp"
#include "kqsd/rng.hpp"
#include "kqsd/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace {

using namespace kqsd;

int g_failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %02d %s: %s\n", pass ? "PASS" : "FAIL", idx,
                name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void run_criterion(int idx, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        auto [p, d] = body();
        pass = p;
        detail = d;
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "  (criterion %02d took %.1f s)\n", idx, secs);
    report(idx, name, pass, detail);
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

PhaseBinning window1d(double ql, double qh, double pl, double ph, int bins) {
    Vec qlo(1), qhi(1), plo(1), phi(1);
    qlo << ql;
    qhi << qh;
    plo << pl;
    phi << ph;
    return PhaseBinning::uniform(qlo, qhi, plo, phi, bins);
}

CompactSet box1d(double ql, double qh, double pl, double ph) {
    Vec qlo(1), qhi(1), plo(1), phi(1);
    qlo << ql;
    qhi << qh;
    plo << pl;
    phi << ph;
    return CompactSet::phase_box(qlo, qhi, plo, phi);
}

KineticState state1d(double q, double p) {
    KineticState s;
    s.q = Vec::Constant(1, q);
    s.p = Vec::Constant(1, p);
    s.t = 0.0;
    return s;
}

// ---------------------------------------------------------------- criterion 1

std::pair<bool, std::string> qsd_oracle_tv(ThreadPool& pool) {
    const CoefficientModel model =
        make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    const auto domain =
        std::make_shared<CylindricalDomain>(CylindricalDomain::interval(-2.0, 2.0));
    const PhaseBinning binning = window1d(-2.0, 2.0, -4.0, 4.0, 40);
    const StartSampler start = gaussian_start(state1d(0.0, 0.0), 0.3, 0.5, 11);

    FvConfig fv;
    fv.integrator.dt = 1e-3;
    fv.integrator.seed = 101;
    fv.horizon = 20.0;
    fv.burn_in = 10.0;
    fv.binning = binning;
    const FvResult fv_res = fleming_viot_run(start, model, *domain, 10000, fv, pool);

    CmcConfig cc;
    cc.integrator.dt = 1e-3;
    cc.integrator.seed = 103;
    cc.binning = binning;
    cc.pilot_n = 20000;
    cc.target_survivors = 300000;
    const CmcResult cmc = conditioned_mc(start, model, *domain, 5.0, 1000000, cc, pool);

    const double tv = binned_tv(fv_res.estimate.measure, cmc.measure);
    return {tv <= 0.05, "tv=" + fmt(tv) + " (limit 0.05), cmc survivors " +
                            std::to_string(cmc.n_survivors)};
}

// ---------------------------------------------------------------- criterion 2

struct RateInstance {
    std::string label;
    CoefficientModel model;
    std::shared_ptr<const CylindricalDomain> domain;
    double fv_horizon, fv_burn;
    std::vector<double> grid;
    std::uint64_t surv_n;
};

std::pair<bool, std::string> lambda0_cross(ThreadPool& pool) {
    std::vector<RateInstance> instances;
    instances.push_back({"harmonic",
                         make_catalog_model("harmonic-langevin", {{"kT", 0.5}}),
                         std::make_shared<CylindricalDomain>(
                             CylindricalDomain::interval(-2.0, 2.0)),
                         20.0,
                         10.0,
                         {4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18},
                         20000});
    instances.push_back({"double-well",
                         make_catalog_model("double-well-langevin", {{"kT", 0.6}}),
                         std::make_shared<CylindricalDomain>(
                             CylindricalDomain::interval(-1.5, 1.5)),
                         14.0,
                         6.0,
                         {3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14},
                         10000});

    bool all = true;
    std::string detail;
    for (auto& inst : instances) {
        const StartSampler start = gaussian_start(state1d(0.0, 0.0), 0.3, 0.5, 7);
        FvConfig fv;
        fv.integrator.dt = 5e-3;
        fv.integrator.seed = 211;
        fv.horizon = inst.fv_horizon;
        fv.burn_in = inst.fv_burn;
        fv.binning = window1d(inst.domain->left(), inst.domain->right(), -4.0, 4.0, 30);
        const FvResult fv_res =
            fleming_viot_run(start, inst.model, *inst.domain, 4000, fv, pool);

        IntegratorConfig ic;
        ic.dt = 5e-3;
        ic.seed = 223;
        const SurvivalCurve curve = survival_probability(
            inst.model, *inst.domain, ic, start, inst.surv_n, inst.grid, pool);
        const DecayEstimate dec = estimate_decay_rate(curve);

        const double diff = std::abs(fv_res.estimate.lambda0_hat - dec.lambda0_hat);
        const double combined = std::sqrt(fv_res.estimate.lambda0_se *
                                              fv_res.estimate.lambda0_se +
                                          dec.stderror * dec.stderror);
        const bool ok = diff <= 3.0 * combined && combined > 0.0;
        all = all && ok;
        if (!detail.empty()) detail += "; ";
        detail += inst.label + ": fv=" + fmt(fv_res.estimate.lambda0_hat) +
                  " slope=" + fmt(dec.lambda0_hat) + " |diff|=" + fmt(diff) +
                  " 3se=" + fmt(3.0 * combined);
    }
    return {all, detail};
}

// ---------------------------------------------------------------- criterion 3

std::pair<bool, std::string> memoryless_exit_law(ThreadPool& pool) {
    const CoefficientModel model =
        make_catalog_model("double-well-langevin", {{"kT", 0.6}});
    const auto domain =
        std::make_shared<CylindricalDomain>(CylindricalDomain::interval(-1.5, 1.5));

    FvConfig fv;
    fv.integrator.dt = 5e-3;
    fv.integrator.seed = 307;
    fv.horizon = 12.0;
    fv.burn_in = 6.0;
    fv.binning = window1d(-1.5, 1.5, -3.5, 3.5, 30);
    const StartSampler warm = gaussian_start(state1d(0.0, 0.0), 0.2, 0.3, 13);
    const FvResult fv_res = fleming_viot_run(warm, model, *domain, 3000, fv, pool);

    ExitLawConfig ec;
    ec.integrator.dt = 5e-3;
    ec.integrator.seed = 311;
    ec.horizon = 25.0;
    ec.level = 0.01;
    ec.min_exits = 10000;
    ec.lambda0_plugin = fv_res.estimate.lambda0_hat;
    const StartSampler qsd = start_from_estimate(fv_res.estimate, 17);
    const auto reports = exit_law_battery(qsd, model, *domain, 22000, ec, pool);

    double p_ks = -1.0, p_chi2 = -1.0;
    std::uint64_t exits = 0;
    for (const auto& r : reports) {
        if (r.test_name == "exit-time-ks-plugin") {
            p_ks = r.p_value.value_or(-1.0);
            exits = r.sample_size;
        }
        if (r.test_name == "exit-side-time-independence") p_chi2 = r.p_value.value_or(-1.0);
    }
    const bool main_ok = p_ks >= 0.01 && p_chi2 >= 0.01 && exits >= 10000;

    // negative control: noiseless transport exits at a deterministic time
    ExitLawConfig nc;
    nc.integrator.dt = 1e-3;
    nc.integrator.seed = 313;
    nc.horizon = 3.0;
    nc.level = 0.01;
    nc.min_exits = 500;
    nc.negative_control = true;
    const CoefficientModel det = make_catalog_model("free-kinetic", {{"sigma", 0.0}});
    const auto unit =
        std::make_shared<CylindricalDomain>(CylindricalDomain::interval(-1.0, 1.0));
    const auto nc_reports = exit_law_battery(point_start(state1d(0.0, 1.0)), det,
                                             *unit, 1000, nc, pool);
    const bool nc_ok = all_asserted_passed(nc_reports);

    return {main_ok && nc_ok, "ks_p=" + fmt(p_ks) + " chi2_p=" + fmt(p_chi2) +
                                  " exits=" + std::to_string(exits) +
                                  " negative_control=" +
                                  (nc_ok ? "rejects" : "MISSED")};
}

// ---------------------------------------------------------------- criterion 4

std::pair<bool, std::string> bounded_lyapunov(ThreadPool&) {
    const CoefficientModel model = make_catalog_model("double-well-langevin", {});
    const auto domain =
        std::make_shared<CylindricalDomain>(CylindricalDomain::interval(-1.0, 1.0));
    const BoundedDomainLyapunov lyap = bounded_lyapunov_build(domain, model, 1.0);
    const double hi = 2.0 * lyap.beta - 1.0;

    CounterRng rng(401, streams::synthetic, 4);
    std::uint64_t violations = 0;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        const double q = -1.0 + 2.0 * rng.uniform(i, 0);
        const double mag = std::pow(10.0, -3.0 + 6.0 * rng.uniform(i, 1));
        const double p = (rng.uniform(i, 2) < 0.5 ? -mag : mag);
        const double v = lyap.phi.value(Vec::Constant(1, q), Vec::Constant(1, p));
        if (!(v >= 1.0 && v <= hi)) ++violations;
    }

    // shell |p| in [p0, 3 p0] for lambda = 1: L phi + phi <= 0 pointwise
    std::vector<KineticState> grid;
    for (int iq = 0; iq < 65; ++iq) {
        const double q = -1.0 + 2.0 * (iq + 0.5) / 65.0;
        for (int ir = 0; ir <= 32; ++ir) {
            const double r = lyap.p0 * (1.0 + 2.0 * ir / 32.0);
            grid.push_back(state1d(q, r));
            grid.push_back(state1d(q, -r));
        }
    }
    const auto nowhere = [](const Vec&, const Vec&) { return false; };
    const DriftCheckReport shell =
        verify_drift_inequality(lyap.phi, model, 1.0, nowhere, 0.0, grid, nullptr, 1e-8);

    const bool ok = violations == 0 && shell.passed;
    return {ok, "bound violations " + std::to_string(violations) + "/100000, shell worst slack " +
                    fmt(shell.worst_slack) + " over " +
                    std::to_string(shell.grid_points) + " points (p0=" + fmt(lyap.p0) + ")"};
}

// ---------------------------------------------------------------- criterion 5

std::pair<bool, std::string> hamiltonian_lyapunov(ThreadPool&) {
    const CoefficientModel model =
        make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    const HamiltonianSpec spec = hamiltonian_spec_from_model(model, 0.5, 0.0);
    HamiltonianBuildOptions opts;
    opts.grid_half_width = 10.0;
    opts.grid_per_axis = 41;
    const HamiltonianLyapunov lyap = hamiltonian_lyapunov_build(spec, 1.0, opts);

    std::vector<KineticState> grid;
    for (int iq = 0; iq < 41; ++iq)
        for (int ip = 0; ip < 41; ++ip)
            grid.push_back(state1d(-10.0 + 20.0 * iq / 40.0, -10.0 + 20.0 * ip / 40.0));
    const auto in_b = [&lyap](const Vec& q, const Vec& p) { return lyap.in_b_n(q, p); };
    const DriftCheckReport outside =
        verify_drift_inequality(lyap.phi, model, 1.0, in_b, lyap.c_n, grid, nullptr, 1e-8);

    const double d1 = delta_feasible(1.0, 10.0, 0.0);
    const double d2 = delta_feasible(1.0, 10.0, 0.5);
    const bool exact = (d1 == 5.0 / 6.0) && (d2 == 0.75);

    const bool ok = lyap.drift_report.passed && outside.passed && exact;
    return {ok, "drift " + std::string(lyap.drift_report.passed ? "ok" : "FAIL") +
                    ", grid worst slack " + fmt(outside.worst_slack) + ", n=" +
                    std::to_string(lyap.n) + ", c=" + fmt(lyap.c) +
                    ", delta_feasible exact " + (exact ? "yes" : "NO")};
}

// ---------------------------------------------------------------- criterion 6

std::pair<bool, std::string> generator_vs_fd(ThreadPool&) {
    std::vector<CoefficientModel> models;
    models.push_back(make_catalog_model("harmonic-langevin", {}));
    models.push_back(make_catalog_model(
        "harmonic-langevin", {{"omega", 1.7}, {"gamma", 0.4}, {"kT", 0.8}}));
    models.push_back(make_catalog_model("nonconservative-langevin", {}));
    models.push_back(make_catalog_model("harmonic-langevin", {{"d", 2}}));

    const CoefficientModel dw = make_catalog_model("double-well-langevin", {});
    const auto unit =
        std::make_shared<CylindricalDomain>(CylindricalDomain::interval(-1.0, 1.0));
    const BoundedDomainLyapunov bounded = bounded_lyapunov_build(unit, dw, 1.0);
    // low Hhat powers stay double-precision conditioned; high powers span too
    // many orders for any finite-difference step to resolve at 1e-5
    const HamiltonianSpec hspec = hamiltonian_spec_from_model(
        make_catalog_model("harmonic-langevin", {{"kT", 0.5}}), 0.5, 0.0);
    const HamiltonianLyapunov ham1 = hamiltonian_lyapunov_build(hspec, 0.1);
    const HamiltonianLyapunov ham2 = hamiltonian_lyapunov_build(hspec, 0.2);

    CounterRng rng(601, streams::synthetic, 10);
    double worst = 0.0;
    std::uint64_t checked = 0, failed = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const int variant = static_cast<int>(i % 5);
        const int d = (variant <= 1 && i % 10 == 9) ? 2 : 1;
        const CoefficientModel& model =
            d == 2 ? models[3] : models[i % (variant <= 1 ? 3 : 3)];

        TestFunction f;
        const double a = 0.3 + 1.5 * rng.uniform(i, 0);
        const double b = 0.3 + 1.5 * rng.uniform(i, 1);
        const double c = -1.0 + 2.0 * rng.uniform(i, 2);
        if (variant == 0) {
            // quadratic a|q|^2 + b|p|^2 + c q.p
            f.value = [a, b, c](const Vec& q, const Vec& p) {
                return a * q.squaredNorm() + b * p.squaredNorm() + c * q.dot(p);
            };
            f.grad_q = [a, c](const Vec& q, const Vec& p, Vec& out) {
                out = 2.0 * a * q + c * p;
            };
            f.grad_p = [b, c](const Vec& q, const Vec& p, Vec& out) {
                out = 2.0 * b * p + c * q;
            };
            f.hess_p = [b](const Vec&, const Vec& p, Mat& out) {
                out = Mat::Identity(p.size(), p.size()) * (2.0 * b);
            };
            f.analytic = true;
        } else if (variant == 1) {
            // gaussian exp(-a|q|^2 - b|p|^2)
            f.value = [a, b](const Vec& q, const Vec& p) {
                return std::exp(-a * q.squaredNorm() - b * p.squaredNorm());
            };
            f.grad_q = [a, b](const Vec& q, const Vec& p, Vec& out) {
                out = -2.0 * a * std::exp(-a * q.squaredNorm() - b * p.squaredNorm()) * q;
            };
            f.grad_p = [a, b](const Vec& q, const Vec& p, Vec& out) {
                out = -2.0 * b * std::exp(-a * q.squaredNorm() - b * p.squaredNorm()) * p;
            };
            f.hess_p = [a, b](const Vec& q, const Vec& p, Mat& out) {
                const double v = std::exp(-a * q.squaredNorm() - b * p.squaredNorm());
                out = v * (4.0 * b * b * p * p.transpose() -
                           2.0 * b * Mat::Identity(p.size(), p.size()));
            };
            f.analytic = true;
        } else if (variant == 2) {
            // separable trig sin(a q0) cos(b p0)
            f.value = [a, b](const Vec& q, const Vec& p) {
                return std::sin(a * q[0]) * std::cos(b * p[0]);
            };
            f.grad_q = [a, b](const Vec& q, const Vec& p, Vec& out) {
                out.setZero();
                out[0] = a * std::cos(a * q[0]) * std::cos(b * p[0]);
            };
            f.grad_p = [a, b](const Vec& q, const Vec& p, Vec& out) {
                out.setZero();
                out[0] = -b * std::sin(a * q[0]) * std::sin(b * p[0]);
            };
            f.hess_p = [a, b](const Vec& q, const Vec& p, Mat& out) {
                out.setZero();
                out(0, 0) = -b * b * std::sin(a * q[0]) * std::cos(b * p[0]);
            };
            f.analytic = true;
        } else if (variant == 3) {
            f = bounded.phi;
        } else {
            f = (i % 2 == 0) ? ham1.phi : ham2.phi;
        }

        KineticState x;
        x.q.resize(d);
        x.p.resize(d);
        const double span = variant == 3 ? 0.9 : 2.5;
        for (int k = 0; k < d; ++k) {
            x.q[k] = span * (2.0 * rng.uniform(i, 3 + 2 * k) - 1.0);
            x.p[k] = 2.5 * (2.0 * rng.uniform(i, 4 + 2 * k) - 1.0);
        }
        if (variant == 3) {
            // the bridged profile is C^2 but not C^3 at |p| in {1/2, 1};
            // only the smooth shells belong to the finite-difference catalog
            const double u = rng.uniform(i, 9);
            const double mag =
                u < 0.5 ? 0.1 + 0.6 * u : 1.2 + 3.6 * (u - 0.5);
            x.p[0] = rng.uniform(i, 4) < 0.5 ? -mag : mag;
        }

        const CoefficientModel& m = variant == 3 ? dw : model;
        const double exact = generator_apply(m, f, x);
        TestFunction fd;
        fd.value = f.value;
        const double approx = generator_apply(m, fd, x);
        const double rel = std::abs(exact - approx) / (1.0 + std::abs(exact));
        worst = std::max(worst, rel);
        ++checked;
        if (rel > 1e-5) ++failed;
    }
    return {failed == 0, "worst relative error " + fmt(worst) + " over " +
                             std::to_string(checked) + " pairs (limit 1e-5)"};
}

// ---------------------------------------------------------------- criterion 7

std::pair<bool, std::string> mollifier_convergence(ThreadPool&) {
    const CoefficientModel model = make_catalog_model("sign-drift", {});
    const Vec lo = Vec::Constant(1, -1.0), hi = Vec::Constant(1, 1.0);
    const MollifierConvergenceReport rep =
        mollifier_convergence_report(model, {4, 8, 16, 32}, lo, hi, lo, hi, {});

    bool strict = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        strict = strict && rep.rows[i].f_l1_discrepancy < rep.rows[i - 1].f_l1_discrepancy;

    const double c_law = 1.3378159908399013;  // 4 E|Y| for the frozen kernel law
    double worst_rel = 0.0;
    for (const auto& row : rep.rows) {
        const double c_emp = row.index_n * row.f_l1_discrepancy;
        worst_rel = std::max(worst_rel, std::abs(c_emp - c_law) / c_law);
    }

    // linear drift fields are reproduced exactly by the kernel average
    auto lin = std::make_shared<LambdaVectorField>(
        [](const Vec& q, const Vec& p, Vec& out) { out = 0.7 * q - 0.3 * p; });
    auto sig = std::make_shared<IsotropicMatrixField>(1.0);
    const CoefficientModel linear(1, lin, sig, {}, "linear");
    const CoefficientModel smoothed = mollify(linear, 8);
    double lin_err = 0.0;
    for (int i = 0; i < 25; ++i) {
        const Vec q = Vec::Constant(1, -2.0 + 4.0 * i / 24.0);
        const Vec p = Vec::Constant(1, 1.3 - 0.1 * i);
        Vec fa(1), fb(1);
        linear.eval_F(q, p, fa);
        smoothed.eval_F(q, p, fb);
        lin_err = std::max(lin_err, (fa - fb).cwiseAbs().maxCoeff());
    }

    const bool ok = strict && worst_rel <= 0.10 && lin_err <= 1e-8;
    return {ok, "strictly decreasing " + std::string(strict ? "yes" : "NO") +
                    ", C/n deviation " + fmt(worst_rel) + " (limit 0.10)" +
                    ", linear fixed-point error " + fmt(lin_err)};
}

// ---------------------------------------------------------------- criterion 8

std::pair<bool, std::string> harnack_ratios(ThreadPool& pool) {
    const CoefficientModel model =
        make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    const auto domain =
        std::make_shared<CylindricalDomain>(CylindricalDomain::interval(-2.0, 2.0));
    HarnackConfig hc;
    hc.integrator.dt = 5e-3;
    hc.integrator.seed = 809;
    hc.k_grid_per_axis = 5;
    const HarnackReport rep = harnack_ratio_scan(
        box1d(-1.0, 1.0, -1.5, 1.5), box1d(-0.5, 0.5, -0.5, 0.5), model, *domain,
        {1.0, 2.0, 4.0}, 1.0, 4000, hc, pool);

    bool finite = rep.all_conclusive;
    for (const auto& row : rep.rows)
        finite = finite && std::isfinite(row.ratio) && row.u_den_min > 0.0;
    const bool ok = finite && rep.factor_spread < 2.0;
    return {ok, "factor spread " + fmt(rep.factor_spread) +
                    " (limit 2), all denominators positive at Wilson 99%: " +
                    (rep.all_conclusive ? "yes" : "NO")};
}

// ---------------------------------------------------------------- criterion 9

std::pair<bool, std::string> moment_uniformity(ThreadPool& pool) {
    const CoefficientModel base = make_catalog_model("sign-drift", {});
    std::vector<std::shared_ptr<const CoefficientModel>> family;
    for (double n : {4.0, 8.0, 16.0, 32.0})
        family.push_back(std::make_shared<CoefficientModel>(mollify(base, n)));
    MomentConfig mc;
    mc.integrator.dt = 0.01;
    mc.integrator.seed = 907;
    const MomentReport rep =
        moment_bound_scan(family, state1d(0.5, 0.5), 1.0, 4000, mc, pool);
    return {rep.band_pass, "max " + fmt(rep.max_value) + " vs median " +
                               fmt(rep.median_value) + ", band " +
                               (rep.band_pass ? "ok" : "EXCEEDED")};
}

// --------------------------------------------------------------- criterion 10

std::pair<bool, std::string> short_time_exit(ThreadPool& pool) {
    const CoefficientModel model =
        make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    const auto domain =
        std::make_shared<CylindricalDomain>(CylindricalDomain::interval(-2.0, 2.0));
    IntegratorConfig ic;
    ic.dt = 1.25e-3;
    ic.seed = 1009;

    double worst = 0.0;
    bool monotone = true;
    const std::vector<double> grid = {0.0125, 0.025, 0.05};
    for (int iq = 0; iq < 5; ++iq)
        for (int ip = 0; ip < 5; ++ip) {
            const double q = -1.0 + 0.5 * iq;
            const double p = -1.0 + 0.5 * ip;
            const SurvivalCurve curve = survival_probability(
                model, *domain, ic, point_start(state1d(q, p)), 2000, grid, pool);
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const double p_exit = 1.0 - curve.p_hat[k];
                if (k + 1 == grid.size()) worst = std::max(worst, p_exit);
                if (k > 0 && 1.0 - curve.p_hat[k - 1] > p_exit + 1e-12) monotone = false;
            }
        }
    const bool ok = worst < 0.01 && monotone;
    return {ok, "max exit probability by t=0.05 over K-grid: " + fmt(worst) +
                    " (limit 0.01), non-increasing as t decreases: " +
                    (monotone ? "yes" : "NO")};
}

// --------------------------------------------------------------- criterion 11

std::pair<bool, std::string> manifest_determinism(ThreadPool&) {
    namespace fs = std::filesystem;
    const fs::path base =
        fs::temp_directory_path() / ("kqsd-accept-" + std::to_string(::getpid()));
    const std::string config = R"({
      "kind": "fleming-viot", "seed": 4242,
      "model": {"catalog": "harmonic-langevin", "params": {"kT": 0.5}},
      "domain": {"type": "interval", "left": -2.0, "right": 2.0},
      "integrator": {"dt": 0.01},
      "start": {"type": "gaussian", "mean_q": [0.0], "mean_p": [0.0],
                 "std_q": 0.3, "std_p": 0.5},
      "params": {"n_particles": 300, "horizon": 3.0, "burn_in": 1.0,
                 "window": {"q_lo": [-2.0], "q_hi": [2.0],
                            "p_lo": [-4.0], "p_hi": [4.0], "bins_per_axis": 20}}
    })";

    RunOptions a;
    a.output_dir = (base / "a").string();
    a.threads = 1;
    if (run_experiment_text(config, a) != 0) return {false, "first run failed"};

    RunOptions b;
    b.output_dir = (base / "b").string();
    b.threads = 3;
    const std::string manifest = read_text_file((base / "a" / "manifest.json").string());
    if (run_experiment_text(manifest, b) != 0) return {false, "manifest re-run failed"};

    RunOptions c;
    c.output_dir = (base / "c").string();
    c.threads = 2;
    if (run_experiment_text(manifest, c) != 0) return {false, "second re-run failed"};

    bool identical = true;
    std::string first_diff;
    for (const char* f : {"qsd_estimate.json", "qsd_histogram.csv", "kills.csv"}) {
        const std::string ra = read_text_file((base / "a" / f).string());
        const std::string rb = read_text_file((base / "b" / f).string());
        const std::string rc = read_text_file((base / "c" / f).string());
        if (ra != rb || ra != rc) {
            identical = false;
            if (first_diff.empty()) first_diff = f;
        }
    }
    std::error_code ec;
    fs::remove_all(base, ec);
    return {identical, identical
                           ? "artifacts bit-identical across threads {1,3,2}"
                           : "artifact differs across thread counts: " + first_diff};
}

}  // namespace

int main(int argc, char** argv) {
    ThreadPool pool(0);  // hardware concurrency
    std::fprintf(stderr, "acceptance: %u worker threads\n", pool.size());

    // optional argument: comma-separated criterion numbers to run
    std::vector<bool> wanted(12, true);
    if (argc > 1) {
        wanted.assign(12, false);
        std::stringstream ss(argv[1]);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (const int k = std::atoi(tok.c_str()); k >= 1 && k <= 11) wanted[k] = true;
    }
    const auto maybe =
        [&wanted](int idx, const std::string& name,
                  const std::function<std::pair<bool, std::string>()>& body) {
            if (wanted[idx]) run_criterion(idx, name, body);
        };

    maybe(1, "qsd-oracle-tv", [&] { return qsd_oracle_tv(pool); });
    maybe(2, "lambda0-cross-estimator", [&] { return lambda0_cross(pool); });
    maybe(3, "memoryless-exit-law", [&] { return memoryless_exit_law(pool); });
    maybe(4, "bounded-lyapunov", [&] { return bounded_lyapunov(pool); });
    maybe(5, "hamiltonian-lyapunov", [&] { return hamiltonian_lyapunov(pool); });
    maybe(6, "generator-vs-fd", [&] { return generator_vs_fd(pool); });
    maybe(7, "mollifier-convergence", [&] { return mollifier_convergence(pool); });
    maybe(8, "harnack-ratio-bound", [&] { return harnack_ratios(pool); });
    maybe(9, "moment-uniformity", [&] { return moment_uniformity(pool); });
    maybe(10, "short-time-exit", [&] { return short_time_exit(pool); });
    maybe(11, "manifest-determinism", [&] { return manifest_determinism(pool); });

    if (g_failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return g_failures;
}
