#include <benchmark/benchmark.h>

#include "kqsd/catalog.hpp"
#include "kqsd/domain.hpp"
#include "kqsd/expr.hpp"
#include "kqsd/integrate.hpp"
#include "kqsd/lyapunov.hpp"
#include "kqsd/mollify.hpp"
#include "kqsd/parallel.hpp"
#include "kqsd/qsd.hpp"
#include "kqsd/rng.hpp"

#include <cmath>

using namespace kqsd;

namespace {

KineticState state1(double q, double p) { return make_state1(q, p); }

void BM_NormalDraws(benchmark::State& state) {
    CounterRng rng(7, 3, 4);
    std::uint64_t step = 0;
    double acc = 0.0;
    for (auto _ : state) {
        acc += rng.normal(step, 0) + rng.normal(step, 1) + rng.normal(step, 2) +
               rng.normal(step, 3);
        ++step;
    }
    benchmark::DoNotOptimize(acc);
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_NormalDraws);

void BM_UniformDraws(benchmark::State& state) {
    CounterRng rng(7, 3, 4);
    std::uint64_t step = 0;
    double acc = 0.0;
    for (auto _ : state) {
        acc += rng.uniform(step, 0) + rng.uniform(step, 1) + rng.uniform(step, 2) +
               rng.uniform(step, 3);
        ++step;
    }
    benchmark::DoNotOptimize(acc);
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_UniformDraws);

void BM_StepEulerMaruyama(benchmark::State& state) {
    const auto model = make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.scheme = Scheme::euler_maruyama;
    CounterRng noise(11, 2, 1);
    const KineticState from = state1(0.3, -0.2);
    std::uint64_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(step(model, cfg, from, noise, i++));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_StepEulerMaruyama);

void BM_StepSplitting(benchmark::State& state) {
    const auto model = make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.scheme = Scheme::langevin_splitting;
    CounterRng noise(11, 2, 1);
    const KineticState from = state1(0.3, -0.2);
    std::uint64_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(step(model, cfg, from, noise, i++));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_StepSplitting);

void BM_AbsorbedTrajectory(benchmark::State& state) {
    const auto model = make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    const auto dom = CylindricalDomain::interval(-1.0, 1.0);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.max_time = 50.0;
    cfg.seed = 5;
    std::uint64_t steps = 0;
    std::uint64_t stream = 0;
    for (auto _ : state) {
        cfg.stream_id = stream++;
        const auto out = simulate_until_exit(model, dom, cfg, state1(0.0, 0.0));
        steps += out.steps;
        benchmark::DoNotOptimize(out.final_state.q[0]);
    }
    state.SetItemsProcessed(static_cast<int64_t>(steps));
    state.counters["steps/traj"] =
        benchmark::Counter(static_cast<double>(steps) / state.iterations());
}
BENCHMARK(BM_AbsorbedTrajectory);

void BM_MollifiedForce(benchmark::State& state) {
    const auto base = make_catalog_model("sign-drift", {});
    const auto smoothed = mollify(base, static_cast<double>(state.range(0)));
    Vec q(1), p(1), out(1);
    q << 0.2;
    p << 0.05;
    for (auto _ : state) {
        smoothed.eval_F(q, p, out);
        benchmark::DoNotOptimize(out[0]);
        p[0] = -p[0];   // stay inside the kernel support
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MollifiedForce)->Arg(8)->Arg(32);

void BM_GeneratorFiniteDifference(benchmark::State& state) {
    const auto model = make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    TestFunction f;
    f.value = [](const Vec& q, const Vec& p) {
        return q[0] * q[0] + p[0] * p[0];
    };
    const KineticState x = state1(0.4, -0.7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(generator_apply(model, f, x));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GeneratorFiniteDifference);

void BM_GeneratorAnalytic(benchmark::State& state) {
    const auto model = make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    TestFunction f;
    f.value = [](const Vec& q, const Vec& p) {
        return q[0] * q[0] + p[0] * p[0];
    };
    f.grad_q = [](const Vec& q, const Vec&, Vec& out) { out = 2.0 * q; };
    f.grad_p = [](const Vec&, const Vec& p, Vec& out) { out = 2.0 * p; };
    f.hess_p = [](const Vec&, const Vec& p, Mat& out) {
        out = 2.0 * Mat::Identity(p.size(), p.size());
    };
    f.analytic = true;
    const KineticState x = state1(0.4, -0.7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(generator_apply(model, f, x));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GeneratorAnalytic);

void BM_ExpressionForce(benchmark::State& state) {
    const auto expr = Expression::parse("-2.25*q - 0.7*p", 1);
    Vec q(1), p(1);
    q << 0.3;
    p << -0.2;
    double acc = 0.0;
    for (auto _ : state) {
        acc += expr.eval(q, p);
        q[0] = -q[0];
    }
    benchmark::DoNotOptimize(acc);
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ExpressionForce);

void BM_FlemingViotSmall(benchmark::State& state) {
    const auto model = make_catalog_model("harmonic-langevin", {{"kT", 0.5}});
    const auto dom = CylindricalDomain::interval(-1.0, 1.0);
    FvConfig cfg;
    cfg.integrator.dt = 0.01;
    cfg.integrator.seed = 3;
    cfg.horizon = 1.0;
    cfg.burn_in = 0.2;
    Vec lo(1), hi(1);
    lo << -1.0;
    hi << 1.0;
    cfg.binning = PhaseBinning::uniform(lo, hi, -3.0 * hi, 3.0 * hi, 16);
    cfg.bootstrap_rounds = 50;
    ThreadPool pool(1);
    const std::uint64_t n = 64;
    const auto start = gaussian_start(state1(0.0, 0.0), 0.2, 0.2, 40);
    for (auto _ : state) {
        const auto res = fleming_viot_run(start, model, dom, n, cfg, pool);
        benchmark::DoNotOptimize(res.estimate.lambda0_hat);
    }
    const double epochs = cfg.horizon / cfg.integrator.dt;
    state.SetItemsProcessed(
        static_cast<int64_t>(state.iterations() * epochs * static_cast<double>(n)));
}
BENCHMARK(BM_FlemingViotSmall)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
