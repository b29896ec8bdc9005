#include "kqsd/qsd.hpp"

#include "kqsd/errors.hpp"
#include "kqsd/rng.hpp"
#include "kqsd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace kqsd {

namespace {

void check_axes(const Vec& lo, const Vec& hi, const char* which) {
    if (lo.size() != hi.size() || lo.size() == 0)
        throw ParameterError(std::string("PhaseBinning: mismatched ") + which +
                             " window bounds");
    for (Eigen::Index a = 0; a < lo.size(); ++a)
        if (!(lo[a] < hi[a]))
            throw ParameterError(std::string("PhaseBinning: empty ") + which +
                                 " window on axis " + std::to_string(a));
}

// digit of x on one axis, or -1 outside [lo, hi)
inline long axis_digit(double x, double lo, double hi, int bins) {
    if (x < lo || x >= hi) return -1;
    long i = static_cast<long>((x - lo) / (hi - lo) * bins);
    if (i >= bins) i = bins - 1;  // guards rounding at the top edge
    return i;
}

}  // namespace

PhaseBinning PhaseBinning::uniform(Vec q_lo, Vec q_hi, Vec p_lo, Vec p_hi,
                                   int bins_per_axis) {
    check_axes(q_lo, q_hi, "position");
    check_axes(p_lo, p_hi, "momentum");
    if (q_lo.size() != p_lo.size())
        throw ParameterError("PhaseBinning: position/momentum dimension mismatch");
    if (bins_per_axis < 1) throw ParameterError("PhaseBinning: need at least one bin");
    PhaseBinning b;
    b.q_lo = std::move(q_lo);
    b.q_hi = std::move(q_hi);
    b.p_lo = std::move(p_lo);
    b.p_hi = std::move(p_hi);
    b.bins_per_axis = bins_per_axis;
    return b;
}

std::size_t PhaseBinning::total_bins() const {
    std::size_t total = 1;
    for (int a = 0; a < 2 * dim(); ++a) total *= bins_per_axis;
    return total;
}

long PhaseBinning::index(const Vec& q, const Vec& p) const {
    if (q.size() != q_lo.size() || p.size() != p_lo.size())
        throw ParameterError("PhaseBinning: state dimension mismatch");
    long flat = 0;
    for (Eigen::Index a = 0; a < q.size(); ++a) {
        const long d = axis_digit(q[a], q_lo[a], q_hi[a], bins_per_axis);
        if (d < 0) return -1;
        flat = flat * bins_per_axis + d;
    }
    for (Eigen::Index a = 0; a < p.size(); ++a) {
        const long d = axis_digit(p[a], p_lo[a], p_hi[a], bins_per_axis);
        if (d < 0) return -1;
        flat = flat * bins_per_axis + d;
    }
    return flat;
}

void PhaseBinning::bounds(std::size_t bin, Vec& q_lo_out, Vec& q_hi_out,
                          Vec& p_lo_out, Vec& p_hi_out) const {
    if (bin >= total_bins()) throw ParameterError("PhaseBinning: bin out of range");
    const int d = dim();
    q_lo_out.resize(d);
    q_hi_out.resize(d);
    p_lo_out.resize(d);
    p_hi_out.resize(d);
    std::size_t rest = bin;
    for (int a = 2 * d - 1; a >= 0; --a) {
        const int digit = static_cast<int>(rest % bins_per_axis);
        rest /= bins_per_axis;
        const bool is_q = a < d;
        const int axis = is_q ? a : a - d;
        const double lo = is_q ? q_lo[axis] : p_lo[axis];
        const double hi = is_q ? q_hi[axis] : p_hi[axis];
        const double w = (hi - lo) / bins_per_axis;
        if (is_q) {
            q_lo_out[axis] = lo + digit * w;
            q_hi_out[axis] = lo + (digit + 1) * w;
        } else {
            p_lo_out[axis] = lo + digit * w;
            p_hi_out[axis] = lo + (digit + 1) * w;
        }
    }
}

void PhaseBinning::center(std::size_t bin, Vec& q, Vec& p) const {
    Vec ql, qh, pl, ph;
    bounds(bin, ql, qh, pl, ph);
    q = 0.5 * (ql + qh);
    p = 0.5 * (pl + ph);
}

bool PhaseBinning::compatible(const PhaseBinning& other) const {
    auto same = [](const Vec& a, const Vec& b) {
        return a.size() == b.size() && (a.array() == b.array()).all();
    };
    return bins_per_axis == other.bins_per_axis && same(q_lo, other.q_lo) &&
           same(q_hi, other.q_hi) && same(p_lo, other.p_lo) && same(p_hi, other.p_hi);
}

double BinnedMeasure::mass_in_window() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

double binned_tv(const BinnedMeasure& a, const BinnedMeasure& b) {
    if (!a.binning.compatible(b.binning) || a.weights.size() != b.weights.size())
        throw ParameterError("binned_tv: incompatible partitions");
    double s = std::abs(a.overflow - b.overflow);
    for (std::size_t i = 0; i < a.weights.size(); ++i)
        s += std::abs(a.weights[i] - b.weights[i]);
    return 0.5 * s;
}

namespace {

BinnedMeasure measure_from_counts(const PhaseBinning& binning,
                                  const std::vector<std::uint64_t>& counts,
                                  std::uint64_t overflow_count) {
    std::uint64_t total = overflow_count;
    for (auto c : counts) total += c;
    BinnedMeasure m;
    m.binning = binning;
    m.weights.assign(counts.size(), 0.0);
    if (total == 0) return m;
    const double inv = 1.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < counts.size(); ++i)
        m.weights[i] = static_cast<double>(counts[i]) * inv;
    m.overflow = static_cast<double>(overflow_count) * inv;
    return m;
}

}  // namespace

FvResult fleming_viot_run(const StartSampler& initial, const CoefficientModel& model,
                          const CylindricalDomain& domain, std::uint64_t n_particles,
                          const FvConfig& config, ThreadPool& pool) {
    if (!initial) throw ParameterError("fleming_viot_run: missing initial sampler");
    if (n_particles < 2)
        throw ParameterError("fleming_viot_run: need at least two particles");
    if (!(config.horizon > 0.0) || !std::isfinite(config.horizon))
        throw ParameterError("fleming_viot_run: horizon must be positive and finite");
    if (config.burn_in < 0.0 || config.burn_in >= config.horizon)
        throw ParameterError("fleming_viot_run: burn-in must lie in [0, horizon)");
    if (config.binning.dim() != model.dim())
        throw ParameterError("fleming_viot_run: binning dimension mismatch");
    if (config.accumulate_every == 0)
        throw ParameterError("fleming_viot_run: accumulate_every must be positive");

    IntegratorConfig cfg = config.integrator;
    cfg.max_time = config.horizon;
    cfg.validate();

    const double dt = cfg.dt;
    const auto n_epochs =
        static_cast<std::uint64_t>(std::ceil(config.horizon / dt - 1e-9));
    const auto burn_epochs =
        static_cast<std::uint64_t>(std::floor(config.burn_in / dt + 1e-9));
    if (n_epochs <= burn_epochs)
        throw ParameterError("fleming_viot_run: no epochs survive the burn-in");
    if (n_epochs - burn_epochs < config.accumulate_every)
        throw ParameterError("fleming_viot_run: no histogram deposit fits the schedule");

    std::vector<KineticState> states(n_particles);
    for (std::uint64_t i = 0; i < n_particles; ++i) {
        states[i] = initial(i);
        states[i].t = 0.0;
        if (states[i].dim() != model.dim())
            throw ParameterError("fleming_viot_run: initial state dimension mismatch");
        if (!domain.contains(states[i].q))
            throw ParameterError(
                "fleming_viot_run: initial distribution puts mass outside the domain");
    }

    FvResult out;
    out.kills_per_epoch.reserve(n_epochs);

    std::vector<std::uint8_t> exited(n_particles, 0);
    std::vector<std::uint32_t> survivors;
    survivors.reserve(n_particles);
    const unsigned resample_slots =
        static_cast<unsigned>(std::min<std::uint64_t>(n_particles, 0xFFFFFFFFull));
    CounterRng resample_rng(cfg.seed, streams::resample, resample_slots);

    std::vector<std::uint64_t> counts(config.binning.total_bins(), 0);
    std::uint64_t overflow_count = 0;
    std::uint64_t kill_count = 0;
    std::uint64_t kills_post_burnin = 0;
    std::uint64_t deposits = 0;

    for (std::uint64_t epoch = 0; epoch < n_epochs; ++epoch) {
        pool.parallel_for(n_particles, [&](std::uint64_t lo, std::uint64_t hi) {
            Stepper stepper(model, domain, cfg);
            for (std::uint64_t i = lo; i < hi; ++i) {
                stepper.reset_at(states[i], i, epoch);
                stepper.advance();
                if (stepper.exited()) {
                    exited[i] = 1;
                } else {
                    exited[i] = 0;
                    states[i] = stepper.state();
                }
            }
        });

        survivors.clear();
        for (std::uint32_t i = 0; i < n_particles; ++i)
            if (!exited[i]) survivors.push_back(i);
        if (survivors.empty()) throw ExtinctionError(epoch, kill_count);

        std::uint32_t kills_this_epoch = 0;
        for (std::uint32_t i = 0; i < n_particles; ++i) {
            if (!exited[i]) continue;
            const double u = resample_rng.uniform(epoch, i % resample_slots);
            auto pick = static_cast<std::size_t>(u * survivors.size());
            if (pick >= survivors.size()) pick = survivors.size() - 1;
            states[i] = states[survivors[pick]];
            ++kills_this_epoch;
            ++kill_count;
        }
        out.kills_per_epoch.push_back(kills_this_epoch);

        if (epoch < burn_epochs) continue;
        kills_post_burnin += kills_this_epoch;
        const std::uint64_t since_burn = epoch - burn_epochs + 1;

        if (since_burn % config.accumulate_every == 0) {
            for (const auto& s : states) {
                const long b = config.binning.index(s);
                if (b < 0)
                    ++overflow_count;
                else
                    ++counts[static_cast<std::size_t>(b)];
            }
            ++deposits;
        }

        if (config.record_every > 0 && since_burn % config.record_every == 0) {
            std::vector<std::uint64_t> snap(counts.size(), 0);
            std::uint64_t snap_over = 0;
            for (const auto& s : states) {
                const long b = config.binning.index(s);
                if (b < 0)
                    ++snap_over;
                else
                    ++snap[static_cast<std::size_t>(b)];
            }
            FvSeriesPoint pt;
            pt.t = (epoch + 1) * dt;
            pt.measure = measure_from_counts(config.binning, snap, snap_over);
            out.series.push_back(std::move(pt));
        }
    }

    const double elapsed = static_cast<double>(n_epochs - burn_epochs) * dt;
    auto& est = out.estimate;
    est.measure = measure_from_counts(config.binning, counts, overflow_count);
    est.lambda0_hat =
        static_cast<double>(kills_post_burnin) / (static_cast<double>(n_particles) * elapsed);
    est.burn_in = static_cast<double>(burn_epochs) * dt;
    est.n_particles = n_particles;
    est.horizon = config.horizon;
    est.dt = dt;
    est.kill_count = kill_count;
    est.kills_post_burnin = kills_post_burnin;
    (void)deposits;

    {
        std::vector<double> post(out.kills_per_epoch.begin() + burn_epochs,
                                 out.kills_per_epoch.end());
        const auto block =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.5 / dt)));
        const double se_mean = moving_block_bootstrap_se(
            post, block, config.bootstrap_rounds, cfg.seed);
        est.lambda0_se = se_mean / (static_cast<double>(n_particles) * dt);
    }

    out.final_states = std::move(states);
    return out;
}

CmcResult conditioned_mc(const StartSampler& start, const CoefficientModel& model,
                         const CylindricalDomain& domain, double horizon,
                         std::uint64_t n_samples, const CmcConfig& config,
                         ThreadPool& pool) {
    if (!start) throw ParameterError("conditioned_mc: missing start sampler");
    if (horizon < 0.0 || !std::isfinite(horizon))
        throw ParameterError("conditioned_mc: horizon must be finite and >= 0");
    if (n_samples == 0) throw ParameterError("conditioned_mc: need samples");
    if (config.binning.dim() != model.dim())
        throw ParameterError("conditioned_mc: binning dimension mismatch");

    CmcResult out;
    std::vector<std::uint64_t> counts(config.binning.total_bins(), 0);
    std::uint64_t overflow_count = 0;

    if (horizon == 0.0) {
        for (std::uint64_t i = 0; i < n_samples; ++i) {
            const KineticState s = start(i);
            const long b = config.binning.index(s);
            if (b < 0)
                ++overflow_count;
            else
                ++counts[static_cast<std::size_t>(b)];
        }
        out.measure = measure_from_counts(config.binning, counts, overflow_count);
        out.survival_fraction = 1.0;
        out.n_samples = n_samples;
        out.n_survivors = n_samples;
        return out;
    }

    IntegratorConfig cfg = config.integrator;
    cfg.max_time = horizon;
    cfg.validate();

    std::uint64_t n_eff = n_samples;
    if (!domain.never_exits()) {
        const std::uint64_t pilot = std::min(std::max<std::uint64_t>(config.pilot_n, 1),
                                             n_samples);
        std::vector<std::uint8_t> alive(pilot, 0);
        run_samples(model, domain, cfg, start, pilot, pool,
                    [&](std::uint64_t idx, TrajectoryOutcome&& o) {
                        alive[idx] = o.exit ? 0 : 1;
                    });
        std::uint64_t pilot_survivors = 0;
        for (auto a : alive) pilot_survivors += a;
        const double p_hat =
            static_cast<double>(pilot_survivors) / static_cast<double>(pilot);
        const double expected = p_hat * static_cast<double>(n_samples);
        if (expected < 100.0)
            throw InsufficientSurvivorsError(
                static_cast<std::uint64_t>(expected), 100);
        if (config.target_survivors > 0) {
            const auto scaled = static_cast<std::uint64_t>(
                std::ceil(static_cast<double>(config.target_survivors) / p_hat));
            n_eff = std::min(n_samples, std::max(pilot, scaled));
        }
    }

    // -2 exited, -1 overflow, >= 0 window bin; filled by sample index so the
    // reduction below is thread-count independent
    std::vector<long> bin_of(n_eff, -2);
    run_samples(model, domain, cfg, start, n_eff, pool,
                [&](std::uint64_t idx, TrajectoryOutcome&& o) {
                    if (!o.exit) bin_of[idx] = config.binning.index(o.final_state);
                });

    std::uint64_t survivors = 0;
    for (std::uint64_t i = 0; i < n_eff; ++i) {
        if (bin_of[i] == -2) continue;
        ++survivors;
        if (bin_of[i] < 0)
            ++overflow_count;
        else
            ++counts[static_cast<std::size_t>(bin_of[i])];
    }
    out.survival_fraction =
        static_cast<double>(survivors) / static_cast<double>(n_eff);
    if (survivors < 30) throw InsufficientSurvivorsError(survivors, 30);

    out.measure = measure_from_counts(config.binning, counts, overflow_count);
    out.n_samples = n_eff;
    out.n_survivors = survivors;
    return out;
}

DecayEstimate estimate_decay_rate(const SurvivalCurve& curve) {
    const std::size_t m = curve.t.size();
    if (m != curve.p_hat.size() || m == 0)
        throw ParameterError("estimate_decay_rate: malformed survival curve");
    if (curve.n_samples == 0)
        throw ParameterError("estimate_decay_rate: curve reports no samples");
    const double n = static_cast<double>(curve.n_samples);

    // usable points sit at least 10x above the binomial noise floor
    std::vector<double> ts, ys, vars;
    for (std::size_t i = 0; i < m; ++i) {
        const double p = curve.p_hat[i];
        if (!(p > 0.0) || p > 1.0) continue;
        if (p * n <= 100.0 * (1.0 - p)) continue;
        ts.push_back(curve.t[i]);
        ys.push_back(std::log(p));
        vars.push_back(std::max((1.0 - p) / (n * p), 1e-30));
    }
    const std::size_t usable = ts.size();
    if (usable < 10)
        throw NonExponentialError(
            "estimate_decay_rate: fewer than 10 usable points above the noise floor");

    std::vector<LineFit> fits(usable);
    for (std::size_t j = 0; j + 10 <= usable; ++j) {
        std::vector<double> tx(ts.begin() + j, ts.end());
        std::vector<double> ty(ys.begin() + j, ys.end());
        std::vector<double> tv(vars.begin() + j, vars.end());
        fits[j] = weighted_line_fit(tx, ty, tv);
    }

    for (std::size_t j = 0; j + 11 <= usable; ++j) {
        const double drift = std::abs(fits[j].slope - fits[j + 1].slope);
        const double tol = fits[j].se_slope + 1e-12 * (1.0 + std::abs(fits[j].slope));
        if (drift <= tol) {
            DecayEstimate est;
            est.lambda0_hat = std::max(0.0, -fits[j].slope);
            est.stderror = fits[j].se_slope;
            est.burn_in = ts[j];
            est.points_used = usable - j;
            return est;
        }
    }
    throw NonExponentialError("estimate_decay_rate: no stable log-linear tail window");
}

StartSampler start_from_estimate(const QsdEstimate& est, std::uint64_t seed) {
    const auto& meas = est.measure;
    if (meas.weights.empty())
        throw ParameterError("start_from_estimate: empty histogram");
    std::vector<double> cdf(meas.weights.size());
    double run = 0.0;
    for (std::size_t i = 0; i < meas.weights.size(); ++i) {
        if (meas.weights[i] < 0.0)
            throw ParameterError("start_from_estimate: negative weight");
        run += meas.weights[i];
        cdf[i] = run;
    }
    if (!(run > 0.0))
        throw ParameterError("start_from_estimate: histogram carries no window mass");
    for (auto& c : cdf) c /= run;
    cdf.back() = 1.0;

    const auto binning = meas.binning;
    const int d = binning.dim();
    auto rng = std::make_shared<CounterRng>(seed, streams::initial,
                                            static_cast<unsigned>(1 + 2 * d));
    return [cdf, binning, rng, d](std::uint64_t idx) {
        const double u = rng->uniform(idx, 0);
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const auto bin = static_cast<std::size_t>(it - cdf.begin());
        Vec ql, qh, pl, ph;
        binning.bounds(bin, ql, qh, pl, ph);
        KineticState s;
        s.q.resize(d);
        s.p.resize(d);
        for (int a = 0; a < d; ++a) {
            s.q[a] = ql[a] + rng->uniform(idx, 1 + a) * (qh[a] - ql[a]);
            s.p[a] = pl[a] + rng->uniform(idx, 1 + d + a) * (ph[a] - pl[a]);
        }
        s.t = 0.0;
        return s;
    };
}

}  // namespace kqsd
