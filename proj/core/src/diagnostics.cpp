#include "kqsd/diagnostics.hpp"

#include "kqsd/errors.hpp"
#include "kqsd/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace kqsd {

namespace {

constexpr double kZ99 = 2.5758293035489008;

std::string provenance(const IntegratorConfig& cfg, std::uint64_t n) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "seed=%llu dt=%.17g n=%llu",
                  static_cast<unsigned long long>(cfg.seed), cfg.dt,
                  static_cast<unsigned long long>(n));
    return buf;
}

nlohmann::json report_json(const StatTestReport& r) {
    nlohmann::json j;
    j["test_name"] = r.test_name;
    j["statistic"] = r.statistic;
    if (r.p_value) j["p_value"] = *r.p_value;
    j["passed"] = r.passed;
    j["asserted"] = r.asserted;
    j["slack"] = r.slack;
    j["sample_size"] = r.sample_size;
    j["config"] = r.config;
    return j;
}

nlohmann::json state_json(const KineticState& s) {
    nlohmann::json j;
    j["q"] = std::vector<double>(s.q.data(), s.q.data() + s.q.size());
    j["p"] = std::vector<double>(s.p.data(), s.p.data() + s.p.size());
    return j;
}

// exit-point category; the count must be stable for a given domain
int category_count(const CylindricalDomain& domain) {
    switch (domain.kind()) {
        case CylindricalDomain::Kind::interval:
            return 2;
        case CylindricalDomain::Kind::ball:
            return domain.dim() == 1 ? 2 : 8;
        case CylindricalDomain::Kind::box:
            return 2 * domain.dim();
        case CylindricalDomain::Kind::half_space:
            return 1;
        case CylindricalDomain::Kind::full_space:
            return 0;
    }
    return 0;
}

int category_of(const CylindricalDomain& domain, const Vec& q) {
    switch (domain.kind()) {
        case CylindricalDomain::Kind::interval:
            return std::abs(q[0] - domain.left()) <= std::abs(q[0] - domain.right())
                       ? 0
                       : 1;
        case CylindricalDomain::Kind::ball: {
            const Vec v = q - domain.center();
            if (domain.dim() == 1) return v[0] < 0.0 ? 0 : 1;
            const double ang = std::atan2(v[1], v[0]);  // (-pi, pi]
            int sector = static_cast<int>((ang + M_PI) * (8.0 / (2.0 * M_PI)));
            if (sector < 0) sector = 0;
            if (sector > 7) sector = 7;
            return sector;
        }
        case CylindricalDomain::Kind::box: {
            int best_axis = 0;
            bool best_hi = false;
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < domain.dim(); ++a) {
                const double dlo = std::abs(q[a] - domain.lo()[a]);
                const double dhi = std::abs(domain.hi()[a] - q[a]);
                if (dlo < best) {
                    best = dlo;
                    best_axis = a;
                    best_hi = false;
                }
                if (dhi < best) {
                    best = dhi;
                    best_axis = a;
                    best_hi = true;
                }
            }
            return 2 * best_axis + (best_hi ? 1 : 0);
        }
        default:
            return 0;
    }
}

double erfc_p_two_sided(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace

std::string StatTestReport::to_json() const { return report_json(*this).dump(2); }

std::string reports_to_json(const std::vector<StatTestReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    return arr.dump(2);
}

bool all_asserted_passed(const std::vector<StatTestReport>& reports) {
    for (const auto& r : reports)
        if (r.asserted && !r.passed) return false;
    return true;
}

std::vector<StatTestReport> exit_law_battery(const StartSampler& qsd_sampler,
                                             const CoefficientModel& model,
                                             const CylindricalDomain& domain,
                                             std::uint64_t n_samples,
                                             const ExitLawConfig& config,
                                             ThreadPool& pool) {
    if (!qsd_sampler) throw ParameterError("exit_law_battery: missing sampler");
    if (n_samples < 1000)
        throw ParameterError("exit_law_battery: need at least 1000 samples");
    if (!(config.horizon > 0.0))
        throw ParameterError("exit_law_battery: horizon must be positive");
    if (domain.never_exits())
        throw ParameterError("exit_law_battery: the full space has no exit law");
    if (!(config.level > 0.0 && config.level < 1.0))
        throw ParameterError("exit_law_battery: level must lie in (0,1)");

    IntegratorConfig cfg = config.integrator;
    cfg.max_time = config.horizon;
    cfg.validate();

    // per-index records keep the reduction independent of thread count
    std::vector<double> tau(n_samples, -1.0);
    std::vector<std::int8_t> cat(n_samples, -1);
    run_samples(model, domain, cfg, qsd_sampler, n_samples, pool,
                [&](std::uint64_t idx, TrajectoryOutcome&& o) {
                    if (o.exit) {
                        tau[idx] = o.exit->exit_time;
                        cat[idx] = static_cast<std::int8_t>(
                            category_of(domain, o.exit->exit_state.q));
                    }
                });

    std::vector<double> exit_times;
    std::vector<int> exit_cats;
    for (std::uint64_t i = 0; i < n_samples; ++i)
        if (tau[i] >= 0.0) {
            exit_times.push_back(tau[i]);
            exit_cats.push_back(cat[i]);
        }
    const std::uint64_t n_exits = exit_times.size();
    const double survival_fraction =
        1.0 - static_cast<double>(n_exits) / static_cast<double>(n_samples);
    if (n_exits < config.min_exits)
        throw InsufficientExitsError(n_exits, survival_fraction);

    const std::string prov = provenance(cfg, n_samples);
    std::vector<StatTestReport> reports;

    // memorylessness pairs that fit inside the horizon
    std::vector<std::pair<double, double>> pairs;
    for (auto st : {std::pair<double, double>{1.0, 1.0}, {1.0, 2.0}, {2.0, 2.0}})
        if (st.first + st.second < config.horizon) pairs.push_back(st);

    const bool has_plugin = std::isfinite(config.lambda0_plugin);
    const std::size_t n_asserted =
        config.negative_control ? 1 : 2 + (has_plugin ? 1 : 0) + pairs.size();
    const double alpha = config.level / static_cast<double>(n_asserted);

    {
        // the bootstrap p floor 1/(rounds+1) must sit below the working level
        const double working = config.negative_control ? config.level : alpha;
        const std::uint64_t rounds = std::max<std::uint64_t>(
            config.bootstrap_rounds,
            static_cast<std::uint64_t>(std::ceil(2.0 / working)));
        const ExponentialFit fit =
            exponential_ks_fit(exit_times, rounds, cfg.seed,
                               config.horizon, n_samples - n_exits);
        StatTestReport r;
        r.test_name = "exit-time-ks-refit";
        r.statistic = fit.statistic;
        r.p_value = fit.p_value;
        r.sample_size = n_exits;
        if (config.negative_control) {
            r.passed = fit.p_value < config.level;
            r.config = prov + " negative-control: pass means rejection at level " +
                       std::to_string(config.level);
        } else {
            r.passed = fit.p_value >= alpha;
            r.config = prov + " rate_refit=" + std::to_string(fit.rate) +
                       " alpha=" + std::to_string(alpha);
        }
        reports.push_back(std::move(r));
    }

    if (has_plugin) {
        // the observed exits follow the plug-in law truncated to the horizon
        const double rate = config.lambda0_plugin;
        const double denom = -std::expm1(-rate * config.horizon);
        const KsResult ks = ks_test(exit_times, [rate, denom](double x) {
            return x <= 0.0 ? 0.0 : -std::expm1(-rate * x) / denom;
        });
        StatTestReport r;
        r.test_name = "exit-time-ks-plugin";
        r.statistic = ks.statistic;
        r.p_value = ks.p_value;
        r.sample_size = n_exits;
        r.asserted = !config.negative_control;
        r.passed = config.negative_control ? ks.p_value < config.level
                                           : ks.p_value >= alpha;
        r.config = prov + " rate_plugin=" + std::to_string(rate);
        reports.push_back(std::move(r));
    }

    {
        // quartile edges from the exit-time order statistics
        std::vector<double> sorted = exit_times;
        std::sort(sorted.begin(), sorted.end());
        double q1 = sorted[sorted.size() / 4];
        double q2 = sorted[sorted.size() / 2];
        double q3 = sorted[3 * sorted.size() / 4];
        const int n_cat = category_count(domain);
        std::vector<std::vector<std::uint64_t>> table(
            n_cat, std::vector<std::uint64_t>(4, 0));
        for (std::size_t i = 0; i < exit_times.size(); ++i) {
            const double t = exit_times[i];
            const int col = t < q1 ? 0 : (t < q2 ? 1 : (t < q3 ? 2 : 3));
            ++table[exit_cats[i]][col];
        }
        const Chi2Result chi = chi2_independence(table);
        StatTestReport r;
        r.test_name = "exit-side-time-independence";
        r.statistic = chi.statistic;
        r.p_value = chi.p_value;
        r.sample_size = n_exits;
        r.asserted = !config.negative_control;
        r.passed = config.negative_control ? true : chi.p_value >= alpha;
        r.config = prov + " dof=" + std::to_string(chi.dof);
        reports.push_back(std::move(r));
    }

    // split-halves memorylessness: the conditional tail on half A against the
    // unconditional tail on half B, so the compared ratios are independent
    for (const auto& [s, t] : pairs) {
        std::uint64_t a_n = 0, a_s = 0, a_st = 0, b_n = 0, b_t = 0;
        for (std::uint64_t i = 0; i < n_samples; ++i) {
            const bool exited = tau[i] >= 0.0;
            const double ti = exited ? tau[i] : std::numeric_limits<double>::infinity();
            if (i % 2 == 0) {
                ++a_n;
                if (ti > s) ++a_s;
                if (ti > s + t) ++a_st;
            } else {
                ++b_n;
                if (ti > t) ++b_t;
            }
        }
        StatTestReport r;
        r.test_name = "memorylessness-s" + std::to_string(static_cast<int>(s)) + "-t" +
                      std::to_string(static_cast<int>(t));
        r.sample_size = n_samples;
        r.asserted = !config.negative_control;
        if (a_s < 10 || b_n < 10) {
            r.asserted = false;
            r.passed = true;
            r.config = prov + " too few conditioning survivors; informational";
            reports.push_back(std::move(r));
            continue;
        }
        const double r1 = static_cast<double>(a_st) / static_cast<double>(a_s);
        const double r2 = static_cast<double>(b_t) / static_cast<double>(b_n);
        const double var = r1 * (1.0 - r1) / static_cast<double>(a_s) +
                           r2 * (1.0 - r2) / static_cast<double>(b_n);
        double z = 0.0;
        if (var > 0.0)
            z = (r1 - r2) / std::sqrt(var);
        else if (r1 != r2)
            z = std::numeric_limits<double>::infinity();
        const double p = erfc_p_two_sided(z);
        r.statistic = z;
        r.p_value = p;
        r.slack = r1 - r2;
        r.passed = config.negative_control ? true : p >= alpha;
        char extra[120];
        std::snprintf(extra, sizeof extra, " r_cond=%.6f r_uncond=%.6f alpha=%g", r1,
                      r2, alpha);
        r.config = prov + extra;
        reports.push_back(std::move(r));
    }

    return reports;
}

std::string HarnackReport::to_json() const {
    nlohmann::json j;
    j["all_conclusive"] = all_conclusive;
    j["factor_spread"] = factor_spread;
    j["n_samples_per_start"] = n_samples_per_start;
    j["n_starts"] = n_starts;
    j["config"] = config;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json e;
        e["t"] = row.t;
        e["u_num_max"] = row.u_num_max;
        e["u_den_min"] = row.u_den_min;
        e["num_ci"] = {row.num_ci.lo, row.num_ci.hi};
        e["den_ci"] = {row.den_ci.lo, row.den_ci.hi};
        e["ratio"] = row.ratio;
        e["ratio_lo"] = row.ratio_lo;
        e["ratio_hi"] = row.ratio_hi;
        e["conclusive"] = row.conclusive;
        arr.push_back(std::move(e));
    }
    j["rows"] = std::move(arr);
    return j.dump(2);
}

HarnackReport harnack_ratio_scan(const CompactSet& a_set, const CompactSet& k_set,
                                 const CoefficientModel& model,
                                 const CylindricalDomain& domain,
                                 const std::vector<double>& times, double lag,
                                 std::uint64_t n_samples, const HarnackConfig& config,
                                 ThreadPool& pool) {
    if (times.empty()) throw ParameterError("harnack_ratio_scan: no times");
    for (double t : times)
        if (!(t > 0.0)) throw ParameterError("harnack_ratio_scan: times must be positive");
    if (!(lag > 0.0)) throw ParameterError("harnack_ratio_scan: lag must be positive");
    if (n_samples == 0) throw ParameterError("harnack_ratio_scan: need samples");

    const auto starts = k_set.grid(config.k_grid_per_axis);
    if (starts.empty()) throw ParameterError("harnack_ratio_scan: empty start grid");
    for (const auto& s : starts)
        if (!domain.contains(s.q))
            throw ParameterError("harnack_ratio_scan: start grid leaves the domain");

    // evaluation schedule: every t and t+lag, deduplicated on the step grid
    IntegratorConfig cfg = config.integrator;
    const double dt = cfg.dt;
    std::vector<std::uint64_t> eval_steps;
    auto step_of = [dt](double t) {
        return static_cast<std::uint64_t>(std::llround(t / dt));
    };
    for (double t : times) {
        eval_steps.push_back(step_of(t));
        eval_steps.push_back(step_of(t + lag));
    }
    std::sort(eval_steps.begin(), eval_steps.end());
    eval_steps.erase(std::unique(eval_steps.begin(), eval_steps.end()),
                     eval_steps.end());
    if (eval_steps.front() == 0)
        throw ParameterError("harnack_ratio_scan: dt too coarse for the times");
    const std::uint64_t max_step = eval_steps.back();
    cfg.max_time = static_cast<double>(max_step) * dt;
    cfg.validate();
    const std::size_t n_eval = eval_steps.size();

    // hit counts per (start, eval time); per-sample bits keep it deterministic
    std::vector<std::vector<std::uint64_t>> hits(
        starts.size(), std::vector<std::uint64_t>(n_eval, 0));
    std::vector<std::uint8_t> bits(n_samples * n_eval);
    for (std::size_t si = 0; si < starts.size(); ++si) {
        std::fill(bits.begin(), bits.end(), 0);
        pool.parallel_for(n_samples, [&](std::uint64_t lo, std::uint64_t hi) {
            Stepper stepper(model, domain, cfg);
            for (std::uint64_t i = lo; i < hi; ++i) {
                stepper.reset(starts[si],
                              cfg.stream_id + si * n_samples + i);
                std::uint64_t k = 0;
                std::size_t e = 0;
                while (e < n_eval) {
                    const bool advanced = stepper.advance();
                    ++k;
                    if (stepper.exited()) break;
                    if (k == eval_steps[e]) {
                        if (a_set.contains(stepper.state()))
                            bits[i * n_eval + e] = 1;
                        ++e;
                    }
                    if (!advanced) break;
                }
            }
        });
        for (std::uint64_t i = 0; i < n_samples; ++i)
            for (std::size_t e = 0; e < n_eval; ++e)
                hits[si][e] += bits[i * n_eval + e];
    }

    auto eval_index = [&](double t) {
        const std::uint64_t s = step_of(t);
        const auto it = std::lower_bound(eval_steps.begin(), eval_steps.end(), s);
        return static_cast<std::size_t>(it - eval_steps.begin());
    };

    HarnackReport rep;
    rep.n_samples_per_start = n_samples;
    rep.n_starts = starts.size();
    rep.config = provenance(cfg, n_samples) +
                 " grid_per_axis=" + std::to_string(config.k_grid_per_axis) +
                 " lag=" + std::to_string(lag);
    const double n_d = static_cast<double>(n_samples);
    bool all_ok = true;
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (double t : times) {
        const std::size_t en = eval_index(t);
        const std::size_t ed = eval_index(t + lag);
        std::size_t arg_num = 0, arg_den = 0;
        for (std::size_t si = 1; si < starts.size(); ++si) {
            if (hits[si][en] > hits[arg_num][en]) arg_num = si;
            if (hits[si][ed] < hits[arg_den][ed]) arg_den = si;
        }
        HarnackRow row;
        row.t = t;
        row.u_num_max = hits[arg_num][en] / n_d;
        row.u_den_min = hits[arg_den][ed] / n_d;
        row.num_ci = wilson_interval(hits[arg_num][en], n_samples, kZ99);
        row.den_ci = wilson_interval(hits[arg_den][ed], n_samples, kZ99);
        row.conclusive = row.den_ci.lo > 0.0;
        if (row.conclusive) {
            row.ratio = row.u_num_max / row.u_den_min;
            row.ratio_lo = row.num_ci.lo / row.den_ci.hi;
            row.ratio_hi = row.num_ci.hi / row.den_ci.lo;
            rmin = std::min(rmin, row.ratio);
            rmax = std::max(rmax, row.ratio);
        } else {
            all_ok = false;
        }
        rep.rows.push_back(row);
    }
    rep.all_conclusive = all_ok;
    rep.factor_spread = (rmax > 0.0 && rmin > 0.0) ? rmax / rmin : 0.0;
    return rep;
}

std::string DobrushinReport::to_json() const {
    nlohmann::json j;
    j["c1"] = c1;
    j["nu_weights"] = nu_weights;
    j["bin_minima"] = bin_minima;
    j["inconclusive"] = inconclusive;
    j["n_starts"] = n_starts;
    j["n_samples_per_start"] = n_samples_per_start;
    j["bins_per_axis"] = binning.bins_per_axis;
    j["config"] = config;
    return j.dump(2);
}

DobrushinReport dobrushin_probe(const CompactSet& k_set, const CoefficientModel& model,
                                const CylindricalDomain& domain, double t1,
                                std::uint64_t n_samples, const DobrushinConfig& config,
                                ThreadPool& pool) {
    if (!(t1 > 0.0)) throw ParameterError("dobrushin_probe: t1 must be positive");
    if (n_samples == 0) throw ParameterError("dobrushin_probe: need samples");
    const auto starts = k_set.grid(config.k_grid_per_axis);
    if (starts.empty()) throw ParameterError("dobrushin_probe: empty start grid");
    for (const auto& s : starts)
        if (!domain.contains(s.q))
            throw ParameterError("dobrushin_probe: start grid leaves the domain");

    Vec ql, qh, pl, ph;
    k_set.bounding_box(ql, qh, pl, ph);
    const PhaseBinning binning =
        PhaseBinning::uniform(ql, qh, pl, ph, config.bins_per_axis);

    IntegratorConfig cfg = config.integrator;
    cfg.max_time = t1;
    cfg.validate();

    const std::size_t n_bins = binning.total_bins();
    std::vector<double> minima(n_bins, std::numeric_limits<double>::infinity());
    std::vector<long> bin_of(n_samples);
    for (std::size_t si = 0; si < starts.size(); ++si) {
        std::fill(bin_of.begin(), bin_of.end(), -1L);
        const StartSampler start = point_start(starts[si]);
        IntegratorConfig scfg = cfg;
        scfg.stream_id = cfg.stream_id + si * n_samples;
        run_samples(model, domain, scfg, start, n_samples, pool,
                    [&](std::uint64_t idx, TrajectoryOutcome&& o) {
                        if (o.exit) return;
                        if (!k_set.contains(o.final_state)) return;
                        bin_of[idx] = binning.index(o.final_state);
                    });
        std::vector<std::uint64_t> counts(n_bins, 0);
        for (std::uint64_t i = 0; i < n_samples; ++i)
            if (bin_of[i] >= 0) ++counts[static_cast<std::size_t>(bin_of[i])];
        for (std::size_t b = 0; b < n_bins; ++b)
            minima[b] = std::min(
                minima[b], static_cast<double>(counts[b]) / static_cast<double>(n_samples));
    }

    DobrushinReport rep;
    rep.binning = binning;
    rep.bin_minima = minima;
    rep.n_starts = starts.size();
    rep.n_samples_per_start = n_samples;
    rep.config = provenance(cfg, n_samples) +
                 " grid_per_axis=" + std::to_string(config.k_grid_per_axis);
    double c1 = 0.0;
    for (double m : minima) c1 += m;
    rep.c1 = c1;
    rep.inconclusive = !(c1 > 0.0);
    if (!rep.inconclusive) {
        rep.nu_weights.resize(n_bins);
        for (std::size_t b = 0; b < n_bins; ++b) rep.nu_weights[b] = minima[b] / c1;
    }
    return rep;
}

std::string F2Report::to_json() const {
    nlohmann::json j;
    j["all_passed"] = all_passed;
    j["alpha1"] = alpha1;
    j["t2"] = t2;
    j["config"] = config;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json e = state_json(row.start);
        e["lhs"] = row.lhs;
        e["se"] = row.se;
        e["bound"] = row.bound;
        e["slack"] = row.slack;
        e["passed"] = row.passed;
        arr.push_back(std::move(e));
    }
    j["rows"] = std::move(arr);
    return j.dump(2);
}

F2Report f2_lyapunov_probe(const TestFunction& psi1, const CompactSet& k_set,
                           const CoefficientModel& model,
                           const CylindricalDomain& domain, double t2, double alpha1,
                           const std::vector<KineticState>& starts,
                           std::uint64_t n_samples, const F2Config& config,
                           ThreadPool& pool) {
    if (!psi1.value) throw ParameterError("f2_lyapunov_probe: psi1 has no value");
    if (!(t2 > 0.0)) throw ParameterError("f2_lyapunov_probe: t2 must be positive");
    if (starts.empty()) throw ParameterError("f2_lyapunov_probe: no starts");
    if (n_samples < 2) throw ParameterError("f2_lyapunov_probe: need samples");
    for (const auto& s : starts) {
        if (!domain.contains(s.q))
            throw ParameterError("f2_lyapunov_probe: start outside the domain");
        if (k_set.contains(s))
            throw ParameterError("f2_lyapunov_probe: starts must avoid K");
    }

    IntegratorConfig cfg = config.integrator;
    cfg.max_time = t2;
    cfg.validate();

    F2Report rep;
    rep.alpha1 = alpha1;
    rep.t2 = t2;
    rep.config = provenance(cfg, n_samples);
    std::vector<double> vals(n_samples);
    bool all_ok = true;
    for (std::size_t si = 0; si < starts.size(); ++si) {
        std::fill(vals.begin(), vals.end(), 0.0);
        KineticState origin = starts[si];
        origin.t = 0.0;
        pool.parallel_for(n_samples, [&](std::uint64_t lo, std::uint64_t hi) {
            Stepper stepper(model, domain, cfg);
            for (std::uint64_t i = lo; i < hi; ++i) {
                stepper.reset(origin, cfg.stream_id + si * n_samples + i);
                while (true) {
                    const bool advanced = stepper.advance();
                    if (stepper.exited()) break;
                    if (k_set.contains(stepper.state())) break;
                    if (!advanced) {
                        // reached t2 alive, never having touched K
                        const auto& s = stepper.state();
                        vals[i] = psi1.value(s.q, s.p);
                        break;
                    }
                }
            }
        });
        const double m = mean(vals);
        const double sd = std::sqrt(sample_variance(vals));
        F2Row row;
        row.start = starts[si];
        row.lhs = m;
        row.se = sd / std::sqrt(static_cast<double>(n_samples));
        row.bound = std::exp(-alpha1 * t2) * psi1.value(starts[si].q, starts[si].p);
        row.slack = row.lhs - row.bound;
        row.passed = row.lhs <= row.bound + kZ99 * row.se;
        all_ok = all_ok && row.passed;
        rep.rows.push_back(std::move(row));
    }
    rep.all_passed = all_ok;
    return rep;
}

std::string MomentReport::to_json() const {
    nlohmann::json j;
    j["max_value"] = max_value;
    j["median_value"] = median_value;
    j["band_pass"] = band_pass;
    j["config"] = config;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json e;
        e["label"] = row.label;
        e["e_sup_sq"] = row.e_sup_sq;
        e["se"] = row.se;
        e["sup_mean_sq"] = row.sup_mean_sq;
        e["sup_mean_se"] = row.sup_mean_se;
        arr.push_back(std::move(e));
    }
    j["rows"] = std::move(arr);
    return j.dump(2);
}

MomentReport moment_bound_scan(
    const std::vector<std::shared_ptr<const CoefficientModel>>& family,
    const KineticState& start, double horizon, std::uint64_t n_samples,
    const MomentConfig& config, ThreadPool& pool) {
    if (family.empty()) throw ParameterError("moment_bound_scan: empty family");
    if (!(horizon > 0.0)) throw ParameterError("moment_bound_scan: horizon must be positive");
    if (n_samples < 2) throw ParameterError("moment_bound_scan: need samples");
    for (const auto& m : family)
        if (!m || m->dim() != start.dim())
            throw ParameterError("moment_bound_scan: family/start dimension mismatch");

    IntegratorConfig cfg = config.integrator;
    cfg.max_time = horizon;
    cfg.validate();
    const auto n_steps =
        static_cast<std::uint64_t>(std::ceil(horizon / cfg.dt - 1e-9));

    const CylindricalDomain space = CylindricalDomain::full_space(start.dim());
    KineticState origin = start;
    origin.t = 0.0;
    MomentReport rep;
    rep.config = provenance(cfg, n_samples) + " horizon=" + std::to_string(horizon);

    constexpr std::uint64_t kBlock = 1024;
    const std::uint64_t n_blocks = (n_samples + kBlock - 1) / kBlock;

    for (const auto& model : family) {
        std::vector<double> sup_sq(n_samples, 0.0);
        // per-block partial sums of the euclidean square at every step end
        std::vector<std::vector<double>> block_sum(
            n_blocks, std::vector<double>(n_steps + 1, 0.0));
        std::vector<std::vector<double>> block_sq(
            n_blocks, std::vector<double>(n_steps + 1, 0.0));

        pool.parallel_for(n_blocks, [&](std::uint64_t blo, std::uint64_t bhi) {
            Stepper stepper(*model, space, cfg);
            for (std::uint64_t b = blo; b < bhi; ++b) {
                auto& bsum = block_sum[b];
                auto& bsq = block_sq[b];
                const std::uint64_t ilo = b * kBlock;
                const std::uint64_t ihi = std::min(n_samples, ilo + kBlock);
                for (std::uint64_t i = ilo; i < ihi; ++i) {
                    stepper.reset(origin, cfg.stream_id + i);
                    double sup = phase_norm(origin.q, origin.p);
                    sup *= sup;
                    {
                        const double e2 = origin.q.squaredNorm() + origin.p.squaredNorm();
                        bsum[0] += e2;
                        bsq[0] += e2 * e2;
                    }
                    std::uint64_t k = 0;
                    bool more = true;
                    while (more) {
                        more = stepper.advance();
                        ++k;
                        const auto& s = stepper.state();
                        double ph = phase_norm(s.q, s.p);
                        ph *= ph;
                        sup = std::max(sup, ph);
                        const double e2 = s.q.squaredNorm() + s.p.squaredNorm();
                        bsum[k] += e2;
                        bsq[k] += e2 * e2;
                    }
                    sup_sq[i] = sup;
                    // pad unreached steps so the per-step means stay balanced
                    for (std::uint64_t rest = k + 1; rest <= n_steps; ++rest) {
                        const auto& s = stepper.state();
                        const double e2 = s.q.squaredNorm() + s.p.squaredNorm();
                        bsum[rest] += e2;
                        bsq[rest] += e2 * e2;
                    }
                }
            }
        });

        MomentRow row;
        row.label = model->name();
        row.e_sup_sq = mean(sup_sq);
        row.se = std::sqrt(sample_variance(sup_sq) / static_cast<double>(n_samples));

        const double n_d = static_cast<double>(n_samples);
        double best_mean = -1.0;
        double best_se = 0.0;
        for (std::uint64_t k = 0; k <= n_steps; ++k) {
            double s1 = 0.0, s2 = 0.0;
            for (std::uint64_t b = 0; b < n_blocks; ++b) {
                s1 += block_sum[b][k];
                s2 += block_sq[b][k];
            }
            const double m = s1 / n_d;
            if (m > best_mean) {
                best_mean = m;
                const double var = std::max(0.0, s2 / n_d - m * m);
                best_se = std::sqrt(var / n_d);
            }
        }
        row.sup_mean_sq = best_mean;
        row.sup_mean_se = best_se;
        rep.rows.push_back(std::move(row));
    }

    std::vector<std::size_t> order(rep.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rep.rows[a].e_sup_sq < rep.rows[b].e_sup_sq;
    });
    const auto& med = rep.rows[order[(order.size() - 1) / 2]];
    const auto& top = rep.rows[order.back()];
    rep.max_value = top.e_sup_sq;
    rep.median_value = med.e_sup_sq;
    rep.band_pass = (top.e_sup_sq - med.e_sup_sq) <=
                    3.0 * std::sqrt(top.se * top.se + med.se * med.se);
    return rep;
}

}  // namespace kqsd
