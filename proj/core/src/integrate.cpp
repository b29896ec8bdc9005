#include "kqsd/integrate.hpp"

#include "kqsd/errors.hpp"
#include "kqsd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kqsd {

void IntegratorConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw ParameterError("IntegratorConfig: dt must be positive and finite");
    if (!(max_time > 0.0) || !std::isfinite(max_time))
        throw ParameterError("IntegratorConfig: max_time must be positive and finite");
}

Scheme resolve_scheme(const CoefficientModel& model, const IntegratorConfig& cfg) {
    if (cfg.scheme != Scheme::auto_select) return cfg.scheme;
    return model.langevin() ? Scheme::langevin_splitting : Scheme::euler_maruyama;
}

namespace {

constexpr double kBlowUpLimit = 1e12;

bool component_blow_up(const Vec& v) {
    for (int i = 0; i < v.size(); ++i)
        if (!(std::abs(v[i]) <= kBlowUpLimit)) return true;
    return false;
}

}  // namespace

Stepper::Stepper(const CoefficientModel& model, const CylindricalDomain& domain,
                 const IntegratorConfig& cfg, NoiseSource* noise_override)
    : model_(model),
      domain_(domain),
      cfg_(cfg),
      scheme_(resolve_scheme(model, cfg)),
      override_(noise_override),
      rng_(cfg.seed, cfg.stream_id, static_cast<unsigned>(model.dim())) {
    cfg_.validate();
    if (domain_.dim() != model_.dim())
        throw ParameterError("Stepper: domain and model dimensions differ");
    if (scheme_ == Scheme::langevin_splitting) {
        if (!model_.langevin())
            throw ParameterError(
                "Stepper: langevin_splitting requires a model with Langevin form");
        const auto& form = *model_.langevin();
        ou_decay_ = std::exp(-form.gamma * cfg_.dt);
        ou_kick_ = std::sqrt(form.kT * (1.0 - ou_decay_ * ou_decay_));
    }
    const int d = model_.dim();
    f_.resize(d);
    q_prev_.resize(d);
    p_prev_.resize(d);
    q_mid_.resize(d);
    x_buf_.resize(d);
    sigma_mat_.resize(d, d);
    state_ = KineticState{Vec::Zero(d), Vec::Zero(d), 0.0};
}

void Stepper::reset(const KineticState& start, std::uint64_t stream) {
    if (start.dim() != model_.dim())
        throw ParameterError("Stepper: start state has wrong dimension");
    if (!start.finite()) throw ParameterError("Stepper: start state is not finite");
    if (!domain_.contains(start.q))
        throw DomainError("Stepper: start position is not inside the domain");
    state_ = start;
    rng_ = CounterRng(cfg_.seed, stream, static_cast<unsigned>(model_.dim()));
    exit_.reset();
    step_ = 0;
    const double remaining = cfg_.max_time - start.t;
    if (remaining <= 0.0) {
        n_steps_ = 0;
        finished_ = true;
        return;
    }
    n_steps_ = static_cast<std::uint64_t>(std::ceil(remaining / cfg_.dt - 1e-9));
    if (n_steps_ == 0) n_steps_ = 1;
    finished_ = false;
}

void Stepper::reset_at(const KineticState& start, std::uint64_t stream,
                       std::uint64_t step_index) {
    if (start.dim() != model_.dim())
        throw ParameterError("Stepper: start state has wrong dimension");
    if (!start.finite()) throw ParameterError("Stepper: start state is not finite");
    if (!domain_.contains(start.q))
        throw DomainError("Stepper: start position is not inside the domain");
    state_ = start;
    rng_ = CounterRng(cfg_.seed, stream, static_cast<unsigned>(model_.dim()));
    exit_.reset();
    step_ = step_index;
    n_steps_ = step_index + 1;
    finished_ = false;
}

void Stepper::classify_exit(const Vec& q_on_boundary, const Vec& p_transport,
                            double time, bool located) {
    ExitRecord rec;
    rec.exit_time = time;
    const Vec n = domain_.outward_normal(q_on_boundary);
    const double pn = p_transport.dot(n);
    rec.classification = pn > tangential_threshold(p_transport.norm())
                             ? ExitClass::outgoing
                             : ExitClass::tangential;
    rec.exit_state = KineticState{q_on_boundary, p_transport, time};
    rec.crossed_at_substep = located;
    exit_ = std::move(rec);
    state_ = exit_->exit_state;
    finished_ = true;
}

// Called with state_.q at the end of a position substep that started at
// q_mid_ and transported with state_.p for duration h.  Locates the first
// boundary crossing by bisection; the signed distance is concave along
// segments for every supported domain shape, so the crossing is unique.
bool Stepper::position_substep(double h, double t_at_substep_start) {
    if (domain_.never_exits()) return false;
    if (!state_.q.allFinite())
        throw IntegratorError(
            "trajectory left the representable range during a position update",
            KineticState{q_mid_, p_prev_, t_at_substep_start});
    if (domain_.contains(state_.q)) return false;
    if (cfg_.crossing == CrossingRule::endpoint_only) return false;

    double lo = 0.0;
    double hi = 1.0;
    for (int iter = 0; iter < 60; ++iter) {
        const double mid = 0.5 * (lo + hi);
        x_buf_ = q_mid_ + (mid * h) * state_.p;
        if (domain_.signed_distance(x_buf_) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double tau = t_at_substep_start + hi * h;
    x_buf_ = q_mid_ + (hi * h) * state_.p;
    classify_exit(domain_.project_to_boundary(x_buf_), state_.p, tau, true);
    return true;
}

void Stepper::guard_blow_up() {
    if (component_blow_up(state_.q) || component_blow_up(state_.p) ||
        !state_.q.allFinite() || !state_.p.allFinite())
        throw IntegratorError(
            "trajectory component exceeded the blow-up guard",
            KineticState{q_prev_, p_prev_, state_.t - cfg_.dt});
}

bool Stepper::advance() {
    if (finished_) return false;
    const double t0 = state_.t;
    const double dt = cfg_.dt;
    q_prev_ = state_.q;
    p_prev_ = state_.p;

    if (scheme_ == Scheme::euler_maruyama) {
        model_.eval_F(state_.q, state_.p, f_);
        // transport with step-start momentum, then kick
        q_mid_ = state_.q;
        state_.q += dt * state_.p;
        if (position_substep(dt, t0)) return false;

        const double sqrt_dt = std::sqrt(dt);
        const auto iso = model_.sigma_isotropic(q_prev_, p_prev_);
        if (iso) {
            const double scale = *iso * sqrt_dt;
            for (int i = 0; i < state_.p.size(); ++i)
                state_.p[i] += dt * f_[i] +
                               scale * (override_ ? override_->normal(step_, i)
                                                  : rng_.normal(step_, i));
        } else {
            model_.eval_sigma(q_prev_, p_prev_, sigma_mat_);
            for (int i = 0; i < state_.p.size(); ++i)
                x_buf_[i] =
                    override_ ? override_->normal(step_, i) : rng_.normal(step_, i);
            state_.p += dt * f_;
            state_.p.noalias() += sqrt_dt * (sigma_mat_ * x_buf_);
        }
    } else {
        const auto& form = *model_.langevin();
        const double half = 0.5 * dt;

        form.force->eval(state_.q, state_.p, f_);
        state_.p += half * f_;

        q_mid_ = state_.q;
        state_.q += half * state_.p;
        if (position_substep(half, t0)) return false;

        for (int i = 0; i < state_.p.size(); ++i)
            state_.p[i] =
                ou_decay_ * state_.p[i] +
                ou_kick_ * (override_ ? override_->normal(step_, i)
                                      : rng_.normal(step_, i));

        q_mid_ = state_.q;
        state_.q += half * state_.p;
        if (position_substep(half, t0 + half)) return false;

        form.force->eval(state_.q, state_.p, f_);
        state_.p += half * f_;
    }

    ++step_;
    state_.t = t0 + dt;
    guard_blow_up();

    if (cfg_.crossing == CrossingRule::endpoint_only && !domain_.never_exits() &&
        !domain_.contains(state_.q)) {
        classify_exit(domain_.project_to_boundary(state_.q), state_.p, state_.t, false);
        return false;
    }
    if (step_ >= n_steps_) finished_ = true;
    return !finished_;
}

KineticState step(const CoefficientModel& model, const IntegratorConfig& cfg,
                  const KineticState& from, NoiseSource& noise,
                  std::uint64_t step_index) {
    cfg.validate();
    if (from.dim() != model.dim())
        throw ParameterError("step: state has wrong dimension");
    const Scheme scheme = resolve_scheme(model, cfg);
    const double dt = cfg.dt;
    const int d = model.dim();
    KineticState out = from;

    if (scheme == Scheme::euler_maruyama) {
        Vec drift(d), xi(d);
        model.eval_F(from.q, from.p, drift);
        for (int i = 0; i < d; ++i) xi[i] = noise.normal(step_index, i);
        out.q = from.q + dt * from.p;
        const double sqrt_dt = std::sqrt(dt);
        const auto iso = model.sigma_isotropic(from.q, from.p);
        if (iso) {
            out.p = from.p + dt * drift + (*iso * sqrt_dt) * xi;
        } else {
            Mat sig(d, d);
            model.eval_sigma(from.q, from.p, sig);
            out.p = from.p + dt * drift + sqrt_dt * (sig * xi);
        }
    } else {
        if (!model.langevin())
            throw ParameterError("step: langevin_splitting requires a Langevin form");
        const auto& form = *model.langevin();
        const double c1 = std::exp(-form.gamma * dt);
        const double c2 = std::sqrt(form.kT * (1.0 - c1 * c1));
        const double half = 0.5 * dt;
        Vec buf(d);
        form.force->eval(out.q, out.p, buf);
        out.p += half * buf;
        out.q += half * out.p;
        for (int i = 0; i < d; ++i)
            out.p[i] = c1 * out.p[i] + c2 * noise.normal(step_index, i);
        out.q += half * out.p;
        form.force->eval(out.q, out.p, buf);
        out.p += half * buf;
    }
    out.t = from.t + dt;
    if (!out.finite())
        throw IntegratorError("step produced a non-finite state", from);
    return out;
}

TrajectoryOutcome simulate_until_exit(const CoefficientModel& model,
                                      const CylindricalDomain& domain,
                                      const IntegratorConfig& cfg,
                                      const KineticState& start,
                                      NoiseSource* noise_override) {
    Stepper stepper(model, domain, cfg, noise_override);
    stepper.reset(start, cfg.stream_id);
    while (stepper.advance()) {
    }
    TrajectoryOutcome out;
    if (stepper.exited()) out.exit = stepper.exit_record();
    out.final_state = stepper.state();
    out.steps = stepper.steps_taken();
    return out;
}

StartSampler point_start(KineticState state) {
    return [state](std::uint64_t) { return state; };
}

StartSampler gaussian_start(KineticState mean, double std_q, double std_p,
                            std::uint64_t seed) {
    if (std_q < 0.0 || std_p < 0.0)
        throw ParameterError("gaussian_start: spreads must be non-negative");
    const int d = mean.dim();
    return [mean, std_q, std_p, seed, d](std::uint64_t idx) {
        CounterRng rng(seed, streams::initial, static_cast<unsigned>(2 * d));
        KineticState s = mean;
        for (int i = 0; i < d; ++i) {
            s.q[i] += std_q * rng.normal(idx, static_cast<unsigned>(i));
            s.p[i] += std_p * rng.normal(idx, static_cast<unsigned>(d + i));
        }
        return s;
    };
}

StartSampler box_start(Vec q_lo, Vec q_hi, Vec p_lo, Vec p_hi, std::uint64_t seed) {
    const auto d = q_lo.size();
    if (q_hi.size() != d || p_lo.size() != d || p_hi.size() != d)
        throw ParameterError("box_start: bound dimensions differ");
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(q_lo[i] <= q_hi[i]) || !(p_lo[i] <= p_hi[i]))
            throw ParameterError("box_start: lower bound exceeds upper bound");
    return [q_lo, q_hi, p_lo, p_hi, seed, d](std::uint64_t idx) {
        CounterRng rng(seed, streams::initial, static_cast<unsigned>(2 * d));
        Vec q(d), p(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            q[i] = q_lo[i] + (q_hi[i] - q_lo[i]) *
                                 rng.uniform(idx, static_cast<unsigned>(i));
            p[i] = p_lo[i] + (p_hi[i] - p_lo[i]) *
                                 rng.uniform(idx, static_cast<unsigned>(d + i));
        }
        return KineticState{std::move(q), std::move(p), 0.0};
    };
}

void run_samples(const CoefficientModel& model, const CylindricalDomain& domain,
                 const IntegratorConfig& cfg, const StartSampler& start,
                 std::uint64_t n_samples, const ThreadPool& pool,
                 const std::function<void(std::uint64_t, TrajectoryOutcome&&)>& sink) {
    pool.parallel_for(n_samples, [&](std::uint64_t lo, std::uint64_t hi) {
        Stepper stepper(model, domain, cfg, nullptr);
        for (std::uint64_t idx = lo; idx < hi; ++idx) {
            stepper.reset(start(idx), cfg.stream_id + idx);
            while (stepper.advance()) {
            }
            TrajectoryOutcome out;
            if (stepper.exited()) out.exit = stepper.exit_record();
            out.final_state = stepper.state();
            out.steps = stepper.steps_taken();
            sink(idx, std::move(out));
        }
    });
}

SurvivalCurve survival_probability(const CoefficientModel& model,
                                   const CylindricalDomain& domain,
                                   const IntegratorConfig& cfg, const StartSampler& start,
                                   std::uint64_t n_samples, std::vector<double> time_grid,
                                   const ThreadPool& pool) {
    if (time_grid.empty()) throw ParameterError("survival_probability: empty time grid");
    for (std::size_t i = 0; i < time_grid.size(); ++i) {
        if (!(time_grid[i] > 0.0))
            throw ParameterError("survival_probability: grid times must be positive");
        if (i > 0 && !(time_grid[i] > time_grid[i - 1]))
            throw ParameterError("survival_probability: grid must be strictly increasing");
    }
    if (n_samples == 0) throw ParameterError("survival_probability: need samples");

    IntegratorConfig run_cfg = cfg;
    run_cfg.max_time = time_grid.back();

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> exit_times(n_samples, inf);
    run_samples(model, domain, run_cfg, start, n_samples, pool,
                [&](std::uint64_t idx, TrajectoryOutcome&& out) {
                    if (out.exit) exit_times[idx] = out.exit->exit_time;
                });

    constexpr double z95 = 1.959963984540054;
    SurvivalCurve curve;
    curve.t = std::move(time_grid);
    curve.n_samples = n_samples;
    curve.p_hat.reserve(curve.t.size());
    curve.ci_lo.reserve(curve.t.size());
    curve.ci_hi.reserve(curve.t.size());
    for (double tj : curve.t) {
        std::uint64_t alive = 0;
        for (double et : exit_times)
            if (et > tj) ++alive;
        curve.p_hat.push_back(static_cast<double>(alive) /
                              static_cast<double>(n_samples));
        const Interval ci = wilson_interval(alive, n_samples, z95);
        curve.ci_lo.push_back(ci.lo);
        curve.ci_hi.push_back(ci.hi);
    }
    return curve;
}

}  // namespace kqsd
