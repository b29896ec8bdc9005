#pragma once

#include "kqsd/domain.hpp"
#include "kqsd/model.hpp"
#include "kqsd/parallel.hpp"
#include "kqsd/rng.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace kqsd {

enum class Scheme { auto_select, euler_maruyama, langevin_splitting };
enum class CrossingRule { substep_interpolation, endpoint_only };

struct IntegratorConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::auto_select;
    CrossingRule crossing = CrossingRule::substep_interpolation;
    double max_time = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    void validate() const;
};

// auto_select resolves to the splitting scheme exactly when the model carries
// a Langevin form.
Scheme resolve_scheme(const CoefficientModel& model, const IntegratorConfig& cfg);

enum class ExitClass { outgoing, tangential };

struct ExitRecord {
    double exit_time = 0.0;
    KineticState exit_state;           // q projected onto the boundary
    ExitClass classification = ExitClass::outgoing;
    bool crossed_at_substep = false;   // located by sub-step interpolation
};

struct TrajectoryOutcome {
    std::optional<ExitRecord> exit;
    KineticState final_state;
    std::uint64_t steps = 0;
};

// One-trajectory integrator with a reusable workspace.  Draws are addressed by
// (stream, step index), so outcomes depend only on (seed, stream, start).
class Stepper {
  public:
    Stepper(const CoefficientModel& model, const CylindricalDomain& domain,
            const IntegratorConfig& cfg, NoiseSource* noise_override = nullptr);

    void reset(const KineticState& start, std::uint64_t stream);
    void reset(const KineticState& start) { reset(start, cfg_.stream_id); }
    // Re-arms the stepper mid-stream: the next advance() consumes the noise of
    // step_index, and exactly one step is scheduled.  Particle systems use this
    // to keep every particle's draws addressed by the global epoch.
    void reset_at(const KineticState& start, std::uint64_t stream,
                  std::uint64_t step_index);

    // Advances one step.  Returns false once the trajectory has exited or
    // reached max_time; the state then stops changing.
    bool advance();

    bool exited() const { return exit_.has_value(); }
    const ExitRecord& exit_record() const { return *exit_; }
    const KineticState& state() const { return state_; }
    std::uint64_t steps_taken() const { return step_; }
    bool finished() const { return finished_; }

    double tangential_threshold(double p_norm) const { return 1e-8 * (1.0 + p_norm); }

  private:
    bool position_substep(double h, double t_at_substep_start);
    void classify_exit(const Vec& q_on_boundary, const Vec& p_transport, double time,
                       bool located);
    void guard_blow_up();

    const CoefficientModel& model_;
    const CylindricalDomain& domain_;
    IntegratorConfig cfg_;
    Scheme scheme_;
    NoiseSource* override_;
    CounterRng rng_;
    KineticState state_;
    std::optional<ExitRecord> exit_;
    bool finished_ = true;
    std::uint64_t step_ = 0;
    std::uint64_t n_steps_ = 0;
    double ou_decay_ = 0.0;
    double ou_kick_ = 0.0;
    Vec f_, q_prev_, p_prev_, q_mid_, x_buf_;
    Mat sigma_mat_;
};

// Single un-absorbed step of the chosen scheme (exposed for scheme tests).
KineticState step(const CoefficientModel& model, const IntegratorConfig& cfg,
                  const KineticState& from, NoiseSource& noise,
                  std::uint64_t step_index);

TrajectoryOutcome simulate_until_exit(const CoefficientModel& model,
                                      const CylindricalDomain& domain,
                                      const IntegratorConfig& cfg,
                                      const KineticState& start,
                                      NoiseSource* noise_override = nullptr);

// Deterministic start-state generator; sample index -> state.
using StartSampler = std::function<KineticState(std::uint64_t)>;

StartSampler point_start(KineticState state);
StartSampler gaussian_start(KineticState mean, double std_q, double std_p,
                            std::uint64_t seed);
StartSampler box_start(Vec q_lo, Vec q_hi, Vec p_lo, Vec p_hi, std::uint64_t seed);

// Runs n independent trajectories (stream = sample index) and hands each
// outcome to sink from the owning worker; sinks write disjoint slots.
void run_samples(const CoefficientModel& model, const CylindricalDomain& domain,
                 const IntegratorConfig& cfg, const StartSampler& start,
                 std::uint64_t n_samples, const ThreadPool& pool,
                 const std::function<void(std::uint64_t, TrajectoryOutcome&&)>& sink);

struct SurvivalCurve {
    std::vector<double> t;
    std::vector<double> p_hat;   // non-increasing by construction
    std::vector<double> ci_lo;   // Wilson bounds at the declared level
    std::vector<double> ci_hi;
    std::uint64_t n_samples = 0;
};

SurvivalCurve survival_probability(const CoefficientModel& model,
                                   const CylindricalDomain& domain,
                                   const IntegratorConfig& cfg, const StartSampler& start,
                                   std::uint64_t n_samples, std::vector<double> time_grid,
                                   const ThreadPool& pool);

}  // namespace kqsd
