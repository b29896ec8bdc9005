#pragma once

#include "kqsd/domain.hpp"
#include "kqsd/integrate.hpp"
#include "kqsd/model.hpp"
#include "kqsd/parallel.hpp"
#include "kqsd/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace kqsd {

// Uniform product partition of a phase-space window [q_lo,q_hi] x [p_lo,p_hi].
// States outside the window land in a single overflow cell (index -1).
struct PhaseBinning {
    Vec q_lo, q_hi, p_lo, p_hi;
    int bins_per_axis = 40;

    static PhaseBinning uniform(Vec q_lo, Vec q_hi, Vec p_lo, Vec p_hi,
                                int bins_per_axis = 40);

    int dim() const { return static_cast<int>(q_lo.size()); }
    std::size_t total_bins() const;
    // -1 for any coordinate outside the window
    long index(const Vec& q, const Vec& p) const;
    long index(const KineticState& s) const { return index(s.q, s.p); }
    void center(std::size_t bin, Vec& q, Vec& p) const;
    void bounds(std::size_t bin, Vec& q_lo_out, Vec& q_hi_out, Vec& p_lo_out,
                Vec& p_hi_out) const;
    bool compatible(const PhaseBinning& other) const;
};

// Normalized weights over a binning window plus the overflow cell;
// window weights + overflow sum to one.
struct BinnedMeasure {
    PhaseBinning binning;
    std::vector<double> weights;
    double overflow = 0.0;

    double mass_in_window() const;
};

// 1/2 the L1 distance between two measures on the same partition
// (overflow cell included).
double binned_tv(const BinnedMeasure& a, const BinnedMeasure& b);

struct QsdEstimate {
    BinnedMeasure measure;
    double lambda0_hat = 0.0;
    double lambda0_se = 0.0;
    double burn_in = 0.0;
    std::uint64_t n_particles = 0;
    double horizon = 0.0;
    double dt = 0.0;
    std::uint64_t kill_count = 0;          // cumulative resampling events
    std::uint64_t kills_post_burnin = 0;
};

struct FvConfig {
    IntegratorConfig integrator;          // max_time is ignored; horizon rules
    double horizon = 10.0;
    double burn_in = 0.0;
    PhaseBinning binning;
    std::uint64_t accumulate_every = 10;  // epochs between histogram deposits
    std::uint64_t record_every = 0;       // epochs between series snapshots (0 = none)
    std::uint64_t bootstrap_rounds = 200;
};

struct FvSeriesPoint {
    double t = 0.0;
    BinnedMeasure measure;
};

struct FvResult {
    QsdEstimate estimate;
    std::vector<FvSeriesPoint> series;
    std::vector<std::uint32_t> kills_per_epoch;
    std::vector<KineticState> final_states;
};

// Synchronized interacting-particle estimator of the conditioned law: exited
// particles are replaced, in ascending index, by copies of uniformly chosen
// survivors, and the post-burn-in occupation histogram estimates the QSD.
FvResult fleming_viot_run(const StartSampler& initial, const CoefficientModel& model,
                          const CylindricalDomain& domain, std::uint64_t n_particles,
                          const FvConfig& config, ThreadPool& pool);

struct CmcConfig {
    IntegratorConfig integrator;          // max_time is ignored; horizon rules
    PhaseBinning binning;
    std::uint64_t pilot_n = 2000;
    // when positive, the run is scaled down to the sample count expected to
    // yield this many survivors (never above the requested n)
    std::uint64_t target_survivors = 0;
};

struct CmcResult {
    BinnedMeasure measure;                // law of X_t conditioned on survival
    double survival_fraction = 0.0;
    std::uint64_t n_samples = 0;          // trajectories actually run
    std::uint64_t n_survivors = 0;
};

// Brute-force oracle: independent trajectories, survivors at the horizon binned.
CmcResult conditioned_mc(const StartSampler& start, const CoefficientModel& model,
                         const CylindricalDomain& domain, double horizon,
                         std::uint64_t n_samples, const CmcConfig& config,
                         ThreadPool& pool);

struct DecayEstimate {
    double lambda0_hat = 0.0;
    double stderror = 0.0;
    double burn_in = 0.0;
    std::size_t points_used = 0;
};

// Weighted least squares on log survival over the stable tail window; the
// burn-in is the earliest onset whose local slope has settled within 1 stderr.
DecayEstimate estimate_decay_rate(const SurvivalCurve& curve);

// Samples a bin by weight (window cells only), then uniformly inside the bin.
StartSampler start_from_estimate(const QsdEstimate& est, std::uint64_t seed);

}  // namespace kqsd
