#pragma once

#include "kqsd/domain.hpp"
#include "kqsd/integrate.hpp"
#include "kqsd/lyapunov.hpp"
#include "kqsd/model.hpp"
#include "kqsd/parallel.hpp"
#include "kqsd/qsd.hpp"
#include "kqsd/stats.hpp"
#include "kqsd/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kqsd {

struct StatTestReport {
    std::string test_name;
    double statistic = 0.0;
    std::optional<double> p_value;   // in [0,1] when present
    bool passed = false;
    bool asserted = true;            // informational rows never gate a battery
    double slack = 0.0;              // for pass/fail-with-slack style checks
    std::uint64_t sample_size = 0;
    std::string config;              // provenance: seed, dt, n, level

    std::string to_json() const;
};

std::string reports_to_json(const std::vector<StatTestReport>& reports);
bool all_asserted_passed(const std::vector<StatTestReport>& reports);

// Too few boundary exits to run the exit-law battery.
struct InsufficientExitsError : Error {
    std::uint64_t exits;
    double survival_fraction;
    InsufficientExitsError(std::uint64_t got, double fraction)
        : Error("only " + std::to_string(got) +
                " exits within the horizon (survival fraction " +
                std::to_string(fraction) + ")"),
          exits(got),
          survival_fraction(fraction) {}
};

struct ExitLawConfig {
    IntegratorConfig integrator;      // max_time is ignored; horizon rules
    double horizon = 20.0;            // collection window
    double level = 0.01;              // battery level, Bonferroni-split inside
    std::uint64_t bootstrap_rounds = 300;
    // plug-in rate for the second KS variant; NaN skips it
    double lambda0_plugin = std::numeric_limits<double>::quiet_NaN();
    // flips the KS assertion: the battery then passes when KS rejects
    bool negative_control = false;
    std::uint64_t min_exits = 200;
};

// Exit times and exit points from a sampler meant to approximate the QSD:
// exponential-fit KS, exit-side vs exit-time-quartile independence, and
// split-sample memorylessness ratios.
std::vector<StatTestReport> exit_law_battery(const StartSampler& qsd_sampler,
                                             const CoefficientModel& model,
                                             const CylindricalDomain& domain,
                                             std::uint64_t n_samples,
                                             const ExitLawConfig& config,
                                             ThreadPool& pool);

struct HarnackRow {
    double t = 0.0;
    double u_num_max = 0.0;     // max over K-grid of u_A(t, x)
    double u_den_min = 0.0;     // min over K-grid of u_A(t+T, x)
    Interval num_ci;            // Wilson 99% of the extremal estimates
    Interval den_ci;
    double ratio = 0.0;
    double ratio_lo = 0.0;
    double ratio_hi = 0.0;
    bool conclusive = false;    // denominator bounded away from zero
};

struct HarnackReport {
    std::vector<HarnackRow> rows;
    bool all_conclusive = false;
    double factor_spread = 0.0;  // max ratio / min ratio over conclusive rows
    std::uint64_t n_samples_per_start = 0;
    std::size_t n_starts = 0;
    std::string config;

    std::string to_json() const;
};

struct HarnackConfig {
    IntegratorConfig integrator;  // max_time is ignored
    int k_grid_per_axis = 5;
};

// P_x(t < tau, X_t in A) ratio table across a start grid and a time lag.
HarnackReport harnack_ratio_scan(const CompactSet& a_set, const CompactSet& k_set,
                                 const CoefficientModel& model,
                                 const CylindricalDomain& domain,
                                 const std::vector<double>& times, double lag,
                                 std::uint64_t n_samples, const HarnackConfig& config,
                                 ThreadPool& pool);

struct DobrushinConfig {
    IntegratorConfig integrator;  // max_time is ignored
    int k_grid_per_axis = 3;
    int bins_per_axis = 4;        // reference binning of K's bounding box
};

struct DobrushinReport {
    double c1 = 0.0;                  // mass of the bin minima
    std::vector<double> nu_weights;   // normalized bin minima, empty when inconclusive
    std::vector<double> bin_minima;
    PhaseBinning binning;
    bool inconclusive = false;
    std::size_t n_starts = 0;
    std::uint64_t n_samples_per_start = 0;
    std::string config;

    std::string to_json() const;
};

// Minorization probe: uniform-over-starts lower bound on the killed kernel.
DobrushinReport dobrushin_probe(const CompactSet& k_set, const CoefficientModel& model,
                                const CylindricalDomain& domain, double t1,
                                std::uint64_t n_samples, const DobrushinConfig& config,
                                ThreadPool& pool);

struct F2Row {
    KineticState start;
    double lhs = 0.0;       // mean of 1{t2 < tau_K ^ tau_D} psi1(X_t2)
    double se = 0.0;
    double bound = 0.0;     // e^{-alpha1 t2} psi1(start)
    double slack = 0.0;     // lhs - bound
    bool passed = false;    // lhs <= bound + z99 se
};

struct F2Report {
    std::vector<F2Row> rows;
    bool all_passed = false;
    double alpha1 = 0.0;
    double t2 = 0.0;
    std::string config;

    std::string to_json() const;
};

struct F2Config {
    IntegratorConfig integrator;  // max_time is ignored
};

// Checks the killed-semigroup contraction of psi1 outside K by simulation.
F2Report f2_lyapunov_probe(const TestFunction& psi1, const CompactSet& k_set,
                           const CoefficientModel& model,
                           const CylindricalDomain& domain, double t2, double alpha1,
                           const std::vector<KineticState>& starts,
                           std::uint64_t n_samples, const F2Config& config,
                           ThreadPool& pool);

struct MomentRow {
    std::string label;
    double e_sup_sq = 0.0;        // E[ sup_{s<=t} (|q|+|p|)^2 ]
    double se = 0.0;
    double sup_mean_sq = 0.0;     // sup_{s<=t} of per-step mean of |q|^2+|p|^2
    double sup_mean_se = 0.0;     // se at the extremal step
};

struct MomentReport {
    std::vector<MomentRow> rows;
    double max_value = 0.0;
    double median_value = 0.0;
    bool band_pass = false;   // max within 3 combined se of the median
    std::string config;

    std::string to_json() const;
};

struct MomentConfig {
    IntegratorConfig integrator;  // max_time is ignored
};

// Pathwise second-moment scan across a model family (e.g. mollification levels).
MomentReport moment_bound_scan(
    const std::vector<std::shared_ptr<const CoefficientModel>>& family,
    const KineticState& start, double horizon, std::uint64_t n_samples,
    const MomentConfig& config, ThreadPool& pool);

}  // namespace kqsd
