#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace kqsd {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval for k successes out of n at normal quantile z.
Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z);

// Survival function of the Kolmogorov distribution, Q(x) = P(K > x).
double kolmogorov_q(double x);

// Upper tail of the chi-squared distribution with k degrees of freedom.
double chi2_sf(double x, int dof);

// Regularized incomplete gamma functions, P(a,x) + Q(a,x) = 1.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;   // finite-n corrected before the Kolmogorov tail
    std::uint64_t n = 0;
};

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

// KS test against Exp(rate) with the rate refit from the data; the p-value is
// calibrated by a parametric bootstrap because the plug-in null is biased.
// A finite horizon treats the samples as the uncensored part of a run with
// n_censored right-censored observations: the rate is the censored MLE and the
// reference law is the exponential truncated to [0, horizon].
struct ExponentialFit {
    double rate = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    std::uint64_t n = 0;
    std::uint64_t bootstrap_rounds = 0;
};

ExponentialFit exponential_ks_fit(
    const std::vector<double>& samples, std::uint64_t bootstrap_rounds,
    std::uint64_t seed,
    double horizon = std::numeric_limits<double>::infinity(),
    std::uint64_t n_censored = 0);

// Pearson chi-squared independence test on a contingency table (rows x cols).
struct Chi2Result {
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 0;
};

Chi2Result chi2_independence(const std::vector<std::vector<std::uint64_t>>& table);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double se_slope = 0.0;
    double se_intercept = 0.0;
};

// Weighted least squares y ~ intercept + slope * x with weights 1/var_i.
LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& variances);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

double mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);

// Standard error of the mean of a dependent series via moving-block bootstrap.
double moving_block_bootstrap_se(const std::vector<double>& series,
                                 std::uint64_t block_len, std::uint64_t rounds,
                                 std::uint64_t seed);

}  // namespace kqsd
