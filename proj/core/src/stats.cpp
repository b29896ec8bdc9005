#include "kqsd/stats.hpp"

#include "kqsd/errors.hpp"
#include "kqsd/rng.hpp"

#include <algorithm>
#include <cmath>

namespace kqsd {

Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z) {
    if (z <= 0.0) throw ParameterError("wilson_interval: z must be positive");
    if (k > n) throw ParameterError("wilson_interval: k exceeds n");
    if (n == 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double ph = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = nn + z2;
    const double center = (static_cast<double>(k) + 0.5 * z2) / denom;
    const double half = z / denom * std::sqrt(ph * (1.0 - ph) * nn + 0.25 * z2);
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double kolmogorov_q(double x) {
    if (!(x > 0.0)) return 1.0;
    if (x < 1.18) {
        // theta-function form converges fast for small x
        const double v = M_PI * M_PI / (8.0 * x * x);
        double cdf = 0.0;
        for (int j = 1; j < 80; j += 2) {
            const double term = std::exp(-static_cast<double>(j) * j * v);
            cdf += term;
            if (term < 1e-18 * cdf) break;
        }
        cdf *= std::sqrt(2.0 * M_PI) / x;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double q = 0.0;
    double sign = 1.0;
    for (int j = 1; j < 200; ++j) {
        const double term = std::exp(-2.0 * static_cast<double>(j) * j * x * x);
        q += sign * term;
        sign = -sign;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * q, 0.0, 1.0);
}

namespace {

double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw ParameterError("gamma_p: need a > 0 and x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw ParameterError("gamma_q: need a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi2_sf(double x, int dof) {
    if (dof <= 0) throw ParameterError("chi2_sf: dof must be positive");
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * x);
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
    if (samples.empty()) throw ParameterError("ks_statistic: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        const double hi = (static_cast<double>(i) + 1.0) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    return d;
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    const std::uint64_t n = samples.size();
    const double d = ks_statistic(std::move(samples), cdf);
    const double rn = std::sqrt(static_cast<double>(n));
    const double t = (rn + 0.12 + 0.11 / rn) * d;
    return {d, kolmogorov_q(t), n};
}

ExponentialFit exponential_ks_fit(const std::vector<double>& samples,
                                  std::uint64_t bootstrap_rounds, std::uint64_t seed,
                                  double horizon, std::uint64_t n_censored) {
    if (samples.size() < 2) throw ParameterError("exponential_ks_fit: need at least 2 samples");
    const bool censored = std::isfinite(horizon);
    if (!censored && n_censored > 0)
        throw ParameterError("exponential_ks_fit: censored counts need a finite horizon");
    double total_obs = 0.0;
    for (double s : samples) {
        if (!(s >= 0.0) || !std::isfinite(s))
            throw ParameterError("exponential_ks_fit: samples must be finite and non-negative");
        if (censored && s > horizon)
            throw ParameterError("exponential_ks_fit: samples must not exceed the horizon");
        total_obs += s;
    }
    total_obs += static_cast<double>(n_censored) * (censored ? horizon : 0.0);
    if (total_obs <= 0.0)
        throw ParameterError("exponential_ks_fit: total observed time must be positive");
    const std::uint64_t n = samples.size();
    const double rate = static_cast<double>(n) / total_obs;
    // reference law for the uncensored part: Exp(r) truncated to [0, horizon]
    const auto exp_cdf = [censored, horizon](double r) {
        const double denom = censored ? -std::expm1(-r * horizon) : 1.0;
        return [r, denom](double x) {
            return x <= 0.0 ? 0.0 : -std::expm1(-r * x) / denom;
        };
    };
    const double d_obs = ks_statistic(samples, exp_cdf(rate));

    const std::uint64_t n_total = n + n_censored;
    std::uint64_t at_least = 0;
    CounterRng rng(seed, streams::bootstrap, n_total);
    std::vector<double> synth;
    synth.reserve(n);
    for (std::uint64_t b = 0; b < bootstrap_rounds; ++b) {
        synth.clear();
        double total_b = 0.0;
        for (std::uint64_t i = 0; i < n_total; ++i) {
            const double draw = -std::log1p(-rng.uniform(b, i)) / rate;
            if (censored && draw > horizon) {
                total_b += horizon;
            } else {
                synth.push_back(draw);
                total_b += draw;
            }
        }
        double d_b = 1.0;
        if (synth.size() >= 2 && total_b > 0.0) {
            const double rate_b = static_cast<double>(synth.size()) / total_b;
            d_b = ks_statistic(synth, exp_cdf(rate_b));
        }
        if (d_b >= d_obs) ++at_least;
    }
    const double p = (1.0 + static_cast<double>(at_least)) /
                     (1.0 + static_cast<double>(bootstrap_rounds));
    return {rate, d_obs, p, n, bootstrap_rounds};
}

Chi2Result chi2_independence(const std::vector<std::vector<std::uint64_t>>& table) {
    if (table.empty() || table.front().empty())
        throw ParameterError("chi2_independence: empty table");
    const std::size_t cols = table.front().size();
    for (const auto& row : table)
        if (row.size() != cols) throw ParameterError("chi2_independence: ragged table");

    std::vector<double> row_sum(table.size(), 0.0), col_sum(cols, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = static_cast<double>(table[i][j]);
            row_sum[i] += v;
            col_sum[j] += v;
            total += v;
        }
    if (total <= 0.0) throw ParameterError("chi2_independence: empty counts");

    const auto active_rows = static_cast<int>(
        std::count_if(row_sum.begin(), row_sum.end(), [](double s) { return s > 0.0; }));
    const auto active_cols = static_cast<int>(
        std::count_if(col_sum.begin(), col_sum.end(), [](double s) { return s > 0.0; }));
    const int dof = (active_rows - 1) * (active_cols - 1);
    if (dof <= 0) return {0.0, 1.0, 0};

    double stat = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double e = row_sum[i] * col_sum[j] / total;
            if (e <= 0.0) continue;
            const double diff = static_cast<double>(table[i][j]) - e;
            stat += diff * diff / e;
        }
    return {stat, chi2_sf(stat, dof), dof};
}

LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& variances) {
    if (x.size() != y.size() || x.size() != variances.size())
        throw ParameterError("weighted_line_fit: size mismatch");
    if (x.size() < 2) throw ParameterError("weighted_line_fit: need at least 2 points");
    double s = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(variances[i] > 0.0))
            throw ParameterError("weighted_line_fit: variances must be positive");
        const double w = 1.0 / variances[i];
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 0.0)) throw ParameterError("weighted_line_fit: degenerate abscissae");
    LineFit fit;
    fit.slope = (s * sxy - sx * sy) / det;
    fit.intercept = (sxx * sy - sx * sxy) / det;
    fit.se_slope = std::sqrt(s / det);
    fit.se_intercept = std::sqrt(sxx / det);
    return fit;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ParameterError("total_variation: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw ParameterError("mean: empty sample");
    double acc = 0.0;
    for (double v : xs) acc += v;
    return acc / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw ParameterError("sample_variance: need at least 2 samples");
    const double m = mean(xs);
    double acc = 0.0;
    for (double v : xs) acc += (v - m) * (v - m);
    return acc / (static_cast<double>(xs.size()) - 1.0);
}

double moving_block_bootstrap_se(const std::vector<double>& series,
                                 std::uint64_t block_len, std::uint64_t rounds,
                                 std::uint64_t seed) {
    const std::uint64_t n = series.size();
    if (n < 2) throw ParameterError("moving_block_bootstrap_se: need at least 2 points");
    if (rounds < 2) throw ParameterError("moving_block_bootstrap_se: need at least 2 rounds");
    const std::uint64_t len = std::clamp<std::uint64_t>(block_len, 1, n);
    const std::uint64_t blocks = (n + len - 1) / len;
    const std::uint64_t max_start = n - len;

    CounterRng rng(seed, streams::bootstrap, blocks);
    std::vector<double> means;
    means.reserve(rounds);
    for (std::uint64_t b = 0; b < rounds; ++b) {
        double acc = 0.0;
        std::uint64_t taken = 0;
        for (std::uint64_t j = 0; j < blocks && taken < n; ++j) {
            const auto start = static_cast<std::uint64_t>(
                rng.uniform(b, j) * static_cast<double>(max_start + 1));
            for (std::uint64_t k = 0; k < len && taken < n; ++k, ++taken)
                acc += series[std::min(start + k, n - 1)];
        }
        means.push_back(acc / static_cast<double>(n));
    }
    return std::sqrt(sample_variance(means));
}

}  // namespace kqsd
