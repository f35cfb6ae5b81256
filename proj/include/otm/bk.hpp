#pragma once

// Bayes-Kelly conformal test martingale against a fixed-changepoint Bernoulli
// alternative.
//
// The martingale bets, at step n, the conditional density of the next
// exchangeability p-value p_n under the alternative Q given p_1..p_{n-1}.
// Under Q the observations are independent given the time index and the
// p-value mechanics depend on the past only through k, the number of 1s among
// the first n - 1 observations. So a Bayes filter over k is exact:
//
//   z_n = 1 (prob q_n): p_n ~ U[(n-k-1)/n, 1], density n/(k+1)
//   z_n = 0 (prob 1-q_n): p_n ~ U[0, (n-k)/n], density n/(n-k)
//
//   f_n(p) = sum_k w(k) [ q_n n/(k+1) 1{p in upper branch}
//                       + (1-q_n) n/(n-k) 1{p in lower branch} ]
//
// with q_n = pi0 for n <= N0 and pi1 afterwards. Every branch endpoint is a
// multiple of 1/n, so f_n is constant on the n cells [j/n, (j+1)/n). Cells are
// half-open with the last one closed at 1; a p-value in cell j lies in the
// upper branch of k iff j >= n-k-1 and in the lower branch iff j < n-k.
//
// Under the null the p-values are i.i.d. uniform, so the running product of
// bets S_n = prod f_i(p_i) is a test martingale in the p-value filtration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "otm/compression.hpp"
#include "otm/evidence.hpp"
#include "otm/random.hpp"

namespace otm {

struct ChangepointAlternative {
    int N0 = 10;
    int N1 = 10;
    double pi0 = 0.1;
    double pi1 = 0.9;

    int horizon() const noexcept { return N0 + N1; }

    /// Probability of a 1 at (1-based) step n.
    double prob_one(int n) const noexcept { return n <= N0 ? pi0 : pi1; }

    /// Throws unless N0, N1 >= 0, N0 + N1 >= 1 and pi0, pi1 in (0,1).
    void validate() const
    {
        if (N0 < 0 || N1 < 0 || N0 + N1 < 1) throw std::invalid_argument("changepoint horizon must be positive");
        if (!(pi0 > 0.0 && pi0 < 1.0) || !(pi1 > 0.0 && pi1 < 1.0)) {
            throw std::invalid_argument("changepoint probabilities must lie strictly inside (0,1)");
        }
    }

    friend bool operator==(const ChangepointAlternative&, const ChangepointAlternative&) = default;
};

inline constexpr double kNormalizationTolerance = 1e-9;

/// Posterior over k, the number of 1s among the observations seen so far.
class CountPosterior {
public:
    /// Before any observation: k = 0 with certainty.
    CountPosterior() : weights_{1.0} {}

    explicit CountPosterior(std::vector<double> weights) : weights_(std::move(weights))
    {
        if (weights_.empty()) throw std::invalid_argument("count posterior needs at least one weight");
        double total = 0.0;
        for (double w : weights_) {
            if (std::isnan(w) || w < 0.0) throw std::invalid_argument("posterior weights must be nonnegative");
            total += w;
        }
        if (std::abs(total - 1.0) > kNormalizationTolerance) {
            throw std::invalid_argument("posterior weights must sum to 1");
        }
    }

    /// Observations absorbed so far (keys range over 0..n).
    int observations() const noexcept { return static_cast<int>(weights_.size()) - 1; }
    double operator[](int k) const { return weights_[static_cast<std::size_t>(k)]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

private:
    std::vector<double> weights_;
};

/// Piecewise-constant probability density on [0,1].
class BettingDensity {
public:
    /// breakpoints: 0 = b_0 < ... < b_m = 1; levels: m nonnegative values.
    BettingDensity(std::vector<double> breakpoints, std::vector<double> levels)
        : breakpoints_(std::move(breakpoints)), levels_(std::move(levels))
    {
        if (breakpoints_.size() < 2 || levels_.size() + 1 != breakpoints_.size()) {
            throw std::invalid_argument("betting density needs one level per interval");
        }
        if (breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0) {
            throw std::invalid_argument("betting density must cover [0,1]");
        }
        double mass = 0.0;
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            if (!(breakpoints_[i + 1] > breakpoints_[i])) {
                throw std::invalid_argument("breakpoints must be strictly increasing");
            }
            if (std::isnan(levels_[i]) || levels_[i] < 0.0) {
                throw std::invalid_argument("density levels must be nonnegative");
            }
            mass += levels_[i] * (breakpoints_[i + 1] - breakpoints_[i]);
        }
        if (std::abs(mass - 1.0) > kNormalizationTolerance) {
            throw numerical_error("betting density integrates to " + std::to_string(mass) + ", not 1");
        }
    }

    double integral() const noexcept
    {
        double mass = 0.0;
        for (std::size_t i = 0; i < levels_.size(); ++i) mass += levels_[i] * (breakpoints_[i + 1] - breakpoints_[i]);
        return mass;
    }

    /// Density at p, intervals half-open [b_i, b_{i+1}) with the last closed.
    double operator()(double p) const
    {
        if (!(p >= 0.0 && p <= 1.0)) return 0.0;
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), p);
        const auto cell = std::min<std::size_t>(static_cast<std::size_t>(it - breakpoints_.begin()) - 1,
                                                levels_.size() - 1);
        return levels_[cell];
    }

    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<double>& levels() const noexcept { return levels_; }

private:
    std::vector<double> breakpoints_;
    std::vector<double> levels_;
};

namespace detail {

inline void check_step(const CountPosterior& post, int n, const ChangepointAlternative& alt)
{
    alt.validate();
    if (n < 1 || n > alt.horizon()) throw std::invalid_argument("step index out of range");
    if (post.observations() != n - 1) {
        throw std::invalid_argument("posterior must summarize exactly n - 1 observations");
    }
}

/// Cell index j with p in [j/n, (j+1)/n); p = 1 maps to the last cell.
inline int p_cell(double p, int n) noexcept
{
    const int j = static_cast<int>(std::floor(p * n));
    return std::clamp(j, 0, n - 1);
}

}  // namespace detail

/// f_n for the posterior over the count after n - 1 observations.
inline BettingDensity predictive_density(const CountPosterior& post, int n, const ChangepointAlternative& alt)
{
    detail::check_step(post, n, alt);
    const double q = alt.prob_one(n);
    // Difference array over cells: upper branch of k covers cells n-k-1..n-1,
    // lower branch covers cells 0..n-k-1.
    std::vector<double> diff(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 0; k < n; ++k) {
        const double w = post[k];
        if (w == 0.0) continue;
        const double up = w * q * n / (k + 1.0);
        const double down = w * (1.0 - q) * n / static_cast<double>(n - k);
        diff[static_cast<std::size_t>(n - k - 1)] += up;
        diff[static_cast<std::size_t>(n)] -= up;
        diff[0] += down;
        diff[static_cast<std::size_t>(n - k)] -= down;
    }
    std::vector<double> breakpoints(static_cast<std::size_t>(n) + 1);
    std::vector<double> levels(static_cast<std::size_t>(n));
    double running = 0.0;
    for (int j = 0; j < n; ++j) {
        running += diff[static_cast<std::size_t>(j)];
        levels[static_cast<std::size_t>(j)] = std::max(running, 0.0);
        breakpoints[static_cast<std::size_t>(j)] = static_cast<double>(j) / n;
    }
    breakpoints.back() = 1.0;
    return BettingDensity(std::move(breakpoints), std::move(levels));
}

struct BkStep {
    CountPosterior posterior;
    double bet = 0.0;
};

/// One Bayes filter step: the bet f_n(p_n) and the posterior over the count
/// after n observations.
inline BkStep bk_update(const CountPosterior& post, PValue p, int n, const ChangepointAlternative& alt)
{
    detail::check_step(post, n, alt);
    const double q = alt.prob_one(n);
    const int cell = detail::p_cell(p.value(), n);
    std::vector<double> next(static_cast<std::size_t>(n) + 1, 0.0);
    double bet = 0.0;
    for (int k = 0; k < n; ++k) {
        const double w = post[k];
        if (w == 0.0) continue;
        if (cell >= n - k - 1) {
            const double term = w * q * n / (k + 1.0);
            next[static_cast<std::size_t>(k + 1)] += term;
            bet += term;
        }
        if (cell < n - k) {
            const double term = w * (1.0 - q) * n / static_cast<double>(n - k);
            next[static_cast<std::size_t>(k)] += term;
            bet += term;
        }
    }
    if (bet > 0.0) {
        for (double& v : next) v /= bet;
    } else {
        // Capital is lost for good; carry the prior count forward.
        std::copy(post.weights().begin(), post.weights().end(), next.begin());
    }
    return {CountPosterior(std::move(next)), bet};
}

struct BkOptions {
    /// Build the full BettingDensity at every step (validating that it
    /// integrates to 1) and take the bet from it.
    bool check_densities = false;
};

struct BkRun {
    EvidencePath path;
    std::vector<double> p_values;
};

/// Runs the BK martingale over `data`, drawing one tau per step.
inline BkRun bk_run_detailed(const BinarySequence& data, RandomizationStream& taus, const ChangepointAlternative& alt,
                             BkOptions options = {})
{
    alt.validate();
    if (static_cast<int>(data.size()) != alt.horizon()) {
        throw std::invalid_argument("data length must equal N0 + N1");
    }
    BkRun out;
    out.p_values.reserve(data.size());
    std::vector<double> path{1.0};
    path.reserve(data.size() + 1);

    CountPosterior post;
    ExchangeabilitySummary summary;
    double log_capital = 0.0;
    for (int n = 1; n <= alt.horizon(); ++n) {
        const int z = data[static_cast<std::size_t>(n - 1)];
        const PValue p = exch_p_value(summary, z, taus.uniform());
        summary = exch_forward(summary, z);
        out.p_values.push_back(p.value());

        BkStep step = bk_update(post, p, n, alt);
        if (options.check_densities) {
            const BettingDensity density = predictive_density(post, n, alt);
            const double from_density = density(p.value());
            if (std::abs(from_density - step.bet) > 1e-9 * std::max(1.0, step.bet)) {
                throw numerical_error("BK bet disagrees with its predictive density");
            }
        }
        log_capital += std::log(step.bet);
        path.push_back(evidence_from_log(log_capital));
        post = std::move(step.posterior);
    }
    out.path = EvidencePath(std::move(path));
    return out;
}

inline EvidencePath bk_run(const BinarySequence& data, RandomizationStream& taus, const ChangepointAlternative& alt,
                           BkOptions options = {})
{
    return bk_run_detailed(data, taus, alt, options).path;
}

/// Final values of `inner` independent BK runs on the same data. Run i draws
/// its taus from lane first_lane + i of `taus`' (seed, stream_id).
inline std::vector<double> bk_inner_finals(const BinarySequence& data, const ChangepointAlternative& alt,
                                           std::size_t inner, const RandomizationStream& taus,
                                           std::uint32_t first_lane = 0)
{
    if (inner < 1) throw std::invalid_argument("mean BK needs at least one inner run");
    std::vector<double> finals;
    finals.reserve(inner);
    for (std::size_t i = 0; i < inner; ++i) {
        RandomizationStream stream = taus.lane_stream(first_lane + static_cast<std::uint32_t>(i));
        finals.push_back(bk_run(data, stream, alt).final_value());
    }
    return finals;
}

inline constexpr std::size_t kDefaultInnerBk = 1000;

/// Average of `inner` independent BK finals on the same data (the tau-average
/// approximating E^tau S_N).
inline double mean_bk_final(const BinarySequence& data, const ChangepointAlternative& alt, std::size_t inner,
                            const RandomizationStream& taus, std::uint32_t first_lane = 0)
{
    const auto finals = bk_inner_finals(data, alt, inner, taus, first_lane);
    return std::accumulate(finals.begin(), finals.end(), 0.0) / static_cast<double>(finals.size());
}

}  // namespace otm
