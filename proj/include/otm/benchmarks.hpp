#pragma once

// Likelihood-ratio benchmarks for the changepoint alternative and the
// finite-horizon naturalization of a reduced-filtration e-variable by backward
// conditional averaging.
//
// All benchmark formulas depend on the data only through the sufficient pair
// (k0, k1) of 1-counts before and after the changepoint, and are evaluated in
// log space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "otm/bk.hpp"
#include "otm/evidence.hpp"
#include "otm/special.hpp"

namespace otm {

/// 1-counts of a (possibly partial) dataset split at the changepoint.
struct SegmentCounts {
    int n0 = 0;  // observations before the changepoint
    int k0 = 0;
    int n1 = 0;  // observations after it
    int k1 = 0;

    int n() const noexcept { return n0 + n1; }
    int K() const noexcept { return k0 + k1; }
};

inline SegmentCounts segment_counts(const BinarySequence& data, const ChangepointAlternative& alt)
{
    if (static_cast<int>(data.size()) > alt.horizon()) {
        throw std::invalid_argument("data longer than the alternative's horizon");
    }
    SegmentCounts c;
    c.n0 = std::min(static_cast<int>(data.size()), alt.N0);
    c.n1 = static_cast<int>(data.size()) - c.n0;
    c.k0 = data.count_ones(static_cast<std::size_t>(c.n0));
    c.k1 = data.count_ones() - c.k0;
    return c;
}

/// log Q(z_1..z_n) under the changepoint alternative.
inline double log_alternative_probability(const SegmentCounts& c, const ChangepointAlternative& alt)
{
    return xlogy(c.k0, alt.pi0) + xlogy(c.n0 - c.k0, 1.0 - alt.pi0) + xlogy(c.k1, alt.pi1) +
           xlogy(c.n1 - c.k1, 1.0 - alt.pi1);
}

/// log sup_theta theta^K (1-theta)^(n-K), attained at theta = K/n (0^0 = 1).
inline double log_bernoulli_max_likelihood(int n, int K)
{
    if (n == 0) return 0.0;
    const double nd = n;
    return xlogy(K, K / nd) + xlogy(n - K, (n - K) / nd);
}

inline double lower_benchmark(const SegmentCounts& c, const ChangepointAlternative& alt)
{
    alt.validate();
    return evidence_from_log(log_alternative_probability(c, alt) - log_bernoulli_max_likelihood(c.n(), c.K()));
}

/// inf_theta Q(z_1..z_n) / B_theta(z_1..z_n).
inline double lower_benchmark(const BinarySequence& data, const ChangepointAlternative& alt)
{
    return lower_benchmark(segment_counts(data, alt), alt);
}

inline double upper_benchmark(const SegmentCounts& c, const ChangepointAlternative& alt)
{
    alt.validate();
    return evidence_from_log(log_alternative_probability(c, alt) + c.n() * std::numbers::ln2);
}

/// Q(z_1..z_n) / B_0.5(z_1..z_n); an e-variable only under B_0.5.
inline double upper_benchmark(const BinarySequence& data, const ChangepointAlternative& alt)
{
    return upper_benchmark(segment_counts(data, alt), alt);
}

/// Ratio of the alternative's to the null's conditional probability of the
/// data given its exchangeability summary K, for a full-horizon dataset with
/// k1 ones after the changepoint:
///
///   C(N,K) / sum_{k=(K-N0)+}^{min(K,N1)} C(N0,K-k) C(N1,k) r^(k-k1),
///   r = (1-pi0) pi1 / (pi0 (1-pi1)).
inline double batch_benchmark(int K, int k1, const ChangepointAlternative& alt)
{
    alt.validate();
    if (k1 < 0 || k1 > std::min(K, alt.N1) || K - k1 > alt.N0) {
        throw std::invalid_argument("batch benchmark counts violate 0 <= k1 <= min(K, N1), K - k1 <= N0");
    }
    const double log_r = std::log1p(-alt.pi0) + std::log(alt.pi1) - std::log(alt.pi0) - std::log1p(-alt.pi1);
    std::vector<double> terms;
    for (int k = std::max(K - alt.N0, 0); k <= std::min(K, alt.N1); ++k) {
        terms.push_back(log_choose(alt.N0, K - k) + log_choose(alt.N1, k) + (k - k1) * log_r);
    }
    return evidence_from_log(log_choose(alt.horizon(), K) - log_sum_exp(terms));
}

inline double batch_benchmark(const BinarySequence& data, const ChangepointAlternative& alt)
{
    if (static_cast<int>(data.size()) != alt.horizon()) {
        throw std::invalid_argument("batch benchmark needs a full-horizon dataset");
    }
    const SegmentCounts c = segment_counts(data, alt);
    return batch_benchmark(c.K(), c.k1, alt);
}

struct BenchmarkTriple {
    double lower = 0.0;
    double upper = 0.0;
    double batch = 0.0;
};

inline BenchmarkTriple benchmarks(const BinarySequence& data, const ChangepointAlternative& alt)
{
    const SegmentCounts c = segment_counts(data, alt);
    return {lower_benchmark(c, alt), upper_benchmark(c, alt), batch_benchmark(data, alt)};
}

// ---------------------------------------------------------------------------
// Finite-horizon naturalization
// ---------------------------------------------------------------------------

inline constexpr int kMaxExhaustiveHorizon = 22;

/// Sequences of length n are indexed with z_1 as the most significant bit, so
/// the children of prefix index i are 2i (append 0) and 2i + 1 (append 1).
inline std::uint32_t sequence_index(const BinarySequence& data)
{
    if (data.size() > static_cast<std::size_t>(kMaxExhaustiveHorizon)) {
        throw std::invalid_argument("exhaustive horizon exceeded");
    }
    std::uint32_t idx = 0;
    for (auto z : data.values()) idx = (idx << 1) | z;
    return idx;
}

inline BinarySequence sequence_from_index(std::uint32_t index, int length)
{
    std::vector<std::uint8_t> v(static_cast<std::size_t>(length));
    for (int i = length - 1; i >= 0; --i) {
        v[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(index & 1u);
        index >>= 1;
    }
    return BinarySequence(std::move(v));
}

/// Final values S_N(z_1..z_N) for all 2^N binary sequences.
class FinalValueFunction {
public:
    FinalValueFunction(int horizon, std::vector<double> table) : horizon_(horizon), table_(std::move(table))
    {
        if (horizon < 0 || horizon > kMaxExhaustiveHorizon) throw std::invalid_argument("exhaustive horizon exceeded");
        if (table_.size() != (std::size_t{1} << horizon)) {
            throw std::invalid_argument("final value table must cover all 2^N sequences");
        }
        for (double v : table_) {
            if (std::isnan(v) || v < 0.0) throw std::invalid_argument("final values must be nonnegative");
        }
    }

    static FinalValueFunction tabulate(int horizon, const std::function<double(const BinarySequence&)>& fn)
    {
        if (horizon < 0 || horizon > kMaxExhaustiveHorizon) throw std::invalid_argument("exhaustive horizon exceeded");
        std::vector<double> table(std::size_t{1} << horizon);
        for (std::size_t i = 0; i < table.size(); ++i) {
            table[i] = fn(sequence_from_index(static_cast<std::uint32_t>(i), horizon));
        }
        return FinalValueFunction(horizon, std::move(table));
    }

    int horizon() const noexcept { return horizon_; }
    double at(const BinarySequence& data) const
    {
        if (static_cast<int>(data.size()) != horizon_) throw std::invalid_argument("data length must equal horizon");
        return table_[sequence_index(data)];
    }
    const std::vector<double>& table() const noexcept { return table_; }

private:
    int horizon_;
    std::vector<double> table_;
};

/// Natural test martingale S~_n(prefix) for every prefix of length 0..N.
class NaturalizedTree {
public:
    NaturalizedTree(double theta, std::vector<std::vector<double>> levels)
        : theta_(theta), levels_(std::move(levels))
    {
    }

    double theta() const noexcept { return theta_; }
    int horizon() const noexcept { return static_cast<int>(levels_.size()) - 1; }

    double at(const BinarySequence& prefix) const
    {
        if (static_cast<int>(prefix.size()) > horizon()) throw std::invalid_argument("prefix longer than horizon");
        return levels_[prefix.size()][sequence_index(prefix)];
    }

    /// Values of all prefixes of length n, indexed as in sequence_index.
    const std::vector<double>& level(int n) const { return levels_.at(static_cast<std::size_t>(n)); }

    double root() const noexcept { return levels_.front().front(); }

private:
    double theta_;
    std::vector<std::vector<double>> levels_;
};

/// Backward averaging under B_theta: S~_N = finals and
/// S~_n(prefix) = (1-theta) S~_{n+1}(prefix 0) + theta S~_{n+1}(prefix 1).
inline NaturalizedTree naturalize_finite_horizon(const FinalValueFunction& finals, double theta, int horizon)
{
    if (horizon > kMaxExhaustiveHorizon) throw std::invalid_argument("exhaustive horizon exceeded");
    if (horizon != finals.horizon()) throw std::invalid_argument("horizon does not match the final value table");
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0,1]");

    std::vector<std::vector<double>> levels(static_cast<std::size_t>(horizon) + 1);
    levels.back() = finals.table();
    for (int n = horizon - 1; n >= 0; --n) {
        const auto& child = levels[static_cast<std::size_t>(n) + 1];
        auto& node = levels[static_cast<std::size_t>(n)];
        node.resize(std::size_t{1} << n);
        for (std::size_t i = 0; i < node.size(); ++i) {
            node[i] = (1.0 - theta) * child[2 * i] + theta * child[2 * i + 1];
        }
    }
    return NaturalizedTree(theta, std::move(levels));
}

/// inf over the grid of the naturalized martingales at the full sequence.
/// Equals finals(data) because every naturalized martingale ends at the
/// original final value.
inline double elementwise_natural_final(const FinalValueFunction& finals, const ThetaGrid& grid, int horizon,
                                        const BinarySequence& data)
{
    if (static_cast<int>(data.size()) != horizon) throw std::invalid_argument("data length must equal horizon");
    double best = std::numeric_limits<double>::infinity();
    for (double theta : grid) {
        best = std::min(best, naturalize_finite_horizon(finals, theta, horizon).at(data));
    }
    if (best != finals.at(data)) throw numerical_error("naturalized final value differs from the original");
    return best;
}

}  // namespace otm
