#pragma once

// Core value types shared by every test martingale in the library: observation
// sequences, evidence paths, parameter grids and the element-wise combination
// rule (infimum over a family of per-parameter test martingales).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace otm {

/// Raised when a numerical invariant is violated at runtime (as opposed to a
/// caller passing bad arguments, which raises std::invalid_argument).
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Largest evidence value stored in an EvidencePath.
inline constexpr double kEvidenceCap = 1e300;

/// Clamps a (possibly log-space) capital to [0, kEvidenceCap].
inline double clamp_evidence(double value) noexcept
{
    if (std::isnan(value) || value <= 0.0) return 0.0;
    return std::min(value, kEvidenceCap);
}

inline double evidence_from_log(double log_value) noexcept
{
    static const double kLogCap = std::log(kEvidenceCap);
    if (std::isnan(log_value)) return 0.0;
    if (log_value >= kLogCap) return kEvidenceCap;
    return std::exp(log_value);
}

class BinarySequence {
public:
    BinarySequence() = default;

    explicit BinarySequence(std::vector<std::uint8_t> values) : values_(std::move(values))
    {
        for (auto v : values_) {
            if (v > 1) throw std::invalid_argument("binary observation must be 0 or 1");
        }
    }

    BinarySequence(std::initializer_list<int> values)
    {
        values_.reserve(values.size());
        for (int v : values) {
            if (v != 0 && v != 1) throw std::invalid_argument("binary observation must be 0 or 1");
            values_.push_back(static_cast<std::uint8_t>(v));
        }
    }

    /// Parses a string of '0'/'1' characters.
    static BinarySequence parse(std::string_view text)
    {
        std::vector<std::uint8_t> values;
        values.reserve(text.size());
        for (char c : text) {
            if (c != '0' && c != '1') {
                throw std::invalid_argument("binary sequence may only contain '0' and '1', got '" +
                                            std::string(1, c) + "'");
            }
            values.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        return BinarySequence(std::move(values));
    }

    std::string to_string() const
    {
        std::string out(values_.size(), '0');
        for (std::size_t i = 0; i < values_.size(); ++i) out[i] = values_[i] ? '1' : '0';
        return out;
    }

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    int operator[](std::size_t i) const { return values_[i]; }
    std::span<const std::uint8_t> values() const noexcept { return values_; }

    /// Number of 1s among the first `n` observations (all of them by default).
    int count_ones(std::size_t n) const
    {
        n = std::min(n, values_.size());
        return static_cast<int>(std::count(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n),
                                           std::uint8_t{1}));
    }
    int count_ones() const { return count_ones(values_.size()); }

    BinarySequence prefix(std::size_t n) const
    {
        n = std::min(n, values_.size());
        return BinarySequence(std::vector<std::uint8_t>(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n)));
    }

    friend bool operator==(const BinarySequence&, const BinarySequence&) = default;

private:
    std::vector<std::uint8_t> values_;
};

class RealSequence {
public:
    RealSequence() = default;

    explicit RealSequence(std::vector<double> values) : values_(std::move(values))
    {
        for (double v : values_) {
            if (!std::isfinite(v)) throw std::invalid_argument("real observations must be finite");
        }
    }

    RealSequence(std::initializer_list<double> values) : RealSequence(std::vector<double>(values)) {}

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

/// Trajectory S_0 = 1, S_1, ..., S_N of a nonnegative evidence process.
class EvidencePath {
public:
    EvidencePath() : values_{1.0} {}

    /// Entries above kEvidenceCap are capped; negative or NaN entries are
    /// rejected, as is a starting value other than 1.
    explicit EvidencePath(std::vector<double> values) : values_(std::move(values))
    {
        if (values_.empty() || values_.front() != 1.0) {
            throw std::invalid_argument("evidence path must start at 1");
        }
        for (double& v : values_) {
            if (std::isnan(v) || v < 0.0) throw std::invalid_argument("evidence values must be nonnegative");
            v = std::min(v, kEvidenceCap);
        }
    }

    EvidencePath(std::initializer_list<double> values) : EvidencePath(std::vector<double>(values)) {}

    /// Number of steps N (the path holds N + 1 values).
    std::size_t horizon() const noexcept { return values_.size() - 1; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t n) const { return values_[n]; }
    double final_value() const noexcept { return values_.back(); }
    std::span<const double> values() const noexcept { return values_; }

    void push_back(double value)
    {
        if (std::isnan(value) || value < 0.0) throw std::invalid_argument("evidence values must be nonnegative");
        values_.push_back(std::min(value, kEvidenceCap));
    }

    friend bool operator==(const EvidencePath&, const EvidencePath&) = default;

private:
    std::vector<double> values_;
};

/// Finite, strictly increasing grid of parameter values.
class ThetaGrid {
public:
    explicit ThetaGrid(std::vector<double> values) : values_(std::move(values))
    {
        if (values_.empty()) throw std::invalid_argument("theta grid must be non-empty");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) throw std::invalid_argument("theta grid values must be finite");
            if (i > 0 && !(values_[i] > values_[i - 1])) {
                throw std::invalid_argument("theta grid must be strictly increasing");
            }
        }
    }

    /// `points` equally spaced values from lo to hi inclusive.
    static ThetaGrid uniform(double lo, double hi, std::size_t points)
    {
        if (points == 0) throw std::invalid_argument("theta grid must be non-empty");
        if (points == 1) return ThetaGrid({lo});
        std::vector<double> v(points);
        for (std::size_t i = 0; i < points; ++i) {
            v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        }
        v.back() = hi;
        return ThetaGrid(std::move(v));
    }

    /// {0, 0.01, ..., 1}.
    static ThetaGrid bernoulli_default() { return uniform(0.0, 1.0, 101); }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

private:
    std::vector<double> values_;
};

/// Element-wise test: the pointwise infimum over theta of per-theta evidence
/// paths, truncated to times 0..horizon.
inline EvidencePath elementwise_combine(const std::map<double, EvidencePath>& paths, std::size_t horizon)
{
    if (paths.empty()) throw std::invalid_argument("no parameter values");
    for (const auto& [theta, path] : paths) {
        if (path.size() < horizon + 1) {
            throw std::invalid_argument("ragged evidence paths: every path needs at least horizon + 1 values");
        }
    }
    std::vector<double> out(horizon + 1, kEvidenceCap);
    for (const auto& [theta, path] : paths) {
        for (std::size_t m = 0; m <= horizon; ++m) out[m] = std::min(out[m], path[m]);
    }
    out[0] = 1.0;
    return EvidencePath(std::move(out));
}

struct CalibrationReport {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;

    /// |mean - 1| <= sigmas * std_error.
    bool consistent_with_one(double sigmas = 3.0) const noexcept
    {
        return std::abs(mean - 1.0) <= sigmas * std_error;
    }

    /// One-sided check for e-variables whose null expectation may be below 1.
    bool at_most_one(double sigmas = 3.0) const noexcept { return mean - 1.0 <= sigmas * std_error; }
};

/// Sample mean and standard error (n - 1 denominator) of e-variable draws.
inline CalibrationReport verify_evariable(std::span<const double> final_values)
{
    if (final_values.empty()) throw std::invalid_argument("verify_evariable needs at least one value");
    CalibrationReport report;
    report.n = final_values.size();
    // Welford for stability with heavy-tailed martingale finals.
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t i = 0;
    for (double v : final_values) {
        if (std::isnan(v) || v < 0.0) throw std::invalid_argument("e-variable values must be nonnegative");
        ++i;
        const double delta = v - mean;
        mean += delta / static_cast<double>(i);
        m2 += delta * (v - mean);
    }
    report.mean = mean;
    if (report.n > 1) {
        const double variance = m2 / static_cast<double>(report.n - 1);
        report.std_error = std::sqrt(variance / static_cast<double>(report.n));
    }
    return report;
}

}  // namespace otm
