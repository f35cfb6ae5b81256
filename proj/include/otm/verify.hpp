#pragma once

// Calibration suites run by `otm verify`: Monte Carlo and exhaustive checks of
// the validity properties the library relies on. Each check reports pass/fail
// and a one-line detail.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "otm/benchmarks.hpp"
#include "otm/bk.hpp"
#include "otm/compression.hpp"
#include "otm/experiment.hpp"
#include "otm/pivotal.hpp"
#include "otm/random.hpp"
#include "otm/special.hpp"

namespace otm {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline double chi_squared_quantile(double degrees_of_freedom, double level)
{
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(degrees_of_freedom), level);
}

/// Pearson statistic of values in [0,1] against U[0,1] over equal-width bins.
inline double chi_squared_uniform(std::span<const double> values, std::size_t bins)
{
    std::vector<double> counts(bins, 0.0);
    for (double v : values) counts[std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)))] += 1.0;
    const double expected = static_cast<double>(values.size()) / static_cast<double>(bins);
    double stat = 0.0;
    for (double c : counts) stat += (c - expected) * (c - expected) / expected;
    return stat;
}

/// Pearson statistic of consecutive pairs against U[0,1]^2 over a bins x bins
/// grid; pairs are taken within each row of `rows`.
inline double chi_squared_lag1(const std::vector<std::vector<double>>& rows, std::size_t bins)
{
    std::vector<double> counts(bins * bins, 0.0);
    std::size_t total = 0;
    auto cell = [bins](double v) { return std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins))); };
    for (const auto& row : rows) {
        for (std::size_t i = 1; i < row.size(); ++i) {
            counts[cell(row[i - 1]) * bins + cell(row[i])] += 1.0;
            ++total;
        }
    }
    const double expected = static_cast<double>(total) / static_cast<double>(bins * bins);
    double stat = 0.0;
    for (double c : counts) stat += (c - expected) * (c - expected) / expected;
    return stat;
}

struct VerifyOptions {
    std::uint64_t seed = kDefaultSeed;
    std::size_t sequences = 10000;
    ChangepointAlternative alt{};
};

inline CheckResult check_nondomination()
{
    const double ratio = nondomination_ratio();
    std::ostringstream d;
    d << "ratio=" << ratio;
    return {"nondomination-ratio", std::abs(ratio - 1.31) <= 0.01, d.str()};
}

inline CheckResult check_gauss_pairs(const VerifyOptions& opt)
{
    RandomizationStream stream(opt.seed, 0x6a05);
    double worst = 0.0;
    for (std::size_t i = 0; i < opt.sequences; ++i) {
        const double z1 = 8.0 * stream.uniform() - 4.0;
        const double z2 = 8.0 * stream.uniform() - 4.0;
        const double p = gauss_var1_p_value(RealSequence{z1}, z2, 0.5);
        worst = std::max(worst, std::abs(p - normal_cdf((z2 - z1) / std::sqrt(2.0))));
    }
    std::ostringstream d;
    d << "max |p2 - Phi((z2-z1)/sqrt2)| = " << worst;
    return {"gaussian-p2-identity", worst <= 1e-12, d.str()};
}

inline CheckResult check_conformal_validity(const VerifyOptions& opt, double theta)
{
    const int horizon = opt.alt.horizon();
    std::vector<double> pooled;
    std::vector<std::vector<double>> rows;
    rows.reserve(opt.sequences);
    for (std::size_t s = 0; s < opt.sequences; ++s) {
        RandomizationStream base(opt.seed, s);
        RandomizationStream data_stream = base.lane_stream(kDatasetLane);
        RandomizationStream taus = base.lane_stream(kBkLane);
        const BinarySequence data = generate_null_dataset(horizon, theta, data_stream);
        std::vector<double> row;
        for (const PValue& p : conformal_p_values(BinaryExchangeabilityModel{}, data.values(), taus)) {
            row.push_back(p.value());
        }
        pooled.insert(pooled.end(), row.begin(), row.end());
        rows.push_back(std::move(row));
    }
    const double uni = chi_squared_uniform(pooled, 20);
    const double lag = chi_squared_lag1(rows, 10);
    const double uni_crit = chi_squared_quantile(19, 0.999);
    const double lag_crit = chi_squared_quantile(99, 0.999);
    std::ostringstream d;
    d << "theta=" << theta << " chi2(20 bins)=" << uni << " < " << uni_crit << ", chi2(lag-1 10x10)=" << lag << " < "
      << lag_crit;
    return {"conformal-validity", uni < uni_crit && lag < lag_crit, d.str()};
}

inline CheckResult check_bk_calibration(const VerifyOptions& opt, double theta)
{
    std::vector<double> finals;
    finals.reserve(opt.sequences);
    for (std::size_t s = 0; s < opt.sequences; ++s) {
        RandomizationStream base(opt.seed, s);
        RandomizationStream data_stream = base.lane_stream(kDatasetLane);
        RandomizationStream taus = base.lane_stream(kBkLane);
        const BinarySequence data = generate_null_dataset(opt.alt.horizon(), theta, data_stream);
        finals.push_back(bk_run(data, taus, opt.alt, BkOptions{.check_densities = true}).final_value());
    }
    const CalibrationReport report = verify_evariable(finals);
    std::ostringstream d;
    d << "theta=" << theta << " mean=" << report.mean << " se=" << report.std_error;
    return {"bk-calibration", report.consistent_with_one(3.0), d.str()};
}

/// Exhaustive null expectation of the batch benchmark over (k0, k1).
inline double batch_null_expectation(const ChangepointAlternative& alt, double theta)
{
    double total = 0.0;
    for (int k0 = 0; k0 <= alt.N0; ++k0) {
        for (int k1 = 0; k1 <= alt.N1; ++k1) {
            const int K = k0 + k1;
            const double log_weight = log_choose(alt.N0, k0) + log_choose(alt.N1, k1) + xlogy(K, theta) +
                                      xlogy(alt.horizon() - K, 1.0 - theta);
            total += std::exp(log_weight) * batch_benchmark(K, k1, alt);
        }
    }
    return total;
}

inline CheckResult check_batch_exactness(const VerifyOptions& opt)
{
    double worst = 0.0;
    for (int i = 0; i <= 20; ++i) {
        worst = std::max(worst, std::abs(batch_null_expectation(opt.alt, i / 20.0) - 1.0));
    }
    std::ostringstream d;
    d << "max |E_theta batch - 1| over 21 thetas = " << worst;
    return {"batch-exactness", worst <= 1e-9, d.str()};
}

inline CheckResult check_benchmark_order(const VerifyOptions& opt)
{
    std::size_t violations = 0;
    RandomizationStream stream(opt.seed, 0xbe7c);
    const double mid = (opt.alt.pi0 + opt.alt.pi1) / 2.0;
    for (std::size_t s = 0; s < opt.sequences; ++s) {
        const double theta = stream.uniform();
        const BinarySequence data =
            generate_null_dataset(opt.alt.horizon(), s % 2 == 0 ? theta : mid, stream);
        if (lower_benchmark(data, opt.alt) > upper_benchmark(data, opt.alt)) ++violations;
    }
    std::ostringstream d;
    d << violations << " LB > UB violations in " << opt.sequences << " datasets";
    return {"benchmark-order", violations == 0, d.str()};
}

inline CheckResult check_naturalization(const VerifyOptions& opt)
{
    RandomizationStream stream(opt.seed, 0x9a7u);
    double worst = 0.0;
    bool finals_kept = true;
    for (int horizon = 1; horizon <= 10; ++horizon) {
        std::vector<double> table(std::size_t{1} << horizon);
        for (double& v : table) v = 3.0 * stream.uniform();
        const FinalValueFunction finals(horizon, table);
        for (double theta : {0.1, 0.5, 0.9}) {
            const NaturalizedTree tree = naturalize_finite_horizon(finals, theta, horizon);
            for (int n = 0; n < horizon; ++n) {
                const auto& node = tree.level(n);
                const auto& child = tree.level(n + 1);
                for (std::size_t i = 0; i < node.size(); ++i) {
                    const double avg = (1.0 - theta) * child[2 * i] + theta * child[2 * i + 1];
                    worst = std::max(worst, std::abs(node[i] - avg));
                }
            }
            finals_kept = finals_kept && tree.level(horizon) == table;
        }
    }
    std::ostringstream d;
    d << "max martingale-identity defect = " << worst << (finals_kept ? ", finals preserved" : ", finals changed");
    return {"naturalization", worst <= 1e-12 && finals_kept, d.str()};
}

inline std::vector<CheckResult> run_verification(const VerifyOptions& opt)
{
    std::vector<CheckResult> out;
    out.push_back(check_nondomination());
    out.push_back(check_gauss_pairs(opt));
    for (double theta : {0.1, 0.5, 0.9}) out.push_back(check_conformal_validity(opt, theta));
    for (double theta : {0.1, 0.5, 0.9}) out.push_back(check_bk_calibration(opt, theta));
    out.push_back(check_batch_exactness(opt));
    out.push_back(check_benchmark_order(opt));
    out.push_back(check_naturalization(opt));
    return out;
}

}  // namespace otm
