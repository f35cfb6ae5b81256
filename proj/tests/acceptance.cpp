// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "otm/otm.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool passed = false;
    std::string detail;
};

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double chi_crit(double df)
{
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), 0.999);
}

std::size_t bin_of(double p, std::size_t bins)
{
    return std::min(bins - 1, static_cast<std::size_t>(p * static_cast<double>(bins)));
}

// Null data and taus share the layout of the null-calibration experiment:
// stream (seed, s), dataset from lane 0, taus from lane 1.
struct NullDraw {
    otm::BinarySequence data;
    otm::RandomizationStream taus;
};

NullDraw null_draw(std::uint64_t s, double theta, int horizon)
{
    const otm::RandomizationStream base(otm::kDefaultSeed, s);
    auto data_stream = base.lane_stream(otm::kDatasetLane);
    auto data = otm::generate_null_dataset(horizon, theta, data_stream);
    return {std::move(data), base.lane_stream(otm::kBkLane)};
}

Outcome criterion1()
{
    const auto start = Clock::now();
    const double ratio = otm::nondomination_ratio();
    const double ms = seconds_since(start) * 1e3;
    const double oracle = std::erf(1.0 / std::sqrt(2.0)) / std::erf(0.5);
    std::ostringstream d;
    d.precision(10);
    d << "ratio=" << ratio << " oracle=" << oracle << " runtime=" << ms << "ms";
    return {std::abs(ratio - 1.31) <= 0.01 && std::abs(ratio - oracle) < 1e-12 && ms < 1.0, d.str()};
}

Outcome criterion2()
{
    std::mt19937_64 gen(2024);
    std::normal_distribution<double> normal(0.0, 2.0);
    const boost::math::normal_distribution<double> std_normal;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double z1 = normal(gen), z2 = normal(gen);
        const double p = otm::gauss_var1_p_value(otm::RealSequence{z1}, z2, 0.5);
        worst = std::max(worst, std::abs(p - boost::math::cdf(std_normal, (z2 - z1) / std::sqrt(2.0))));
    }
    std::ostringstream d;
    d << "max deviation from Phi((z2-z1)/sqrt2) over 1e4 pairs = " << worst;
    return {worst <= 1e-12, d.str()};
}

Outcome criterion3()
{
    const auto start = Clock::now();
    const int horizon = otm::ChangepointAlternative{}.horizon();
    bool ok = true;
    std::ostringstream d;
    d.precision(4);
    for (double theta : {0.1, 0.5, 0.9}) {
        std::vector<double> uni(20, 0.0);
        std::vector<double> lag(100, 0.0);
        std::size_t total = 0, pairs = 0;
        for (std::uint64_t s = 0; s < 10000; ++s) {
            auto draw = null_draw(s, theta, horizon);
            const auto ps = otm::conformal_p_sequence(draw.data, draw.taus,
                                                      otm::CompressionModelKind::binary_exchangeability);
            for (std::size_t i = 0; i < ps.size(); ++i) {
                uni[bin_of(ps[i], 20)] += 1;
                ++total;
                if (i > 0) {
                    lag[bin_of(ps[i - 1], 10) * 10 + bin_of(ps[i], 10)] += 1;
                    ++pairs;
                }
            }
        }
        double x_uni = 0.0, x_lag = 0.0;
        for (double c : uni) x_uni += std::pow(c - total / 20.0, 2) / (total / 20.0);
        for (double c : lag) x_lag += std::pow(c - pairs / 100.0, 2) / (pairs / 100.0);
        ok = ok && x_uni < chi_crit(19) && x_lag < chi_crit(99);
        d << "theta=" << theta << " chi2=" << x_uni << "/" << chi_crit(19) << " lag1=" << x_lag << "/" << chi_crit(99)
          << "; ";
    }
    const double secs = seconds_since(start);
    d << "runtime=" << secs << "s";
    return {ok && secs < 30.0, d.str()};
}

Outcome criterion4()
{
    const auto start = Clock::now();
    const otm::ChangepointAlternative alt;
    bool ok = true;
    double worst_integral = 0.0;
    std::ostringstream d;
    d.precision(4);
    try {
        for (double theta : {0.1, 0.5, 0.9}) {
            std::vector<double> finals;
            finals.reserve(10000);
            for (std::uint64_t s = 0; s < 10000; ++s) {
                auto draw = null_draw(s, theta, alt.horizon());
                finals.push_back(otm::bk_run(draw.data, draw.taus, alt, {.check_densities = true}).final_value());
                // Also integrate every predictive density of this run explicitly.
                if (s % 100 == 0) {
                    auto taus = null_draw(s, theta, alt.horizon()).taus;
                    otm::CountPosterior post;
                    otm::ExchangeabilitySummary summary;
                    for (int n = 1; n <= alt.horizon(); ++n) {
                        const auto f = otm::predictive_density(post, n, alt);
                        double mass = 0.0;
                        for (int j = 0; j < n; ++j) mass += f((j + 0.5) / n) / n;
                        worst_integral = std::max(worst_integral, std::abs(mass - 1.0));
                        const int z = draw.data[static_cast<std::size_t>(n - 1)];
                        const auto p = otm::exch_p_value(summary, z, taus.uniform());
                        summary = otm::exch_forward(summary, z);
                        post = otm::bk_update(post, p, n, alt).posterior;
                    }
                }
            }
            const auto report = otm::verify_evariable(finals);
            const double z = (report.mean - 1.0) / report.std_error;
            ok = ok && report.consistent_with_one(3.0);
            d << "theta=" << theta << " mean=" << report.mean << " se=" << report.std_error << " z=" << z << "; ";
        }
    } catch (const otm::numerical_error& e) {
        ok = false;
        d << "density check failed: " << e.what() << "; ";
    }
    const double secs = seconds_since(start);
    d << "max |integral-1|=" << worst_integral << " runtime=" << secs << "s";
    return {ok && worst_integral <= 1e-9 && secs < 60.0, d.str()};
}

Outcome criterion5()
{
    const auto start = Clock::now();
    const otm::ChangepointAlternative alt;
    double worst = 0.0;
    for (int t = 0; t <= 20; ++t) {
        const long double theta = t / 20.0L;
        long double total = 0.0L;
        for (int k0 = 0; k0 <= 10; ++k0) {
            for (int k1 = 0; k1 <= 10; ++k1) {
                const int K = k0 + k1;
                const long double weight = std::exp(std::lgamma(11.0L) * 2 - std::lgamma(k0 + 1.0L) -
                                                    std::lgamma(11.0L - k0) - std::lgamma(k1 + 1.0L) -
                                                    std::lgamma(11.0L - k1)) *
                                           std::pow(theta, K) * std::pow(1.0L - theta, 20 - K);
                total += weight * otm::batch_benchmark(K, k1, alt);
            }
        }
        worst = std::max(worst, static_cast<double>(std::abs(total - 1.0L)));
    }

    // Direct summation of Q over the 11 ways to place ten 1s, against the
    // probability of the ideal dataset.
    auto binom = [](int n, int k) {
        long double c = 1.0L;
        for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
        return c;
    };
    long double mass = 0.0L;
    for (int k = 0; k <= 10; ++k) {
        mass += binom(10, 10 - k) * binom(10, k) * std::pow(0.1L, 10 - k) * std::pow(0.9L, k) * std::pow(0.9L, k) *
                std::pow(0.1L, 10 - k);
    }
    const long double ideal = std::pow(0.9L, 20);
    const double oracle = static_cast<double>(ideal / mass * binom(20, 10));
    const double value = otm::batch_benchmark(10, 10, alt);
    const double rel = std::abs(value - oracle) / oracle;
    const double secs = seconds_since(start);
    std::ostringstream d;
    d.precision(12);
    d << "max |E_theta batch - 1| over 21 thetas=" << worst << " batch(10,10)=" << value << " oracle=" << oracle
      << " rel=" << rel << " runtime=" << secs << "s";
    return {worst <= 1e-9 && rel <= 5e-10 && secs < 1.0, d.str()};
}

Outcome criterion6()
{
    const otm::ChangepointAlternative alt;
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> unif;
    std::size_t violations = 0, checked = 0;
    auto check = [&](const otm::BinarySequence& z) {
        ++checked;
        if (otm::lower_benchmark(z, alt) > otm::upper_benchmark(z, alt)) ++violations;
    };
    for (int i = 0; i < 100000; ++i) {
        const double theta = unif(gen);
        std::vector<std::uint8_t> z(20);
        for (auto& v : z) v = unif(gen) < theta;
        check(otm::BinarySequence(z));
    }
    // Boundary datasets: every (k0, k1) corner pattern, all 0s, all 1s.
    for (int k0 = 0; k0 <= 10; ++k0) {
        for (int k1 = 0; k1 <= 10; ++k1) {
            std::vector<std::uint8_t> z(20, 0);
            for (int i = 0; i < k0; ++i) z[static_cast<std::size_t>(i)] = 1;
            for (int i = 0; i < k1; ++i) z[static_cast<std::size_t>(19 - i)] = 1;
            check(otm::BinarySequence(z));
        }
    }
    const auto ideal = otm::BinarySequence::parse("00000000001111111111");
    const double expected = std::pow(1.8, 20);
    const double lb = otm::lower_benchmark(ideal, alt), ub = otm::upper_benchmark(ideal, alt);
    const bool ideal_ok = std::abs(lb / expected - 1) <= 1e-6 && std::abs(ub / expected - 1) <= 1e-6;
    std::ostringstream d;
    d.precision(12);
    d << violations << " LB>UB violations in " << checked << " datasets; ideal LB=" << lb << " UB=" << ub
      << " 1.8^20=" << expected;
    return {violations == 0 && ideal_ok, d.str()};
}

Outcome criterion7()
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif;
    double worst = 0.0;
    bool finals_kept = true, inf_kept = true;
    const auto grid = otm::ThetaGrid::uniform(0.0, 1.0, 11);
    for (int horizon = 1; horizon <= 10; ++horizon) {
        for (int rep = 0; rep < 3; ++rep) {
            std::vector<double> table(std::size_t{1} << horizon);
            for (double& v : table) v = unif(gen) < 0.1 ? 0.0 : -std::log(unif(gen));
            const otm::FinalValueFunction finals(horizon, table);
            for (double theta : grid) {
                const auto tree = otm::naturalize_finite_horizon(finals, theta, horizon);
                for (int n = 0; n < horizon; ++n) {
                    const auto& node = tree.level(n);
                    const auto& child = tree.level(n + 1);
                    for (std::size_t i = 0; i < node.size(); ++i) {
                        worst = std::max(worst, std::abs(node[i] - ((1 - theta) * child[2 * i] + theta * child[2 * i + 1])));
                    }
                }
                finals_kept = finals_kept && tree.level(horizon) == table;
            }
            for (std::uint32_t i = 0; i < table.size(); ++i) {
                const auto z = otm::sequence_from_index(i, horizon);
                inf_kept = inf_kept && otm::elementwise_natural_final(finals, grid, horizon, z) == table[i];
            }
        }
    }
    std::ostringstream d;
    d << "max martingale-identity defect=" << worst << (finals_kept ? " finals preserved" : " finals changed")
      << (inf_kept ? ", inf over theta preserved" : ", inf over theta changed");
    return {worst <= 1e-12 && finals_kept && inf_kept, d.str()};
}

Outcome criterion8()
{
    otm_test::ScratchDir dir("acceptance");
    const auto csv = dir / "random.csv";
    const auto start = Clock::now();
    const auto sim = otm_test::run_cli("simulate --mode random-datasets --reps 1000 --seed 42 --quiet --out " +
                                       csv.string());
    const double secs = seconds_since(start);
    if (sim.exit_code != 0) return {false, "simulate exited with " + std::to_string(sim.exit_code)};
    const auto summary = otm_test::run_cli("summary --in " + csv.string());
    if (summary.exit_code != 0) return {false, "summary exited with " + std::to_string(summary.exit_code)};
    const auto doc = nlohmann::json::parse(summary.out);
    auto median = [&](const char* name) { return doc["processes"][name]["median"].get<double>(); };

    std::istringstream in(otm_test::read_file(csv));
    const auto records = otm::read_csv(in);
    const otm::ChangepointAlternative alt;
    std::size_t jensen_violations = 0, mean_mismatch = 0;
    for (const auto& r : records) {
        const otm::RandomizationStream base(42, r.rep);
        const auto finals =
            otm::bk_inner_finals(otm::BinarySequence::parse(r.dataset), alt, 1000, base, otm::kMeanBkFirstLane);
        double sum = 0.0, log_sum = 0.0;
        for (double f : finals) {
            sum += f;
            log_sum += f > 0 ? std::log(f) : -std::numeric_limits<double>::infinity();
        }
        if (std::abs(sum / 1000 - r.mean_bk) > 1e-12 * std::max(1.0, r.mean_bk)) ++mean_mismatch;
        if (r.mean_bk < std::exp(log_sum / 1000) * (1 - 1e-12)) ++jensen_violations;
    }

    const double bk = median("bk");
    const bool order = median("batch") > bk && median("lb") > bk && median("ub") > bk;
    std::ostringstream d;
    d.precision(6);
    d << "runtime=" << secs << "s records=" << records.size() << " median bk=" << bk << " mean_bk=" << median("mean_bk")
      << " batch=" << median("batch") << " lb=" << median("lb") << " ub=" << median("ub")
      << " jensen violations=" << jensen_violations << " inner-mean mismatches=" << mean_mismatch;
    return {secs < 600 && records.size() == 1000 && order && jensen_violations == 0 && mean_mismatch == 0, d.str()};
}

Outcome criterion9()
{
    otm_test::ScratchDir dir("acceptance");
    otm_test::write_file(dir / "finals.csv", "dataset,value\n000,1\n001,0.5\n010,2\n011,0\n100,3\n101,1\n110,0.25\n111,4\n");
    otm_test::write_file(dir / "cfg.json", R"({"mode":"fixed-dataset","replications":25,"inner_bk":20})");
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate-random", "simulate --mode random-datasets --reps 50 --inner-bk 20 --seed 42 --quiet --threads 0"},
        {"simulate-fixed", "simulate --quiet --config " + (dir / "cfg.json").string()},
        {"simulate-null", "simulate --mode null-calibration --theta 0.3 --reps 50 --inner-bk 20 --quiet"},
        {"summary", ""},
        {"benchmarks", "benchmarks --data 00100000001101111111"},
        {"pvalues-binary", "pvalues --data 0110100111 --seed 42 --stream 3"},
        {"pvalues-gaussian", "pvalues --data 0.3,-1.2,2.5,0.0 --model gaussian-var1 --seed 42"},
        {"naturalize", "naturalize --theta 0.3 --in " + (dir / "finals.csv").string()},
        {"verify", "verify --sequences 300"},
    };
    std::vector<std::string> failed;
    for (const auto& [name, args] : commands) {
        std::string a, b;
        if (name == "summary") {
            otm_test::run_cli("simulate --reps 30 --inner-bk 10 --quiet --out " + (dir / "s.csv").string());
            const auto cmd = "summary --in " + (dir / "s.csv").string();
            const auto ra = otm_test::run_cli(cmd + " --out " + (dir / "a.json").string());
            const auto rb = otm_test::run_cli(cmd + " --out " + (dir / "b.json").string());
            a = std::to_string(ra.exit_code) + ra.out + otm_test::read_file(dir / "a.json");
            b = std::to_string(rb.exit_code) + rb.out + otm_test::read_file(dir / "b.json");
        } else if (name == "verify") {
            // verify has no --out; compare its report.
            const auto ra = otm_test::run_cli(args), rb = otm_test::run_cli(args);
            a = std::to_string(ra.exit_code) + ra.out;
            b = std::to_string(rb.exit_code) + rb.out;
        } else {
            const auto ra = otm_test::run_cli(args + " --out " + (dir / "a.out").string());
            const auto rb = otm_test::run_cli(args + " --out " + (dir / "b.out").string());
            a = std::to_string(ra.exit_code) + ra.out + otm_test::read_file(dir / "a.out");
            b = std::to_string(rb.exit_code) + rb.out + otm_test::read_file(dir / "b.out");
        }
        if (a != b || a.empty()) failed.push_back(name);
    }
    std::string d = std::to_string(commands.size()) + " subcommand invocations compared";
    for (const auto& f : failed) d += "; differs or empty: " + f;
    return {failed.empty(), d};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 nondomination ratio", criterion1},  {"2 gaussian second p-value", criterion2},
        {"3 conformal validity", criterion3},   {"4 BK calibration", criterion4},
        {"5 batch exactness", criterion5},      {"6 benchmark order", criterion6},
        {"7 naturalization", criterion7},       {"8 changepoint experiment", criterion8},
        {"9 determinism", criterion9},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.passed) ++failures;
        std::cout << (o.passed ? "PASS " : "FAIL ") << "criterion " << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
