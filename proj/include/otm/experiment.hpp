#pragma once

// Changepoint-detection experiment: dataset generation, the five final
// values per replication (BK, mean BK, batch, lower and upper benchmark),
// summary statistics and the CSV record format.
//
// Stream layout: replication r owns stream_id r. Lane 0 generates the dataset,
// lane 1 drives the single BK run and lanes 2..inner_bk+1 the inner runs of
// mean BK. Results therefore do not depend on thread count or scheduling.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include "otm/benchmarks.hpp"
#include "otm/bk.hpp"
#include "otm/evidence.hpp"
#include "otm/random.hpp"

namespace otm {

inline constexpr std::uint32_t kDatasetLane = 0;
inline constexpr std::uint32_t kBkLane = 1;
inline constexpr std::uint32_t kMeanBkFirstLane = 2;

enum class ExperimentMode { fixed_dataset, random_datasets, null_calibration };

inline ExperimentMode parse_mode(std::string_view text)
{
    if (text == "fixed-dataset") return ExperimentMode::fixed_dataset;
    if (text == "random-datasets") return ExperimentMode::random_datasets;
    if (text == "null-calibration") return ExperimentMode::null_calibration;
    throw std::invalid_argument("invalid mode '" + std::string(text) +
                                "' (expected fixed-dataset, random-datasets or null-calibration)");
}

inline std::string_view to_string(ExperimentMode mode)
{
    switch (mode) {
    case ExperimentMode::fixed_dataset: return "fixed-dataset";
    case ExperimentMode::random_datasets: return "random-datasets";
    case ExperimentMode::null_calibration: return "null-calibration";
    }
    return "unknown";
}

struct ExperimentConfig {
    ChangepointAlternative alt{};
    std::size_t replications = 1000;
    std::size_t inner_bk = kDefaultInnerBk;
    std::uint64_t seed = kDefaultSeed;
    ExperimentMode mode = ExperimentMode::random_datasets;
    double null_theta = 0.5;
    // 0 = std::thread::hardware_concurrency().
    unsigned threads = 0;

    void validate() const
    {
        alt.validate();
        if (replications < 1) throw std::invalid_argument("replications must be at least 1");
        if (inner_bk < 1) throw std::invalid_argument("inner_bk must be at least 1");
        if (!(null_theta >= 0.0 && null_theta <= 1.0)) throw std::invalid_argument("null theta must lie in [0,1]");
    }
};

/// First N0 draws Bernoulli(pi0), next N1 draws Bernoulli(pi1); a draw u
/// gives 1 iff u < p. Probabilities may be 0 or 1 here.
inline BinarySequence generate_dataset(const ChangepointAlternative& alt, RandomizationStream& stream)
{
    if (alt.N0 < 0 || alt.N1 < 0) throw std::invalid_argument("segment lengths must be nonnegative");
    if (!(alt.pi0 >= 0.0 && alt.pi0 <= 1.0 && alt.pi1 >= 0.0 && alt.pi1 <= 1.0)) {
        throw std::invalid_argument("probabilities must lie in [0,1]");
    }
    std::vector<std::uint8_t> values(static_cast<std::size_t>(alt.horizon()));
    for (int n = 1; n <= alt.horizon(); ++n) {
        values[static_cast<std::size_t>(n - 1)] = stream.uniform() < alt.prob_one(n) ? 1 : 0;
    }
    return BinarySequence(std::move(values));
}

/// B_theta^N: i.i.d. Bernoulli(theta) on the alternative's horizon.
inline BinarySequence generate_null_dataset(int horizon, double theta, RandomizationStream& stream)
{
    return generate_dataset(ChangepointAlternative{horizon, 0, theta, theta}, stream);
}

struct ReplicationRecord {
    std::size_t rep = 0;
    std::string dataset;
    int K = 0;
    int k0 = 0;
    int k1 = 0;
    double bk = 0.0;
    double mean_bk = 0.0;
    double batch = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

namespace detail {

inline ReplicationRecord make_record(std::size_t rep, const BinarySequence& data, const ChangepointAlternative& alt)
{
    const SegmentCounts c = segment_counts(data, alt);
    ReplicationRecord r;
    r.rep = rep;
    r.dataset = data.to_string();
    r.K = c.K();
    r.k0 = c.k0;
    r.k1 = c.k1;
    r.batch = batch_benchmark(c.K(), c.k1, alt);
    r.lower = lower_benchmark(c, alt);
    r.upper = upper_benchmark(c, alt);
    return r;
}

inline void fill_bk(ReplicationRecord& r, const BinarySequence& data, const ExperimentConfig& cfg)
{
    const RandomizationStream base(cfg.seed, r.rep);
    RandomizationStream bk_taus = base.lane_stream(kBkLane);
    r.bk = bk_run(data, bk_taus, cfg.alt).final_value();
    r.mean_bk = mean_bk_final(data, cfg.alt, cfg.inner_bk, base, kMeanBkFirstLane);
}

/// Runs body(i) for i in [0, count) on `threads` workers.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = count;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

inline std::vector<ReplicationRecord> run_experiment(const ExperimentConfig& cfg, const ProgressCallback& progress = {})
{
    cfg.validate();
    std::vector<ReplicationRecord> records(cfg.replications);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto report = [&] {
        const std::size_t d = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(d, cfg.replications);
        }
    };

    switch (cfg.mode) {
    case ExperimentMode::fixed_dataset: {
        RandomizationStream data_stream = RandomizationStream(cfg.seed, 0).lane_stream(kDatasetLane);
        const BinarySequence data = generate_dataset(cfg.alt, data_stream);
        const ReplicationRecord shared = detail::make_record(0, data, cfg.alt);
        detail::parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
            ReplicationRecord rec = shared;
            rec.rep = r;
            detail::fill_bk(rec, data, cfg);
            records[r] = std::move(rec);
            report();
        });
        break;
    }
    case ExperimentMode::random_datasets:
    case ExperimentMode::null_calibration:
        detail::parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
            RandomizationStream data_stream = RandomizationStream(cfg.seed, r).lane_stream(kDatasetLane);
            const BinarySequence data = cfg.mode == ExperimentMode::random_datasets
                                            ? generate_dataset(cfg.alt, data_stream)
                                            : generate_null_dataset(cfg.alt.horizon(), cfg.null_theta, data_stream);
            ReplicationRecord rec = detail::make_record(r, data, cfg.alt);
            detail::fill_bk(rec, data, cfg);
            records[r] = std::move(rec);
            report();
        });
        break;
    }
    return records;
}

// ---------------------------------------------------------------------------
// Summary statistics
// ---------------------------------------------------------------------------

struct ProcessSummary {
    double median = 0.0;
    double mean = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

/// Process names in CSV column order.
inline const std::vector<std::string>& process_names()
{
    static const std::vector<std::string> names{"bk", "mean_bk", "batch", "lb", "ub"};
    return names;
}

inline double record_value(const ReplicationRecord& r, std::string_view process)
{
    if (process == "bk") return r.bk;
    if (process == "mean_bk") return r.mean_bk;
    if (process == "batch") return r.batch;
    if (process == "lb") return r.lower;
    if (process == "ub") return r.upper;
    throw std::invalid_argument("unknown process '" + std::string(process) + "'");
}

/// Quantile of sorted data by linear interpolation between order statistics:
/// position h = (n - 1) q, value x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
inline double sorted_quantile(std::span<const double> sorted, double q)
{
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0,1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ProcessSummary summarize_values(std::vector<double> values)
{
    if (values.empty()) throw std::invalid_argument("cannot summarize an empty sample");
    std::sort(values.begin(), values.end());
    ProcessSummary s;
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    s.median = sorted_quantile(values, 0.5);
    s.q25 = sorted_quantile(values, 0.25);
    s.q75 = sorted_quantile(values, 0.75);
    s.q05 = sorted_quantile(values, 0.05);
    s.q95 = sorted_quantile(values, 0.95);
    return s;
}

using SummaryStats = std::map<std::string, ProcessSummary>;

inline SummaryStats summarize(const std::vector<ReplicationRecord>& records)
{
    if (records.empty()) throw std::invalid_argument("cannot summarize zero records");
    SummaryStats stats;
    for (const auto& name : process_names()) {
        std::vector<double> values;
        values.reserve(records.size());
        for (const auto& r : records) values.push_back(record_value(r, name));
        stats[name] = summarize_values(std::move(values));
    }
    return stats;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader = "rep,dataset,K,k0,k1,bk,mean_bk,batch,lb,ub";

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text)
{
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return value;
}

template <class Int>
Int parse_integer(std::string_view text)
{
    Int value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
    }
    return value;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline void write_csv(std::ostream& out, const std::vector<ReplicationRecord>& records)
{
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << r.rep << ',' << r.dataset << ',' << r.K << ',' << r.k0 << ',' << r.k1 << ',' << format_double(r.bk)
            << ',' << format_double(r.mean_bk) << ',' << format_double(r.batch) << ',' << format_double(r.lower)
            << ',' << format_double(r.upper) << '\n';
    }
}

inline std::string to_csv(const std::vector<ReplicationRecord>& records)
{
    std::ostringstream out;
    write_csv(out, records);
    return out.str();
}

inline std::vector<ReplicationRecord> read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty CSV input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    const auto expected = split_csv_line(kCsvHeader);
    for (const auto& column : expected) {
        if (std::find(header.begin(), header.end(), column) == header.end()) {
            throw std::invalid_argument("CSV is missing column '" + std::string(column) + "'");
        }
    }
    if (header != expected) throw std::invalid_argument("CSV header must be exactly: " + std::string(kCsvHeader));

    std::vector<ReplicationRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != expected.size()) {
            throw std::invalid_argument("CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                                        " fields, expected " + std::to_string(expected.size()));
        }
        ReplicationRecord r;
        r.rep = parse_integer<std::size_t>(f[0]);
        r.dataset = std::string(f[1]);
        r.K = parse_integer<int>(f[2]);
        r.k0 = parse_integer<int>(f[3]);
        r.k1 = parse_integer<int>(f[4]);
        r.bk = parse_double(f[5]);
        r.mean_bk = parse_double(f[6]);
        r.batch = parse_double(f[7]);
        r.lower = parse_double(f[8]);
        r.upper = parse_double(f[9]);
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace otm
