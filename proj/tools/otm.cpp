// otm: command-line front end for the online test martingale library.
//
//   simulate    run the changepoint experiment and write per-replication CSV
//   summary     per-process quantiles and means of a simulate CSV, as JSON
//   benchmarks  lower/upper/batch benchmarks for one 0/1 dataset, as JSON
//   pvalues     conformal p-values of one sequence, as CSV
//   naturalize  backward-averaged natural martingale from a finals table
//   verify      calibration suites
//
// Exit codes: 0 success, 1 usage error, 2 numerical or assertion failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "otm/otm.hpp"
#include "otm/verify.hpp"

namespace {

using nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Writes to the named file, or standard output when the name is empty or "-".
class Output {
public:
    explicit Output(const std::string& path)
    {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw usage_error("cannot open '" + path + "' for writing");
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw usage_error("cannot open '" + path + "' for reading");
    return in;
}

struct AltFlags {
    int n0 = 10;
    int n1 = 10;
    double pi0 = 0.1;
    double pi1 = 0.9;

    void add_to(CLI::App& app)
    {
        app.add_option("--n0", n0, "Pre-change observation count")->capture_default_str();
        app.add_option("--n1", n1, "Post-change observation count")->capture_default_str();
        app.add_option("--pi0", pi0, "Pre-change probability of a 1")->capture_default_str();
        app.add_option("--pi1", pi1, "Post-change probability of a 1")->capture_default_str();
    }

    otm::ChangepointAlternative alt() const { return {n0, n1, pi0, pi1}; }
};

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string mode = "random-datasets";
    std::size_t reps = 1000;
    std::size_t inner_bk = otm::kDefaultInnerBk;
    std::uint64_t seed = otm::kDefaultSeed;
    double theta = 0.5;
    unsigned threads = 0;
    AltFlags alt;
    std::string config;
    std::string out;
    bool quiet = false;
};

void apply_config_file(const std::string& path, otm::ExperimentConfig& cfg)
{
    auto in = open_input(path);
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const ordered_json::parse_error& e) {
        throw usage_error("config '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw usage_error("config must be a JSON object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "mode") cfg.mode = otm::parse_mode(value.get<std::string>());
            else if (key == "replications") cfg.replications = value.get<std::size_t>();
            else if (key == "inner_bk") cfg.inner_bk = value.get<std::size_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "null_theta") cfg.null_theta = value.get<double>();
            else if (key == "threads") cfg.threads = value.get<unsigned>();
            else if (key == "alt") {
                for (const auto& [akey, avalue] : value.items()) {
                    if (akey == "N0") cfg.alt.N0 = avalue.get<int>();
                    else if (akey == "N1") cfg.alt.N1 = avalue.get<int>();
                    else if (akey == "pi0") cfg.alt.pi0 = avalue.get<double>();
                    else if (akey == "pi1") cfg.alt.pi1 = avalue.get<double>();
                    else throw usage_error("unknown config key 'alt." + akey + "'");
                }
            } else {
                throw usage_error("unknown config key '" + key + "'");
            }
        }
    } catch (const ordered_json::exception& e) {
        throw usage_error("config '" + path + "': " + e.what());
    }
}

int run_simulate(const CLI::App& cmd, const SimulateArgs& args)
{
    otm::ExperimentConfig cfg;
    if (!args.config.empty()) apply_config_file(args.config, cfg);
    auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
    if (given("--mode")) cfg.mode = otm::parse_mode(args.mode);
    if (given("--reps")) cfg.replications = args.reps;
    if (given("--inner-bk")) cfg.inner_bk = args.inner_bk;
    if (given("--seed")) cfg.seed = args.seed;
    if (given("--theta")) cfg.null_theta = args.theta;
    if (given("--threads")) cfg.threads = args.threads;
    if (given("--n0")) cfg.alt.N0 = args.alt.n0;
    if (given("--n1")) cfg.alt.N1 = args.alt.n1;
    if (given("--pi0")) cfg.alt.pi0 = args.alt.pi0;
    if (given("--pi1")) cfg.alt.pi1 = args.alt.pi1;
    cfg.validate();

    if (!args.quiet) {
        std::cerr << "simulate: mode=" << otm::to_string(cfg.mode) << " reps=" << cfg.replications
                  << " inner_bk=" << cfg.inner_bk << " seed=" << cfg.seed << '\n';
    }
    otm::ProgressCallback progress;
    if (!args.quiet) {
        const std::size_t step = std::max<std::size_t>(1, cfg.replications / 20);
        progress = [step](std::size_t done, std::size_t total) {
            if (done % step == 0 || done == total) std::cerr << "  " << done << '/' << total << " replications\n";
        };
    }
    const auto records = otm::run_experiment(cfg, progress);
    Output out(args.out);
    otm::write_csv(out.stream(), records);
    return 0;
}

// ---------------------------------------------------------------- summary

int run_summary(const std::string& in_path, const std::string& out_path)
{
    auto in = open_input(in_path);
    const auto records = otm::read_csv(in);
    if (records.empty()) throw usage_error("CSV has no records");
    const auto stats = otm::summarize(records);

    ordered_json doc;
    doc["records"] = records.size();
    ordered_json processes = ordered_json::object();
    for (const auto& name : otm::process_names()) {
        const auto& s = stats.at(name);
        processes[name] = {{"median", s.median}, {"mean", s.mean}, {"q25", s.q25},
                           {"q75", s.q75},       {"q05", s.q05},   {"q95", s.q95}};
    }
    doc["processes"] = processes;
    Output out(out_path);
    out.stream() << doc.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------- benchmarks

int run_benchmarks(const std::string& data_text, const AltFlags& flags, const std::string& out_path)
{
    const auto alt = flags.alt();
    alt.validate();
    const auto data = otm::BinarySequence::parse(data_text);
    const auto c = otm::segment_counts(data, alt);

    ordered_json doc;
    doc["dataset"] = data.to_string();
    doc["n"] = data.size();
    doc["K"] = c.K();
    doc["k0"] = c.k0;
    doc["k1"] = c.k1;
    doc["lb"] = otm::lower_benchmark(c, alt);
    doc["ub"] = otm::upper_benchmark(c, alt);
    // The batch benchmark is defined only at the full horizon.
    if (static_cast<int>(data.size()) == alt.horizon()) doc["batch"] = otm::batch_benchmark(c.K(), c.k1, alt);
    else doc["batch"] = nullptr;
    Output out(out_path);
    out.stream() << doc.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------- pvalues

std::vector<double> parse_reals(const std::string& text)
{
    std::vector<double> values;
    for (auto field : otm::split_csv_line(text)) {
        if (field.empty()) continue;
        values.push_back(otm::parse_double(field));
    }
    return values;
}

int run_pvalues(const std::string& data_text, const std::string& model_text, std::uint64_t seed,
                std::uint64_t stream_id, const std::string& out_path)
{
    const auto model = otm::parse_compression_model(model_text);
    otm::RandomizationStream taus(seed, stream_id);
    Output out(out_path);
    auto& os = out.stream();
    os << "n,z,tau,p\n";
    if (model == otm::CompressionModelKind::binary_exchangeability) {
        const auto data = otm::BinarySequence::parse(data_text);
        otm::ExchangeabilitySummary summary;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double tau = taus.uniform();
            const auto p = otm::exch_p_value(summary, data[i], tau);
            summary = otm::exch_forward(summary, data[i]);
            os << i + 1 << ',' << data[i] << ',' << otm::format_double(tau) << ',' << otm::format_double(p) << '\n';
        }
    } else {
        const otm::RealSequence data(parse_reals(data_text));
        otm::GaussianVar1Summary summary;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double tau = taus.uniform();
            const auto p = otm::gauss_var1_p_value(summary, data[i], tau);
            summary = otm::gauss_var1_forward(summary, data[i]);
            os << i + 1 << ',' << otm::format_double(data[i]) << ',' << otm::format_double(tau) << ','
               << otm::format_double(p) << '\n';
        }
    }
    return 0;
}

// ---------------------------------------------------------------- naturalize

otm::FinalValueFunction read_finals(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw usage_error("empty finals table");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "dataset,value") throw usage_error("finals table header must be exactly: dataset,value");

    std::optional<int> horizon;
    std::vector<double> table;
    std::vector<bool> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = otm::split_csv_line(line);
        if (fields.size() != 2) throw usage_error("finals line " + std::to_string(line_no) + ": expected 2 fields");
        const auto seq = otm::BinarySequence::parse(fields[0]);
        if (!horizon) {
            horizon = static_cast<int>(seq.size());
            if (*horizon > otm::kMaxExhaustiveHorizon) throw usage_error("exhaustive horizon exceeded");
            table.assign(std::size_t{1} << *horizon, 0.0);
            seen.assign(table.size(), false);
        }
        if (static_cast<int>(seq.size()) != *horizon) {
            throw usage_error("finals line " + std::to_string(line_no) + ": dataset length differs from the first row");
        }
        const auto idx = otm::sequence_index(seq);
        if (seen[idx]) throw usage_error("finals line " + std::to_string(line_no) + ": duplicate dataset");
        seen[idx] = true;
        table[idx] = otm::parse_double(fields[1]);
    }
    if (!horizon) throw usage_error("finals table has no rows");
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw usage_error("finals table must list all 2^N datasets");
    }
    return otm::FinalValueFunction(*horizon, std::move(table));
}

int run_naturalize(const std::string& in_path, double theta, const std::string& out_path)
{
    auto in = open_input(in_path);
    const auto finals = read_finals(in);
    const auto tree = otm::naturalize_finite_horizon(finals, theta, finals.horizon());
    Output out(out_path);
    auto& os = out.stream();
    os << "prefix,value\n";
    for (int n = 0; n <= tree.horizon(); ++n) {
        const auto& level = tree.level(n);
        for (std::size_t i = 0; i < level.size(); ++i) {
            os << otm::sequence_from_index(static_cast<std::uint32_t>(i), n).to_string() << ','
               << otm::format_double(level[i]) << '\n';
        }
    }
    return 0;
}

// ---------------------------------------------------------------- verify

int run_verify(const otm::VerifyOptions& opt)
{
    bool all = true;
    for (const auto& check : otm::run_verification(opt)) {
        std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << '\n';
        all = all && check.passed;
    }
    return all ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Online test martingales: conformal p-values, Bayes-Kelly betting and likelihood-ratio benchmarks"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run the changepoint experiment, one CSV row per replication");
    simulate->add_option("--mode", sim.mode, "fixed-dataset | random-datasets | null-calibration")
        ->capture_default_str();
    simulate->add_option("--reps", sim.reps, "Replications")->capture_default_str();
    simulate->add_option("--inner-bk", sim.inner_bk, "Inner BK runs averaged by mean BK")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    simulate->add_option("--theta", sim.theta, "Bernoulli parameter for null-calibration")->capture_default_str();
    simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)")->capture_default_str();
    sim.alt.add_to(*simulate);
    simulate->add_option("--config", sim.config, "JSON config file; flags override its values");
    simulate->add_option("--out", sim.out, "Output CSV (default: standard output)");
    simulate->add_flag("--quiet", sim.quiet, "No progress on standard error");

    std::string summary_in, summary_out;
    auto* summary = app.add_subcommand("summary", "Summarize a simulate CSV as JSON");
    summary->add_option("--in,input", summary_in, "Input CSV")->required();
    summary->add_option("--out", summary_out, "Output JSON (default: standard output)");

    std::string bench_data, bench_out;
    AltFlags bench_alt;
    auto* bench = app.add_subcommand("benchmarks", "Lower, upper and batch benchmarks of one dataset");
    bench->add_option("--data,data", bench_data, "0/1 string")->required();
    bench_alt.add_to(*bench);
    bench->add_option("--out", bench_out, "Output JSON (default: standard output)");

    std::string pv_data, pv_model = "binary-exchangeability", pv_out;
    std::uint64_t pv_seed = otm::kDefaultSeed, pv_stream = 0;
    auto* pvalues = app.add_subcommand("pvalues", "Conformal p-values of one sequence");
    pvalues->add_option("--data,data", pv_data, "0/1 string, or comma-separated reals for gaussian-var1")
        ->required();
    pvalues->add_option("--model", pv_model, "binary-exchangeability | gaussian-var1")->capture_default_str();
    pvalues->add_option("--seed", pv_seed, "Seed for the tau stream")->capture_default_str();
    pvalues->add_option("--stream", pv_stream, "Stream id for the tau stream")->capture_default_str();
    pvalues->add_option("--out", pv_out, "Output CSV (default: standard output)");

    std::string nat_in, nat_out;
    double nat_theta = 0.5;
    auto* naturalize = app.add_subcommand("naturalize", "Backward-average a finals table (CSV dataset,value)");
    naturalize->add_option("--in,input", nat_in, "Finals CSV")->required();
    naturalize->add_option("--theta", nat_theta, "Bernoulli parameter")->capture_default_str();
    naturalize->add_option("--out", nat_out, "Output CSV prefix,value (default: standard output)");

    otm::VerifyOptions verify_opt;
    auto* verify = app.add_subcommand("verify", "Run the calibration suites");
    verify->add_option("--seed", verify_opt.seed, "Seed")->capture_default_str();
    verify->add_option("--sequences", verify_opt.sequences, "Monte Carlo sequences per check")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*simulate) return run_simulate(*simulate, sim);
        if (*summary) return run_summary(summary_in, summary_out);
        if (*bench) return run_benchmarks(bench_data, bench_alt, bench_out);
        if (*pvalues) return run_pvalues(pv_data, pv_model, pv_seed, pv_stream, pv_out);
        if (*naturalize) return run_naturalize(nat_in, nat_theta, nat_out);
        if (*verify) return run_verify(verify_opt);
    } catch (const otm::numerical_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
