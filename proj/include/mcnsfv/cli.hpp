#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcnsfv/mc.hpp"

namespace mcnsfv {

/// Exit codes of the command line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitConfig = 2,
    kExitSolver = 3,
    kExitProperty = 4,
};

/// One run of the tool. The config file is flat `key = value` text; '#'
/// starts a comment and unknown keys are errors.
struct RunConfig {
    std::string experiment = "steady_state";
    int n = 64;
    double dt_factor = 1.0;
    double T = 0.1;
    double epsilon = 0.6;
    double gamma = 1.4;
    double a = 1.0;
    double mu = 0.1;
    double lambda = 0.0;
    double half_width = 0.1;
    std::vector<std::size_t> N{5, 10, 20, 40, 80};
    int M = 10;
    int S = 512;
    std::uint64_t seed = 2024;
    std::string out = "out";
    int threads = 0;  // 0: available parallelism
    int quad_points = 3;
    double tol_abs = 1e-11;
    double tol_rel = 1e-10;
    int max_iters = 30;
    int max_dt_halvings = 6;
    std::string linear_solver = "auto";

    bool operator==(const RunConfig&) const = default;

    /// Throws ConfigError naming the offending key.
    void validate() const;
    EnsembleSpec spec() const;
};

/// Parses config text; throws ConfigError on syntax errors, unknown or
/// repeated keys and invalid values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Every key, doubles at round-trip precision: parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& cfg);

/// --threads, else MCNSFV_THREADS, else the config key, else the hardware.
unsigned resolve_threads(std::optional<int> flag, const RunConfig& cfg);

struct Paths {
    std::filesystem::path root;
    std::filesystem::path reference() const { return root / "reference"; }
    std::filesystem::path ensemble(int realisation) const;
    std::filesystem::path sample(std::uint64_t id) const;
    std::filesystem::path metrics() const { return root / "metrics.csv"; }
    std::filesystem::path rates() const { return root / "rates.csv"; }
};

struct MetricsRow {
    std::string experiment;
    std::string field;
    std::string metric;
    double p = 0.0;
    std::size_t N = 0;
    int M = 0;
    std::size_t S = 0;
    double value = 0.0;
};

inline constexpr const char* kMetricsHeader = "experiment,field,metric,p,N,M,S,value";
inline constexpr const char* kRatesHeader = "field,metric,slope,residual";

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
/// Throws FormatError naming the offending line.
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

struct RateRow {
    std::string field;
    std::string metric;
    SlopeFit fit;
};

/// One slope per (field, metric) in order of first appearance.
std::vector<RateRow> fit_rates(const std::vector<MetricsRow>& rows);
std::string format_rates_csv(const std::vector<RateRow>& rows);

/// Subcommands. Each writes a human-readable report to `log` and throws on
/// errors; the exit code of a successful command is returned.
int cmd_run_sample(const RunConfig& cfg, std::uint64_t sample, unsigned threads, std::ostream& log);
int cmd_reference(const RunConfig& cfg, unsigned threads, std::ostream& log);
/// Ensemble phase: realisations 1..M with max(N) samples each, reusing
/// stored ensembles whose manifest matches the config.
int cmd_mc(const RunConfig& cfg, unsigned threads, std::ostream& log);
int cmd_estimate(const RunConfig& cfg, unsigned threads, std::ostream& log);
int cmd_convergence(const RunConfig& cfg, std::ostream& log);
/// Property suite; kExitProperty when any property fails.
int cmd_verify(const RunConfig& cfg, unsigned threads, std::ostream& log);

/// Maps an exception from a command onto the exit-code contract.
int exit_code_for(const std::exception& e);

} // namespace mcnsfv
