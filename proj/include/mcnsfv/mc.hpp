#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcnsfv/energy.hpp"
#include "mcnsfv/random_data.hpp"
#include "mcnsfv/scheme.hpp"

namespace mcnsfv {

/// Everything that determines a sample solve apart from its index.
struct EnsembleSpec {
    ExperimentModel model;
    int n = 64;
    int d = 2;
    PressureLaw pressure;
    SchemeConfig scheme;

    /// Canonical text of every field above (doubles at round-trip precision).
    std::string canonical() const;
    /// 16 hex digits, FNV-1a of canonical().
    std::string hash() const;
};

/// Per-sample structure diagnostics, measured between t = 0 and t = T.
struct SampleDiagnostics {
    double min_density = 0.0;      // over all time levels
    double min_ledger_slack = 0.0; // energy ledger, g = 0
    double mass_drift = 0.0;       // |M(T) - M(0)| / M(0)
    double momentum_drift = 0.0;   // |P(T) - P(0)| / sum_K |K| |m_K(0)|
    double initial_energy = 0.0;
    double final_energy = 0.0;
    int steps = 0;
    int newton_iterations = 0;
};

struct SampleResult {
    State state;  // terminal state
    SampleDiagnostics diag;
};

using SampleSolver =
    std::function<SampleResult(const DataSample&, const MeshPtr&, const EnsembleSpec&)>;

/// Projects, solves to T and measures the diagnostics.
SampleResult solve_sample(const DataSample& sample, const MeshPtr& mesh, const EnsembleSpec& spec);

struct SampleFailure {
    std::uint64_t sample_id = 0;
    std::string reason;
};

/// Terminal states of samples 0..N-1 of one realisation.
struct Ensemble {
    EnsembleSpec spec;
    std::uint32_t realisation = 0;
    MeshPtr mesh;
    std::vector<std::uint64_t> sample_ids;   // requested
    std::vector<SampleFailure> failures;     // ascending sample id
    std::vector<std::uint64_t> state_ids;    // ids of `states`, ascending
    std::vector<State> states;
    std::vector<SampleDiagnostics> diagnostics;  // aligned with states (not persisted)

    std::size_t size() const noexcept { return states.size(); }
    std::vector<std::uint64_t> failed_ids() const;
    /// Sub-ensemble of the samples with id < N (nested ensembles share samples).
    Ensemble first(std::size_t N) const;
};

struct RunOptions {
    unsigned threads = 1;
    /// Replaces solve_sample, e.g. to inject failures.
    SampleSolver solver;
};

/// Runs `fn(i)` for i < count on up to `threads` workers. The first exception
/// (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Solves the given samples of `realisation`. Solver failures and nonpositive
/// densities are recorded, never imputed; throws EnsembleError when all fail.
Ensemble run_samples(const EnsembleSpec& spec, std::vector<std::uint64_t> sample_ids,
                     std::uint32_t realisation, const RunOptions& opts = {});
/// run_samples for 0..N-1.
Ensemble run_ensemble(const EnsembleSpec& spec, std::size_t N, std::uint32_t realisation,
                      const RunOptions& opts = {});

enum class Unknown { rho, m, u };
std::string to_string(Unknown u);
Unknown parse_unknown(const std::string& name);
/// Norm exponent of the error metrics: gamma, 2 gamma / (gamma + 1), 2.
double metric_exponent(Unknown u, double gamma);

/// rho, m or u = m / rho of every sample, in sample order.
std::vector<Field> unknown_samples(const Ensemble& ens, Unknown u);

/// Sum over a fixed pairwise tree of sample indices.
Field pairwise_sum(std::size_t count, const std::function<Field(std::size_t)>& term);

/// (1/N) sum U^n
Field mean_field(std::span<const Field> samples);
/// (1/N) sum |U^n - mean|, cellwise Euclidean norm (scalar result).
Field deviation_field(std::span<const Field> samples);
/// (1/(N-1)) sum |U^n - mean|^2, cellwise Euclidean norm (scalar result). Needs N >= 2.
Field variance_field(std::span<const Field> samples);

struct ReferenceStats {
    EnsembleSpec spec;
    Field mean_rho, mean_m, mean_u;
    Field dev_rho, dev_m;
    Field var_u;
    std::size_t S = 0;  // samples actually used
    std::vector<std::uint64_t> sample_ids;
    std::vector<std::uint64_t> failed_ids;

    const Field& mean(Unknown u) const;
    /// Dev for rho and m, Var for u.
    const Field& spread(Unknown u) const;
};

/// Reference statistics from every sample of `ens` (needs at least two).
ReferenceStats compute_reference(const Ensemble& ens);

struct ErrorMetrics {
    double E1 = 0.0, E2 = 0.0, E3 = 0.0, E4 = 0.0;
    double p = 2.0;
};

/// E1..E4 of `u` over the M realisations, each restricted to its samples
/// with id < N. E3/E4 compare deviations (rho, m) or variances (u).
ErrorMetrics error_metrics(std::span<const Ensemble> realisations, std::size_t N,
                           const ReferenceStats& ref, Unknown u, double gamma);

/// || (1/N) sum f_n^{(x)k} - (1/S) sum g_s^{(x)k} ||_{L^2(T^{kd})} through
/// <f^{(x)k}, g^{(x)k}> = <f, g>^k.
double tensor_moment_error_l2(std::span<const Field> f, std::span<const Field> g, int k);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// Root mean square of the log-log residuals.
    double residual = 0.0;
};

/// Least squares fit of log E against log N. Needs >= 3 points and E > 0.
SlopeFit slope_fit(std::span<const double> N, std::span<const double> E);

} // namespace mcnsfv
