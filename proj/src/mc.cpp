#include "mcnsfv/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "mcnsfv/errors.hpp"
#include "mcnsfv/norms.hpp"

namespace mcnsfv {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_string(LinearSolverKind k) {
    switch (k) {
    case LinearSolverKind::automatic: return "auto";
    case LinearSolverKind::direct: return "direct";
    case LinearSolverKind::iterative: return "iterative";
    }
    return "auto";
}

void require_samples(std::span<const Field> samples, std::size_t at_least, const char* what) {
    if (samples.size() < at_least)
        throw DomainError(std::string(what) + ": needs at least " + std::to_string(at_least) +
                          " samples, got " + std::to_string(samples.size()));
    for (const Field& f : samples.subspan(1)) {
        require_same_mesh(samples[0], f, what);
        if (f.components() != samples[0].components())
            throw DomainError(std::string(what) + ": samples differ in components");
    }
}

// Cellwise |U^n - mean|^power as a scalar field.
Field distance_field(const Field& sample, const Field& mean, int power) {
    Field out(sample.mesh_ptr(), 1);
    const int c = sample.components();
    for (std::size_t k = 0; k < sample.num_cells(); ++k) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = sample.at(k, j) - mean.at(k, j);
            s += e * e;
        }
        out.at(k) = power == 2 ? s : std::sqrt(s);
    }
    return out;
}

double pairwise_scalar(std::size_t lo, std::size_t hi, const std::function<double(std::size_t)>& f) {
    if (hi - lo == 1) return f(lo);
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_scalar(lo, mid, f) + pairwise_scalar(mid, hi, f);
}

Field pairwise_range(std::size_t lo, std::size_t hi, const std::function<Field(std::size_t)>& term) {
    if (hi - lo == 1) return term(lo);
    const std::size_t mid = lo + (hi - lo) / 2;
    Field left = pairwise_range(lo, mid, term);
    left += pairwise_range(mid, hi, term);
    return left;
}

} // namespace

std::string EnsembleSpec::canonical() const {
    std::ostringstream s;
    s << "experiment=" << to_string(model.experiment) << "\n"
      << "half_width=" << fmt(model.half_width) << "\n"
      << "seed=" << model.seed << "\n"
      << "mu=" << fmt(model.mu) << "\n"
      << "lambda=" << fmt(model.lambda) << "\n"
      << "n=" << n << "\n"
      << "d=" << d << "\n"
      << "a=" << fmt(pressure.a) << "\n"
      << "gamma=" << fmt(pressure.gamma) << "\n"
      << "epsilon=" << fmt(scheme.epsilon) << "\n"
      << "dt_factor=" << fmt(scheme.dt_factor) << "\n"
      << "T=" << fmt(scheme.T) << "\n"
      << "quad_points=" << scheme.quad_points << "\n"
      << "tol_abs=" << fmt(scheme.solver.tol_abs) << "\n"
      << "tol_rel=" << fmt(scheme.solver.tol_rel) << "\n"
      << "max_iters=" << scheme.solver.max_iters << "\n"
      << "max_dt_halvings=" << scheme.solver.max_dt_halvings << "\n"
      << "linear_solver=" << to_string(scheme.solver.linear) << "\n";
    if (model.forced_y) {
        const auto& y = *model.forced_y;
        s << "forced_y=" << fmt(y[0]) << "," << fmt(y[1]) << "," << fmt(y[2]) << "\n";
    }
    return s.str();
}

std::string EnsembleSpec::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SampleResult solve_sample(const DataSample& sample, const MeshPtr& mesh, const EnsembleSpec& spec) {
    const State initial = project_initial(sample, mesh, spec.scheme.quad_points);
    FluidParams params;
    params.mu = sample.mu;
    params.lambda = sample.lambda;
    params.a = spec.pressure.a;
    params.gamma = spec.pressure.gamma;
    if (sample.g) params.g = project(sample.g, mesh, spec.scheme.quad_points);

    Trajectory traj = solve_trajectory(initial, params, spec.scheme, {.keep_states = false});

    SampleResult res;
    res.state = traj.final_state();
    SampleDiagnostics& dg = res.diag;
    dg.min_density = min_density(initial);
    for (const auto& st : traj.steps) {
        dg.min_density = std::min(dg.min_density, st.min_density);
        dg.newton_iterations += st.newton_iterations;
    }
    dg.steps = static_cast<int>(traj.steps.size());
    dg.min_ledger_slack = energy_ledger_check(traj, params).min_slack;
    dg.initial_energy = traj.initial_energy;
    dg.final_energy = traj.steps.empty() ? traj.initial_energy : traj.steps.back().energy;

    const double m0 = total_mass(initial);
    dg.mass_drift = std::abs(total_mass(res.state) - m0) / m0;
    const Vec p0 = total_momentum(initial), p1 = total_momentum(res.state);
    double scale = 0.0, diff = 0.0;
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        double s = 0.0;
        for (int a = 0; a < mesh->dim(); ++a) s += initial.mom.at(k, a) * initial.mom.at(k, a);
        scale += mesh->cell_volume() * std::sqrt(s);
    }
    for (int a = 0; a < mesh->dim(); ++a) diff += (p1[a] - p0[a]) * (p1[a] - p0[a]);
    dg.momentum_drift = scale > 0.0 ? std::sqrt(diff) / scale : std::sqrt(diff);
    return res;
}

std::vector<std::uint64_t> Ensemble::failed_ids() const {
    std::vector<std::uint64_t> ids;
    for (const auto& f : failures) ids.push_back(f.sample_id);
    return ids;
}

Ensemble Ensemble::first(std::size_t N) const {
    Ensemble sub;
    sub.spec = spec;
    sub.realisation = realisation;
    sub.mesh = mesh;
    for (auto id : sample_ids)
        if (id < N) sub.sample_ids.push_back(id);
    for (const auto& f : failures)
        if (f.sample_id < N) sub.failures.push_back(f);
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (state_ids[i] >= N) continue;
        sub.state_ids.push_back(state_ids[i]);
        sub.states.push_back(states[i]);
        if (i < diagnostics.size()) sub.diagnostics.push_back(diagnostics[i]);
    }
    return sub;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(std::max(threads, 1u), std::max<std::size_t>(count, 1)));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Ensemble run_samples(const EnsembleSpec& spec, std::vector<std::uint64_t> sample_ids,
                     std::uint32_t realisation, const RunOptions& opts) {
    if (sample_ids.empty()) throw DomainError("run_samples: no samples requested");
    std::sort(sample_ids.begin(), sample_ids.end());
    if (std::adjacent_find(sample_ids.begin(), sample_ids.end()) != sample_ids.end())
        throw DomainError("run_samples: duplicate sample ids");
    spec.scheme.validate();
    Ensemble ens;
    ens.spec = spec;
    ens.realisation = realisation;
    ens.mesh = build_mesh(spec.n, spec.d);
    ens.sample_ids = sample_ids;

    const std::size_t N = sample_ids.size();
    std::vector<SampleResult> results(N);
    std::vector<std::string> failed(N);
    std::vector<char> ok(N, 0);
    const SampleSolver solver = opts.solver ? opts.solver : SampleSolver(solve_sample);
    parallel_for(N, opts.threads, [&](std::size_t i) {
        try {
            const DataSample sample = draw_sample(spec.model, sample_ids[i], realisation);
            results[i] = solver(sample, ens.mesh, spec);
            ok[i] = 1;
        } catch (const SolverFailure& e) {
            failed[i] = e.what();
        } catch (const DomainError& e) {
            failed[i] = e.what();
        }
    });

    for (std::size_t i = 0; i < N; ++i) {
        if (!ok[i]) {
            ens.failures.push_back({sample_ids[i], failed[i]});
            continue;
        }
        ens.state_ids.push_back(sample_ids[i]);
        ens.states.push_back(std::move(results[i].state));
        ens.diagnostics.push_back(results[i].diag);
    }
    if (ens.states.empty())
        throw EnsembleError("run_samples: all " + std::to_string(N) + " samples failed (first: " +
                            ens.failures.front().reason + ")");
    return ens;
}

Ensemble run_ensemble(const EnsembleSpec& spec, std::size_t N, std::uint32_t realisation,
                      const RunOptions& opts) {
    if (N < 1) throw DomainError("run_ensemble: N must be at least 1");
    std::vector<std::uint64_t> ids(N);
    for (std::size_t i = 0; i < N; ++i) ids[i] = i;
    return run_samples(spec, std::move(ids), realisation, opts);
}

std::string to_string(Unknown u) {
    switch (u) {
    case Unknown::rho: return "rho";
    case Unknown::m: return "m";
    case Unknown::u: return "u";
    }
    return "rho";
}

Unknown parse_unknown(const std::string& name) {
    if (name == "rho") return Unknown::rho;
    if (name == "m") return Unknown::m;
    if (name == "u") return Unknown::u;
    throw DomainError("unknown field '" + name + "' (expected rho, m, u)");
}

double metric_exponent(Unknown u, double gamma) {
    switch (u) {
    case Unknown::rho: return gamma;
    case Unknown::m: return 2.0 * gamma / (gamma + 1.0);
    case Unknown::u: return 2.0;
    }
    return 2.0;
}

std::vector<Field> unknown_samples(const Ensemble& ens, Unknown u) {
    std::vector<Field> out;
    out.reserve(ens.states.size());
    for (const State& s : ens.states) {
        switch (u) {
        case Unknown::rho: out.push_back(s.rho); break;
        case Unknown::m: out.push_back(s.mom); break;
        case Unknown::u: out.push_back(velocity(s)); break;
        }
    }
    return out;
}

Field pairwise_sum(std::size_t count, const std::function<Field(std::size_t)>& term) {
    if (count == 0) throw DomainError("pairwise_sum: empty range");
    return pairwise_range(0, count, term);
}

Field mean_field(std::span<const Field> samples) {
    require_samples(samples, 1, "mean_field");
    // U^0 + (1/N) sum (U^n - U^0): identical samples give their value exactly.
    Field sum = pairwise_sum(samples.size(), [&](std::size_t i) { return samples[i] - samples[0]; });
    sum *= 1.0 / static_cast<double>(samples.size());
    sum += samples[0];
    return sum;
}

Field deviation_field(std::span<const Field> samples) {
    require_samples(samples, 1, "deviation_field");
    const Field mean = mean_field(samples);
    Field dev = pairwise_sum(samples.size(),
                             [&](std::size_t i) { return distance_field(samples[i], mean, 1); });
    dev *= 1.0 / static_cast<double>(samples.size());
    return dev;
}

Field variance_field(std::span<const Field> samples) {
    require_samples(samples, 2, "variance_field");
    const Field mean = mean_field(samples);
    Field var = pairwise_sum(samples.size(),
                             [&](std::size_t i) { return distance_field(samples[i], mean, 2); });
    var *= 1.0 / static_cast<double>(samples.size() - 1);
    return var;
}

const Field& ReferenceStats::mean(Unknown u) const {
    switch (u) {
    case Unknown::rho: return mean_rho;
    case Unknown::m: return mean_m;
    case Unknown::u: return mean_u;
    }
    return mean_rho;
}

const Field& ReferenceStats::spread(Unknown u) const {
    switch (u) {
    case Unknown::rho: return dev_rho;
    case Unknown::m: return dev_m;
    case Unknown::u: return var_u;
    }
    return dev_rho;
}

ReferenceStats compute_reference(const Ensemble& ens) {
    if (ens.size() < 2) throw DomainError("compute_reference: needs S >= 2 successful samples");
    ReferenceStats ref;
    ref.spec = ens.spec;
    ref.S = ens.size();
    ref.sample_ids = ens.sample_ids;
    ref.failed_ids = ens.failed_ids();
    const auto rho = unknown_samples(ens, Unknown::rho);
    const auto m = unknown_samples(ens, Unknown::m);
    const auto u = unknown_samples(ens, Unknown::u);
    ref.mean_rho = mean_field(rho);
    ref.mean_m = mean_field(m);
    ref.mean_u = mean_field(u);
    ref.dev_rho = deviation_field(rho);
    ref.dev_m = deviation_field(m);
    ref.var_u = variance_field(u);
    return ref;
}

ErrorMetrics error_metrics(std::span<const Ensemble> realisations, std::size_t N,
                           const ReferenceStats& ref, Unknown u, double gamma) {
    if (realisations.empty()) throw DomainError("error_metrics: no realisations");
    if (!ref.mean_rho.mesh_ptr()) throw DomainError("error_metrics: missing reference");
    ErrorMetrics out;
    out.p = metric_exponent(u, gamma);
    const double p = out.p;
    const std::size_t M = realisations.size();
    std::vector<double> mean_err(M), spread_err(M);
    for (std::size_t j = 0; j < M; ++j) {
        const auto samples = unknown_samples(realisations[j].first(N), u);
        if (samples.empty())
            throw EnsembleError("error_metrics: realisation has no successful sample below N");
        const Field& ref_mean = ref.mean(u);
        if (!(samples[0].mesh() == ref_mean.mesh()))
            throw MeshMismatch("error_metrics: ensemble and reference meshes differ");
        mean_err[j] = lp_norm(mean_field(samples) - ref_mean, p);
        const Field spread = u == Unknown::u ? variance_field(samples) : deviation_field(samples);
        spread_err[j] = lp_norm(spread - ref.spread(u), p);
    }
    const auto avg = [&](const std::vector<double>& e, double power) {
        return pairwise_scalar(0, M, [&](std::size_t j) { return std::pow(e[j], power); }) /
               static_cast<double>(M);
    };
    out.E1 = avg(mean_err, 1.0);
    out.E2 = std::pow(avg(mean_err, p), 1.0 / p);
    out.E3 = avg(spread_err, 1.0);
    out.E4 = std::pow(avg(spread_err, p), 1.0 / p);
    return out;
}

double tensor_moment_error_l2(std::span<const Field> f, std::span<const Field> g, int k) {
    if (k < 1) throw DomainError("tensor_moment_error_l2: k must be at least 1");
    if (f.empty() || g.empty()) throw DomainError("tensor_moment_error_l2: empty ensemble");
    for (const Field& x : f) require_same_mesh(f[0], x, "tensor_moment_error_l2");
    for (const Field& x : g) require_same_mesh(f[0], x, "tensor_moment_error_l2");
    // (1/|a||b|) sum_{i,j} <a_i, b_j>^k
    const auto gram = [k](std::span<const Field> a, std::span<const Field> b) {
        const double s = pairwise_scalar(0, a.size(), [&](std::size_t i) {
            return pairwise_scalar(0, b.size(),
                                   [&](std::size_t j) { return std::pow(l2_inner(a[i], b[j]), k); });
        });
        return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };
    const double sq = gram(f, f) - 2.0 * gram(f, g) + gram(g, g);
    return std::sqrt(std::max(sq, 0.0));
}

SlopeFit slope_fit(std::span<const double> N, std::span<const double> E) {
    if (N.size() != E.size()) throw DomainError("slope_fit: N and E differ in length");
    if (N.size() < 3) throw DomainError("slope_fit: needs at least 3 points");
    const std::size_t n = N.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(E[i] > 0.0) || !std::isfinite(E[i]))
            throw DomainError("slope_fit: error values must be positive, got " + fmt(E[i]));
        if (!(N[i] > 0.0)) throw DomainError("slope_fit: N must be positive");
        x[i] = std::log(N[i]);
        y[i] = std::log(E[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("slope_fit: N values must not all be equal");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / n);
    return fit;
}

} // namespace mcnsfv
