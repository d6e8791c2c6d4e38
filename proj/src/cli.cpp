#include "mcnsfv/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "mcnsfv/errors.hpp"
#include "mcnsfv/persist.hpp"

namespace mcnsfv {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

RunOptions threads_only(unsigned threads) {
    RunOptions opts;
    opts.threads = threads;
    return opts;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = first + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last || value.empty())
        throw ConfigError(key, "cannot parse '" + value + "' as a number");
    if constexpr (std::is_floating_point_v<T>)
        if (!std::isfinite(out)) throw ConfigError(key, "must be finite");
    return out;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
    if (out.empty()) throw ConfigError(key, "empty list");
    return out;
}

LinearSolverKind parse_linear(const std::string& name) {
    if (name == "auto") return LinearSolverKind::automatic;
    if (name == "direct") return LinearSolverKind::direct;
    if (name == "iterative") return LinearSolverKind::iterative;
    throw ConfigError("linear_solver", "expected auto, direct or iterative, got '" + name + "'");
}

using Setter = void (*)(RunConfig&, const std::string& key, const std::string& value);

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"experiment", [](RunConfig& c, const std::string&, const std::string& v) { c.experiment = v; }},
        {"n", [](RunConfig& c, const std::string& k, const std::string& v) { c.n = parse_number<int>(k, v); }},
        {"dt_factor", [](RunConfig& c, const std::string& k, const std::string& v) { c.dt_factor = parse_number<double>(k, v); }},
        {"T", [](RunConfig& c, const std::string& k, const std::string& v) { c.T = parse_number<double>(k, v); }},
        {"epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.epsilon = parse_number<double>(k, v); }},
        {"gamma", [](RunConfig& c, const std::string& k, const std::string& v) { c.gamma = parse_number<double>(k, v); }},
        {"a", [](RunConfig& c, const std::string& k, const std::string& v) { c.a = parse_number<double>(k, v); }},
        {"mu", [](RunConfig& c, const std::string& k, const std::string& v) { c.mu = parse_number<double>(k, v); }},
        {"lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda = parse_number<double>(k, v); }},
        {"half_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.half_width = parse_number<double>(k, v); }},
        {"N", [](RunConfig& c, const std::string& k, const std::string& v) { c.N = parse_list(k, v); }},
        {"M", [](RunConfig& c, const std::string& k, const std::string& v) { c.M = parse_number<int>(k, v); }},
        {"S", [](RunConfig& c, const std::string& k, const std::string& v) { c.S = parse_number<int>(k, v); }},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
        {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
        {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = parse_number<int>(k, v); }},
        {"quad_points", [](RunConfig& c, const std::string& k, const std::string& v) { c.quad_points = parse_number<int>(k, v); }},
        {"tol_abs", [](RunConfig& c, const std::string& k, const std::string& v) { c.tol_abs = parse_number<double>(k, v); }},
        {"tol_rel", [](RunConfig& c, const std::string& k, const std::string& v) { c.tol_rel = parse_number<double>(k, v); }},
        {"max_iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_iters = parse_number<int>(k, v); }},
        {"max_dt_halvings", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_dt_halvings = parse_number<int>(k, v); }},
        {"linear_solver", [](RunConfig& c, const std::string&, const std::string& v) { c.linear_solver = v; }},
    };
    return table;
}

} // namespace

void RunConfig::validate() const {
    (void)parse_experiment(experiment);
    if (n < 2) throw ConfigError("n", "need at least 2 cells per axis");
    if (!(half_width >= 0.0)) throw ConfigError("half_width", "must be nonnegative");
    if (experiment == "vortex_interface" && !(half_width < 0.5))
        throw ConfigError("half_width", "interface radius 0.5 + Y must stay positive");
    if (N.empty()) throw ConfigError("N", "empty list");
    for (std::size_t i = 0; i < N.size(); ++i) {
        if (N[i] < 1) throw ConfigError("N", "entries must be at least 1");
        if (i > 0 && N[i] <= N[i - 1]) throw ConfigError("N", "list must be strictly increasing");
    }
    if (M < 1) throw ConfigError("M", "need at least one realisation");
    if (S < 2) throw ConfigError("S", "reference needs at least 2 samples");
    if (threads < 0) throw ConfigError("threads", "must be nonnegative");
    if (out.empty()) throw ConfigError("out", "output directory must be set");
    (void)parse_linear(linear_solver);
    const EnsembleSpec s = spec();
    s.scheme.validate();
    FluidParams p;
    p.mu = mu;
    p.lambda = lambda;
    p.gamma = gamma;
    p.a = a;
    p.validate();
}

EnsembleSpec RunConfig::spec() const {
    EnsembleSpec s;
    s.model.experiment = parse_experiment(experiment);
    s.model.half_width = half_width;
    s.model.seed = seed;
    s.model.mu = mu;
    s.model.lambda = lambda;
    s.n = n;
    s.d = 2;
    s.pressure = {a, gamma};
    s.scheme.epsilon = epsilon;
    s.scheme.dt_factor = dt_factor;
    s.scheme.T = T;
    s.scheme.quad_points = quad_points;
    s.scheme.solver.tol_abs = tol_abs;
    s.scheme.solver.tol_rel = tol_rel;
    s.scheme.solver.max_iters = max_iters;
    s.scheme.solver.max_dt_halvings = max_dt_halvings;
    s.scheme.solver.linear = parse_linear(linear_solver);
    return s;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError(key, "unknown key (line " + std::to_string(lineno) + ")");
        if (!seen.insert(key).second) throw ConfigError(key, "repeated key");
        it->second(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config", "file not found: " + path.string());
    return parse_config(read_file(path));
}

std::string emit_config(const RunConfig& c) {
    std::ostringstream s;
    s << "experiment = " << c.experiment << "\n"
      << "n = " << c.n << "\n"
      << "dt_factor = " << fmt(c.dt_factor) << "\n"
      << "T = " << fmt(c.T) << "\n"
      << "epsilon = " << fmt(c.epsilon) << "\n"
      << "gamma = " << fmt(c.gamma) << "\n"
      << "a = " << fmt(c.a) << "\n"
      << "mu = " << fmt(c.mu) << "\n"
      << "lambda = " << fmt(c.lambda) << "\n"
      << "half_width = " << fmt(c.half_width) << "\n"
      << "N = ";
    for (std::size_t i = 0; i < c.N.size(); ++i) s << (i ? "," : "") << c.N[i];
    s << "\n"
      << "M = " << c.M << "\n"
      << "S = " << c.S << "\n"
      << "seed = " << c.seed << "\n"
      << "out = " << c.out << "\n"
      << "threads = " << c.threads << "\n"
      << "quad_points = " << c.quad_points << "\n"
      << "tol_abs = " << fmt(c.tol_abs) << "\n"
      << "tol_rel = " << fmt(c.tol_rel) << "\n"
      << "max_iters = " << c.max_iters << "\n"
      << "max_dt_halvings = " << c.max_dt_halvings << "\n"
      << "linear_solver = " << c.linear_solver << "\n";
    return s.str();
}

unsigned resolve_threads(std::optional<int> flag, const RunConfig& cfg) {
    int t = 0;
    if (flag) {
        t = *flag;
        if (t < 0) throw ConfigError("threads", "--threads must be nonnegative");
    } else if (const char* env = std::getenv("MCNSFV_THREADS"); env && *env) {
        t = parse_number<int>("MCNSFV_THREADS", trim(env));
        if (t < 0) throw ConfigError("MCNSFV_THREADS", "must be nonnegative");
    } else {
        t = cfg.threads;
    }
    if (t == 0) t = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return static_cast<unsigned>(t);
}

fs::path Paths::ensemble(int realisation) const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "r%03d", realisation);
    return root / "ensembles" / buf;
}

fs::path Paths::sample(std::uint64_t id) const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(id));
    return root / "samples" / buf;
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream s;
    s << kMetricsHeader << "\n";
    for (const auto& r : rows)
        s << r.experiment << "," << r.field << "," << r.metric << "," << fmt(r.p) << "," << r.N << ","
          << r.M << "," << r.S << "," << fmt(r.value) << "\n";
    return s.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kMetricsHeader)
        throw FormatError("metrics CSV line 1: expected header '" + std::string(kMetricsHeader) + "'");
    std::vector<MetricsRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(trim(c));
        const std::string where = "metrics CSV line " + std::to_string(lineno);
        if (cols.size() != 8) throw FormatError(where + ": expected 8 columns");
        try {
            MetricsRow r;
            r.experiment = cols[0];
            r.field = cols[1];
            r.metric = cols[2];
            r.p = parse_number<double>("p", cols[3]);
            r.N = parse_number<std::size_t>("N", cols[4]);
            r.M = parse_number<int>("M", cols[5]);
            r.S = parse_number<std::size_t>("S", cols[6]);
            r.value = parse_number<double>("value", cols[7]);
            rows.push_back(r);
        } catch (const ConfigError& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    if (rows.empty()) throw FormatError("metrics CSV: no rows");
    return rows;
}

std::vector<RateRow> fit_rates(const std::vector<MetricsRow>& rows) {
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> pts;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.field, r.metric);
        if (!pts.count(key)) order.push_back(key);
        pts[key].first.push_back(static_cast<double>(r.N));
        pts[key].second.push_back(r.value);
    }
    std::vector<RateRow> out;
    for (const auto& key : order) {
        const auto& [Ns, Es] = pts[key];
        try {
            out.push_back({key.first, key.second, slope_fit(Ns, Es)});
        } catch (const DomainError& e) {
            throw DomainError(key.first + "/" + key.second + ": " + e.what());
        }
    }
    return out;
}

std::string format_rates_csv(const std::vector<RateRow>& rows) {
    std::ostringstream s;
    s << kRatesHeader << "\n";
    for (const auto& r : rows)
        s << r.field << "," << r.metric << "," << fmt(r.fit.slope) << "," << fmt(r.fit.residual) << "\n";
    return s.str();
}

int cmd_run_sample(const RunConfig& cfg, std::uint64_t sample, unsigned threads, std::ostream& log) {
    cfg.validate();
    const EnsembleSpec spec = cfg.spec();
    const Paths paths{cfg.out};
    RunOptions opts;
    opts.threads = threads;
    Ensemble ens;
    try {
        ens = run_samples(spec, {sample}, 0, opts);
    } catch (const EnsembleError& e) {
        log << "sample " << sample << " failed: " << e.what() << "\n";
        throw;
    }
    save_ensemble(ens, paths.sample(sample));
    const SampleDiagnostics& d = ens.diagnostics.front();
    const bool ledger_ok = d.min_ledger_slack >= -1e-9;
    log << "sample " << sample << " (" << cfg.experiment << ", n=" << cfg.n << ", T=" << cfg.T
        << ") -> " << paths.sample(sample).string() << "\n"
        << "  steps " << d.steps << ", newton iterations " << d.newton_iterations << "\n"
        << "  mass drift " << short_fmt(d.mass_drift) << "\n"
        << "  momentum drift " << short_fmt(d.momentum_drift) << "\n"
        << "  energy drift " << short_fmt(d.initial_energy - d.final_energy) << " (E(0) = "
        << fmt(d.initial_energy) << ", E(T) = " << fmt(d.final_energy) << ")\n"
        << "  min density " << fmt(d.min_density) << "\n"
        << "  min ledger slack " << short_fmt(d.min_ledger_slack) << (ledger_ok ? " (ok)" : " (VIOLATED)")
        << "\n";
    return kExitOk;
}

int cmd_reference(const RunConfig& cfg, unsigned threads, std::ostream& log) {
    cfg.validate();
    const Paths paths{cfg.out};
    const auto t0 = std::chrono::steady_clock::now();
    const Ensemble ens = run_ensemble(cfg.spec(), static_cast<std::size_t>(cfg.S), 0, threads_only(threads));
    const ReferenceStats ref = compute_reference(ens);
    save_reference(ref, paths.reference());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << "reference: S = " << ref.S << " of " << cfg.S << " samples (" << ref.failed_ids.size()
        << " failed) -> " << paths.reference().string() << " [" << std::fixed << std::setprecision(1)
        << secs << " s]\n"
        << std::defaultfloat;
    return kExitOk;
}

namespace {

std::vector<Ensemble> ensemble_phase(const RunConfig& cfg, unsigned threads, std::ostream& log) {
    const EnsembleSpec spec = cfg.spec();
    const Paths paths{cfg.out};
    const std::size_t maxN = cfg.N.back();
    std::vector<Ensemble> out;
    for (int m = 1; m <= cfg.M; ++m) {
        const fs::path dir = paths.ensemble(m);
        bool reused = false;
        if (fs::exists(dir / kManifestName)) {
            try {
                Ensemble e = load_ensemble(dir, cfg.n);
                if (e.spec.hash() == spec.hash() && e.realisation == static_cast<std::uint32_t>(m) &&
                    e.sample_ids.size() == maxN) {
                    out.push_back(std::move(e));
                    reused = true;
                }
            } catch (const FormatError& e) {
                log << "realisation " << m << ": stored ensemble rejected (" << e.what() << ")\n";
            }
        }
        if (!reused) {
            const auto t0 = std::chrono::steady_clock::now();
            Ensemble e = run_ensemble(spec, maxN, static_cast<std::uint32_t>(m), threads_only(threads));
            save_ensemble(e, dir);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log << "realisation " << m << "/" << cfg.M << ": " << e.size() << " of " << maxN
                << " samples (" << e.failures.size() << " failed) [" << std::fixed
                << std::setprecision(1) << secs << " s]\n"
                << std::defaultfloat;
            out.push_back(std::move(e));
        } else {
            log << "realisation " << m << "/" << cfg.M << ": reused " << dir.string() << "\n";
        }
    }
    return out;
}

} // namespace

int cmd_mc(const RunConfig& cfg, unsigned threads, std::ostream& log) {
    cfg.validate();
    (void)ensemble_phase(cfg, threads, log);
    return kExitOk;
}

int cmd_estimate(const RunConfig& cfg, unsigned threads, std::ostream& log) {
    cfg.validate();
    const Paths paths{cfg.out};
    if (!fs::exists(paths.reference() / kManifestName))
        throw FormatError("reference not found: " + paths.reference().string() +
                          " (run the reference command first)");
    const ReferenceStats ref = load_reference(paths.reference(), cfg.n);
    if (ref.spec.hash() != cfg.spec().hash())
        throw FormatError("reference at " + paths.reference().string() +
                          " was produced by a different configuration");
    const std::vector<Ensemble> reals = ensemble_phase(cfg, threads, log);

    std::vector<MetricsRow> rows;
    for (Unknown u : {Unknown::rho, Unknown::m, Unknown::u}) {
        std::vector<ErrorMetrics> per_n;
        for (std::size_t N : cfg.N) per_n.push_back(error_metrics(reals, N, ref, u, cfg.gamma));
        for (const char* metric : {"E1", "E2", "E3", "E4"}) {
            for (std::size_t i = 0; i < cfg.N.size(); ++i) {
                const ErrorMetrics& e = per_n[i];
                const std::string name = metric;
                const double value = name == "E1" ? e.E1 : name == "E2" ? e.E2 : name == "E3" ? e.E3 : e.E4;
                rows.push_back({cfg.experiment, to_string(u), name, e.p, cfg.N[i], cfg.M, ref.S, value});
            }
        }
    }
    write_file_atomic(paths.metrics(), format_metrics_csv(rows));
    log << "metrics: " << rows.size() << " rows -> " << paths.metrics().string() << "\n";
    return kExitOk;
}

int cmd_convergence(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Paths paths{cfg.out};
    if (!fs::exists(paths.metrics()))
        throw FormatError("metrics CSV not found: " + paths.metrics().string());
    const auto rates = fit_rates(parse_metrics_csv(read_file(paths.metrics())));
    write_file_atomic(paths.rates(), format_rates_csv(rates));
    for (const auto& r : rates)
        log << std::left << std::setw(4) << r.field << " " << r.metric << "  slope " << std::fixed
            << std::setprecision(3) << std::setw(7) << std::right << r.fit.slope << "  residual "
            << std::setprecision(3) << r.fit.residual << "\n";
    log << std::defaultfloat << "rates -> " << paths.rates().string() << "\n";
    return kExitOk;
}

namespace {

struct Property {
    explicit Property(std::string n) : name(std::move(n)) {}
    std::string name;
    bool ok = true;
    std::string detail;
};

} // namespace

int cmd_verify(const RunConfig& cfg, unsigned threads, std::ostream& log) {
    cfg.validate();
    const EnsembleSpec spec = cfg.spec();
    std::vector<Property> props;

    {
        Property p{"flux consistency"};
        const double h = 2.0 / cfg.n;
        for (double r : {0.3, 1.0, 2.5})
            for (double v : {-0.7, 0.0, 0.4})
                if (upwind_flux(r, r, v, v, h, cfg.epsilon) != r * v) p.ok = false;
        p.detail = "F(r, r, v, v) = r v on constants";
        props.push_back(p);
    }
    {
        // Face terms cancel: the summed residual is the time derivative alone.
        Property p{"face telescoping"};
        const MeshPtr mesh = build_mesh(8, 2);
        FluidParams fp;
        fp.mu = cfg.mu;
        fp.lambda = cfg.lambda;
        fp.gamma = cfg.gamma;
        fp.a = cfg.a;
        ImplicitScheme scheme(mesh, fp, spec.scheme);
        ExperimentModel model = spec.model;
        model.experiment = Experiment::vortex;
        const State old_s = project_initial(draw_sample(model, 0), mesh, 3);
        State new_s = old_s;
        for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
            new_s.rho.at(k) *= 1.0 + 0.01 * std::sin(3.0 * k);
            new_s.mom.at(k, 0) += 0.02 * std::cos(2.0 * k);
        }
        const double dt = 0.1;
        const auto r = scheme.residual(new_s, old_s, dt);
        double worst = 0.0;
        for (int c = 0; c < 3; ++c) {
            double sum = 0.0, expect = 0.0;
            for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
                sum += r[k * 3 + c];
                const double now = c == 0 ? new_s.rho.at(k) : new_s.mom.at(k, c - 1);
                const double before = c == 0 ? old_s.rho.at(k) : old_s.mom.at(k, c - 1);
                expect += mesh->cell_volume() * (now - before) / dt;
            }
            worst = std::max(worst, std::abs(sum - expect));
        }
        p.ok = worst <= 1e-12;
        p.detail = "max |sum residual - d/dt totals| = " + short_fmt(worst);
        props.push_back(p);
    }

    // A few samples of the configured experiment.
    constexpr int kSamples = 3;
    Property mass{"mass conservation"}, mom{"momentum conservation"}, pos{"positivity"},
        ledger{"energy ledger"};
    double worst_mass = 0.0, worst_mom = 0.0, min_rho = INFINITY, min_slack = INFINITY;
    std::vector<SampleResult> results(kSamples);
    std::vector<std::string> errors(kSamples);
    parallel_for(kSamples, threads, [&](std::size_t i) {
        try {
            results[i] = solve_sample(draw_sample(spec.model, i, 0), build_mesh(cfg.n, 2), spec);
        } catch (const SolverFailure& e) {
            errors[i] = e.what();
        } catch (const DomainError& e) {
            errors[i] = e.what();
        }
    });
    for (int i = 0; i < kSamples; ++i) {
        if (!errors[i].empty()) {
            for (Property* p : {&mass, &mom, &pos, &ledger}) {
                p->ok = false;
                p->detail = "sample " + std::to_string(i) + " failed: " + errors[i];
            }
            continue;
        }
        const SampleDiagnostics& d = results[i].diag;
        worst_mass = std::max(worst_mass, d.mass_drift);
        worst_mom = std::max(worst_mom, d.momentum_drift);
        min_rho = std::min(min_rho, d.min_density);
        min_slack = std::min(min_slack, d.min_ledger_slack);
    }
    if (mass.ok) {
        mass.ok = worst_mass <= 1e-9;
        mass.detail = "max relative drift " + short_fmt(worst_mass);
        mom.ok = worst_mom <= 1e-9;
        mom.detail = "max relative drift " + short_fmt(worst_mom);
        pos.ok = min_rho > 0.0;
        pos.detail = "min density " + fmt(min_rho);
        ledger.ok = min_slack >= -1e-9;
        ledger.detail = "min slack " + short_fmt(min_slack);
    }
    props.insert(props.end(), {mass, mom, pos, ledger});

    {
        Property p{"Gram identity"};
        const MeshPtr mesh = build_mesh(2, 2);
        std::mt19937_64 gen(cfg.seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::vector<Field> f, g;
        for (int i = 0; i < 3; ++i) {
            Field a(mesh, 1), b(mesh, 1);
            for (double& v : a.values()) v = dist(gen);
            for (double& v : b.values()) v = dist(gen);
            f.push_back(a);
            g.push_back(b);
        }
        double worst = 0.0;
        for (int k = 1; k <= 3; ++k) {
            // Explicit tensors over 4^k index tuples.
            std::size_t total = 1;
            for (int i = 0; i < k; ++i) total *= 4;
            double sum = 0.0;
            for (std::size_t idx = 0; idx < total; ++idx) {
                double tf = 0.0, tg = 0.0;
                for (int s = 0; s < 3; ++s) {
                    double pf = 1.0, pg = 1.0;
                    std::size_t rest = idx;
                    for (int i = 0; i < k; ++i, rest /= 4) {
                        pf *= f[s].at(rest % 4);
                        pg *= g[s].at(rest % 4);
                    }
                    tf += pf / 3.0;
                    tg += pg / 3.0;
                }
                sum += (tf - tg) * (tf - tg);  // |K| = 1
            }
            const double brute = std::sqrt(sum);
            worst = std::max(worst, std::abs(tensor_moment_error_l2(f, g, k) - brute) / brute);
        }
        p.ok = worst <= 1e-10;
        p.detail = "max relative gap " + short_fmt(worst) + " for k <= 3";
        props.push_back(p);
    }

    bool all = true;
    for (const auto& p : props) {
        log << (p.ok ? "PASS  " : "FAIL  ") << std::left << std::setw(22) << p.name << p.detail << "\n";
        all = all && p.ok;
    }
    log << (all ? "all properties pass\n" : "property suite FAILED\n");
    return all ? kExitOk : kExitProperty;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const SolverFailure*>(&e) || dynamic_cast<const EnsembleError*>(&e))
        return kExitSolver;
    return kExitOther;
}

} // namespace mcnsfv
