#include "mcnsfv/scheme.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcnsfv/errors.hpp"
#include "mcnsfv/norms.hpp"
#include "mcnsfv/operators.hpp"

namespace mcnsfv {

namespace {

// Cells per mesh above which the automatic linear solver switches to BiCGSTAB.
constexpr std::size_t kDirectSolverCellLimit = 32 * 32;
constexpr double kKrylovTolerance = 1e-13;
constexpr int kMaxDampingHalvings = 40;

inline double flux_with_coeff(double r_in, double r_out, double vn, double h_eps) {
    return 0.5 * (r_in + r_out) * vn - (h_eps + 0.5 * std::abs(vn)) * (r_out - r_in);
}

double max_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

bool FluidParams::has_force() const { return g.mesh_ptr() != nullptr; }

void FluidParams::validate() const {
    if (!(mu > 0.0)) throw ConfigError("mu", "shear viscosity must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("lambda", "bulk viscosity must be nonnegative");
    if (!(gamma > 1.0)) throw ConfigError("gamma", "adiabatic exponent must exceed 1");
    if (!(a >= 0.0)) throw ConfigError("a", "pressure coefficient must be nonnegative");
    if (has_force() && !g.all_finite()) throw ConfigError("g", "body force must be finite");
}

void SchemeConfig::validate() const {
    if (!(epsilon > -1.0)) throw ConfigError("epsilon", "must satisfy -1 < epsilon");
    if (!(dt_factor > 0.0)) throw ConfigError("dt_factor", "must be positive");
    if (!(T > 0.0)) throw ConfigError("T", "final time must be positive");
    if (quad_points < 1) throw ConfigError("quad_points", "need at least one point");
    if (!(solver.tol_abs > 0.0)) throw ConfigError("tol_abs", "must be positive");
    if (!(solver.tol_rel > 0.0)) throw ConfigError("tol_rel", "must be positive");
    if (solver.max_iters < 1) throw ConfigError("max_iters", "must be at least 1");
    if (solver.max_dt_halvings < 0) throw ConfigError("max_dt_halvings", "must be nonnegative");
}

double upwind_flux(double r_in, double r_out, double vn_in, double vn_out, double h,
                   double epsilon) {
    return flux_with_coeff(r_in, r_out, 0.5 * (vn_in + vn_out), std::pow(h, epsilon));
}

struct ImplicitScheme::LinearSolver {
    using Matrix = Eigen::SparseMatrix<double>;

    bool direct = true;
    Matrix A;
    // Position of every Jacobian entry in A's value array. The entry sequence
    // is fixed for a given scheme, so the pattern is built once.
    std::vector<Eigen::Index> slots;
    Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;
    Eigen::BiCGSTAB<Matrix, Eigen::IncompleteLUT<double>> krylov;
    bool preconditioned = false;

    LinearSolver() {
        krylov.preconditioner().setFillfactor(2);
        krylov.preconditioner().setDroptol(1e-2);
        krylov.setTolerance(kKrylovTolerance);
        krylov.setMaxIterations(500);
    }

    void assemble(const std::vector<Entry>& entries, std::size_t n) {
        if (slots.size() != entries.size()) {
            std::vector<Eigen::Triplet<double>> triplets;
            triplets.reserve(entries.size());
            for (const auto& e : entries)
                triplets.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), 1.0);
            A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            A.setFromTriplets(triplets.begin(), triplets.end());
            A.makeCompressed();
            slots.resize(entries.size());
            const auto* outer = A.outerIndexPtr();
            const auto* inner = A.innerIndexPtr();
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const auto col = static_cast<Eigen::Index>(entries[i].col);
                const auto* first = inner + outer[col];
                const auto* last = inner + outer[col + 1];
                slots[i] = std::lower_bound(first, last, static_cast<int>(entries[i].row)) - inner;
            }
        }
        double* values = A.valuePtr();
        std::fill(values, values + A.nonZeros(), 0.0);
        for (std::size_t i = 0; i < entries.size(); ++i) values[slots[i]] += entries[i].value;
    }

    bool factor_and_solve(const Eigen::Map<const Eigen::VectorXd>& b, Eigen::VectorXd& x) {
        if (!analyzed) {
            lu.analyzePattern(A);
            analyzed = true;
        }
        lu.factorize(A);
        if (lu.info() != Eigen::Success) return false;
        x = lu.solve(b);
        return true;
    }

    bool krylov_solve(const Eigen::Map<const Eigen::VectorXd>& b, Eigen::VectorXd& x,
                      bool refresh) {
        if (refresh || !preconditioned) {
            krylov.compute(A);
            preconditioned = krylov.info() == Eigen::Success;
            if (!preconditioned) return false;
        }
        // The solver references A, whose values were updated in place; only
        // the preconditioner may be stale.
        x = krylov.solve(b);
        return krylov.info() == Eigen::Success;
    }

    /// `refresh` asks for a new preconditioner (first Newton iteration of a step).
    bool solve(const std::vector<Entry>& entries, std::size_t n, const std::vector<double>& rhs,
               std::vector<double>& out, bool refresh) {
        assemble(entries, n);
        Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n));
        Eigen::VectorXd x;
        bool ok;
        if (direct) {
            ok = factor_and_solve(b, x);
        } else {
            ok = krylov_solve(b, x, refresh) || (!refresh && krylov_solve(b, x, true));
            // Stagnating Krylov solves fall back to the direct factorisation.
            if (!ok) ok = factor_and_solve(b, x);
        }
        if (!ok) return false;
        out.assign(x.data(), x.data() + x.size());
        return std::all_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); });
    }
};

ImplicitScheme::ImplicitScheme(MeshPtr mesh, FluidParams params, SchemeConfig cfg)
    : mesh_(std::move(mesh)), params_(std::move(params)), cfg_(cfg), d_(mesh_->dim()),
      block_(d_ + 1), dissipation_coeff_(std::pow(mesh_->h(), cfg_.epsilon)),
      linear_(std::make_unique<LinearSolver>()) {
    params_.validate();
    cfg_.validate();
    if (params_.has_force()) {
        if (!(params_.g.mesh() == *mesh_) || params_.g.components() != d_)
            throw DomainError("scheme: body force must be a vector field on the scheme mesh");
    }
    switch (cfg_.solver.linear) {
    case LinearSolverKind::direct: linear_->direct = true; break;
    case LinearSolverKind::iterative: linear_->direct = false; break;
    case LinearSolverKind::automatic:
        linear_->direct = mesh_->num_cells() <= kDirectSolverCellLimit;
        break;
    }
}

ImplicitScheme::~ImplicitScheme() = default;

bool ImplicitScheme::residual_into(const std::vector<double>& x,
                                   const std::vector<double>& x_old, double dt,
                                   std::vector<double>& r) const {
    const TorusMesh& mesh = *mesh_;
    const std::size_t nc = mesh.num_cells();
    const int d = d_;
    const int B = block_;
    const double vol = mesh.cell_volume();
    const double area = mesh.face_area();
    const double h = mesh.h();
    const double mu_h = params_.mu / h;
    const PressureLaw law = params_.pressure_law();

    std::vector<double> u(nc * d);
    std::vector<double> p(nc);
    for (std::size_t k = 0; k < nc; ++k) {
        const double rho = x[k * B];
        if (!(rho > 0.0)) return false;
        for (int a = 0; a < d; ++a) u[k * d + a] = x[k * B + 1 + a] / rho;
        p[k] = law.pressure(rho);
    }

    r.assign(x.size(), 0.0);
    const double vol_dt = vol / dt;
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = vol_dt * (x[i] - x_old[i]);
    if (params_.has_force()) {
        for (std::size_t k = 0; k < nc; ++k)
            for (int a = 0; a < d; ++a) r[k * B + 1 + a] -= vol * x[k * B] * params_.g.at(k, a);
    }

    double F[4];
    for (const Face& f : mesh.faces()) {
        const std::size_t L = f.in, R = f.out;
        const int ax = f.axis;
        const double vn = 0.5 * (u[L * d + ax] + u[R * d + ax]);
        const double* qL = &x[L * B];
        const double* qR = &x[R * B];
        for (int c = 0; c < B; ++c) F[c] = flux_with_coeff(qL[c], qR[c], vn, dissipation_coeff_);
        for (int i = 0; i < d; ++i) F[1 + i] -= mu_h * (u[R * d + i] - u[L * d + i]);
        F[1 + ax] += 0.5 * (p[L] + p[R]);
        for (int c = 0; c < B; ++c) {
            r[L * B + c] += area * F[c];
#ifdef MCNSFV_MUTATE_FLUX_SIGN
            r[R * B + c] += area * F[c];
#else
            r[R * B + c] -= area * F[c];
#endif
        }
    }

    const double eta = params_.eta(d);
    if (eta != 0.0) {
        // div_M = (1/2h) sum_a (u_a(M+e_a) - u_a(M-e_a))
        std::vector<double> div(nc, 0.0);
        for (std::size_t k = 0; k < nc; ++k) {
            double s = 0.0;
            for (int a = 0; a < d; ++a)
                s += u[mesh.neighbour(k, a, +1) * d + a] - u[mesh.neighbour(k, a, -1) * d + a];
            div[k] = s / (2.0 * h);
        }
        const double c_eta = eta * vol / (2.0 * h);
        for (std::size_t k = 0; k < nc; ++k)
            for (int i = 0; i < d; ++i)
                r[k * B + 1 + i] +=
                    c_eta * (div[mesh.neighbour(k, i, -1)] - div[mesh.neighbour(k, i, +1)]);
    }
    return true;
}

void ImplicitScheme::jacobian_into(const std::vector<double>& x, double dt,
                                   std::vector<Entry>& out) const {
    const TorusMesh& mesh = *mesh_;
    const std::size_t nc = mesh.num_cells();
    const int d = d_;
    const int B = block_;
    const double vol = mesh.cell_volume();
    const double area = mesh.face_area();
    const double h = mesh.h();
    const double mu_h = params_.mu / h;
    const PressureLaw law = params_.pressure_law();
    out.clear();

    // Time derivative and body force.
    for (std::size_t k = 0; k < nc; ++k) {
        for (int c = 0; c < B; ++c) out.push_back({k * B + c, k * B + c, vol / dt});
        if (params_.has_force())
            for (int a = 0; a < d; ++a)
                out.push_back({k * B + 1 + a, k * B, -vol * params_.g.at(k, a)});
    }

    // Face fluxes: dF[c][j], j < B for in-cell unknowns, j >= B for out-cell.
    double dF[4][8];
    double dvn[8];
    for (const Face& f : mesh.faces()) {
        const std::size_t L = f.in, R = f.out;
        const int ax = f.axis;
        const double* qL = &x[L * B];
        const double* qR = &x[R * B];
        const double rL = qL[0], rR = qR[0];
        const double uLa = qL[1 + ax] / rL, uRa = qR[1 + ax] / rR;
        const double vn = 0.5 * (uLa + uRa);
        const double D = dissipation_coeff_ + 0.5 * std::abs(vn);
        const double sgn = vn > 0.0 ? 1.0 : (vn < 0.0 ? -1.0 : 0.0);

        std::fill(dvn, dvn + 2 * B, 0.0);
        dvn[0] = -0.5 * uLa / rL;
        dvn[1 + ax] = 0.5 / rL;
        dvn[B] = -0.5 * uRa / rR;
        dvn[B + 1 + ax] = 0.5 / rR;

        for (int c = 0; c < B; ++c) {
            const double up = 0.5 * (qL[c] + qR[c]) - 0.5 * sgn * (qR[c] - qL[c]);
            for (int j = 0; j < 2 * B; ++j) dF[c][j] = up * dvn[j];
            dF[c][c] += 0.5 * vn + D;
            dF[c][B + c] += 0.5 * vn - D;
        }
        for (int i = 0; i < d; ++i) {
            const double uLi = qL[1 + i] / rL, uRi = qR[1 + i] / rR;
            dF[1 + i][0] += mu_h * (-uLi / rL);
            dF[1 + i][1 + i] += mu_h / rL;
            dF[1 + i][B] += mu_h * uRi / rR;
            dF[1 + i][B + 1 + i] -= mu_h / rR;
        }
        dF[1 + ax][0] += 0.5 * law.dpressure(rL);
        dF[1 + ax][B] += 0.5 * law.dpressure(rR);

        for (int c = 0; c < B; ++c) {
            for (int j = 0; j < B; ++j) {
                out.push_back({L * B + c, L * B + j, area * dF[c][j]});
                out.push_back({L * B + c, R * B + j, area * dF[c][B + j]});
#ifdef MCNSFV_MUTATE_FLUX_SIGN
                out.push_back({R * B + c, L * B + j, area * dF[c][j]});
                out.push_back({R * B + c, R * B + j, area * dF[c][B + j]});
#else
                out.push_back({R * B + c, L * B + j, -area * dF[c][j]});
                out.push_back({R * B + c, R * B + j, -area * dF[c][B + j]});
#endif
            }
        }
    }

    const double eta = params_.eta(d);
    if (eta != 0.0) {
        const double c_eta = eta * vol / (2.0 * h);
        const double inv_2h = 1.0 / (2.0 * h);
        for (std::size_t k = 0; k < nc; ++k) {
            for (int i = 0; i < d; ++i) {
                const std::size_t row = k * B + 1 + i;
                // +c_eta div_{K-e_i} - c_eta div_{K+e_i}
                for (int side : {-1, +1}) {
                    const std::size_t M = mesh.neighbour(k, i, side);
                    const double coef = -side * c_eta;
                    for (int a = 0; a < d; ++a) {
                        for (int s : {+1, -1}) {
                            const std::size_t P = mesh.neighbour(M, a, s);
                            const double w = coef * s * inv_2h;
                            const double rho = x[P * B];
                            const double ua = x[P * B + 1 + a] / rho;
                            out.push_back({row, P * B, -w * ua / rho});
                            out.push_back({row, P * B + 1 + a, w / rho});
                        }
                    }
                }
            }
        }
    }
}

std::vector<double> ImplicitScheme::residual(const State& s_new, const State& s_old,
                                             double dt) const {
    require_same_mesh(s_new.rho, s_old.rho, "residual");
    std::vector<double> r;
    if (!residual_into(pack_state(s_new), pack_state(s_old), dt, r))
        throw DomainError("residual: nonpositive density in the new state");
    return r;
}

std::vector<ImplicitScheme::Entry> ImplicitScheme::jacobian(const State& s_new, double dt) const {
    if (min_density(s_new) <= 0.0) throw DomainError("jacobian: nonpositive density");
    std::vector<Entry> out;
    jacobian_into(pack_state(s_new), dt, out);
    return out;
}

StepResult ImplicitScheme::try_step(const State& s_old, double dt) {
    const std::vector<double> x_old = pack_state(s_old);
    std::vector<double> x = x_old;
    std::vector<double> r;
    StepResult res;
    if (!residual_into(x, x_old, dt, r)) throw DomainError("step: nonpositive initial density");

    const double r0 = max_norm(r);
    const double tol = cfg_.solver.tol_abs + cfg_.solver.tol_rel * r0;
    res.initial_residual = r0;
    res.residual = r0;
    res.converged = r0 <= tol;

    std::vector<Entry> entries;
    std::vector<double> rhs(x.size()), delta, trial(x.size()), r_trial;
    for (int it = 1; it <= cfg_.solver.max_iters && !res.converged; ++it) {
        jacobian_into(x, dt, entries);
        for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
        if (!linear_->solve(entries, x.size(), rhs, delta, it == 1)) break;

        double alpha = 1.0;
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxDampingHalvings; ++attempt) {
            for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + alpha * delta[i];
            if (residual_into(trial, x_old, dt, r_trial) &&
                std::all_of(r_trial.begin(), r_trial.end(),
                            [](double v) { return std::isfinite(v); })) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
            res.density_damped = true;
        }
        if (!accepted) break;
        x.swap(trial);
        r.swap(r_trial);
        res.iterations = it;
        res.residual = max_norm(r);
        res.converged = res.residual <= tol;
    }
    res.state = unpack_state(x, mesh_);
    return res;
}

double dissipation_rate(const State& s, const FluidParams& params) {
    const Field u = velocity(s);
    const double grad = w12_seminorm(u);
    double out = params.mu * grad * grad;
    const double eta = params.eta(s.mesh().dim());
    if (eta != 0.0) {
        const double dv = lp_norm(div_h(u), 2.0);
        out += eta * dv * dv;
    }
    return out;
}

std::vector<double> pack_state(const State& s) {
    const int d = s.mesh().dim();
    const int B = d + 1;
    const std::size_t nc = s.rho.num_cells();
    std::vector<double> x(nc * B);
    for (std::size_t k = 0; k < nc; ++k) {
        x[k * B] = s.rho.at(k);
        for (int a = 0; a < d; ++a) x[k * B + 1 + a] = s.mom.at(k, a);
    }
    return x;
}

State unpack_state(const std::vector<double>& x, const MeshPtr& mesh) {
    const int d = mesh->dim();
    const int B = d + 1;
    State s{Field(mesh, 1), Field(mesh, d)};
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        s.rho.at(k) = x[k * B];
        for (int a = 0; a < d; ++a) s.mom.at(k, a) = x[k * B + 1 + a];
    }
    return s;
}

std::vector<double> time_levels(double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("time_levels: T and dt must be positive");
    std::vector<double> t{0.0};
    for (long k = 1;; ++k) {
        const double tk = static_cast<double>(k) * dt;
        if (tk >= T * (1.0 - 1e-12)) {
            t.push_back(T);
            break;
        }
        t.push_back(tk);
    }
    return t;
}

namespace {

void advance(ImplicitScheme& scheme, State& current, double t0, double t1, int depth,
             Trajectory& traj, bool keep) {
    const double dt = t1 - t0;
    StepResult res = scheme.try_step(current, dt);
    if (!res.converged) {
        if (depth >= scheme.config().solver.max_dt_halvings) {
            std::ostringstream msg;
            msg << "implicit step did not converge at t=" << t0 << " (dt=" << dt
                << ", residual=" << res.residual << ", iterations=" << res.iterations << ")";
            throw SolverFailure(msg.str(), t0, res.residual, res.iterations);
        }
        const double tm = 0.5 * (t0 + t1);
        advance(scheme, current, t0, tm, depth + 1, traj, keep);
        advance(scheme, current, tm, t1, depth + 1, traj, keep);
        return;
    }
    StepDiagnostics diag;
    diag.dt = dt;
    diag.newton_iterations = res.iterations;
    diag.residual = res.residual;
    diag.energy = total_energy(res.state, scheme.params().pressure_law());
    diag.dissipation = dissipation_rate(res.state, scheme.params());
    diag.min_density = min_density(res.state);
    diag.dt_halvings = depth;
    if (!(diag.min_density > 0.0))
        throw SolverFailure("converged step produced a nonpositive density", t0, res.residual,
                            res.iterations);
    current = std::move(res.state);
    traj.steps.push_back(diag);
    traj.times.push_back(t1);
    if (keep) traj.states.push_back(current);
}

} // namespace

Trajectory solve_trajectory(const State& initial, const FluidParams& params,
                            const SchemeConfig& cfg, TrajectoryOptions opts) {
    ImplicitScheme scheme(initial.mesh_ptr(), params, cfg);
    if (!(min_density(initial) > 0.0))
        throw DomainError("solve_trajectory: initial density must be positive");
    Trajectory traj;
    traj.dt = cfg.dt_factor * initial.mesh().h();
    traj.times = {0.0};
    traj.states = {initial};
    traj.initial_energy = total_energy(initial, params.pressure_law());

    const auto levels = time_levels(cfg.T, traj.dt);
    State current = initial;
    for (std::size_t k = 1; k < levels.size(); ++k)
        advance(scheme, current, levels[k - 1], levels[k], 0, traj, opts.keep_states);
    if (!opts.keep_states) traj.states = {std::move(current)};
    return traj;
}

State project_initial(const DataSample& sample, const MeshPtr& mesh, int quad_points) {
    State s{project(sample.rho0, mesh, quad_points),
            project(VectorFunction([&](const Point& x) { return sample.m0(x); }), mesh,
                    quad_points)};
    return s;
}

Trajectory solve_trajectory(const DataSample& sample, const MeshPtr& mesh,
                            const PressureLaw& pressure, const SchemeConfig& cfg,
                            TrajectoryOptions opts) {
    FluidParams params;
    params.mu = sample.mu;
    params.lambda = sample.lambda;
    params.a = pressure.a;
    params.gamma = pressure.gamma;
    if (sample.g) params.g = project(sample.g, mesh, cfg.quad_points);
    return solve_trajectory(project_initial(sample, mesh, cfg.quad_points), params, cfg, opts);
}

LedgerReport energy_ledger_check(const Trajectory& traj, const FluidParams& params, double tol) {
    LedgerReport rep;
    rep.applicable = !params.has_force();
    const std::size_t K = traj.steps.size();
    const bool full = traj.states.size() == traj.times.size();
    const PressureLaw law = params.pressure_law();

    double e_prev = full ? total_energy(traj.states[0], law) : traj.initial_energy;
    rep.slack.resize(K);
    rep.min_slack = K ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
        const auto& diag = traj.steps[k - 1];
        const double dt = traj.times[k] - traj.times[k - 1];
        const double e = full ? total_energy(traj.states[k], law) : diag.energy;
        const double dis = full ? dissipation_rate(traj.states[k], params) : diag.dissipation;
        const double slack = e_prev - e - dt * dis;
        rep.slack[k - 1] = slack;
        rep.min_slack = std::min(rep.min_slack, slack);
        if (rep.applicable && slack < -tol && rep.first_violation == 0) rep.first_violation = k;
        e_prev = e;
    }
    return rep;
}

} // namespace mcnsfv
