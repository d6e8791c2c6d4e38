#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "mcnsfv/data_sample.hpp"
#include "mcnsfv/energy.hpp"
#include "mcnsfv/field.hpp"

namespace mcnsfv {

/// Viscosities, pressure law and (projected) body force.
struct FluidParams {
    double mu = 0.1;
    double lambda = 0.0;
    double gamma = 1.4;
    double a = 1.0;
    /// Pi_h g; an empty field means g = 0.
    Field g;

    /// eta = (d - 2)/d mu + lambda
    double eta(int d) const { return (d - 2.0) / d * mu + lambda; }
    PressureLaw pressure_law() const { return {a, gamma}; }
    bool has_force() const;
    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

enum class LinearSolverKind { automatic, direct, iterative };

struct SolverSettings {
    double tol_abs = 1e-11;
    double tol_rel = 1e-10;
    int max_iters = 30;
    int max_dt_halvings = 6;
    LinearSolverKind linear = LinearSolverKind::automatic;
};

struct SchemeConfig {
    double epsilon = 0.6;
    double dt_factor = 1.0;
    double T = 0.1;
    int quad_points = 3;
    SolverSettings solver;

    void validate() const;
};

/// Dissipative upwind flux for one face, given the normal components of the
/// velocity on both sides:
///   F = <r><v.n> - (h^eps + |<v.n>|/2) [[r]]
double upwind_flux(double r_in, double r_out, double vn_in, double vn_out, double h,
                   double epsilon);

/// Outcome of one implicit Euler step.
struct StepResult {
    State state;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;          // max-norm at exit
    double initial_residual = 0.0;
    bool density_damped = false;    // a Newton update was shortened to keep rho > 0
};

/// Implicit upwind finite-volume discretisation on a fixed mesh.
///
/// Unknowns are ordered cell by cell as (rho, m_0, ..., m_{d-1}). The residual
/// of cell K is the scheme tested with the indicator of K:
///   |K| D_t rho_K + sum_{sigma in dK} s |sigma| F_h(rho, u)
///   |K| D_t m_K   + sum s |sigma| (F_h(m, u) + <p> n - mu/h [[u]])
///                 + eta int div_h u div_h 1_K - |K| rho_K g_K
/// with s = +1 when K is the in-cell of sigma.
class ImplicitScheme {
public:
    ImplicitScheme(MeshPtr mesh, FluidParams params, SchemeConfig cfg);
    ~ImplicitScheme();
    ImplicitScheme(const ImplicitScheme&) = delete;
    ImplicitScheme& operator=(const ImplicitScheme&) = delete;

    const TorusMesh& mesh() const { return *mesh_; }
    const FluidParams& params() const { return params_; }
    const SchemeConfig& config() const { return cfg_; }
    std::size_t num_unknowns() const { return mesh_->num_cells() * block_; }

    /// Residual of s_new against s_old for time step dt. Throws DomainError
    /// when s_new has a nonpositive density.
    std::vector<double> residual(const State& s_new, const State& s_old, double dt) const;

    /// Jacobian d residual / d s_new in triplet form (row, col, value).
    struct Entry {
        std::size_t row, col;
        double value;
    };
    std::vector<Entry> jacobian(const State& s_new, double dt) const;

    /// One damped Newton solve from s_old. Does not throw on non-convergence.
    StepResult try_step(const State& s_old, double dt);

private:
    struct LinearSolver;

    /// False (and r untouched beyond the cell terms) when a density is nonpositive.
    bool residual_into(const std::vector<double>& x, const std::vector<double>& x_old,
                       double dt, std::vector<double>& r) const;
    void jacobian_into(const std::vector<double>& x, double dt, std::vector<Entry>& out) const;

    MeshPtr mesh_;
    FluidParams params_;
    SchemeConfig cfg_;
    int d_;
    int block_;
    double dissipation_coeff_;  // h^eps
    std::unique_ptr<LinearSolver> linear_;
};

/// mu |grad_D u|^2 + eta |div_h u|^2
double dissipation_rate(const State& s, const FluidParams& params);

std::vector<double> pack_state(const State& s);
State unpack_state(const std::vector<double>& x, const MeshPtr& mesh);

struct TrajectoryOptions {
    bool keep_states = true;
};

/// Time levels from 0 to T in steps of dt_factor * h, the last truncated to
/// land exactly on T. A failing step is retried as two half steps, up to
/// max_dt_halvings times; beyond that SolverFailure is thrown.
Trajectory solve_trajectory(const State& initial, const FluidParams& params,
                            const SchemeConfig& cfg, TrajectoryOptions opts = {});

/// Projects the sample onto the mesh and solves it. `pressure` supplies a and gamma;
/// mu, lambda and g come from the sample.
Trajectory solve_trajectory(const DataSample& sample, const MeshPtr& mesh,
                            const PressureLaw& pressure, const SchemeConfig& cfg,
                            TrajectoryOptions opts = {});

/// Pi_h rho0 and Pi_h (rho0 u0).
State project_initial(const DataSample& sample, const MeshPtr& mesh, int quad_points);

/// Time levels t_0 = 0, ..., t_K = T for a nominal step dt.
std::vector<double> time_levels(double T, double dt);

struct LedgerReport {
    /// slack_k = E^{k-1} - E^k - dt_k (mu |grad_D u^k|^2 + eta |div_h u^k|^2)
    std::vector<double> slack;
    double min_slack = 0.0;
    /// Index (1-based step) of the first violation, 0 when none.
    std::size_t first_violation = 0;
    bool applicable = true;  // false when a body force is present
    bool ok() const { return first_violation == 0; }
};

/// Checks the discrete energy dissipation step by step with tolerance `tol`.
/// Uses the stored states when the trajectory kept them, else the recorded
/// diagnostics.
LedgerReport energy_ledger_check(const Trajectory& traj, const FluidParams& params,
                                 double tol = 1e-9);

} // namespace mcnsfv
