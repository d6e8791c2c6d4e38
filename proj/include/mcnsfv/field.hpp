#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcnsfv/mesh.hpp"

namespace mcnsfv {

/// Piecewise-constant field: `components` values per cell, stored cell-major.
class Field {
public:
    Field() = default;
    Field(MeshPtr mesh, int components, double fill = 0.0);
    Field(MeshPtr mesh, int components, std::vector<double> values);

    static Field scalar(MeshPtr mesh, double value) { return Field(std::move(mesh), 1, value); }
    /// Constant vector field with d components taken from `value`.
    static Field vector(MeshPtr mesh, const Vec& value);

    const TorusMesh& mesh() const { return *mesh_; }
    const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
    int components() const noexcept { return components_; }
    std::size_t num_cells() const noexcept { return mesh_ ? mesh_->num_cells() : 0; }

    double& at(std::size_t cell, int c = 0) { return values_[cell * components_ + c]; }
    double at(std::size_t cell, int c = 0) const { return values_[cell * components_ + c]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> cell(std::size_t k) const {
        return {values_.data() + k * components_, static_cast<std::size_t>(components_)};
    }

    bool all_finite() const noexcept;
    bool same_layout(const Field& other) const noexcept;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double alpha);

    bool operator==(const Field& other) const noexcept;

private:
    MeshPtr mesh_;
    int components_ = 0;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double alpha, Field a);

/// Throws DomainError unless both fields live on equal meshes.
void require_same_mesh(const Field& a, const Field& b, const char* what);

/// Average of `fine` over the cells of `coarse`. The fine cell count per axis
/// must be a multiple of the coarse one; throws DomainError otherwise.
Field cell_average(const Field& fine, const MeshPtr& coarse);

/// Density and momentum at one time level.
struct State {
    Field rho;
    Field mom;

    const TorusMesh& mesh() const { return rho.mesh(); }
    const MeshPtr& mesh_ptr() const { return rho.mesh_ptr(); }
    bool operator==(const State& other) const noexcept = default;
};

/// Densities below this are treated as solver failure when recovering velocity.
inline constexpr double kDensityFloor = 1e-12;

/// u = m / rho, cellwise. Throws DomainError for a cell with rho < kDensityFloor.
Field velocity(const State& s);

double min_density(const State& s);
/// sum_K |K| rho_K
double total_mass(const State& s);
/// sum_K |K| m_K
Vec total_momentum(const State& s);
/// Cell averages of density and momentum on `coarse`.
State cell_average(const State& fine, const MeshPtr& coarse);

/// Per-step diagnostics recorded by the time stepper.
struct StepDiagnostics {
    double dt = 0.0;
    int newton_iterations = 0;
    double residual = 0.0;
    double energy = 0.0;
    /// mu |grad_D u|^2 + eta |div_h u|^2 at the new level.
    double dissipation = 0.0;
    double min_density = 0.0;
    int dt_halvings = 0;
};

/// Time levels t_0 = 0 < t_1 < ... < t_K = T with the state at each level.
/// Reading in time is piecewise constant: on [t_k, t_{k+1}) the value is states[k].
struct Trajectory {
    double dt = 0.0;                      // nominal step
    std::vector<double> times;            // size K+1
    std::vector<State> states;            // size K+1 (or just the last, when trimmed)
    std::vector<StepDiagnostics> steps;   // size K; steps[k-1] leads to level k
    double initial_energy = 0.0;

    std::size_t num_steps() const noexcept { return steps.size(); }
    const State& final_state() const { return states.back(); }
    /// Piecewise-constant-in-time value at t.
    const State& at_time(double t) const;
};

} // namespace mcnsfv
