#pragma once

#include "mcnsfv/field.hpp"

namespace mcnsfv {

/// Isentropic equation of state p = a rho^gamma.
struct PressureLaw {
    double a = 1.0;
    double gamma = 1.4;

    double pressure(double rho) const;
    double dpressure(double rho) const;
    /// P(rho) = a / (gamma - 1) rho^gamma
    double potential(double rho) const;
    /// P'(rho)
    double dpotential(double rho) const;
};

/// E(rho, m) = |m|^2 / (2 rho) + P(rho); 0 for rho = 0, m = 0.
/// Throws DomainError for rho <= 0 with m != 0 (infinite energy).
double energy_density(double rho, const double* m, int d, const PressureLaw& law);

/// sum_K |K| E(rho_K, m_K)
double total_energy(const State& s, const PressureLaw& law);

/// Relative energy of `approx` with respect to `ref`:
/// sum_K |K| ( rho_h |u_h - u|^2 / 2 + P(rho_h) - P'(rho)(rho_h - rho) - P(rho) ).
double relative_energy(const State& approx, const State& ref, const PressureLaw& law);

} // namespace mcnsfv
