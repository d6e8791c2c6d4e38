#include "mcnsfv/energy.hpp"

#include <cmath>
#include <string>

#include "mcnsfv/errors.hpp"

namespace mcnsfv {

double PressureLaw::pressure(double rho) const { return a * std::pow(rho, gamma); }

double PressureLaw::dpressure(double rho) const { return a * gamma * std::pow(rho, gamma - 1.0); }

double PressureLaw::potential(double rho) const {
    return a / (gamma - 1.0) * std::pow(rho, gamma);
}

double PressureLaw::dpotential(double rho) const {
    return a * gamma / (gamma - 1.0) * std::pow(rho, gamma - 1.0);
}

double energy_density(double rho, const double* m, int d, const PressureLaw& law) {
    double m2 = 0.0;
    for (int a = 0; a < d; ++a) m2 += m[a] * m[a];
    if (rho > 0.0) return 0.5 * m2 / rho + law.potential(rho);
    if (rho == 0.0 && m2 == 0.0) return 0.0;
    throw DomainError("energy: infinite energy state (rho = " + std::to_string(rho) +
                      ", |m|^2 = " + std::to_string(m2) + ")");
}

double total_energy(const State& s, const PressureLaw& law) {
    const int d = s.mesh().dim();
    double sum = 0.0;
    for (std::size_t k = 0; k < s.rho.num_cells(); ++k)
        sum += energy_density(s.rho.at(k), s.mom.cell(k).data(), d, law);
    return s.mesh().cell_volume() * sum;
}

double relative_energy(const State& approx, const State& ref, const PressureLaw& law) {
    require_same_mesh(approx.rho, ref.rho, "relative_energy");
    const int d = approx.mesh().dim();
    double sum = 0.0;
    for (std::size_t k = 0; k < approx.rho.num_cells(); ++k) {
        const double rh = approx.rho.at(k);
        const double r = ref.rho.at(k);
        if (!(r > 0.0)) throw DomainError("relative_energy: reference density must be positive");
        if (!(rh > 0.0)) throw DomainError("relative_energy: approximate density must be positive");
        double kin = 0.0;
        for (int a = 0; a < d; ++a) {
            const double du = approx.mom.at(k, a) / rh - ref.mom.at(k, a) / r;
            kin += du * du;
        }
        sum += 0.5 * rh * kin + law.potential(rh) - law.dpotential(r) * (rh - r) -
               law.potential(r);
    }
    return approx.mesh().cell_volume() * sum;
}

} // namespace mcnsfv
