#pragma once

#include <array>
#include <cstdint>

#include "mcnsfv/mesh.hpp"

namespace mcnsfv {

/// One element of the data space: initial density and velocity, viscosities,
/// body force. Momentum is m0 = rho0 * u0.
struct DataSample {
    ScalarFunction rho0;
    VectorFunction u0;
    VectorFunction g;  // empty means zero force
    double mu = 0.1;
    double lambda = 0.0;
    std::uint64_t sample_id = 0;
    /// Uniform draws that produced this sample (unused entries are zero).
    std::array<double, 3> y{0.0, 0.0, 0.0};

    Vec m0(const Point& x) const;
};

} // namespace mcnsfv
