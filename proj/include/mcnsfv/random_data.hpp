#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "mcnsfv/data_sample.hpp"

namespace mcnsfv {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Maps (key, counter) to four 32-bit words; there is no hidden state.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Uniform stream keyed by (seed, sample index, realisation index). The i-th
/// draw depends only on the key and i, never on call order.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t sample, std::uint32_t realisation);

    /// i-th uniform in [0, 1) with 53 random bits.
    double uniform(std::uint32_t i) const;
    /// i-th draw from U(lo, hi).
    double uniform(std::uint32_t i, double lo, double hi) const;

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t sample_;
    std::uint32_t realisation_;
};

RngStream rng_stream(std::uint64_t seed, std::uint64_t sample, std::uint32_t realisation = 0);

enum class Experiment { steady_state, vortex, vortex_interface };

std::string to_string(Experiment e);
/// Throws ConfigError for unknown names.
Experiment parse_experiment(const std::string& name);

struct ExperimentModel {
    Experiment experiment = Experiment::steady_state;
    double half_width = 0.1;
    std::uint64_t seed = 0;
    double mu = 0.1;
    double lambda = 0.0;
    /// Overrides the uniform draws (Y_1, Y_2, Y_3), or (Y) for the interface case.
    std::optional<std::array<double, 3>> forced_y;
};

/// Swirl (1 - cos(2 pi |x| / R)) (x_2, -x_1) / |x| for |x| < R, zero outside;
/// the limit at x = 0 is returned there.
Vec swirl(const Point& x, double radius);

/// Sample `index` of realisation `realisation`:
///  - steady_state: rho0 = 1 + Y1 cos(2 pi (x1 + x2)), u0 = (Y2, Y3)
///  - vortex: as above plus swirl(x, 0.5)
///  - vortex_interface: rho0 = 1, u0 = swirl(x, I) with I = 0.5 + Y
DataSample draw_sample(const ExperimentModel& model, std::uint64_t index,
                       std::uint32_t realisation = 0);

} // namespace mcnsfv
