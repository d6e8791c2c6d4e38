#include "mcnsfv/random_data.hpp"

#include <cmath>
#include <numbers>

#include "mcnsfv/errors.hpp"

namespace mcnsfv {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

} // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t sample, std::uint32_t realisation)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      sample_(sample), realisation_(realisation) {}

double RngStream::uniform(std::uint32_t i) const {
    const auto w = philox4x32({i, realisation_, static_cast<std::uint32_t>(sample_),
                               static_cast<std::uint32_t>(sample_ >> 32)},
                              key_);
    const double hi = static_cast<double>(w[0] >> 5);  // 27 bits
    const double lo = static_cast<double>(w[1] >> 6);  // 26 bits
    return (hi * 67108864.0 + lo) / 9007199254740992.0;
}

double RngStream::uniform(std::uint32_t i, double lo, double hi) const {
    return lo + (hi - lo) * uniform(i);
}

RngStream rng_stream(std::uint64_t seed, std::uint64_t sample, std::uint32_t realisation) {
    return RngStream(seed, sample, realisation);
}

std::string to_string(Experiment e) {
    switch (e) {
    case Experiment::steady_state: return "steady_state";
    case Experiment::vortex: return "vortex";
    case Experiment::vortex_interface: return "vortex_interface";
    }
    return "unknown";
}

Experiment parse_experiment(const std::string& name) {
    if (name == "steady_state") return Experiment::steady_state;
    if (name == "vortex") return Experiment::vortex;
    if (name == "vortex_interface") return Experiment::vortex_interface;
    throw ConfigError("experiment", "unknown experiment '" + name +
                                        "' (expected steady_state, vortex, vortex_interface)");
}

Vec swirl(const Point& x, double radius) {
    const double r = std::hypot(x[0], x[1]);
    if (r >= radius || r == 0.0) return {0.0, 0.0, 0.0};
    const double s = (1.0 - std::cos(2.0 * std::numbers::pi * r / radius)) / r;
    return {s * x[1], -s * x[0], 0.0};
}

Vec DataSample::m0(const Point& x) const {
    const double r = rho0(x);
    Vec u = u0(x);
    for (double& c : u) c *= r;
    return u;
}

DataSample draw_sample(const ExperimentModel& model, std::uint64_t index,
                       std::uint32_t realisation) {
    if (!(model.half_width >= 0.0)) throw ConfigError("half_width", "must be nonnegative");
    DataSample s;
    s.sample_id = index;
    s.mu = model.mu;
    s.lambda = model.lambda;
    if (model.forced_y) {
        s.y = *model.forced_y;
    } else {
        const RngStream rng(model.seed, index, realisation);
        const double w = model.half_width;
        const int draws = model.experiment == Experiment::vortex_interface ? 1 : 3;
        for (int j = 0; j < draws; ++j) s.y[j] = rng.uniform(static_cast<std::uint32_t>(j), -w, w);
    }
    const auto y = s.y;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    switch (model.experiment) {
    case Experiment::steady_state:
        s.rho0 = [y](const Point& x) { return 1.0 + y[0] * std::cos(two_pi * (x[0] + x[1])); };
        s.u0 = [y](const Point&) { return Vec{y[1], y[2], 0.0}; };
        break;
    case Experiment::vortex:
        s.rho0 = [y](const Point& x) { return 1.0 + y[0] * std::cos(two_pi * (x[0] + x[1])); };
        s.u0 = [y](const Point& x) {
            Vec v = swirl(x, 0.5);
            v[0] += y[1];
            v[1] += y[2];
            return v;
        };
        break;
    case Experiment::vortex_interface: {
        const double radius = 0.5 + y[0];
        if (!(radius > 0.0)) throw ConfigError("half_width", "interface radius must stay positive");
        s.rho0 = [](const Point&) { return 1.0; };
        s.u0 = [radius](const Point& x) { return swirl(x, radius); };
        break;
    }
    }
    return s;
}

} // namespace mcnsfv
