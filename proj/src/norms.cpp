#include "mcnsfv/norms.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include "mcnsfv/errors.hpp"
#include "mcnsfv/operators.hpp"

namespace mcnsfv {

namespace {

double cell_magnitude(const Field& v, std::size_t k) {
    if (v.components() == 1) return std::abs(v.at(k));
    double s = 0.0;
    for (double x : v.cell(k)) s += x * x;
    return std::sqrt(s);
}

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

double lp_norm(const Field& v, double p) {
    if (!(p >= 1.0)) throw DomainError("lp_norm: exponent must be >= 1");
    double sum = 0.0;
    for (std::size_t k = 0; k < v.num_cells(); ++k) sum += std::pow(cell_magnitude(v, k), p);
    return std::pow(v.mesh().cell_volume() * sum, 1.0 / p);
}

double linf_norm(const Field& v) {
    double m = 0.0;
    for (std::size_t k = 0; k < v.num_cells(); ++k) m = std::max(m, cell_magnitude(v, k));
    return m;
}

double l2_inner(const Field& v, const Field& w) {
    require_same_mesh(v, w, "l2_inner");
    if (v.components() != w.components()) throw DomainError("l2_inner: component mismatch");
    double sum = 0.0;
    const auto a = v.values();
    const auto b = w.values();
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return v.mesh().cell_volume() * sum;
}

double w12_seminorm(const Field& v) {
    const TorusMesh& mesh = v.mesh();
    // |sigma| h (jump/h)^2 = |sigma| jump^2 / h
    double sum = 0.0;
    for (std::size_t f = 0; f < mesh.num_faces(); ++f)
        for (int c = 0; c < v.components(); ++c) {
            const double j = jump(v, f, c);
            sum += j * j;
        }
    return std::sqrt(sum * mesh.face_area() / mesh.h());
}

double bochner_norm(const Trajectory& traj, double r, const StateNorm& spatial) {
    if (!(r >= 1.0)) throw DomainError("bochner_norm: exponent must be >= 1");
    if (traj.times.size() < 2 || traj.states.size() != traj.times.size())
        throw DomainError("bochner_norm: need a complete trajectory");
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
        const double len = traj.times[k + 1] - traj.times[k];
        sum += len * std::pow(spatial(traj.states[k]), r);
    }
    return std::pow(sum, 1.0 / r);
}

double neg_sobolev_norm(const Field& v, int k) {
    if (k < 1) throw DomainError("neg_sobolev_norm: order must be positive");
    const TorusMesh& mesh = v.mesh();
    const int d = mesh.dim();
    const int n = mesh.cells_per_axis();
    const std::size_t cells = mesh.num_cells();

    std::vector<std::complex<double>> buf(cells);
    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    const std::vector<int> dims(d, n);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft(d, dims.data(), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    }

    // weight(xi) = (1 + pi^2 |xi|^2)^{-k}; cells are indexed with axis 0 fastest,
    // and all axes have the same length, so the FFTW axis order is immaterial.
    std::vector<double> weight(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        const auto idx = mesh.multi_index(c);
        double xi2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const int j = idx[a] <= n / 2 ? idx[a] : idx[a] - n;
            xi2 += static_cast<double>(j) * j;
        }
        weight[c] = std::pow(1.0 + std::numbers::pi * std::numbers::pi * xi2, -k);
    }

    // |v^|^2 = |V|^2 |K| / #cells so that sum |v^|^2 = |v|_{L^2}^2.
    const double scale = mesh.cell_volume() / static_cast<double>(cells);
    double sum = 0.0;
    for (int comp = 0; comp < v.components(); ++comp) {
        for (std::size_t c = 0; c < cells; ++c) buf[c] = {v.at(c, comp), 0.0};
        fftw_execute(plan);
        for (std::size_t c = 0; c < cells; ++c) sum += weight[c] * std::norm(buf[c]);
    }
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return std::sqrt(scale * sum);
}

} // namespace mcnsfv
