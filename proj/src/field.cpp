#include "mcnsfv/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mcnsfv/errors.hpp"

namespace mcnsfv {

Field::Field(MeshPtr mesh, int components, double fill)
    : mesh_(std::move(mesh)), components_(components),
      values_(mesh_->num_cells() * static_cast<std::size_t>(components), fill) {}

Field::Field(MeshPtr mesh, int components, std::vector<double> values)
    : mesh_(std::move(mesh)), components_(components), values_(std::move(values)) {
    if (values_.size() != mesh_->num_cells() * static_cast<std::size_t>(components))
        throw DomainError("field: value count does not match mesh");
}

Field Field::vector(MeshPtr mesh, const Vec& value) {
    const int d = mesh->dim();
    Field f(std::move(mesh), d);
    for (std::size_t k = 0; k < f.num_cells(); ++k)
        for (int a = 0; a < d; ++a) f.at(k, a) = value[a];
    return f;
}

bool Field::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool Field::same_layout(const Field& other) const noexcept {
    return mesh_ && other.mesh_ && *mesh_ == *other.mesh_ && components_ == other.components_;
}

Field& Field::operator+=(const Field& other) {
    if (!same_layout(other)) throw DomainError("field: layout mismatch in +=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

Field& Field::operator-=(const Field& other) {
    if (!same_layout(other)) throw DomainError("field: layout mismatch in -=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

Field& Field::operator*=(double alpha) {
    for (double& v : values_) v *= alpha;
    return *this;
}

bool Field::operator==(const Field& other) const noexcept {
    if (!mesh_ || !other.mesh_) return !mesh_ && !other.mesh_;
    return same_layout(other) && values_ == other.values_;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double alpha, Field a) { return a *= alpha; }

void require_same_mesh(const Field& a, const Field& b, const char* what) {
    if (!a.mesh_ptr() || !b.mesh_ptr() || !(a.mesh() == b.mesh()))
        throw DomainError(std::string(what) + ": mesh mismatch");
}

Field cell_average(const Field& fine, const MeshPtr& coarse) {
    const TorusMesh& fm = fine.mesh();
    const int nf = fm.cells_per_axis();
    const int nc = coarse->cells_per_axis();
    if (fm.dim() != coarse->dim() || nf % nc != 0)
        throw DomainError("cell_average: fine mesh does not refine the coarse mesh");
    const int ratio = nf / nc;
    const int comps = fine.components();
    Field out(coarse, comps);
    for (std::size_t k = 0; k < fm.num_cells(); ++k) {
        auto idx = fm.multi_index(k);
        for (int a = 0; a < fm.dim(); ++a) idx[a] /= ratio;
        const std::size_t K = coarse->cell_index(idx);
        for (int c = 0; c < comps; ++c) out.at(K, c) += fine.at(k, c);
    }
    out *= fm.cell_volume() / coarse->cell_volume();
    return out;
}

State cell_average(const State& fine, const MeshPtr& coarse) {
    return {cell_average(fine.rho, coarse), cell_average(fine.mom, coarse)};
}

Field velocity(const State& s) {
    const int d = s.mesh().dim();
    Field u(s.mesh_ptr(), d);
    for (std::size_t k = 0; k < s.rho.num_cells(); ++k) {
        const double r = s.rho.at(k);
        if (!(r >= kDensityFloor))
            throw DomainError("velocity: density " + std::to_string(r) + " below floor in cell " +
                              std::to_string(k));
        for (int a = 0; a < d; ++a) u.at(k, a) = s.mom.at(k, a) / r;
    }
    return u;
}

double min_density(const State& s) {
    double m = std::numeric_limits<double>::infinity();
    for (double r : s.rho.values()) m = std::min(m, r);
    return m;
}

double total_mass(const State& s) {
    double sum = 0.0;
    for (double r : s.rho.values()) sum += r;
    return sum * s.mesh().cell_volume();
}

Vec total_momentum(const State& s) {
    Vec sum{0.0, 0.0, 0.0};
    const int d = s.mesh().dim();
    for (std::size_t k = 0; k < s.mom.num_cells(); ++k)
        for (int a = 0; a < d; ++a) sum[a] += s.mom.at(k, a);
    for (int a = 0; a < d; ++a) sum[a] *= s.mesh().cell_volume();
    return sum;
}

const State& Trajectory::at_time(double t) const {
    if (states.size() != times.size())
        throw DomainError("trajectory: intermediate states were not kept");
    // Level k covers [t_k, t_{k+1}); the last level covers t >= t_K.
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    return states[k];
}

} // namespace mcnsfv
