#include "mcnsfv/mesh.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "mcnsfv/errors.hpp"
#include "mcnsfv/field.hpp"

namespace mcnsfv {

TorusMesh::TorusMesh(int n, int d) : n_(n), d_(d) {
    if (n < 2) throw DomainError("mesh: need at least 2 cells per axis, got " + std::to_string(n));
    if (d != 2 && d != 3) throw DomainError("mesh: unsupported dimension " + std::to_string(d));
    h_ = 2.0 / n;
    volume_ = std::pow(h_, d);
    area_ = std::pow(h_, d - 1);
    num_cells_ = 1;
    for (int a = 0; a < d; ++a) num_cells_ *= static_cast<std::size_t>(n);

    faces_.reserve(num_cells_ * d);
    for (std::size_t k = 0; k < num_cells_; ++k)
        for (int a = 0; a < d; ++a) faces_.push_back({a, k, neighbour(k, a, +1)});
}

double TorusMesh::domain_volume() const noexcept { return std::pow(2.0, d_); }

std::array<int, 3> TorusMesh::multi_index(std::size_t cell) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = 0; a < d_; ++a) {
        idx[a] = static_cast<int>(cell % n_);
        cell /= n_;
    }
    return idx;
}

std::size_t TorusMesh::cell_index(const std::array<int, 3>& idx) const {
    std::size_t k = 0;
    for (int a = d_ - 1; a >= 0; --a) {
        int i = ((idx[a] % n_) + n_) % n_;
        k = k * n_ + static_cast<std::size_t>(i);
    }
    return k;
}

std::size_t TorusMesh::neighbour(std::size_t cell, int axis, int step) const {
    auto idx = multi_index(cell);
    idx[axis] += step;
    return cell_index(idx);
}

Point TorusMesh::cell_center(std::size_t cell) const {
    auto idx = multi_index(cell);
    Point x{0.0, 0.0, 0.0};
    for (int a = 0; a < d_; ++a) x[a] = -1.0 + (idx[a] + 0.5) * h_;
    return x;
}

std::array<CellFace, 6> TorusMesh::cell_faces(std::size_t cell) const {
    std::array<CellFace, 6> out{};
    for (int a = 0; a < d_; ++a) {
        std::size_t up = neighbour(cell, a, +1);
        std::size_t down = neighbour(cell, a, -1);
        out[2 * a] = {cell * d_ + a, up, a, +1};
        out[2 * a + 1] = {down * d_ + a, down, a, -1};
    }
    return out;
}

MeshPtr build_mesh(int n, int d) { return std::make_shared<const TorusMesh>(n, d); }

namespace {

// (P_n(x), P_{n-1}(x)) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return {p1, p0};
}

} // namespace

GaussRule gauss_legendre(int points) {
    if (points < 1) throw DomainError("quadrature: need at least one point");
    GaussRule rule;
    rule.nodes.resize(points);
    rule.weights.resize(points);
    for (int i = 0; i < points; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            auto [pn, pm] = legendre(points, x);
            dp = points * (x * pn - pm) / (x * x - 1.0);
            double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        auto [pn, pm] = legendre(points, x);
        dp = points * (x * pn - pm) / (x * x - 1.0);
        rule.nodes[points - 1 - i] = x;
        rule.weights[points - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

namespace {

template <class Eval>
void integrate_cells(const TorusMesh& mesh, int points, int components, Eval&& eval,
                     std::vector<double>& out) {
    const auto rule = gauss_legendre(points);
    const int d = mesh.dim();
    const double half = 0.5 * mesh.h();
    std::size_t total_nodes = 1;
    for (int a = 0; a < d; ++a) total_nodes *= rule.nodes.size();

    out.assign(mesh.num_cells() * components, 0.0);
    std::vector<double> value(components);
    for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
        const Point c = mesh.cell_center(k);
        for (std::size_t q = 0; q < total_nodes; ++q) {
            Point x = c;
            double w = 1.0;
            std::size_t rem = q;
            for (int a = 0; a < d; ++a) {
                std::size_t i = rem % rule.nodes.size();
                rem /= rule.nodes.size();
                x[a] += half * rule.nodes[i];
                w *= 0.5 * rule.weights[i];
            }
            eval(x, value);
            for (int c2 = 0; c2 < components; ++c2) {
                if (!std::isfinite(value[c2]))
                    throw DomainError("projection: non-finite data value, sample rejected");
                out[k * components + c2] += w * value[c2];
            }
        }
    }
}

} // namespace

Field project(const ScalarFunction& f, const MeshPtr& mesh, int points) {
    std::vector<double> vals;
    integrate_cells(*mesh, points, 1,
                    [&](const Point& x, std::vector<double>& v) { v[0] = f(x); }, vals);
    return Field(mesh, 1, std::move(vals));
}

Field project(const VectorFunction& f, const MeshPtr& mesh, int points) {
    std::vector<double> vals;
    const int d = mesh->dim();
    integrate_cells(*mesh, points, d,
                    [&](const Point& x, std::vector<double>& v) {
                        const Vec fx = f(x);
                        for (int a = 0; a < d; ++a) v[a] = fx[a];
                    },
                    vals);
    return Field(mesh, d, std::move(vals));
}

} // namespace mcnsfv
