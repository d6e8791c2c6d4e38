#include "doctest.h"

#include <cmath>
#include <numbers>
#include <set>

#include "mcnsfv/errors.hpp"
#include "mcnsfv/field.hpp"
#include "mcnsfv/mesh.hpp"

using namespace mcnsfv;

TEST_CASE("smallest torus") {
    auto mesh = build_mesh(2, 2);
    CHECK(mesh->num_cells() == 4);
    CHECK(mesh->num_faces() == 8);
    CHECK(mesh->h() == 1.0);
}

TEST_CASE("mesh width at n = 512") {
    auto mesh = build_mesh(512, 2);
    CHECK(mesh->h() == 2.0 / 512);
    CHECK(mesh->num_cells() == 512u * 512u);
}

TEST_CASE("4x4 periodic grid counts") {
    auto mesh = build_mesh(4, 2);
    CHECK(mesh->num_cells() == 16);
    CHECK(mesh->num_faces() == 32);
    double total = 0.0;
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) total += mesh->cell_volume();
    CHECK(total == 4.0);
    CHECK(mesh->face_area() == 0.5);
}

TEST_CASE("invalid meshes are rejected") {
    CHECK_THROWS_AS(build_mesh(1, 2), DomainError);
    CHECK_THROWS_AS(build_mesh(8, 1), DomainError);
    CHECK_THROWS_AS(build_mesh(8, 4), DomainError);
}

TEST_CASE("face incidence invariants") {
    for (int d : {2, 3}) {
        for (int n : {2, 3, 5}) {
            auto mesh = build_mesh(n, d);
            CAPTURE(d);
            CAPTURE(n);
            std::vector<int> face_uses(mesh->num_faces(), 0);
            std::set<std::tuple<std::size_t, std::size_t, int>> geometric;
            for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
                const auto faces = mesh->cell_faces(k);
                std::array<double, 3> normal_sum{0, 0, 0};
                for (int i = 0; i < 2 * d; ++i) {
                    const auto& cf = faces[i];
                    const Face& f = mesh->face(cf.face);
                    ++face_uses[cf.face];
                    CHECK(f.axis == cf.axis);
                    if (cf.sign > 0) {
                        CHECK(f.in == k);
                        CHECK(f.out == cf.neighbour);
                    } else {
                        CHECK(f.out == k);
                        CHECK(f.in == cf.neighbour);
                    }
                    normal_sum[cf.axis] += cf.sign * mesh->face_area();
                }
                for (double s : normal_sum) CHECK(s == 0.0);
            }
            // Each face is seen from exactly its in-cell and its out-cell.
            for (int u : face_uses) CHECK(u == 2);
            for (std::size_t f = 0; f < mesh->num_faces(); ++f) {
                const Face& face = mesh->face(f);
                auto in_idx = mesh->multi_index(face.in);
                in_idx[face.axis] += 1;
                CHECK(mesh->cell_index(in_idx) == face.out);
                geometric.insert({face.in, face.out, face.axis});
            }
            CHECK(geometric.size() == mesh->num_faces());
        }
    }
}

TEST_CASE("gauss-legendre rules integrate polynomials exactly") {
    for (int p = 1; p <= 8; ++p) {
        const auto rule = gauss_legendre(p);
        for (int deg = 0; deg <= 2 * p - 1; ++deg) {
            double q = 0.0;
            for (int i = 0; i < p; ++i) q += rule.weights[i] * std::pow(rule.nodes[i], deg);
            const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
            CHECK(q == doctest::Approx(exact).epsilon(1e-14));
        }
    }
}

TEST_CASE("projection of a constant") {
    auto mesh = build_mesh(8, 2);
    const Field f = project([](const Point&) { return 3.25; }, mesh);
    for (double v : f.values()) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));
}

TEST_CASE("projection of cos(2 pi (x1 + x2)) against closed-form cell averages") {
    auto mesh = build_mesh(64, 2);
    const double tp = 2.0 * std::numbers::pi;
    const Field f = project([&](const Point& x) { return std::cos(tp * (x[0] + x[1])); }, mesh, 3);
    const double h = mesh->h();
    auto F = [&](double x, double y) { return -std::cos(tp * (x + y)) / (tp * tp); };
    double worst = 0.0;
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        const auto c = mesh->cell_center(k);
        const double a = c[0] - h / 2, b = c[1] - h / 2;
        const double exact = (F(a + h, b + h) - F(a + h, b) - F(a, b + h) + F(a, b)) / (h * h);
        worst = std::max(worst, std::abs(f.at(k) - exact));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("projection of a sharp bump keeps quadrature mass") {
    auto mesh = build_mesh(8, 2);
    const double h = mesh->h();
    const double width = 0.1 * h;
    const Point centre{0.3 * h, 0.2 * h, 0.0};
    auto bump = [&](const Point& x) {
        const double r2 = (x[0] - centre[0]) * (x[0] - centre[0]) +
                          (x[1] - centre[1]) * (x[1] - centre[1]);
        return std::exp(-r2 / (width * width));
    };
    // Mass of the projection equals the raw quadrature sum of the same rule.
    const int points = 3;
    const Field coarse = project(bump, mesh, points);
    double proj_mass = 0.0;
    for (double v : coarse.values()) proj_mass += v * mesh->cell_volume();
    const auto rule = gauss_legendre(points);
    double quad_mass = 0.0;
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        const auto c = mesh->cell_center(k);
        for (int i = 0; i < points; ++i)
            for (int j = 0; j < points; ++j)
                quad_mass += rule.weights[i] * rule.weights[j] * h * h / 4 *
                             bump({c[0] + h / 2 * rule.nodes[i], c[1] + h / 2 * rule.nodes[j], 0});
    }
    CHECK(proj_mass == doctest::Approx(quad_mass).epsilon(1e-13));

    // With 10x more points per axis the mass matches the analytic Gaussian integral.
    const Field fine = project(bump, mesh, 10 * points);
    double fine_mass = 0.0;
    for (double v : fine.values()) fine_mass += v * mesh->cell_volume();
    CHECK(fine_mass == doctest::Approx(std::numbers::pi * width * width).epsilon(1e-9));
}

TEST_CASE("projection is linear and the identity on piecewise constants") {
    auto mesh = build_mesh(6, 2);
    auto f = [](const Point& x) { return std::sin(3 * x[0]) + x[1] * x[1]; };
    auto g = [](const Point& x) { return std::exp(x[0] * x[1]); };
    const double alpha = 1.7, beta = -0.4;
    const Field lhs = project([&](const Point& x) { return alpha * f(x) + beta * g(x); }, mesh);
    const Field rhs = alpha * project(f, mesh) + beta * project(g, mesh);
    for (std::size_t k = 0; k < mesh->num_cells(); ++k)
        CHECK(lhs.at(k) == doctest::Approx(rhs.at(k)).epsilon(1e-14));

    // A function constant on every cell is reproduced exactly.
    auto cellwise = [&](const Point& x) {
        const int i = static_cast<int>(std::floor((x[0] + 1.0) / mesh->h()));
        const int j = static_cast<int>(std::floor((x[1] + 1.0) / mesh->h()));
        return 1.0 + i + 10.0 * j;
    };
    const Field pc = project(cellwise, mesh);
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        const auto idx = mesh->multi_index(k);
        CHECK(pc.at(k) == doctest::Approx(1.0 + idx[0] + 10.0 * idx[1]).epsilon(1e-15));
    }
}

TEST_CASE("non-finite data is rejected") {
    auto mesh = build_mesh(4, 2);
    CHECK_THROWS_AS(project([](const Point&) { return std::nan(""); }, mesh), DomainError);
}

TEST_CASE("cell averaging onto a coarser mesh") {
    auto fine = build_mesh(8, 2);
    auto coarse = build_mesh(2, 2);
    Field f(fine, 2);
    for (std::size_t k = 0; k < fine->num_cells(); ++k) {
        f.at(k, 0) = static_cast<double>(k);
        f.at(k, 1) = 1.5;
    }
    const Field c = cell_average(f, coarse);
    // Coarse cell 0 covers fine indices i, j in 0..3: mean of i + 8 j = 1.5 + 12.
    CHECK(c.at(0, 0) == 13.5);
    CHECK(c.at(1, 0) == 17.5);
    CHECK(c.at(2, 0) == 45.5);
    for (std::size_t K = 0; K < 4; ++K) CHECK(c.at(K, 1) == 1.5);

    // Mass is preserved and the transfer is the identity on equal meshes.
    const Field g = project([](const Point& x) { return std::sin(x[0]) + x[1] * x[1]; }, fine);
    auto mass = [](const Field& v) {
        double s = 0.0;
        for (double x : v.values()) s += x * v.mesh().cell_volume();
        return s;
    };
    CHECK(mass(cell_average(g, coarse)) == doctest::Approx(mass(g)).epsilon(1e-14));
    CHECK(cell_average(g, fine) == g);
    CHECK_THROWS_AS(cell_average(g, build_mesh(3, 2)), DomainError);
}
