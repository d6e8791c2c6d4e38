#include "doctest.h"

#include <cmath>
#include <map>
#include <numbers>

#include "mcnsfv/errors.hpp"
#include "mcnsfv/random_data.hpp"
#include "mcnsfv/scheme.hpp"

using namespace mcnsfv;

namespace {

State uniform_state(const MeshPtr& mesh, double rho, Vec u) {
    Vec m{rho * u[0], rho * u[1], rho * u[2]};
    return {Field::scalar(mesh, rho), Field::vector(mesh, m)};
}

State experiment_state(const MeshPtr& mesh, Experiment e, std::array<double, 3> y) {
    ExperimentModel model;
    model.experiment = e;
    model.forced_y = y;
    return project_initial(draw_sample(model, 0), mesh, 3);
}

FluidParams default_params(double a = 1.0) {
    FluidParams p;
    p.mu = 0.1;
    p.lambda = 0.0;
    p.gamma = 1.4;
    p.a = a;
    return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST_CASE("upwind flux") {
    // Consistency on constants: rho (u . n).
    CHECK(upwind_flux(1.3, 1.3, 0.4, 0.4, 0.1, 0.6) == 1.3 * 0.4);
    CHECK(upwind_flux(1.3, 1.3, -0.7, -0.7, 0.1, 0.6) == 1.3 * -0.7);
    // Zero velocity leaves only the h^eps dissipation.
    CHECK(upwind_flux(1.0, 3.0, 0.0, 0.0, 0.25, 0.6) == doctest::Approx(-std::pow(0.25, 0.6) * 2.0));
    // Hand evaluation: 1.5 - (0.5^0.6 + 0.5) * 1.
    CHECK(upwind_flux(1.0, 2.0, 1.0, 1.0, 0.5, 0.6) == doctest::Approx(0.3402460446135529).epsilon(1e-15));
    // Upwind form: <r><v> - |<v>|[[r]]/2 equals r_in <v> for <v> > 0.
    CHECK(upwind_flux(2.0, 5.0, 0.3, 0.5, 0.1, 50.0) == doctest::Approx(2.0 * 0.4).epsilon(1e-12));
}

TEST_CASE("config validation") {
    SchemeConfig cfg;
    cfg.epsilon = -2.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epsilon = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epsilon = -0.5;
    CHECK_NOTHROW(cfg.validate());
    FluidParams p = default_params();
    p.mu = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = default_params();
    p.gamma = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    CHECK(default_params().eta(2) == 0.0);
    p = default_params();
    p.lambda = 0.3;
    CHECK(p.eta(3) == doctest::Approx(0.1 / 3 + 0.3));
}

TEST_CASE("residual of a steady constant state is exactly zero") {
    auto mesh = build_mesh(4, 2);
    ImplicitScheme scheme(mesh, default_params(), SchemeConfig{});
    const State s = uniform_state(mesh, 1.7, {0.0, 0.0, 0.0});
    for (double r : scheme.residual(s, s, 0.1)) CHECK(r == 0.0);
}

TEST_CASE("face contributions telescope") {
    auto mesh = build_mesh(4, 2);
    FluidParams p = default_params();
    p.lambda = 0.2;  // exercise the eta term too
    ImplicitScheme scheme(mesh, p, SchemeConfig{});
    const State old_s = experiment_state(mesh, Experiment::vortex, {0.05, 0.02, -0.03});
    State new_s = old_s;
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        new_s.rho.at(k) *= 1.0 + 0.01 * std::sin(3.0 * k);
        new_s.mom.at(k, 0) += 0.02 * std::cos(2.0 * k);
        new_s.mom.at(k, 1) -= 0.01 * std::sin(5.0 * k);
    }
    const double dt = 0.3;
    const auto r = scheme.residual(new_s, old_s, dt);
    double mass_res = 0.0, mom_res[2] = {0, 0};
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        mass_res += r[k * 3];
        mom_res[0] += r[k * 3 + 1];
        mom_res[1] += r[k * 3 + 2];
    }
    const double mass_change = (total_mass(new_s) - total_mass(old_s)) / dt;
    const Vec mom_change = total_momentum(new_s);
    const Vec mom_old = total_momentum(old_s);
    CHECK(std::abs(mass_res - mass_change) <= 1e-12);
    CHECK(std::abs(mom_res[0] - (mom_change[0] - mom_old[0]) / dt) <= 1e-12);
    CHECK(std::abs(mom_res[1] - (mom_change[1] - mom_old[1]) / dt) <= 1e-12);
}

TEST_CASE("single-cell density perturbation gives the hand-assembled stencil") {
    auto mesh = build_mesh(4, 2);
    const FluidParams p = default_params();
    SchemeConfig cfg;
    ImplicitScheme scheme(mesh, p, cfg);
    const double rho0 = 1.0, delta = 0.25, dt = 0.5;
    const State old_s = uniform_state(mesh, rho0, {0, 0, 0});
    State new_s = old_s;
    const std::size_t K = 5;  // (1, 1)
    new_s.rho.at(K) += delta;
    const auto r = scheme.residual(new_s, old_s, dt);

    const double vol = mesh->cell_volume(), area = mesh->face_area();
    const double diss = std::pow(mesh->h(), cfg.epsilon) * area * delta;
    const double dp = 0.5 * area * (p.pressure_law().pressure(rho0 + delta) - p.pressure_law().pressure(rho0));

    std::map<std::size_t, std::array<double, 3>> expected;
    expected[K] = {vol * delta / dt + 4 * diss, 0.0, 0.0};
    expected[mesh->neighbour(K, 0, +1)] = {-diss, -dp, 0.0};
    expected[mesh->neighbour(K, 0, -1)] = {-diss, +dp, 0.0};
    expected[mesh->neighbour(K, 1, +1)] = {-diss, 0.0, -dp};
    expected[mesh->neighbour(K, 1, -1)] = {-diss, 0.0, +dp};
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) {
        CAPTURE(k);
        const auto it = expected.find(k);
        for (int c = 0; c < 3; ++c) {
            const double e = it == expected.end() ? 0.0 : it->second[c];
            CHECK(r[k * 3 + c] == doctest::Approx(e).epsilon(1e-13).scale(1.0));
        }
    }
}

TEST_CASE("analytic Jacobian matches finite differences") {
    for (double lambda : {0.0, 0.3}) {
        for (bool force : {false, true}) {
            CAPTURE(lambda);
            CAPTURE(force);
            auto mesh = build_mesh(5, 2);
            FluidParams p = default_params();
            p.lambda = lambda;
            if (force)
                p.g = project(VectorFunction([](const Point& x) {
                                  return Vec{std::sin(x[1]), 0.3, 0.0};
                              }),
                              mesh);
            ImplicitScheme scheme(mesh, p, SchemeConfig{});
            const State old_s = experiment_state(mesh, Experiment::vortex, {0.05, 0.04, -0.02});
            State s = old_s;
            for (std::size_t k = 0; k < mesh->num_cells(); ++k) s.rho.at(k) += 0.01 * std::cos(1.0 * k);
            const double dt = 0.2;
            const auto entries = scheme.jacobian(s, dt);
            const std::size_t n = scheme.num_unknowns();
            std::vector<double> dense(n * n, 0.0);
            for (const auto& e : entries) dense[e.row * n + e.col] += e.value;

            auto x = pack_state(s);
            double worst = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double eps = 1e-6 * std::max(1.0, std::abs(x[j]));
                auto xp = x, xm = x;
                xp[j] += eps;
                xm[j] -= eps;
                const auto rp = scheme.residual(unpack_state(xp, mesh), old_s, dt);
                const auto rm = scheme.residual(unpack_state(xm, mesh), old_s, dt);
                for (std::size_t i = 0; i < n; ++i) {
                    const double fd = (rp[i] - rm[i]) / (2 * eps);
                    worst = std::max(worst, std::abs(fd - dense[i * n + j]));
                }
            }
            CHECK(worst < 1e-7);
        }
    }
}

TEST_CASE("steady state is a fixed point of the step") {
    auto mesh = build_mesh(8, 2);
    ImplicitScheme scheme(mesh, default_params(), SchemeConfig{});
    const State s = uniform_state(mesh, 1.0, {0, 0, 0});
    const StepResult res = scheme.try_step(s, mesh->h());
    CHECK(res.converged);
    CHECK(res.iterations <= 1);
    CHECK(res.state == s);
}

TEST_CASE("one step conserves mass and momentum") {
    auto mesh = build_mesh(16, 2);
    ImplicitScheme scheme(mesh, default_params(), SchemeConfig{});
    const State s0 = experiment_state(mesh, Experiment::steady_state, {0.08, -0.06, 0.09});
    const StepResult res = scheme.try_step(s0, mesh->h());
    REQUIRE(res.converged);
    CHECK(res.residual <= 1e-11 + 1e-10 * res.initial_residual);
    CHECK(rel(total_mass(res.state), total_mass(s0)) <= 1e-11);
    const Vec m0 = total_momentum(s0), m1 = total_momentum(res.state);
    CHECK(rel(m1[0], m0[0]) <= 1e-10);
    CHECK(rel(m1[1], m0[1]) <= 1e-10);
    CHECK(min_density(res.state) > 0.0);
}

TEST_CASE("momentum balance with a body force") {
    auto mesh = build_mesh(12, 2);
    FluidParams p = default_params();
    p.g = project(VectorFunction([](const Point& x) { return Vec{0.5 + 0.2 * std::cos(std::numbers::pi * x[1]), -0.3, 0.0}; }), mesh);
    SchemeConfig cfg;
    cfg.T = 0.5;
    const State s0 = experiment_state(mesh, Experiment::vortex, {0.05, 0.0, 0.02});
    const Trajectory traj = solve_trajectory(s0, p, cfg);
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        const double dt = traj.times[k] - traj.times[k - 1];
        const Vec before = total_momentum(traj.states[k - 1]);
        const Vec after = total_momentum(traj.states[k]);
        for (int a = 0; a < 2; ++a) {
            double force = 0.0;
            for (std::size_t c = 0; c < mesh->num_cells(); ++c)
                force += mesh->cell_volume() * traj.states[k].rho.at(c) * p.g.at(c, a);
            CHECK(std::abs(after[a] - before[a] - dt * force) <= 1e-10);
        }
    }
    CHECK_FALSE(energy_ledger_check(traj, p).applicable);
}

TEST_CASE("time levels land on T") {
    const auto t = time_levels(3.5 * 0.2, 0.2);
    REQUIRE(t.size() == 5);
    CHECK(t[0] == 0.0);
    CHECK(t[1] == doctest::Approx(0.2));
    CHECK(t[2] == doctest::Approx(0.4));
    CHECK(t[3] == doctest::Approx(0.6));
    CHECK(t[4] == 3.5 * 0.2);
    CHECK(t[4] - t[3] == doctest::Approx(0.1));
    CHECK(time_levels(0.1, 0.1).size() == 2);
    CHECK(time_levels(0.1, 2.0 / 64).size() == 5);
}

TEST_CASE("zero perturbation stays at rest") {
    auto mesh = build_mesh(16, 2);
    const State s0 = experiment_state(mesh, Experiment::steady_state, {0.0, 0.0, 0.0});
    const FluidParams p = default_params();
    SchemeConfig cfg;
    cfg.T = 3.5 * mesh->h();
    const Trajectory traj = solve_trajectory(s0, p, cfg);
    REQUIRE(traj.num_steps() == 4);
    CHECK(traj.times.back() == cfg.T);
    CHECK(traj.times[4] - traj.times[3] == doctest::Approx(0.5 * mesh->h()));
    for (const State& s : traj.states) {
        for (double r : s.rho.values()) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
        for (double m : s.mom.values()) CHECK(std::abs(m) < 1e-12);
    }
    const LedgerReport rep = energy_ledger_check(traj, p);
    CHECK(rep.ok());
    for (double s : rep.slack) CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("vortex energy is nonincreasing and the ledger holds") {
    auto mesh = build_mesh(32, 2);
    ExperimentModel model;
    model.experiment = Experiment::vortex;
    model.seed = 1234;
    const DataSample sample = draw_sample(model, 3);
    SchemeConfig cfg;
    const Trajectory traj = solve_trajectory(sample, mesh, PressureLaw{1.0, 1.4}, cfg);
    double prev = traj.initial_energy;
    for (const auto& st : traj.steps) {
        CHECK(st.energy <= prev);
        CHECK(st.min_density > 0.0);
        prev = st.energy;
    }
    const LedgerReport rep = energy_ledger_check(traj, default_params());
    CHECK(rep.ok());
    CHECK(rep.min_slack >= -1e-9);

    // Same report from the recorded diagnostics alone.
    Trajectory trimmed = traj;
    trimmed.states = {traj.states.back()};
    const LedgerReport rep2 = energy_ledger_check(trimmed, default_params());
    for (std::size_t k = 0; k < rep.slack.size(); ++k)
        CHECK(rep2.slack[k] == doctest::Approx(rep.slack[k]).epsilon(1e-10).scale(1e-12));
}

TEST_CASE("ledger catches an injected energy increase") {
    auto mesh = build_mesh(16, 2);
    const FluidParams p = default_params();
    SchemeConfig cfg;
    cfg.T = 4 * mesh->h();
    const State s0 = experiment_state(mesh, Experiment::steady_state, {0.05, 0.03, -0.02});
    Trajectory traj = solve_trajectory(s0, p, cfg);
    REQUIRE(energy_ledger_check(traj, p).ok());

    // Raise the energy of level 2 by exactly 1 through the kinetic part of cell 0.
    State& s2 = traj.states[2];
    const double rho = s2.rho.at(0), m = s2.mom.at(0, 0);
    s2.mom.at(0, 0) = std::sqrt(m * m + 2.0 * rho / mesh->cell_volume());
    const LedgerReport rep = energy_ledger_check(traj, p);
    CHECK_FALSE(rep.ok());
    CHECK(rep.first_violation == 2);
    // The extra kinetic energy also raises the dissipation, so the slack drops by at least 1.
    CHECK(rep.slack[1] <= -1.0);

    // Same through the recorded diagnostics.
    Trajectory trimmed = solve_trajectory(s0, p, cfg, {.keep_states = false});
    trimmed.steps[1].energy += 1.0;
    CHECK(energy_ledger_check(trimmed, p).first_violation == 2);
}

TEST_CASE("trajectories are bitwise deterministic") {
    auto mesh = build_mesh(16, 2);
    const State s0 = experiment_state(mesh, Experiment::vortex, {0.04, -0.07, 0.01});
    const Trajectory a = solve_trajectory(s0, default_params(), SchemeConfig{});
    const Trajectory b = solve_trajectory(s0, default_params(), SchemeConfig{});
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k) CHECK(a.states[k] == b.states[k]);
}

TEST_CASE("non-convergence halves the step, then fails") {
    auto mesh = build_mesh(8, 2);
    const State s0 = experiment_state(mesh, Experiment::vortex, {0.05, 0.02, 0.01});
    SchemeConfig cfg;
    cfg.solver.max_iters = 1;
    cfg.solver.max_dt_halvings = 2;
    CHECK_THROWS_AS(solve_trajectory(s0, default_params(), cfg), SolverFailure);

    cfg.solver.max_iters = 3;
    cfg.solver.max_dt_halvings = 6;
    const Trajectory traj = solve_trajectory(s0, default_params(), cfg);
    CHECK(traj.times.back() == cfg.T);
    bool halved = false;
    for (const auto& st : traj.steps) halved = halved || st.dt_halvings > 0;
    CHECK(halved);
    for (std::size_t k = 1; k < traj.times.size(); ++k) CHECK(traj.times[k] > traj.times[k - 1]);
    CHECK(energy_ledger_check(traj, default_params()).ok());
}

TEST_CASE("iterative linear solver agrees with the direct one") {
    auto mesh = build_mesh(16, 2);
    const State s0 = experiment_state(mesh, Experiment::vortex, {0.05, 0.02, 0.01});
    SchemeConfig direct, iterative;
    direct.solver.linear = LinearSolverKind::direct;
    iterative.solver.linear = LinearSolverKind::iterative;
    const auto a = solve_trajectory(s0, default_params(), direct).final_state();
    const auto b = solve_trajectory(s0, default_params(), iterative).final_state();
    for (std::size_t k = 0; k < mesh->num_cells(); ++k) CHECK(a.rho.at(k) == doctest::Approx(b.rho.at(k)).epsilon(1e-9));
}

TEST_CASE("pressureless runs (a = 0) stay positive and dissipative") {
    auto mesh = build_mesh(16, 2);
    const State s0 = experiment_state(mesh, Experiment::vortex, {0.09, 0.05, -0.08});
    const FluidParams p = default_params(0.0);
    const Trajectory traj = solve_trajectory(s0, p, SchemeConfig{});
    for (const auto& st : traj.steps) CHECK(st.min_density > 0.0);
    CHECK(energy_ledger_check(traj, p).ok());
}
