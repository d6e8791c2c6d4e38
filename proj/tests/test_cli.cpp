#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "mcnsfv/cli.hpp"
#include "mcnsfv/errors.hpp"
#include "mcnsfv/persist.hpp"

using namespace mcnsfv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mcnsfv_cli_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig tiny(const fs::path& out) {
    RunConfig c;
    c.n = 16;
    c.N = {2, 3, 4};
    c.M = 2;
    c.S = 4;
    c.seed = 11;
    c.out = out.string();
    return c;
}

std::string field_of(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<none>";
}

} // namespace

TEST_CASE("config round trip") {
    RunConfig c;
    c.experiment = "vortex_interface";
    c.epsilon = 0.1 + 0.2;
    c.T = 1.0 / 3.0;
    c.N = {3, 7, 100};
    c.seed = 18446744073709551615ull;
    c.out = "somewhere/else";
    c.linear_solver = "iterative";
    const RunConfig back = parse_config(emit_config(c));
    CHECK(back == c);
    CHECK(parse_config(emit_config(RunConfig{})) == RunConfig{});
    CHECK(parse_config("# only a comment\n\n") == RunConfig{});
}

TEST_CASE("config errors name the key") {
    CHECK(field_of("epsilon = -2\n") == "epsilon");
    CHECK(field_of("epsilon = -1\n") == "epsilon");
    CHECK(field_of("bogus = 1\n") == "bogus");
    CHECK(field_of("n = 8\nn = 16\n") == "n");
    CHECK(field_of("N = 10, 5\n") == "N");
    CHECK(field_of("N = 5, 5\n") == "N");
    CHECK(field_of("gamma = 1\n") == "gamma");
    CHECK(field_of("mu = 0\n") == "mu");
    CHECK(field_of("n = 1.5\n") == "n");
    CHECK(field_of("T = nan\n") == "T");
    CHECK(field_of("experiment = shock\n") == "experiment");
    CHECK(field_of("S = 1\n") == "S");
    CHECK(field_of("linear_solver = magic\n") == "linear_solver");
    CHECK(field_of("experiment = vortex_interface\nhalf_width = 0.5\n") == "half_width");
    CHECK(field_of("no equals sign\n") == "line 1");
    CHECK_THROWS_AS(load_config("/nonexistent/mcnsfv.cfg"), ConfigError);
}

TEST_CASE("thread count precedence") {
    RunConfig c;
    c.threads = 5;
    ::unsetenv("MCNSFV_THREADS");
    CHECK(resolve_threads(std::nullopt, c) == 5);
    ::setenv("MCNSFV_THREADS", "3", 1);
    CHECK(resolve_threads(std::nullopt, c) == 3);
    CHECK(resolve_threads(2, c) == 2);
    ::setenv("MCNSFV_THREADS", "x", 1);
    CHECK_THROWS_AS(resolve_threads(std::nullopt, c), ConfigError);
    CHECK_THROWS_AS(resolve_threads(-1, c), ConfigError);
    ::unsetenv("MCNSFV_THREADS");
    c.threads = 0;
    CHECK(resolve_threads(std::nullopt, c) >= 1);
}

TEST_CASE("metrics CSV parse errors") {
    const std::string h = std::string(kMetricsHeader) + "\n";
    CHECK_THROWS_AS(parse_metrics_csv(""), FormatError);
    CHECK_THROWS_AS(parse_metrics_csv("a,b\n"), FormatError);
    CHECK_THROWS_AS(parse_metrics_csv(h), FormatError);
    try {
        (void)parse_metrics_csv(h + "steady_state,rho,E1,1.4,5,10,512,0.1\nsteady_state,rho,E1,1.4,x,10,512,0.1\n");
        FAIL("bad row accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_metrics_csv(h + "steady_state,rho,E1,1.4,5,10\n"), FormatError);
    const auto rows = parse_metrics_csv(h + "vortex,u,E4,2,40,10,512,1.25e-3\n");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].experiment == "vortex");
    CHECK(rows[0].N == 40);
    CHECK(rows[0].value == 1.25e-3);
    CHECK(parse_metrics_csv(format_metrics_csv(rows))[0].value == rows[0].value);
}

TEST_CASE("rates of an exact N^-1/2 table") {
    std::vector<MetricsRow> rows;
    for (const char* f : {"rho", "m", "u"})
        for (const char* m : {"E1", "E2", "E3", "E4"})
            for (std::size_t N : {5, 10, 20, 40, 80})
                rows.push_back({"steady_state", f, m, 2.0, N, 10, 512, 0.3 / std::sqrt(double(N))});
    const auto rates = fit_rates(parse_metrics_csv(format_metrics_csv(rows)));
    REQUIRE(rates.size() == 12);
    CHECK(rates[0].field == "rho");
    CHECK(rates[11].metric == "E4");
    for (const auto& r : rates) {
        CHECK(r.fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(r.fit.residual < 1e-12);
    }
    CHECK(format_rates_csv(rates).rfind(kRatesHeader, 0) == 0);
}

TEST_CASE("run-sample on an unperturbed steady state") {
    const fs::path out = scratch("run_sample");
    RunConfig c = tiny(out);
    c.half_width = 0.0;
    std::ostringstream log;
    CHECK(cmd_run_sample(c, 3, 1, log) == kExitOk);
    const Ensemble ens = load_ensemble(Paths{out}.sample(3), 16);
    REQUIRE(ens.size() == 1);
    CHECK(ens.state_ids == std::vector<std::uint64_t>{3});
    for (double v : ens.states[0].rho.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : ens.states[0].mom.values()) CHECK(std::abs(v) < 1e-12);
    CHECK(log.str().find("(ok)") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("identical samples give a zero-spread reference and zero errors") {
    const fs::path out = scratch("degenerate");
    RunConfig c = tiny(out);
    c.half_width = 0.0;
    c.S = 2;
    std::ostringstream log;
    REQUIRE(cmd_reference(c, 1, log) == kExitOk);
    const ReferenceStats ref = load_reference(Paths{out}.reference(), 16);
    for (Unknown u : {Unknown::rho, Unknown::m, Unknown::u})
        for (double v : ref.spread(u).values()) CHECK(v == 0.0);

    REQUIRE(cmd_estimate(c, 1, log) == kExitOk);
    const auto rows = parse_metrics_csv(read_file(Paths{out}.metrics()));
    CHECK(rows.size() == 3 * 4 * 3);
    for (const auto& r : rows) CHECK(r.value < 1e-13);
    fs::remove_all(out);
}

TEST_CASE("estimate without a reference") {
    const fs::path out = scratch("noref");
    std::ostringstream log;
    try {
        (void)cmd_estimate(tiny(out), 1, log);
        FAIL("missing reference accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("reference not found") != std::string::npos);
        CHECK(exit_code_for(e) == kExitOther);
    }
    CHECK_THROWS_AS(cmd_convergence(tiny(out), log), FormatError);
    fs::remove_all(out);
}

TEST_CASE("estimate rejects a reference from another config") {
    const fs::path out = scratch("mismatch");
    RunConfig c = tiny(out);
    std::ostringstream log;
    REQUIRE(cmd_reference(c, 1, log) == kExitOk);
    c.mu = 0.2;
    CHECK_THROWS_AS(cmd_estimate(c, 1, log), FormatError);
    fs::remove_all(out);
}

TEST_CASE("outputs do not depend on the thread count") {
    const fs::path a = scratch("threads1");
    const fs::path b = scratch("threads3");
    std::ostringstream log;
    RunConfig ca = tiny(a);
    RunConfig cb = tiny(b);
    for (auto [cfg, threads] : {std::pair{&ca, 1u}, std::pair{&cb, 3u}}) {
        REQUIRE(cmd_reference(*cfg, threads, log) == kExitOk);
        REQUIRE(cmd_estimate(*cfg, threads, log) == kExitOk);
        REQUIRE(cmd_convergence(*cfg, log) == kExitOk);
    }
    CHECK(read_file(Paths{a}.metrics()) == read_file(Paths{b}.metrics()));
    CHECK(read_file(Paths{a}.rates()) == read_file(Paths{b}.rates()));
    for (const char* f : {"mean_rho.fvf", "mean_m.fvf", "dev_m.fvf", "var_u.fvf"})
        CHECK(read_file(Paths{a}.reference() / f) == read_file(Paths{b}.reference() / f));
    for (int r : {1, 2})
        CHECK(read_file(Paths{a}.ensemble(r) / "sample_000003_m.fvf") ==
              read_file(Paths{b}.ensemble(r) / "sample_000003_m.fvf"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ConfigError("n", "x")) == kExitConfig);
    CHECK(exit_code_for(SolverFailure("x", 0.0, 1.0, 3)) == kExitSolver);
    CHECK(exit_code_for(EnsembleError("x")) == kExitSolver);
    CHECK(exit_code_for(FormatError("x")) == kExitOther);
    CHECK(exit_code_for(std::runtime_error("x")) == kExitOther);
}

TEST_CASE("verify passes on the intact scheme") {
    RunConfig c = tiny(scratch("verify"));
    std::ostringstream log;
    CHECK(cmd_verify(c, 1, log) == kExitOk);
    CHECK(log.str().find("FAIL") == std::string::npos);
}
