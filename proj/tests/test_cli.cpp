#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcov/cli.hpp"
#include "hcov/io.hpp"
#include "support.hpp"

using namespace hcov;
namespace fs = std::filesystem;

namespace {

const char* three_records = "3\n"
                          "0.1  0.2  88.1\n"
                          "0.1  0.3  87.2\n"
                          "0.2  0.4  86.0\n";

// fresh scratch directory per test
struct Scratch
{
    fs::path dir;

    explicit Scratch(const std::string& name)
        : dir(fs::temp_directory_path() / ("hcov_test_" + name))
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }

    fs::path write(const std::string& file, const std::string& text) const
    {
        std::ofstream(dir / file) << text;
        return dir / file;
    }
};

std::vector<std::string> lines(const fs::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

std::string parse_error(const std::string& text, std::size_t dim = 2)
{
    std::istringstream in(text);
    try {
        parse_input(in, dim);
    }
    catch (const Error& e) {
        return e.what();
    }
    return {};
}

RunConfig config(const std::string& command, const fs::path& out)
{
    RunConfig cfg;
    cfg.command = command;
    cfg.out = out;
    cfg.truth.nu = 0.5;
    cfg.truth.ell = 0.3;
    cfg.truth.sigma2 = 1.0;
    cfg.init = cfg.truth;
    return cfg;
}

} // namespace

TEST_CASE("the three-record example parses exactly")
{
    std::istringstream in(three_records);
    const auto ds = parse_input(in);
    REQUIRE(ds.size() == 3);
    CHECK(ds.points.dim() == 2);
    CHECK(ds.z(0) == 88.1);
    CHECK(ds.z(1) == 87.2);
    CHECK(ds.z(2) == 86.0);
    CHECK(ds.points.point(0)[0] == 0.1);
    CHECK(ds.points.point(0)[1] == 0.2);
    CHECK(ds.points.point(1)[1] == 0.3);
    CHECK(ds.points.point(2)[0] == 0.2);
    CHECK(ds.points.point(2)[1] == 0.4);
}

TEST_CASE("input format details")
{
    SUBCASE("tabs, blank lines and carriage returns")
    {
        std::istringstream in("\n2\r\n\n0.5\t0.5 \t 1e-3\r\n  1 1 -2\n\n");
        const auto ds = parse_input(in);
        CHECK(ds.size() == 2);
        CHECK(ds.z(0) == 1e-3);
        CHECK(ds.z(1) == -2.0);
    }
    SUBCASE("three-dimensional records")
    {
        std::istringstream in("1\n0 0 0 5.0\n");
        const auto ds = parse_input(in, 3);
        CHECK(ds.size() == 1);
        CHECK(ds.points.dim() == 3);
        CHECK(ds.z(0) == 5.0);
    }
    SUBCASE("malformed files name the line")
    {
        CHECK(parse_error("3\n0.1 0.2 88.1\n0.1 0.3 87.2\n") == "expected 3 records, found 2 (line 4)");
        CHECK(parse_error("2\n0.1 0.2 x\n1 1 1\n") == "non-numeric token 'x' (line 2)");
        CHECK(parse_error("0\n") == "record count must be positive, got 0 (line 1)");
        CHECK(parse_error("-4\n") == "record count must be positive, got -4 (line 1)");
        CHECK(parse_error("abc\n") == "non-numeric token 'abc' (line 1)");
        CHECK(parse_error("1\n0.1 0.2\n") == "expected 3 fields, found 2 (line 2)");
        CHECK(parse_error("1\n0.1 0.2 3\n4 4 4\n") == "more than 1 records (line 3)");
        CHECK(parse_error("2 3\n") == "expected the number of records on the first line (line 1)");
        CHECK(parse_error("") == "input: empty file");
        CHECK(parse_error("1\n0 0 nan\n").find("non-finite") != std::string::npos);
        CHECK_FALSE(parse_error("1\n0 0 1\n", 4).empty());
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS_AS(parse_input_file("/nonexistent/hcov/input.txt"), Error);
    }
}

TEST_CASE("dataset files round-trip")
{
    Scratch s("roundtrip");
    for (std::size_t dim : {2u, 3u}) {
        Dataset ds{testing::random_points(50, 3, dim), testing::random_vector(50, 4)};
        write_dataset_file(s.dir / "d.txt", ds);
        const auto back = parse_input_file(s.dir / "d.txt", dim);
        CHECK(back.z == ds.z);
        CHECK(back.points.coords() == ds.points.coords());
    }
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 88.1})
        CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("iteration log rows")
{
    std::ostringstream empty;
    write_iteration_log(empty, {});
    CHECK(empty.str().empty());

    std::ostringstream out;
    write_iteration_log(out, {{1, {0.27, 2.4, 1.30}, 1762.1, 0.007}, {2, {0.276, 2.41, 1.29}, 1757.2, 0.009}});
    std::istringstream rows(out.str());
    std::string first, second;
    std::getline(rows, first);
    std::getline(rows, second);
    CHECK(testing::same_row(first, "1 0.27    2.4   1.30  L = 1762.1  TOL= 0.007"));
    CHECK(testing::same_row(second, "2 0.276  2.41 1.29  L = 1757.2  TOL= 0.009"));

    std::istringstream back(out.str());
    const auto parsed = parse_iteration_log(back);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[1].index == 2);
    CHECK(parsed[1].x == std::vector<double>{0.276, 2.41, 1.29});
    CHECK(parsed[1].value == 1757.2);
    CHECK(parsed[1].size == 0.009);

    std::istringstream bad("1 0.27 2.4 1.3 L 1762.1 TOL= 0.007\n");
    CHECK_THROWS_AS(parse_iteration_log(bad), Error);
}

TEST_CASE("a converged fit ends its log with the solution")
{
    FitResult fit;
    fit.converged = true;
    fit.params.nu = 0.5;
    fit.params.ell = 1.1;
    fit.params.sigma2 = 0.9;
    fit.negloglik = 123.4;
    fit.trace = {{1, {0.5, 1.1, 0.9}, 123.4, 1e-6}};
    std::ostringstream out;
    write_iteration_log(out, fit.trace);
    write_solution_line(out, fit);
    const auto text = out.str();
    CHECK(text.find("converged: nu = 0.5 ell = 1.1 sigma2 = 0.9") != std::string::npos);
    std::istringstream in(text);
    CHECK(parse_iteration_log(in).size() == 1);
}

TEST_CASE("replicate rows")
{
    auto record = [](std::size_t n, double ell, double nu, double sigma2) {
        ReplicateRecord r;
        r.n = n;
        FitResult f;
        f.params.ell = ell;
        f.params.nu = nu;
        f.params.sigma2 = sigma2;
        r.fit = f;
        return r;
    };

    std::ostringstream none;
    write_replicate_csv(none, {});
    CHECK(none.str().empty());

    std::ostringstream out;
    ReplicateRecord failed;
    failed.n = 4000;
    failed.replicate = 3;
    failed.error = "matrix not positive definite at pivot 7";
    write_replicate_csv(out, {record(4000, 0.54, 0.082, 1.01), record(4000, 0.53, 0.083, 1.02), failed,
                              record(4000, 0.55, 0.081, 1.02)});
    std::istringstream in(out.str());
    std::vector<std::string> rows;
    for (std::string l; std::getline(in, l);)
        rows.push_back(l);
    REQUIRE(rows.size() == 4);
    CHECK(testing::same_row(rows[0], "4000 5.4e-1  8.2e-2  1.01"));
    CHECK(testing::same_row(rows[1], "4000 5.3e-1  8.3e-2  1.02"));
    CHECK(rows[2].rfind("# failed n=4000 replicate=3", 0) == 0);
    CHECK(testing::same_row(rows[3], "4000 5.5e-1  8.1e-2  1.02"));
}

TEST_CASE("profile rows")
{
    ProfileRow ok;
    ok.value = 0.2;
    LoglikResult r;
    r.loglik = -10.0;
    r.logdet = 3.0;
    r.quadform = 4.5;
    ok.result = r;
    ProfileRow bad;
    bad.value = 0.3;
    bad.error = "rejected";
    std::ostringstream out;
    write_profile_csv(out, Parameter::ell, {ok, bad});
    CHECK(out.str() == "ell,negloglik,logdet,quadform\n0.2,10,3,4.5\n0.3,nan,nan,nan\n");
}

TEST_CASE("grid specifications")
{
    CHECK(parse_grid("0.3") == std::vector<double>{0.3});
    CHECK(parse_grid("1,2.5,4") == std::vector<double>{1.0, 2.5, 4.0});
    const auto g = parse_grid("0.1:0.5:5");
    REQUIRE(g.size() == 5);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(g[i] == doctest::Approx(0.1 + 0.1 * static_cast<double>(i)).epsilon(1e-15));
    CHECK(g.front() == 0.1);
    CHECK(g.back() == 0.5);
    CHECK_THROWS_AS(parse_grid("a,b"), Error);
    CHECK_THROWS_AS(parse_grid("0.1:0.5"), Error);
    CHECK_THROWS_AS(parse_grid(""), Error);
}

TEST_CASE("grid points")
{
    const auto ps = grid_points(16);
    CHECK(ps.size() == 16);
    CHECK(ps.point(15)[0] == 1.0);
    CHECK(ps.point(15)[1] == 1.0);
    CHECK_THROWS_AS(grid_points(15), Error);
}

TEST_CASE("run configuration")
{
    RunConfig cfg = config("fit", ".");
    CHECK(cfg.control().mode == TruncationControl::Mode::adaptive);
    CHECK(cfg.control().eps == 1e-5);
    cfg.rank = 12;
    CHECK(cfg.control().mode == TruncationControl::Mode::fixed_rank);
    CHECK(cfg.control().rank == 12);
    CHECK(cfg.fit_config().init.nugget == 1e-4);
    CHECK(cfg.fit_config().steps == std::vector<double>{0.02, 0.04, 0.01});
    CHECK(cfg.fit_config().max_iter == 200);
    CHECK(cfg.h_options().n_min == 32);
    CHECK(cfg.h_options().eta == 2.0);

    CHECK_THROWS_AS(cfg.validate(), Error); // no input
    cfg.input = "x.txt";
    CHECK_NOTHROW(cfg.validate());
    cfg.command = "frobnicate";
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.command = "replicates";
    CHECK_THROWS_AS(cfg.validate(), Error); // no n-list
    cfg.n_list = {100};
    CHECK_NOTHROW(cfg.validate());
    cfg.eta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("fit on the three-record example")
{
    Scratch s("fit");
    auto cfg = config("fit", s.dir);
    cfg.input = s.write("in.txt", three_records);
    cfg.init.nu = 0.5;
    cfg.init.ell = 0.1;
    cfg.init.sigma2 = 7000.0;
    // values near 87 need a large variance; its steps dominate the simplex size
    cfg.steps = {0.05, 0.05, 100.0};
    cfg.tol = 1.0;
    std::ostringstream out, err;
    CHECK(run_command(cfg, out, err) == 0);
    CHECK(err.str().empty());
    const auto log = lines(s.dir / "fit_log.txt");
    REQUIRE(log.size() >= 2);
    CHECK(log.back().rfind("converged", 0) == 0);
    std::ifstream in(s.dir / "fit_log.txt");
    CHECK(parse_iteration_log(in).size() == log.size() - 1);
}

TEST_CASE("simulate then profile")
{
    Scratch s("simprof");
    auto cfg = config("simulate", s.dir);
    cfg.n = 300;
    cfg.seed = 3;
    std::ostringstream out, err;
    REQUIRE(run_command(cfg, out, err) == 0);
    const auto sim = parse_input_file(s.dir / "simulated.txt");
    CHECK(sim.size() == 300);

    // deterministic given the seed
    std::ostringstream out2;
    REQUIRE(run_command(cfg, out2, err) == 0);
    CHECK(parse_input_file(s.dir / "simulated.txt").z == sim.z);

    auto prof = config("profile", s.dir);
    prof.input = s.dir / "simulated.txt";
    prof.grid = "0.1:0.5:5";
    REQUIRE(run_command(prof, out, err) == 0);
    const auto rows = lines(s.dir / "profile.csv");
    REQUIRE(rows.size() == 6);
    CHECK(rows[0] == "ell,negloglik,logdet,quadform");
    CHECK(rows[1].rfind("0.1,", 0) == 0);
}

TEST_CASE("replicates, benchmark and kld-study commands")
{
    Scratch s("studies");
    std::ostringstream out, err;

    auto rep = config("replicates", s.dir);
    rep.master_size = 400;
    rep.n_list = {60};
    rep.replicates = 2;
    rep.tol = 1e-3;
    REQUIRE(run_command(rep, out, err) == 0);
    const auto rows = lines(s.dir / "replicates.csv");
    REQUIRE(rows.size() == 2);
    CHECK(testing::split_ws(rows[0]).size() == 4);
    CHECK(testing::split_ws(rows[0])[0] == "60");

    auto bench = config("benchmark", s.dir);
    bench.n_list = {500, 1000};
    REQUIRE(run_command(bench, out, err) == 0);
    const auto b = lines(s.dir / "benchmark.csv");
    REQUIRE(b.size() == 3);
    CHECK(b[0] == "n,build_s,size_MB,kB_per_dof,factor_s,factor_MB,inv_error");

    auto kl = config("kld-study", s.dir);
    kl.n = 256;
    kl.ranks = {2, 4, 8};
    REQUIRE(run_command(kl, out, err) == 0);
    const auto k = lines(s.dir / "kld_study.csv");
    REQUIRE(k.size() == 4);
    CHECK(k[0] == "k,kld,norm2_diff,norm2_rel,inv_error");
}

TEST_CASE("failures give a nonzero status and a message")
{
    Scratch s("fail");
    std::ostringstream out, err;
    auto cfg = config("fit", s.dir);
    cfg.input = s.dir / "missing.txt";
    CHECK(run_command(cfg, out, err) == 1);
    CHECK(err.str().rfind("error: cannot open", 0) == 0);

    err.str("");
    cfg.input = s.write("short.txt", "3\n0.1 0.2 88.1\n0.1 0.3 87.2\n");
    CHECK(run_command(cfg, out, err) == 1);
    CHECK(err.str() == "error: expected 3 records, found 2 (line 4)\n");

    err.str("");
    cfg.command = "bogus";
    CHECK(run_command(cfg, out, err) == 1);
    CHECK(err.str().find("unknown command") != std::string::npos);
}
