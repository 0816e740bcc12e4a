// hcov: Matérn covariance estimation with hierarchical matrices.

#include <iostream>

#include <CLI11.hpp>

#include "hcov/cli.hpp"

namespace {

hcov::MaternParams triple(const std::vector<double>& v)
{
    hcov::MaternParams p;
    p.nu = v.at(0);
    p.ell = v.at(1);
    p.sigma2 = v.at(2);
    return p;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Matérn covariance estimation with hierarchical matrices"};
    app.require_subcommand(1);

    hcov::RunConfig cfg;
    std::vector<double> truth{cfg.truth.nu, cfg.truth.ell, cfg.truth.sigma2};
    std::vector<double> init{cfg.init.nu, cfg.init.ell, cfg.init.sigma2};
    double eps = 0.0;
    std::size_t rank = 0;

    app.add_option("--input", cfg.input, "observation file (count line, then coordinates and value)");
    app.add_option("--out", cfg.out, "output directory")->capture_default_str();
    app.add_option("--dim", cfg.dim, "spatial dimension")->check(CLI::IsMember({2, 3}))->capture_default_str();
    app.add_option("--eps", eps, "adaptive low-rank accuracy (default 1e-5)")->check(CLI::PositiveNumber);
    app.add_option("--rank", rank, "fixed low-rank rank, overrides --eps")->check(CLI::PositiveNumber);
    app.add_option("--kmax", cfg.k_max, "rank cap")->capture_default_str();
    app.add_option("--sim-eps", cfg.sim_eps, "accuracy used when simulating fields")->capture_default_str();
    app.add_option("--nmin", cfg.n_min, "cluster leaf size")->capture_default_str();
    app.add_option("--eta", cfg.eta, "admissibility parameter")->capture_default_str();
    app.add_option("--nugget", cfg.nugget, "diagonal nugget")->capture_default_str();
    app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    app.add_option("--threads", cfg.threads, "worker threads (0: all cores)")->capture_default_str();
    app.add_option("--init", init, "starting nu,ell,sigma2")->delimiter(',')->expected(3)->capture_default_str();
    app.add_option("--true", truth, "true or fixed nu,ell,sigma2")->delimiter(',')->expected(3)->capture_default_str();
    app.add_option("--steps", cfg.steps, "initial simplex steps for nu,ell,sigma2")
        ->delimiter(',')
        ->expected(3)
        ->capture_default_str();
    app.add_option("--tol", cfg.tol, "simplex size tolerance")->capture_default_str();
    app.add_option("--max-iter", cfg.max_iter, "optimizer iteration cap")->capture_default_str();
    app.add_flag("--dense-oracle", cfg.dense_oracle, "fit with the exact dense likelihood");
    app.add_option("--n-list", cfg.n_list, "sample sizes")->delimiter(',');
    app.add_option("--M", cfg.replicates, "replicates per sample size")->capture_default_str();
    app.add_option("--master-size", cfg.master_size, "simulated master field size")->capture_default_str();
    app.add_option("--min-sep", cfg.min_sep, "minimum distance between subsampled points")->capture_default_str();
    app.add_option("--domain", cfg.domain, "side length of the simulation domain")->capture_default_str();
    app.add_option("--n", cfg.n, "number of points (simulate, kld-study grid)")->capture_default_str();
    app.add_option("--vary", cfg.vary, "profiled parameter: nu, ell, sigma2 or nugget")->capture_default_str();
    app.add_option("--grid", cfg.grid, "profile grid: lo:hi:count or v1,v2,...");
    app.add_option("--ranks", cfg.ranks, "ranks for kld-study")->delimiter(',')->capture_default_str();

    for (const char* name : {"fit", "simulate", "profile", "replicates", "benchmark", "kld-study"})
        app.add_subcommand(name)->fallthrough();
    app.get_subcommand("fit")->description("estimate nu, ell, sigma2 from --input");
    app.get_subcommand("simulate")->description("simulate a field at --true");
    app.get_subcommand("profile")->description("likelihood profile over --grid");
    app.get_subcommand("replicates")->description("replicate estimation study");
    app.get_subcommand("benchmark")->description("timing and storage versus n");
    app.get_subcommand("kld-study")->description("KL divergence and errors versus rank");

    CLI11_PARSE(app, argc, argv);

    cfg.command = app.get_subcommands().front()->get_name();
    cfg.truth = triple(truth);
    cfg.init = triple(init);
    if (app.count("--eps"))
        cfg.eps = eps;
    if (app.count("--rank"))
        cfg.rank = rank;
    return hcov::run_command(cfg, std::cout, std::cerr);
}
