#pragma once
//
// Subcommands of the hcov command-line tool. Argument parsing lives in the
// tool itself; everything here works on a filled-in RunConfig.
//

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hcov/estimate.hpp"

namespace hcov {

struct RunConfig
{
    std::string command; // fit, simulate, profile, replicates, benchmark, kld-study
    std::filesystem::path input;
    std::filesystem::path out = ".";
    std::size_t dim = 2;

    MaternParams truth;                   // simulate / profile / studies
    MaternParams init;                    // fit starting point
    std::optional<double> eps;            // adaptive accuracy (default 1e-5)
    std::optional<std::size_t> rank;      // fixed rank, overrides eps
    std::size_t k_max = 100;
    double sim_eps = 1e-7;
    std::size_t n_min = 32;
    double eta = 2.0;
    double nugget = 1e-4;
    std::uint64_t seed = 1;
    std::size_t threads = 0;

    std::vector<double> steps{0.02, 0.04, 0.01};
    double tol = 1e-5;
    int max_iter = 200;
    bool dense_oracle = false;

    std::vector<std::size_t> n_list;
    std::size_t replicates = 20;
    std::size_t master_size = 50000;
    double min_sep = 0.0;
    double domain = 1.0;
    std::size_t n = 1024;

    std::string vary = "ell";
    std::string grid; // "lo:hi:count" or comma separated values
    std::vector<std::size_t> ranks{10, 12, 15, 20, 50};

    TruncationControl control() const;
    HOptions h_options() const;
    FitConfig fit_config() const;
    void validate() const;
};

//! "lo:hi:count" (inclusive, evenly spaced) or "v1,v2,..."
std::vector<double> parse_grid(const std::string& spec);

struct BenchmarkRow
{
    std::size_t n = 0;
    double build_seconds = 0.0;
    std::size_t bytes = 0;
    double kb_per_dof = 0.0;
    double factor_seconds = 0.0;
    std::size_t factor_bytes = 0;
    double inversion_error = 0.0; // |I - (L D L^T)^{-1} C~|_2
};

std::vector<BenchmarkRow> run_benchmark(const std::vector<std::size_t>& n_list, const MaternParams& p,
                                        const HOptions& opt, std::size_t dim, double domain, std::uint64_t seed);
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);

struct KldRow
{
    std::size_t k = 0;
    double kld = 0.0;           // NaN when C~ is not positive definite
    double norm2_diff = 0.0;    // |C - C~|_2
    double norm2_rel = 0.0;     // |C - C~|_2 / |C|_2
    double inverse_error = 0.0; // |C C~^{-1} - I|_2, NaN when C~ cannot be factored
};

/// Fixed-rank sweep on an m x m grid of [0,1]^2 (n = m^2) against the
/// dense covariance. C~^{-1} is applied through a factorization of C~ at
/// accuracy 1e-12.
std::vector<KldRow> run_kld_study(std::size_t n, const std::vector<std::size_t>& ranks, const MaternParams& p,
                                  std::size_t n_min = 32, double eta = 2.0);
void write_kld_csv(std::ostream& out, const std::vector<KldRow>& rows);

//! m x m grid on [0,1]^2; n must be a perfect square
PointSet grid_points(std::size_t n);

/// Runs one subcommand; artifacts go to cfg.out. Returns the process exit
/// status; diagnostics are written to \a err.
int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

} // namespace hcov
