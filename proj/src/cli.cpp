#include "hcov/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "hcov/diagnostics.hpp"
#include "hcov/error.hpp"
#include "hcov/io.hpp"
#include "hcov/parallel.hpp"

namespace hcov {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name)
{
    std::filesystem::create_directories(cfg.out);
    const auto path = cfg.out / name;
    std::ofstream f(path);
    if (!f)
        throw Error("cannot write " + path.string());
    return f;
}

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw Error(what);
}

} // namespace

TruncationControl RunConfig::control() const
{
    if (rank)
        return TruncationControl::fixed(*rank, k_max);
    return TruncationControl::adaptive(eps.value_or(1e-5), k_max);
}

HOptions RunConfig::h_options() const
{
    HOptions h;
    h.ctl = control();
    h.n_min = n_min;
    h.eta = eta;
    return h;
}

FitConfig RunConfig::fit_config() const
{
    FitConfig f;
    f.init = init;
    f.init.nugget = nugget;
    f.steps = steps;
    f.tol = tol;
    f.max_iter = max_iter;
    f.h = h_options();
    f.dense_objective = dense_oracle;
    return f;
}

void RunConfig::validate() const
{
    static const std::vector<std::string> known{"fit", "simulate", "profile", "replicates", "benchmark", "kld-study"};
    require(std::find(known.begin(), known.end(), command) != known.end(), "unknown command '" + command + "'");
    require(dim == 2 || dim == 3, "--dim must be 2 or 3");
    require(!rank || *rank >= 1, "--rank must be at least 1");
    require(!eps || (*eps > 0.0 && std::isfinite(*eps)), "--eps must be positive");
    require(k_max >= 1, "--kmax must be at least 1");
    require(sim_eps > 0.0, "--sim-eps must be positive");
    require(n_min >= 1, "--nmin must be at least 1");
    require(eta > 0.0, "--eta must be positive");
    require(nugget >= 0.0 && std::isfinite(nugget), "--nugget must be nonnegative");
    require(steps.size() == 3, "--steps needs three values");
    for (double s : steps)
        require(s > 0.0, "--steps must be positive");
    require(tol > 0.0, "--tol must be positive");
    require(max_iter >= 1, "--max-iter must be at least 1");
    require(domain > 0.0, "--domain must be positive");
    require(min_sep >= 0.0, "--min-sep must be nonnegative");
    for (auto v : n_list)
        require(v > 0, "--n-list entries must be positive");
    for (auto k : ranks)
        require(k > 0, "--ranks entries must be positive");

    if (command == "fit" || command == "profile")
        require(!input.empty(), "--input is required for " + command);
    if (command == "fit")
        init.validate();
    if (command != "fit") {
        MaternParams t = truth;
        t.nugget = nugget;
        t.validate();
    }
    if (command == "replicates") {
        require(!n_list.empty(), "--n-list is required for replicates");
        require(replicates >= 1, "--M must be at least 1");
    }
    if (command == "benchmark")
        require(!n_list.empty(), "--n-list is required for benchmark");
    if (command == "profile")
        require(!grid.empty(), "--grid is required for profile");
    if (command == "kld-study") {
        require(dim == 2, "kld-study uses a 2D grid");
        require(!ranks.empty(), "--ranks must not be empty");
    }
}

std::vector<double> parse_grid(const std::string& spec)
{
    std::vector<double> out;
    auto number = [&](const std::string& s) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        }
        catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size())
            throw Error("grid: non-numeric value '" + s + "'");
        return v;
    };

    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ':'))
            parts.push_back(item);
        if (parts.size() != 3)
            throw Error("grid: expected lo:hi:count");
        const double lo = number(parts[0]), hi = number(parts[1]);
        const double count = number(parts[2]);
        if (count < 1 || count != std::floor(count))
            throw Error("grid: count must be a positive integer");
        const auto m = static_cast<std::size_t>(count);
        if (m == 1)
            return {lo};
        for (std::size_t i = 0; i < m; ++i)
            out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1));
        return out;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(number(item));
    if (out.empty())
        throw Error("grid: no values");
    return out;
}

PointSet grid_points(std::size_t n)
{
    const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (m < 2 || m * m != n)
        throw Error("grid: n = " + std::to_string(n) + " is not a square >= 4");
    std::vector<double> c;
    c.reserve(2 * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            c.push_back(static_cast<double>(i) / static_cast<double>(m - 1));
            c.push_back(static_cast<double>(j) / static_cast<double>(m - 1));
        }
    return {2, std::move(c)};
}

std::vector<BenchmarkRow> run_benchmark(const std::vector<std::size_t>& n_list, const MaternParams& p,
                                        const HOptions& opt, std::size_t dim, double domain, std::uint64_t seed)
{
    std::vector<BenchmarkRow> rows;
    for (auto n : n_list) {
        BenchmarkRow row;
        row.n = n;
        const auto ps = random_points(n, dim, derive_seed(seed, n), domain);

        auto t0 = std::chrono::steady_clock::now();
        auto ct = std::make_shared<const ClusterTree>(build_cluster_tree(ps, opt.n_min));
        const auto bct = build_block_cluster_tree(ct, opt.eta);
        const HMatrix c = build_hmatrix(bct, KernelEvaluator(p, ct), opt.ctl);
        row.build_seconds = seconds_since(t0);
        const auto rep = storage_report(c);
        row.bytes = rep.bytes;
        row.kb_per_dof = rep.bytes_per_dof / 1000.0;

        t0 = std::chrono::steady_clock::now();
        const HMatrix cs = symmetrize(c, opt.ctl);
        const HFactor f = factorize(cs, opt.ctl, opt.form);
        row.factor_seconds = seconds_since(t0);
        row.factor_bytes = storage_report(f.lower()).bytes;
        row.inversion_error = inversion_error(cs, f);
        rows.push_back(row);
    }
    return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows)
{
    out << "n,build_s,size_MB,kB_per_dof,factor_s,factor_MB,inv_error\n";
    for (const auto& r : rows)
        out << r.n << ',' << format_number(r.build_seconds) << ',' << format_number(static_cast<double>(r.bytes) / 1e6)
            << ',' << format_number(r.kb_per_dof) << ',' << format_number(r.factor_seconds) << ','
            << format_number(static_cast<double>(r.factor_bytes) / 1e6) << ',' << format_number(r.inversion_error)
            << '\n';
}

std::vector<KldRow> run_kld_study(std::size_t n, const std::vector<std::size_t>& ranks, const MaternParams& p,
                                  std::size_t n_min, double eta)
{
    const auto ps = grid_points(n);
    auto ct = std::make_shared<const ClusterTree>(build_cluster_tree(ps, n_min));
    const auto bct = build_block_cluster_tree(ct, eta);
    const KernelEvaluator ev(p, ct);
    const Eigen::MatrixXd c = to_internal_order(dense_covariance(ps, p), *ct);
    const auto inner = TruncationControl::adaptive(1e-12, std::numeric_limits<std::size_t>::max());

    std::vector<KldRow> rows;
    for (auto k : ranks) {
        KldRow row;
        row.k = k;
        const auto ctl = TruncationControl::fixed(k);
        const HMatrix approx = symmetrize(build_hmatrix(bct, ev, ctl), ctl);

        std::optional<HFactor> f;
        try {
            f = factorize(approx, inner);
        }
        catch (const NotPositiveDefinite&) {
        }
        const auto m = spectral_error_metrics(approx, c, f ? &*f : nullptr);
        row.norm2_diff = m.norm2_diff;
        row.norm2_rel = m.norm2_diff / m.norm2_ref;
        row.inverse_error = m.inverse_error.value_or(nan);
        try {
            row.kld = kld(c, approx);
        }
        catch (const Error&) {
            row.kld = nan;
        }
        rows.push_back(row);
    }
    return rows;
}

void write_kld_csv(std::ostream& out, const std::vector<KldRow>& rows)
{
    out << "k,kld,norm2_diff,norm2_rel,inv_error\n";
    for (const auto& r : rows)
        out << r.k << ',' << format_number(r.kld) << ',' << format_number(r.norm2_diff) << ','
            << format_number(r.norm2_rel) << ',' << format_number(r.inverse_error) << '\n';
}

namespace {

MaternParams truth_of(const RunConfig& cfg)
{
    MaternParams p = cfg.truth;
    p.nugget = cfg.nugget;
    return p;
}

void run_fit(const RunConfig& cfg, std::ostream& out)
{
    const auto ds = parse_input_file(cfg.input, cfg.dim);
    const auto fit = fit_parameters(ds, cfg.fit_config());
    auto log = open_output(cfg, "fit_log.txt");
    write_iteration_log(log, fit.trace);
    write_solution_line(log, fit);
    write_iteration_log(out, fit.trace);
    write_solution_line(out, fit);
}

void run_simulate(const RunConfig& cfg, std::ostream& out)
{
    const PointSet ps = cfg.input.empty() ? random_points(cfg.n, cfg.dim, derive_seed(cfg.seed, 0), cfg.domain)
                                          : parse_input_file(cfg.input, cfg.dim).points;
    SimulationOptions opt;
    opt.h.ctl = TruncationControl::adaptive(cfg.sim_eps, cfg.k_max);
    opt.h.n_min = cfg.n_min;
    opt.h.eta = cfg.eta;
    const auto ds = simulate_field(ps, truth_of(cfg), cfg.seed, opt);
    auto f = open_output(cfg, "simulated.txt");
    write_dataset(f, ds);
    out << "simulated " << ds.size() << " values -> " << (cfg.out / "simulated.txt").string() << '\n';
}

void run_profile(const RunConfig& cfg, std::ostream& out)
{
    const auto ds = parse_input_file(cfg.input, cfg.dim);
    const auto vary = parse_parameter(cfg.vary);
    const auto rows = profile_likelihood(ds, vary, parse_grid(cfg.grid), truth_of(cfg), cfg.h_options());
    auto f = open_output(cfg, "profile.csv");
    write_profile_csv(f, vary, rows);
    write_profile_csv(out, vary, rows);
}

void run_replicates(const RunConfig& cfg, std::ostream& out)
{
    Dataset master;
    if (!cfg.input.empty()) {
        master = parse_input_file(cfg.input, cfg.dim);
    }
    else {
        SimulationOptions opt;
        opt.h.ctl = TruncationControl::adaptive(cfg.sim_eps, cfg.k_max);
        opt.h.n_min = cfg.n_min;
        opt.h.eta = cfg.eta;
        const auto ps = random_points(cfg.master_size, cfg.dim, derive_seed(cfg.seed, 0), cfg.domain);
        master = simulate_field(ps, truth_of(cfg), derive_seed(cfg.seed, 1), opt);
    }
    const auto records = replicate_study(master, cfg.n_list, cfg.replicates, cfg.fit_config(), cfg.seed, cfg.min_sep);
    auto f = open_output(cfg, "replicates.csv");
    write_replicate_csv(f, records);
    write_replicate_csv(out, records);
}

void run_benchmark_command(const RunConfig& cfg, std::ostream& out)
{
    const auto rows = run_benchmark(cfg.n_list, truth_of(cfg), cfg.h_options(), cfg.dim, cfg.domain, cfg.seed);
    auto f = open_output(cfg, "benchmark.csv");
    write_benchmark_csv(f, rows);
    write_benchmark_csv(out, rows);
}

void run_kld_command(const RunConfig& cfg, std::ostream& out)
{
    const auto rows = run_kld_study(cfg.n, cfg.ranks, truth_of(cfg), cfg.n_min, cfg.eta);
    auto f = open_output(cfg, "kld_study.csv");
    write_kld_csv(f, rows);
    write_kld_csv(out, rows);
}

} // namespace

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    try {
        cfg.validate();
        set_num_threads(cfg.threads);
        if (cfg.command == "fit")
            run_fit(cfg, out);
        else if (cfg.command == "simulate")
            run_simulate(cfg, out);
        else if (cfg.command == "profile")
            run_profile(cfg, out);
        else if (cfg.command == "replicates")
            run_replicates(cfg, out);
        else if (cfg.command == "benchmark")
            run_benchmark_command(cfg, out);
        else
            run_kld_command(cfg, out);
        return 0;
    }
    catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace hcov
