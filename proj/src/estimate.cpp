#include "hcov/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hcov/error.hpp"
#include "hcov/parallel.hpp"

namespace hcov {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

constexpr double infinity = std::numeric_limits<double>::infinity();

} // namespace

//------------------------------------------------------------------------------
// random numbers

Rng::Rng(std::uint64_t seed)
    : gen_(seed)
{}

double Rng::uniform()
{
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    double u1 = 0.0;
    while (u1 == 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    return r * std::cos(t);
}

std::uint64_t Rng::below(std::uint64_t n)
{
    if (n == 0)
        throw Error("Rng::below: empty range");
    // reject the incomplete top bucket
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do
        x = gen_();
    while (x >= limit);
    return x % n;
}

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b)
{
    return mix64(mix64(mix64(master) ^ a) ^ b);
}

//------------------------------------------------------------------------------
// Nelder-Mead

namespace {

double finite_or_inf(double v)
{
    return std::isfinite(v) ? v : infinity;
}

std::vector<double> centroid_except(const std::vector<std::vector<double>>& v, std::size_t skip)
{
    const auto d = v.front().size();
    std::vector<double> c(d, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i == skip)
            continue;
        for (std::size_t k = 0; k < d; ++k)
            c[k] += v[i][k];
    }
    for (auto& x : c)
        x /= static_cast<double>(v.size() - 1);
    return c;
}

// c + t (x - c)
std::vector<double> along(const std::vector<double>& c, const std::vector<double>& x, double t)
{
    std::vector<double> out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k)
        out[k] = c[k] + t * (x[k] - c[k]);
    return out;
}

double simplex_size(const std::vector<std::vector<double>>& v)
{
    const auto d = v.front().size();
    std::vector<double> c(d, 0.0);
    for (const auto& p : v)
        for (std::size_t k = 0; k < d; ++k)
            c[k] += p[k];
    for (auto& x : c)
        x /= static_cast<double>(v.size());
    double ss = 0.0;
    for (const auto& p : v)
        for (std::size_t k = 0; k < d; ++k)
            ss += (p[k] - c[k]) * (p[k] - c[k]);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

} // namespace

SimplexResult nelder_mead_minimize(const Objective& f, const std::vector<double>& x0, const SimplexOptions& opt)
{
    const auto d = x0.size();
    if (d == 0)
        throw Error("nelder_mead: empty start vector");
    if (opt.steps.size() != d)
        throw Error("nelder_mead: need one step per coordinate");
    for (double s : opt.steps)
        if (!(s > 0.0))
            throw Error("nelder_mead: steps must be positive");
    if (!(opt.tol > 0.0) || opt.max_iter < 1)
        throw Error("nelder_mead: need tol > 0 and max_iter >= 1");

    SimplexResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        return finite_or_inf(f(x));
    };

    std::vector<std::vector<double>> v(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i)
        v[i + 1][i] += opt.steps[i];
    std::vector<double> fv(d + 1);
    for (std::size_t i = 0; i <= d; ++i)
        fv[i] = eval(v[i]);
    if (std::all_of(fv.begin(), fv.end(), [](double x) { return std::isinf(x); }))
        throw Error("nelder_mead: infeasible start");

    for (int it = 1; it <= opt.max_iter; ++it) {
        // ties: lowest index is best, highest index is worst
        std::size_t lo = 0, hi = 0;
        for (std::size_t i = 1; i <= d; ++i) {
            if (fv[i] < fv[lo])
                lo = i;
            if (fv[i] >= fv[hi])
                hi = i;
        }
        std::size_t s_hi = hi == 0 ? 1 : 0;
        for (std::size_t i = 0; i <= d; ++i)
            if (i != hi && fv[i] >= fv[s_hi])
                s_hi = i;

        const auto c = centroid_except(v, hi);
        auto xr = along(c, v[hi], -1.0);
        const double fr = eval(xr);

        if (fr < fv[lo]) {
            auto xe = along(c, v[hi], -2.0);
            const double fe = eval(xe);
            if (fe < fv[lo]) {
                v[hi] = std::move(xe);
                fv[hi] = fe;
            }
            else {
                v[hi] = std::move(xr);
                fv[hi] = fr;
            }
        }
        else if (fr > fv[s_hi] || std::isinf(fr)) {
            if (fr <= fv[hi] && !std::isinf(fr)) {
                v[hi] = std::move(xr);
                fv[hi] = fr;
            }
            auto xc = along(c, v[hi], 0.5);
            const double fc = eval(xc);
            if (fc <= fv[hi] && !std::isinf(fc)) {
                v[hi] = std::move(xc);
                fv[hi] = fc;
            }
            else {
                for (std::size_t i = 0; i <= d; ++i) {
                    if (i == lo)
                        continue;
                    v[i] = along(v[lo], v[i], 0.5);
                    fv[i] = eval(v[i]);
                }
            }
        }
        else {
            v[hi] = std::move(xr);
            fv[hi] = fr;
        }

        std::size_t best = 0;
        for (std::size_t i = 1; i <= d; ++i)
            if (fv[i] < fv[best])
                best = i;
        const double size = simplex_size(v);
        res.trace.push_back({it, v[best], fv[best], size});
        res.x = v[best];
        res.value = fv[best];
        res.size = size;
        if (size <= opt.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

//------------------------------------------------------------------------------
// Brent

BrentResult brent_minimize_1d(const std::function<double(double)>& g, double a, double b, double tol, int max_iter)
{
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw Error("brent: invalid bracket");
    if (!(tol > 0.0))
        throw Error("brent: tol must be positive");

    const double golden = 0.5 * (3.0 - std::sqrt(5.0));
    const double eps = 2.0 * std::numeric_limits<double>::epsilon();

    double x = a + golden * (b - a);
    double w = x, v = x;
    double fx = g(x);
    double fw = fx, fv = fx;
    double d = 0.0, e = 0.0;

    BrentResult res;
    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        const double m = 0.5 * (a + b);
        const double tol1 = eps * std::abs(x) + tol / 3.0;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - m) <= tol2 - 0.5 * (b - a))
            break;

        bool golden_step = true;
        if (std::abs(e) > tol1) {
            // parabola through (v, fv), (w, fw), (x, fx)
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0)
                p = -p;
            else
                q = -q;
            const double e_prev = e;
            if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
                e = d;
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2)
                    d = x < m ? tol1 : -tol1;
                golden_step = false;
            }
        }
        if (golden_step) {
            e = x < m ? b - x : a - x;
            d = golden * e;
        }

        const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
        const double fu = g(u);
        if (fu <= fx) {
            (u < x ? b : a) = x;
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        }
        else {
            (u < x ? a : b) = u;
            if (fu <= fw || w == x) {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            }
            else if (fu <= fv || v == x || v == w) {
                v = u;
                fv = fu;
            }
        }
    }
    res.x = x;
    res.value = fx;
    return res;
}

//------------------------------------------------------------------------------
// fitting

void FitConfig::validate() const
{
    if (steps.size() != 3)
        throw Error("fit: need three initial steps (nu, ell, sigma2)");
    for (double s : steps)
        if (!(s > 0.0))
            throw Error("fit: initial steps must be positive");
    if (!(tol > 0.0))
        throw Error("fit: tolerance must be positive");
    if (max_iter < 1)
        throw Error("fit: max_iter must be at least 1");
    init.validate();
    h.ctl.validate();
}

FitResult fit_parameters(const Dataset& ds, const FitConfig& cfg)
{
    cfg.validate();
    ds.validate();

    std::optional<HLikelihood> hl;
    if (!cfg.dense_objective)
        hl.emplace(ds, cfg.h);

    FitResult out;
    auto objective = [&](const std::vector<double>& x) {
        if (!(x[0] > 0.0 && x[1] > 0.0 && x[2] > 0.0))
            return infinity;
        MaternParams p = cfg.init;
        p.nu = x[0];
        p.ell = x[1];
        p.sigma2 = x[2];
        try {
            const auto r = hl ? hl->evaluate(p) : loglik_dense(ds, p);
            return std::isfinite(r.loglik) ? -r.loglik : infinity;
        }
        catch (const Error&) {
            ++out.rejected;
            return infinity;
        }
    };

    SimplexOptions opt{cfg.steps, cfg.tol, cfg.max_iter};
    const auto res = nelder_mead_minimize(objective, {cfg.init.nu, cfg.init.ell, cfg.init.sigma2}, opt);

    out.params = cfg.init;
    out.params.nu = res.x[0];
    out.params.ell = res.x[1];
    out.params.sigma2 = res.x[2];
    out.negloglik = res.value;
    out.converged = res.converged;
    out.evaluations = res.evaluations;
    out.trace = res.trace;
    return out;
}

//------------------------------------------------------------------------------
// simulation and sampling

Dataset simulate_field(const PointSet& ps, const MaternParams& p, std::uint64_t seed, const SimulationOptions& opt)
{
    p.validate();
    if (ps.empty())
        throw Error("simulate: empty point set");
    auto ct = std::make_shared<const ClusterTree>(build_cluster_tree(ps, opt.h.n_min));
    const auto bct = build_block_cluster_tree(ct, opt.h.eta);
    const KernelEvaluator ev(p, ct);
    const HMatrix c = symmetrize(build_hmatrix(bct, ev, opt.h.ctl), opt.h.ctl);
    const HFactor f = factorize(c, opt.h.ctl, opt.h.form);

    Rng rng(seed);
    VectorXd xi(static_cast<Index>(ps.size()));
    for (Index i = 0; i < xi.size(); ++i)
        xi(i) = rng.normal();
    const VectorXd z = f.apply_sqrt(xi);
    return {ps, ct->permute(z, PermDirection::i2e)};
}

PointSet random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double side)
{
    if (dim == 0)
        throw Error("random_points: dimension must be positive");
    Rng rng(seed);
    std::vector<double> c(n * dim);
    for (auto& x : c)
        x = side * rng.uniform();
    return {dim, std::move(c)};
}

Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed, double min_sep)
{
    ds.validate();
    const auto total = ds.size();
    if (n > total)
        throw Error("subsample: requested " + std::to_string(n) + " of " + std::to_string(total) + " records");
    if (min_sep < 0.0)
        throw Error("subsample: min_sep must be nonnegative");

    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i)
        order[i] = i;
    Rng rng(seed);
    // Fisher-Yates
    for (std::size_t i = total; i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    for (std::size_t cand : order) {
        if (chosen.size() == n)
            break;
        if (min_sep > 0.0) {
            const auto pc = ds.points.point(cand);
            const bool close = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t j) {
                return distance(pc, ds.points.point(j)) < min_sep;
            });
            if (close)
                continue;
        }
        chosen.push_back(cand);
    }
    if (chosen.size() < n)
        throw Error("subsample: only " + std::to_string(chosen.size()) + " of " + std::to_string(n) +
                    " points satisfy the minimum separation");

    Dataset out;
    out.points = PointSet(ds.points.dim(), {});
    out.z.resize(static_cast<Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        out.points.push_back(ds.points.point(chosen[k]));
        out.z(static_cast<Index>(k)) = ds.z(static_cast<Index>(chosen[k]));
    }
    return out;
}

std::vector<ReplicateRecord> replicate_study(const Dataset& master, const std::vector<std::size_t>& n_list,
                                             std::size_t replicates, const FitConfig& cfg, std::uint64_t seed,
                                             double min_sep)
{
    cfg.validate();
    master.validate();
    for (auto n : n_list)
        if (n == 0 || n > master.size())
            throw Error("replicates: sample size " + std::to_string(n) + " outside [1, " +
                        std::to_string(master.size()) + "]");

    std::vector<ReplicateRecord> out;
    for (auto n : n_list)
        for (std::size_t r = 0; r < replicates; ++r)
            out.push_back({n, r, derive_seed(seed, n, r), std::nullopt, {}});

    parallel_for(out.size(), [&](std::size_t i) {
        auto& rec = out[i];
        try {
            rec.fit = fit_parameters(subsample(master, rec.n, rec.seed, min_sep), cfg);
        }
        catch (const Error& e) {
            rec.error = e.what();
        }
    });
    return out;
}

Parameter parse_parameter(const std::string& name)
{
    if (name == "nu")
        return Parameter::nu;
    if (name == "ell")
        return Parameter::ell;
    if (name == "sigma2")
        return Parameter::sigma2;
    if (name == "nugget")
        return Parameter::nugget;
    throw Error("unknown parameter '" + name + "' (expected nu, ell, sigma2 or nugget)");
}

std::string parameter_name(Parameter p)
{
    switch (p) {
    case Parameter::nu:
        return "nu";
    case Parameter::ell:
        return "ell";
    case Parameter::sigma2:
        return "sigma2";
    case Parameter::nugget:
        return "nugget";
    }
    return {};
}

double& parameter_ref(MaternParams& p, Parameter which)
{
    switch (which) {
    case Parameter::nu:
        return p.nu;
    case Parameter::ell:
        return p.ell;
    case Parameter::sigma2:
        return p.sigma2;
    case Parameter::nugget:
        return p.nugget;
    }
    throw Error("unknown parameter");
}

std::vector<ProfileRow> profile_likelihood(const Dataset& ds, Parameter vary, const std::vector<double>& grid,
                                           const MaternParams& fixed, const HOptions& opt)
{
    if (grid.empty())
        throw Error("profile: empty grid");
    for (double g : grid)
        if (!(g > 0.0))
            throw Error("profile: grid values must be positive");

    const HLikelihood hl(ds, opt);
    std::vector<ProfileRow> rows(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        rows[i].value = grid[i];
        MaternParams p = fixed;
        parameter_ref(p, vary) = grid[i];
        try {
            rows[i].result = hl.evaluate(p);
        }
        catch (const Error& e) {
            rows[i].error = e.what();
        }
    }
    return rows;
}

} // namespace hcov
