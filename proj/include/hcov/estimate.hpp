#pragma once
//
// Parameter estimation: derivative-free optimizers, simulation of Matérn
// fields, subsampling and replicate studies.
//

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcov/likelihood.hpp"

namespace hcov {

//------------------------------------------------------------------------------
// random numbers
//------------------------------------------------------------------------------

/// std::mt19937_64 with Box-Muller normals and rejection-sampled bounded
/// integers, so that streams do not depend on the standard library's
/// distribution implementations.
class Rng
{
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next() { return gen_(); }
    //! uniform in [0, 1) with 53 random bits
    double uniform();
    double normal();
    //! uniform integer in [0, n), n > 0
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 gen_;
    std::optional<double> spare_;
};

//! splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x);

//! independent stream seed for (master, a, b)
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

//------------------------------------------------------------------------------
// optimizers
//------------------------------------------------------------------------------

using Objective = std::function<double(const std::vector<double>&)>;

struct SimplexOptions
{
    std::vector<double> steps;
    double tol = 1e-5;
    int max_iter = 200;
};

struct SimplexIteration
{
    int index = 0;
    std::vector<double> x; // best vertex
    double value = 0.0;
    double size = 0.0;
};

struct SimplexResult
{
    std::vector<double> x;
    double value = 0.0;
    double size = 0.0;
    bool converged = false;
    int evaluations = 0;
    std::vector<SimplexIteration> trace;
};

/// Nelder-Mead with reflection 1, expansion 2, contraction 1/2 and shrink
/// 1/2. The simplex is x0 plus one step per coordinate; its size is the root
/// mean square distance of the vertices from their centroid. Non-finite
/// objective values mark infeasible points and are never accepted.
SimplexResult nelder_mead_minimize(const Objective& f, const std::vector<double>& x0, const SimplexOptions& opt);

struct BrentResult
{
    double x = 0.0;
    double value = 0.0;
    int iterations = 0;
};

/// Brent's method (golden section with parabolic steps) on [a, b].
/// Terminates when the bracket around the best point is within 2 tol.
BrentResult brent_minimize_1d(const std::function<double(double)>& g, double a, double b, double tol = 1e-8,
                              int max_iter = 500);

//------------------------------------------------------------------------------
// fitting
//------------------------------------------------------------------------------

struct FitConfig
{
    MaternParams init;                          // starting (nu, ell, sigma2); nugget is fixed
    std::vector<double> steps{0.02, 0.04, 0.01}; // nu, ell, sigma2
    double tol = 1e-5;
    int max_iter = 200;
    HOptions h;
    //! exact dense likelihood instead of the H-matrix one
    bool dense_objective = false;

    void validate() const;
};

struct FitResult
{
    MaternParams params;
    double negloglik = 0.0;
    bool converged = false;
    int evaluations = 0;
    int rejected = 0;                 // evaluations that failed to factorize
    std::vector<SimplexIteration> trace; // x = (nu, ell, sigma2), value = -loglik
};

//! optimizer coordinates are (nu, ell, sigma2)
FitResult fit_parameters(const Dataset& ds, const FitConfig& cfg);

//------------------------------------------------------------------------------
// simulation and sampling
//------------------------------------------------------------------------------

struct SimulationOptions
{
    HOptions h{TruncationControl::adaptive(1e-7), 32, 2.0, FactorForm::ldl, false};
};

/// Z = L D^{1/2} xi for the factor of C~(p), xi standard normal drawn in
/// internal order from Rng(seed); returned in external order.
Dataset simulate_field(const PointSet& ps, const MaternParams& p, std::uint64_t seed,
                       const SimulationOptions& opt = {});

//! n points drawn uniformly from [0, side]^dim
PointSet random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double side = 1.0);

/// n records sampled uniformly without replacement. With min_sep > 0 a
/// candidate closer than min_sep to an already chosen point is skipped.
Dataset subsample(const Dataset& ds, std::size_t n, std::uint64_t seed, double min_sep = 0.0);

struct ReplicateRecord
{
    std::size_t n = 0;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    std::optional<FitResult> fit; // empty when the fit failed
    std::string error;
};

/// For every n and replicate r: subsample the master dataset with
/// derive_seed(seed, n, r), fit, record. Failed fits are kept with a reason.
std::vector<ReplicateRecord> replicate_study(const Dataset& master, const std::vector<std::size_t>& n_list,
                                             std::size_t replicates, const FitConfig& cfg, std::uint64_t seed,
                                             double min_sep = 0.0);

enum class Parameter { nu, ell, sigma2, nugget };

Parameter parse_parameter(const std::string& name);
std::string parameter_name(Parameter p);
double& parameter_ref(MaternParams& p, Parameter which);

struct ProfileRow
{
    double value = 0.0;
    std::optional<LoglikResult> result; // empty when rejected
    std::string error;
};

/// Evaluates the H-likelihood with one parameter varied over \a grid.
std::vector<ProfileRow> profile_likelihood(const Dataset& ds, Parameter vary, const std::vector<double>& grid,
                                           const MaternParams& fixed, const HOptions& opt);

} // namespace hcov
