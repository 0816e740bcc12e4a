#pragma once
//
// Matérn covariance family and the coefficient function used to assemble
// covariance matrices in H-matrix (internal) ordering.
//

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "hcov/geometry.hpp"

namespace hcov {

struct MaternParams
{
    double sigma2 = 1.0; // variance
    double ell = 1.0;    // range
    double nu = 0.5;     // smoothness
    double nugget = 1e-4;

    bool valid() const noexcept;
    //! throws Error unless valid()
    void validate() const;
};

/// Modified Bessel function of the second kind K_nu(x), x > 0.
///
/// The order is reduced to mu = nu - round(nu) in [-1/2, 1/2]. K_mu and
/// K_{mu+1} come from Temme's series for x < 2 and from Steed's continued
/// fraction otherwise; upward recurrence in the order yields K_nu.
double bessel_k(double nu, double x);

//! K_nu for one fixed order; caches the order-only constants of bessel_k
class BesselK
{
public:
    explicit BesselK(double nu);

    double operator()(double x) const;
    double order() const noexcept { return nu_; }

private:
    double nu_;
    int steps_;   // upward recurrence steps
    double mu_;   // reduced order
    double gam1_, gam2_, gampl_, gammi_;
    double fact_; // pi mu / sin(pi mu)
};

/// Distance-only Matérn covariance (no nugget):
///   C(h) = sigma2 / (2^(nu-1) Gamma(nu)) (h/ell)^nu K_nu(h/ell),  C(0) = sigma2.
/// Orders 1/2, 3/2, 5/2 use the exponential-times-polynomial closed forms in
/// the same h/ell scaling.
///
/// With \a tabulate set, a general order is evaluated from piecewise
/// Chebyshev interpolants of e^x x^nu K_nu(x) on quarter-octave pieces of
/// x = h/ell (relative error near 1e-14). Setting up the table costs about
/// 1600 Bessel evaluations, so it pays off for matrix assembly only.
class MaternCovariance
{
public:
    explicit MaternCovariance(const MaternParams& p, bool tabulate = false);

    double operator()(double h) const;
    const MaternParams& params() const noexcept { return p_; }

private:
    enum class Form { half, three_halves, five_halves, general };

    double direct(double x) const;

    MaternParams p_;
    Form form_;
    BesselK bessel_;
    double scale_; // sigma2 / (2^(nu-1) Gamma(nu))
    std::shared_ptr<const std::vector<double>> table_;
};

double matern_cov(double h, const MaternParams& p);

//! Matérn with the closed form's argument taken through the general Bessel
//! expression; used to cross-check the closed forms.
double matern_cov_bessel(double h, const MaternParams& p);

/// Coefficient function (i, j) -> C_ij in internal ordering, nugget on i == j.
class KernelEvaluator
{
public:
    KernelEvaluator(const MaternParams& p, std::shared_ptr<const ClusterTree> ct);

    double entry(std::size_t i, std::size_t j) const;
    //! unchecked variant for assembly loops
    double operator()(std::size_t i, std::size_t j) const;

    std::size_t size() const noexcept { return n_; }
    const MaternParams& params() const noexcept { return cov_.params(); }
    const ClusterTree& cluster_tree() const noexcept { return *ct_; }
    const std::shared_ptr<const ClusterTree>& cluster_tree_ptr() const noexcept { return ct_; }

    //! fills out(r, c) = C(rows.begin + r, cols.begin + c)
    void fill(IndexRange rows, IndexRange cols, Eigen::Ref<Eigen::MatrixXd> out) const;

private:
    MaternCovariance cov_;
    std::shared_ptr<const ClusterTree> ct_;
    const double* pts_ = nullptr; // internal-order coordinates
    std::size_t dim_ = 0, n_ = 0;
};

inline constexpr std::size_t default_dense_guard = 20000;

/// Dense covariance in external ordering with the nugget on the diagonal.
Eigen::MatrixXd dense_covariance(const PointSet& ps, const MaternParams& p,
                                 std::size_t guard = default_dense_guard);

//! P M P^T: reorders an externally ordered matrix into internal order
Eigen::MatrixXd to_internal_order(const Eigen::MatrixXd& m, const ClusterTree& ct);

} // namespace hcov
