#pragma once
//
// Gaussian log-likelihood of a zero-mean Matérn field, exact (dense
// Cholesky) and through the H-matrix factorization.
//

#include <cstddef>
#include <memory>
#include <optional>

#include <Eigen/Dense>

#include "hcov/error.hpp"
#include "hcov/factor.hpp"
#include "hcov/geometry.hpp"
#include "hcov/hmatrix.hpp"
#include "hcov/kernel.hpp"

namespace hcov {

struct Dataset
{
    PointSet points;
    Eigen::VectorXd z; // external order

    std::size_t size() const noexcept { return points.size(); }
    //! throws Error on length mismatch or non-finite values
    void validate() const;
};

struct LoglikResult
{
    double loglik = 0.0;
    double logdet = 0.0;   // log det C (not halved)
    double quadform = 0.0; // Z^T C^{-1} Z
    double min_pivot = 0.0;
    std::size_t max_rank = 0;
    double seconds = 0.0;
    std::optional<double> quadform_cg;

    double negloglik() const noexcept { return -loglik; }
};

//! -(n/2) log(2 pi) - logdet/2 - quadform/2
double assemble_loglik(std::size_t n, double logdet, double quadform);

/// Factorization failure at a given parameter vector; the optimizer treats
/// it as a rejected point.
class RejectedPoint : public Error
{
public:
    RejectedPoint(const MaternParams& p, const NotPositiveDefinite& cause);

    const MaternParams& params() const noexcept { return params_; }
    std::size_t pivot() const noexcept { return pivot_; }

private:
    MaternParams params_;
    std::size_t pivot_;
};

/// Dense Cholesky of C(theta) + nugget I; pivots of a failed factorization
/// are reported in external ordering.
LoglikResult loglik_dense(const Dataset& ds, const MaternParams& p, std::size_t guard = default_dense_guard);

struct HOptions
{
    TruncationControl ctl = TruncationControl::adaptive(1e-5);
    std::size_t n_min = 32;
    double eta = 2.0;
    FactorForm form = FactorForm::ldl;
    //! also evaluate the quadratic form by preconditioned CG
    bool with_cg = false;
};

/// Holds the cluster trees and the permuted observations of one dataset so
/// that the likelihood can be evaluated repeatedly at different parameters.
class HLikelihood
{
public:
    HLikelihood(const Dataset& ds, const HOptions& opt = {});

    LoglikResult evaluate(const MaternParams& p) const;

    std::size_t size() const noexcept { return z_.size(); }
    const HOptions& options() const noexcept { return opt_; }
    const std::shared_ptr<const ClusterTree>& cluster_tree() const noexcept { return ct_; }
    const BlockClusterTree& block_tree() const noexcept { return bct_; }
    //! observations in internal order
    const Eigen::VectorXd& z_internal() const noexcept { return z_; }

private:
    HOptions opt_;
    std::shared_ptr<const ClusterTree> ct_;
    BlockClusterTree bct_;
    Eigen::VectorXd z_;
};

//! one-shot convenience wrapper around HLikelihood
LoglikResult loglik_h(const Dataset& ds, const MaternParams& p, const HOptions& opt = {});

struct CgResult
{
    double value = 0.0; // Z^T u
    int iterations = 0;
    double residual = 0.0; // |Z - C~ u|_2
};

/// Solves C~ u = Z by conjugate gradients preconditioned with the factor and
/// returns Z^T u. Stops when |Z - C~ u|_2 <= tol; throws Error carrying the
/// final residual after max_iter iterations.
CgResult quadform_cg(const HMatrix& c, const HFactor& f, const Eigen::VectorXd& z, int max_iter = 150,
                     double tol = 1e-6);

} // namespace hcov
