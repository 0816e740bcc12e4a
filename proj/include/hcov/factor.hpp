#pragma once
//
// Block-recursive LDL^T / Cholesky factorization of symmetric H-matrices and
// the triangular solves built on it. Vectors are in internal ordering.
//

#include <cstddef>

#include <Eigen/Dense>

#include "hcov/hmatrix.hpp"

namespace hcov {

enum class FactorForm { ldl, cholesky };

enum class Side { lower, upper };

/// C ~ L D L^T (ldl: unit lower L) or C ~ L L^T (cholesky: D is all ones).
/// L keeps the block structure of C; blocks above the diagonal are zero.
class HFactor
{
public:
    HFactor() = default;
    HFactor(HMatrix l, Eigen::VectorXd d, FactorForm form);

    FactorForm form() const noexcept { return form_; }
    const HMatrix& lower() const noexcept { return l_; }
    //! LDL pivots, or the diagonal of L for the Cholesky form
    const Eigen::VectorXd& pivots() const noexcept { return d_; }
    std::size_t size() const noexcept { return l_.size(); }

    //! x <- L^{-1} x (Side::lower) or x <- L^{-T} x (Side::upper), in place
    void solve_in_place(Eigen::Ref<Eigen::MatrixXd> x, Side side) const;
    //! x <- C~^{-1} x
    void solve_full_in_place(Eigen::Ref<Eigen::MatrixXd> x) const;
    //! y = L D^{1/2} x
    Eigen::VectorXd apply_sqrt(const Eigen::VectorXd& x) const;

    double log_determinant() const;
    double min_pivot() const;

private:
    HMatrix l_;
    Eigen::VectorXd d_;
    FactorForm form_ = FactorForm::ldl;
};

/// Factorizes a symmetric H-matrix; Schur complement updates are truncated
/// under \a ctl. Dense leaves are factored entry by entry; a pivot <= 0
/// raises NotPositiveDefinite with the internal index of the pivot.
HFactor factorize(const HMatrix& h, const TruncationControl& ctl, FactorForm form = FactorForm::ldl);

Eigen::VectorXd solve_triangular(const HFactor& f, const Eigen::VectorXd& rhs, Side side);

//! C~^{-1} rhs through both triangular solves and the diagonal
Eigen::VectorXd solve_full(const HFactor& f, const Eigen::VectorXd& rhs);

//! log det C~ (not halved)
double log_determinant(const HFactor& f);

/// Z^T C~^{-1} Z with the triangular solves: sum_i (L^{-1} Z)_i^2 / D_i.
double quadratic_form(const HFactor& f, const Eigen::VectorXd& z);

} // namespace hcov
