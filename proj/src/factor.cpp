#include "hcov/factor.hpp"

#include <cmath>
#include <limits>

#include "hcov/error.hpp"

namespace hcov {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Index idx(std::size_t i)
{
    return static_cast<Index>(i);
}

Index offset(IndexRange outer, IndexRange inner)
{
    return idx(inner.begin - outer.begin);
}

// Entry-wise factorization of a dense diagonal block; only the lower
// triangle of a is read. The strict upper triangle is zeroed.
void dense_factor(MatrixXd& a, std::size_t global, VectorXd& d, FactorForm form)
{
    const Index n = a.rows();
    for (Index j = 0; j < n; ++j) {
        double dj = a(j, j);
        if (form == FactorForm::ldl) {
            for (Index k = 0; k < j; ++k)
                dj -= a(j, k) * a(j, k) * d(idx(global) + k);
        }
        else {
            for (Index k = 0; k < j; ++k)
                dj -= a(j, k) * a(j, k);
        }
        if (!(dj > 0.0) || !std::isfinite(dj))
            throw NotPositiveDefinite(global + static_cast<std::size_t>(j));

        const double piv = form == FactorForm::ldl ? dj : std::sqrt(dj);
        for (Index i = j + 1; i < n; ++i) {
            double s = a(i, j);
            if (form == FactorForm::ldl) {
                for (Index k = 0; k < j; ++k)
                    s -= a(i, k) * a(j, k) * d(idx(global) + k);
            }
            else {
                for (Index k = 0; k < j; ++k)
                    s -= a(i, k) * a(j, k);
            }
            a(i, j) = s / piv;
        }
        d(idx(global) + j) = piv;
        a(j, j) = form == FactorForm::ldl ? 1.0 : piv;
    }
    a.triangularView<Eigen::StrictlyUpper>().setZero();
}

// x <- L^{-1} x for a diagonal block of L
void forward(const HBlock& l, Eigen::Ref<MatrixXd> x)
{
    if (l.kind == HBlock::Kind::dense) {
        l.dense.triangularView<Eigen::Lower>().solveInPlace(x);
        return;
    }
    if (l.kind != HBlock::Kind::hierarchical)
        throw Error("triangular solve: low-rank diagonal block");
    for (int c = 0; c < l.nrow_sons; ++c) {
        const auto& lcc = l.son(c, c);
        auto xc = x.middleRows(offset(l.rows, lcc.rows), idx(lcc.nrows()));
        for (int k = 0; k < c; ++k) {
            const auto& lck = l.son(c, k);
            detail::apply_block(lck, false, -1.0, x.middleRows(offset(l.cols, lck.cols), idx(lck.ncols())), xc);
        }
        forward(lcc, xc);
    }
}

// x <- L^{-T} x for a diagonal block of L
void backward(const HBlock& l, Eigen::Ref<MatrixXd> x)
{
    if (l.kind == HBlock::Kind::dense) {
        l.dense.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
        return;
    }
    if (l.kind != HBlock::Kind::hierarchical)
        throw Error("triangular solve: low-rank diagonal block");
    for (int c = l.nrow_sons - 1; c >= 0; --c) {
        const auto& lcc = l.son(c, c);
        auto xc = x.middleRows(offset(l.cols, lcc.cols), idx(lcc.ncols()));
        for (int k = c + 1; k < l.nrow_sons; ++k) {
            const auto& lkc = l.son(k, c);
            detail::apply_block(lkc, true, -1.0, x.middleRows(offset(l.rows, lkc.rows), idx(lkc.nrows())), xc);
        }
        backward(lcc, xc);
    }
}

// b <- b L^{-T} with L a diagonal block and b in the same block column
void right_solve(const HBlock& l, HBlock& b, const TruncationControl& ctl)
{
    switch (b.kind) {
    case HBlock::Kind::lowrank:
        if (b.lowrank.rank() > 0)
            forward(l, b.lowrank.B);
        return;
    case HBlock::Kind::dense: {
        MatrixXd t = b.dense.transpose();
        forward(l, t);
        b.dense = t.transpose();
        return;
    }
    case HBlock::Kind::hierarchical:
        break;
    }

    if (l.is_leaf() || b.ncol_sons == 1) {
        // only the rows of b are refined
        for (auto& s : b.sons)
            right_solve(l, s, ctl);
        return;
    }
    if (b.ncol_sons != l.ncol_sons)
        throw Error("triangular solve: block partitions differ");
    for (int r = 0; r < b.nrow_sons; ++r)
        for (int c = 0; c < b.ncol_sons; ++c) {
            for (int k = 0; k < c; ++k)
                detail::multiply(-1.0, b.son(r, k), {&l.son(c, k), true}, b.son(r, c), ctl);
            detail::flush(b.son(r, c), ctl);
            right_solve(l.son(c, c), b.son(r, c), ctl);
        }
}

void factor_block(HBlock& a, VectorXd& d, FactorForm form, const TruncationControl& ctl)
{
    if (a.kind == HBlock::Kind::dense) {
        dense_factor(a.dense, a.rows.begin, d, form);
        return;
    }
    if (a.kind != HBlock::Kind::hierarchical || a.nrow_sons != a.ncol_sons)
        throw Error("factorize: diagonal block is not square or is low-rank");

    const int m = a.nrow_sons;
    for (int i = 0; i < m; ++i) {
        factor_block(a.son(i, i), d, form, ctl);

        // block column below the diagonal: W = A L^{-T}, then L = W D^{-1}
        std::vector<HBlock> w;
        const VectorXd inv = form == FactorForm::ldl ? VectorXd(d.cwiseInverse()) : VectorXd();
        for (int j = i + 1; j < m; ++j) {
            detail::flush(a.son(j, i), ctl);
            right_solve(a.son(i, i), a.son(j, i), ctl);
            if (form == FactorForm::ldl) {
                w.push_back(a.son(j, i));
                detail::scale_columns(a.son(j, i), inv);
            }
        }

        // trailing Schur complement, lower part only
        for (int j = i + 1; j < m; ++j)
            for (int k = i + 1; k <= j; ++k) {
                const HBlock& right = form == FactorForm::ldl ? w[static_cast<std::size_t>(k - i - 1)] : a.son(k, i);
                detail::multiply(-1.0, a.son(j, i), {&right, true}, a.son(j, k), ctl, j == k);
            }

        for (int j = i + 1; j < m; ++j)
            detail::set_zero(a.son(i, j));
    }
}

} // namespace

HFactor::HFactor(HMatrix l, VectorXd d, FactorForm form)
    : l_(std::move(l))
    , d_(std::move(d))
    , form_(form)
{
    if (d_.size() != idx(l_.size()))
        throw Error("HFactor: diagonal length does not match the factor");
}

void HFactor::solve_in_place(Eigen::Ref<MatrixXd> x, Side side) const
{
    if (x.rows() != idx(size()))
        throw Error("triangular solve: length mismatch");
    if (side == Side::lower)
        forward(l_.root(), x);
    else
        backward(l_.root(), x);
}

void HFactor::solve_full_in_place(Eigen::Ref<MatrixXd> x) const
{
    solve_in_place(x, Side::lower);
    if (form_ == FactorForm::ldl)
        x = d_.cwiseInverse().asDiagonal() * x;
    solve_in_place(x, Side::upper);
}

VectorXd HFactor::apply_sqrt(const VectorXd& x) const
{
    if (x.size() != idx(size()))
        throw Error("apply_sqrt: length mismatch");
    VectorXd y = VectorXd::Zero(x.size());
    if (form_ == FactorForm::ldl)
        l_.apply(1.0, d_.cwiseSqrt().cwiseProduct(x), y);
    else
        l_.apply(1.0, x, y);
    return y;
}

double HFactor::log_determinant() const
{
    if (min_pivot() <= 0.0)
        throw Error("log-determinant: nonpositive pivot");
    const double s = d_.array().log().sum();
    return form_ == FactorForm::ldl ? s : 2.0 * s;
}

double HFactor::min_pivot() const
{
    return d_.size() == 0 ? std::numeric_limits<double>::infinity() : d_.minCoeff();
}

HFactor factorize(const HMatrix& h, const TruncationControl& ctl, FactorForm form)
{
    ctl.validate();
    if (h.root().rows != h.root().cols)
        throw Error("factorize: matrix is not square");
    HMatrix l = h;
    VectorXd d = VectorXd::Zero(idx(h.size()));
    factor_block(l.root(), d, form, ctl);
    detail::flush(l.root(), ctl);
    l.set_symmetric(false);
    return {std::move(l), std::move(d), form};
}

VectorXd solve_triangular(const HFactor& f, const VectorXd& rhs, Side side)
{
    VectorXd x = rhs;
    f.solve_in_place(x, side);
    return x;
}

VectorXd solve_full(const HFactor& f, const VectorXd& rhs)
{
    VectorXd x = rhs;
    f.solve_full_in_place(x);
    return x;
}

double log_determinant(const HFactor& f)
{
    return f.log_determinant();
}

double quadratic_form(const HFactor& f, const VectorXd& z)
{
    VectorXd v = solve_triangular(f, z, Side::lower);
    if (f.form() == FactorForm::ldl)
        return v.cwiseAbs2().cwiseQuotient(f.pivots()).sum();
    return v.squaredNorm();
}

} // namespace hcov
