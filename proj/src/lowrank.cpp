#include "hcov/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hcov/error.hpp"

namespace hcov {

TruncationControl TruncationControl::fixed(std::size_t k, std::size_t k_max)
{
    TruncationControl c;
    c.mode = Mode::fixed_rank;
    c.rank = k;
    c.k_max = std::max(k, k_max);
    return c;
}

TruncationControl TruncationControl::adaptive(double eps, std::size_t k_max)
{
    TruncationControl c;
    c.mode = Mode::adaptive;
    c.eps = eps;
    c.k_max = k_max;
    return c;
}

TruncationControl TruncationControl::full()
{
    return adaptive(1e-14, std::numeric_limits<std::size_t>::max());
}

bool TruncationControl::valid() const noexcept
{
    if (k_max < 1)
        return false;
    return mode == Mode::fixed_rank || (eps > 0.0 && std::isfinite(eps));
}

void TruncationControl::validate() const
{
    if (!valid())
        throw Error("invalid truncation control (need eps > 0 or a fixed rank, and k_max >= 1)");
}

std::size_t TruncationControl::keep(const Eigen::VectorXd& sv) const
{
    const auto n = static_cast<std::size_t>(sv.size());
    if (n == 0 || sv(0) <= 0.0)
        return 0;
    std::size_t r = 0;
    if (mode == Mode::fixed_rank) {
        while (r < n && r < rank && sv(static_cast<Eigen::Index>(r)) > 0.0)
            ++r;
    }
    else {
        const double cut = eps * sv(0);
        while (r < n && sv(static_cast<Eigen::Index>(r)) > cut)
            ++r;
    }
    return std::min(r, k_max);
}

std::size_t TruncationControl::max_rank(std::size_t p, std::size_t q) const
{
    const auto full_rank = std::min(p, q);
    const auto cap = mode == Mode::fixed_rank ? std::min(rank, k_max) : k_max;
    return std::min(full_rank, cap);
}

LowRankBlock::LowRankBlock(Eigen::MatrixXd a, Eigen::MatrixXd b)
    : A(std::move(a))
    , B(std::move(b))
{
    if (A.cols() != B.cols())
        throw Error("low-rank block: factor column counts differ");
}

LowRankBlock aca_crosses(const EntryFn& entry, std::size_t p, std::size_t q, const TruncationControl& ctl)
{
    ctl.validate();
    if (p == 0 || q == 0)
        throw Error("aca: empty block");

    const auto kmax = ctl.max_rank(p, q);
    const auto P = static_cast<Eigen::Index>(p);
    const auto Q = static_cast<Eigen::Index>(q);

    Eigen::MatrixXd U(P, static_cast<Eigen::Index>(kmax));
    Eigen::MatrixXd V(Q, static_cast<Eigen::Index>(kmax));
    Eigen::VectorXd row(Q), col(P);
    std::vector<bool> used(p, false);

    Eigen::Index k = 0;
    Eigen::Index pivot_row = 0;
    double first_norm = 0.0;
    double first_pivot = 0.0;

    while (static_cast<std::size_t>(k) < kmax) {
        // residual row
        for (Eigen::Index j = 0; j < Q; ++j)
            row(j) = entry(static_cast<std::size_t>(pivot_row), static_cast<std::size_t>(j));
        if (k > 0)
            row.noalias() -= V.leftCols(k) * U.row(pivot_row).head(k).transpose();
        used[static_cast<std::size_t>(pivot_row)] = true;

        Eigen::Index pivot_col = 0;
        const double pivot_abs = row.cwiseAbs().maxCoeff(&pivot_col);

        // a residual row at rounding level means the block is already captured
        if (k > 0 && pivot_abs <= 64.0 * std::numeric_limits<double>::epsilon() * first_pivot)
            break;
        if (pivot_abs == 0.0) {
            // exact zero row: move on to the next unused row
            auto it = std::find(used.begin(), used.end(), false);
            if (it == used.end())
                break;
            pivot_row = static_cast<Eigen::Index>(it - used.begin());
            continue;
        }

        // residual column, scaled by the inverse pivot
        for (Eigen::Index i = 0; i < P; ++i)
            col(i) = entry(static_cast<std::size_t>(i), static_cast<std::size_t>(pivot_col));
        if (k > 0)
            col.noalias() -= U.leftCols(k) * V.row(pivot_col).head(k).transpose();
        col /= row(pivot_col);

        U.col(k) = col;
        V.col(k) = row;
        ++k;

        const double norm = col.norm() * row.norm();
        if (k == 1) {
            first_norm = norm;
            first_pivot = pivot_abs;
        }
        if (ctl.mode == TruncationControl::Mode::adaptive && norm <= ctl.eps * first_norm)
            break;

        // next row: largest residual-column entry among unused rows
        Eigen::Index next = -1;
        double best = -1.0;
        for (Eigen::Index i = 0; i < P; ++i) {
            if (used[static_cast<std::size_t>(i)])
                continue;
            if (std::abs(col(i)) > best) {
                best = std::abs(col(i));
                next = i;
            }
        }
        if (next < 0)
            break;
        pivot_row = next;
    }

    return {U.leftCols(k), V.leftCols(k)};
}

LowRankBlock aca_approximate(const EntryFn& entry, std::size_t p, std::size_t q, const TruncationControl& ctl)
{
    auto lr = aca_crosses(entry, p, q, ctl);
    if (lr.rank() == 0)
        return lr;
    return recompress_svd(lr, ctl);
}

namespace {

// below this accuracy the core is decomposed with a one-sided Jacobi SVD
constexpr double gram_eps_limit = 1e-7;

// thin QR: m = Q R with Q having min(rows, cols) orthonormal columns
void thin_qr(const Eigen::MatrixXd& m, Eigen::MatrixXd& q, Eigen::MatrixXd& r)
{
    const auto k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), k);
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

} // namespace

LowRankBlock recompress_svd(const LowRankBlock& lr, const TruncationControl& ctl)
{
    ctl.validate();
    if (lr.rank() == 0)
        return lr;

    LowRankBlock out;
    if (ctl.mode == TruncationControl::Mode::adaptive && ctl.eps >= gram_eps_limit) {
        // Loose accuracy: work with Gram matrices instead of Householder QR.
        // With B^T B = V L V^T and R = L^{1/2} V^T, the squared singular
        // values of A B^T are the eigenvalues of R (A^T A) R^T. Squaring
        // resolves them to ~1e-8 relative, below any cut taken here.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(lr.B.transpose() * lr.B);
        const auto& lam = eb.eigenvalues();
        const Eigen::Index k = lam.size();
        Eigen::Index kb = 0;
        while (kb < k && lam(k - 1) > 0.0 && lam(k - 1 - kb) > 1e-14 * lam(k - 1))
            ++kb;
        if (kb == 0)
            return LowRankBlock(static_cast<std::size_t>(lr.A.rows()), static_cast<std::size_t>(lr.B.rows()));
        const Eigen::MatrixXd vb = eb.eigenvectors().rightCols(kb);
        const Eigen::VectorXd sb = lam.tail(kb).cwiseSqrt();
        const Eigen::MatrixXd rbt = vb * sb.asDiagonal(); // R^T

        const Eigen::MatrixXd ga = lr.A.transpose() * lr.A;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rbt.transpose() * ga * rbt);
        Eigen::VectorXd sv(kb);
        for (Eigen::Index i = 0; i < kb; ++i)
            sv(i) = std::sqrt(std::max(es.eigenvalues()(kb - 1 - i), 0.0));
        const auto r = static_cast<Eigen::Index>(ctl.keep(sv));
        const Eigen::MatrixXd w = es.eigenvectors().rightCols(r).rowwise().reverse();
        out.A = lr.A * (rbt * w);
        out.B = lr.B * (vb * (sb.cwiseInverse().asDiagonal() * w));
        return out;
    }

    Eigen::MatrixXd qa, ra, qb, rb;
    thin_qr(lr.A, qa, ra);
    thin_qr(lr.B, qb, rb);
    const Eigen::MatrixXd core = ra * rb.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const auto r = static_cast<Eigen::Index>(ctl.keep(sv));
    out.A = qa * (svd.matrixU().leftCols(r) * sv.head(r).asDiagonal());
    out.B = qb * svd.matrixV().leftCols(r);
    return out;
}

double lowrank_norm2(const LowRankBlock& lr, int iterations)
{
    const auto k = lr.rank();
    if (k == 0)
        return 0.0;
    if (k == 1)
        return lr.A.col(0).norm() * lr.B.col(0).norm();

    // symmetric power iteration on (A B^T)^T (A B^T) = B (A^T A) B^T
    const Eigen::MatrixXd ga = lr.A.transpose() * lr.A;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(lr.B.rows());
    // a deterministic, non-degenerate start vector
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) += 0.5 * std::sin(1.0 + static_cast<double>(i));
    v.normalize();

    double lambda = 0.0;
    for (int it = 0; it < std::max(iterations, 20); ++it) {
        Eigen::VectorXd w = lr.B * (ga * (lr.B.transpose() * v));
        const double next = v.dot(w);
        const double wn = w.norm();
        if (wn == 0.0)
            return 0.0;
        v = w / wn;
        if (it >= 20 && std::abs(next - lambda) <= 1e-14 * std::abs(next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

LowRankBlock dense_to_lowrank(const Eigen::MatrixXd& m, const TruncationControl& ctl)
{
    ctl.validate();
    if (m.size() == 0)
        return LowRankBlock(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const auto r = static_cast<Eigen::Index>(ctl.keep(sv));
    LowRankBlock out;
    out.A = svd.matrixU().leftCols(r) * sv.head(r).asDiagonal();
    out.B = svd.matrixV().leftCols(r);
    return out;
}

} // namespace hcov
