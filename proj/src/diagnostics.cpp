#include "hcov/diagnostics.hpp"

#include <cmath>
#include <random>

#include "hcov/error.hpp"

namespace hcov {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double power_norm2(std::size_t n, const LinearMap& apply, const LinearMap& apply_t, const PowerIterationOptions& opt)
{
    if (n == 0)
        return 0.0;
    std::mt19937_64 gen(opt.seed);
    std::normal_distribution<double> normal;
    VectorXd v(static_cast<Index>(n));
    for (Index i = 0; i < v.size(); ++i)
        v(i) = normal(gen);
    v.normalize();

    double sigma = 0.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        const VectorXd w = apply(v);
        const double next = w.norm();
        if (next == 0.0)
            return 0.0;
        VectorXd u = apply_t(w);
        const double un = u.norm();
        if (un == 0.0)
            return next;
        v = u / un;
        const bool done = it > 0 && std::abs(next - sigma) <= opt.rel_tol * next;
        sigma = next;
        if (done)
            break;
    }
    return sigma;
}

double power_norm2(const MatrixXd& m, const PowerIterationOptions& opt)
{
    if (m.rows() != m.cols())
        throw Error("power_norm2: matrix is not square");
    return power_norm2(
        static_cast<std::size_t>(m.rows()), [&](const VectorXd& x) -> VectorXd { return m * x; },
        [&](const VectorXd& x) -> VectorXd { return m.transpose() * x; }, opt);
}

namespace {

void frobenius_dense(const HBlock& b, const MatrixXd& oracle, double& acc)
{
    if (!b.is_leaf()) {
        for (const auto& s : b.sons)
            frobenius_dense(s, oracle, acc);
        return;
    }
    const auto blk = oracle.block(static_cast<Index>(b.rows.begin), static_cast<Index>(b.cols.begin),
                                  static_cast<Index>(b.nrows()), static_cast<Index>(b.ncols()));
    acc += (blk - detail::block_to_dense(b)).squaredNorm();
}

void frobenius_pair(const HBlock& a, const HBlock& o, double& acc)
{
    if (a.rows != o.rows || a.cols != o.cols)
        throw Error("error metrics: block structures differ");
    if (!a.is_leaf() && !o.is_leaf()) {
        for (std::size_t s = 0; s < a.sons.size(); ++s)
            frobenius_pair(a.sons[s], o.sons[s], acc);
        return;
    }
    acc += (detail::block_to_dense(a) - detail::block_to_dense(o)).squaredNorm();
}

struct Operators
{
    std::size_t n;
    LinearMap oracle, approx;
};

void fill_metrics(ErrorMetrics& m, const Operators& ops, const HFactor* factor, const PowerIterationOptions& opt)
{
    // the transposed maps below assume symmetric C, C~ and factor
    m.norm2_ref = power_norm2(ops.n, ops.oracle, ops.oracle, opt);
    if (!factor)
        return;
    const HFactor& f = *factor;
    auto inv = [&](const VectorXd& x) { return solve_full(f, x); };

    // C C~^{-1} - I and its transpose C~^{-1} C - I
    m.inverse_error = power_norm2(
        ops.n, [&](const VectorXd& x) -> VectorXd { return ops.oracle(inv(x)) - x; },
        [&](const VectorXd& x) -> VectorXd { return inv(ops.oracle(x)) - x; }, opt);
    // I - F^{-1} C~ and its transpose I - C~ F^{-1}
    m.factor_error = power_norm2(
        ops.n, [&](const VectorXd& x) -> VectorXd { return x - inv(ops.approx(x)); },
        [&](const VectorXd& x) -> VectorXd { return x - ops.approx(inv(x)); }, opt);
}

} // namespace

ErrorMetrics spectral_error_metrics(const HMatrix& approx, const MatrixXd& oracle, const HFactor* factor,
                                    const PowerIterationOptions& opt)
{
    const auto n = approx.size();
    if (oracle.rows() != static_cast<Index>(n) || oracle.cols() != static_cast<Index>(n))
        throw Error("error metrics: dimension mismatch");
    if (factor && factor->size() != n)
        throw Error("error metrics: factor dimension mismatch");

    ErrorMetrics m;
    m.norm2_diff = power_norm2(
        n, [&](const VectorXd& x) -> VectorXd { return oracle * x - matvec(approx, x); },
        [&](const VectorXd& x) -> VectorXd {
            VectorXd y = oracle.transpose() * x;
            approx.apply(-1.0, x, y, true);
            return y;
        },
        opt);
    double acc = 0.0;
    frobenius_dense(approx.root(), oracle, acc);
    m.frobenius_diff = std::sqrt(acc);

    Operators ops{n, [&](const VectorXd& x) -> VectorXd { return oracle * x; },
                  [&](const VectorXd& x) -> VectorXd { return matvec(approx, x); }};
    fill_metrics(m, ops, factor, opt);
    return m;
}

ErrorMetrics spectral_error_metrics(const HMatrix& approx, const HMatrix& oracle, const HFactor* factor,
                                    const PowerIterationOptions& opt)
{
    const auto n = approx.size();
    if (oracle.size() != n)
        throw Error("error metrics: dimension mismatch");
    if (factor && factor->size() != n)
        throw Error("error metrics: factor dimension mismatch");

    ErrorMetrics m;
    m.norm2_diff = power_norm2(
        n, [&](const VectorXd& x) -> VectorXd { return matvec(oracle, x) - matvec(approx, x); },
        [&](const VectorXd& x) -> VectorXd {
            VectorXd y = VectorXd::Zero(x.size());
            oracle.apply(1.0, x, y, true);
            approx.apply(-1.0, x, y, true);
            return y;
        },
        opt);
    double acc = 0.0;
    frobenius_pair(approx.root(), oracle.root(), acc);
    m.frobenius_diff = std::sqrt(acc);

    Operators ops{n, [&](const VectorXd& x) -> VectorXd { return matvec(oracle, x); },
                  [&](const VectorXd& x) -> VectorXd { return matvec(approx, x); }};
    fill_metrics(m, ops, factor, opt);
    return m;
}

double inversion_error(const HMatrix& c, const HFactor& f, const PowerIterationOptions& opt)
{
    if (c.size() != f.size())
        throw Error("inversion error: dimension mismatch");
    return power_norm2(
        c.size(), [&](const VectorXd& x) -> VectorXd { return x - solve_full(f, matvec(c, x)); },
        [&](const VectorXd& x) -> VectorXd {
            VectorXd y = x;
            c.apply(-1.0, solve_full(f, x), y, true);
            return y;
        },
        opt);
}

double kld_dense(const MatrixXd& c, const MatrixXd& approx)
{
    if (c.rows() != c.cols() || approx.rows() != c.rows() || approx.cols() != c.cols())
        throw Error("kld: dimension mismatch");
    const MatrixXd sym = 0.5 * (approx + approx.transpose());
    Eigen::LLT<MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success)
        throw Error("kld: approximate covariance is not positive definite");
    if (Eigen::LLT<MatrixXd>(c).info() != Eigen::Success)
        throw Error("kld: reference covariance is not positive definite");

    // L^{-1} (C - C~) L^{-T}
    MatrixXd e = 0.5 * (c + c.transpose()) - sym;
    llt.matrixL().solveInPlace(e);
    MatrixXd et = e.transpose();
    llt.matrixL().solveInPlace(et);
    const MatrixXd s = 0.5 * (et + et.transpose());

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
    double sum = 0.0;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double mu = es.eigenvalues()(i);
        if (mu <= -1.0)
            throw Error("kld: nonpositive determinant");
        sum += mu - std::log1p(mu);
    }
    return 0.5 * sum;
}

double kld(const MatrixXd& c, const HMatrix& approx)
{
    return kld_dense(c, approx.to_dense());
}

double kld(const HMatrix& c, const HMatrix& approx, const HFactor& approx_factor, const TruncationControl& ctl,
           int probes, std::uint64_t seed)
{
    const auto n = c.size();
    if (approx.size() != n || approx_factor.size() != n)
        throw Error("kld: dimension mismatch");
    if (n <= kld_dense_limit)
        return kld_dense(c.to_dense(), approx.to_dense());
    if (probes < 1)
        throw Error("kld: need at least one probe");

    std::mt19937_64 gen(seed);
    std::bernoulli_distribution coin(0.5);
    double trace = 0.0;
    VectorXd z(static_cast<Index>(n));
    for (int p = 0; p < probes; ++p) {
        for (Index i = 0; i < z.size(); ++i)
            z(i) = coin(gen) ? 1.0 : -1.0;
        trace += z.dot(solve_full(approx_factor, matvec(c, z)));
    }
    trace /= probes;

    const auto fc = factorize(c.symmetric() ? c : symmetrize(c, ctl), ctl, approx_factor.form());
    const double value =
        0.5 * (trace - static_cast<double>(n) - (fc.log_determinant() - approx_factor.log_determinant()));
    if (!std::isfinite(value))
        throw Error("kld: nonpositive determinant");
    return value;
}

} // namespace hcov
