#include "hcov/likelihood.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hcov {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double elapsed(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string describe(const MaternParams& p, const NotPositiveDefinite& cause)
{
    std::ostringstream os;
    os << "nu=" << p.nu << " ell=" << p.ell << " sigma2=" << p.sigma2 << " nugget=" << p.nugget << ": "
       << cause.what();
    return os.str();
}

// first nonpositive pivot of an unpivoted Cholesky, for error reporting
std::size_t failing_pivot(MatrixXd a)
{
    const Index n = a.rows();
    for (Index j = 0; j < n; ++j) {
        double d = a(j, j) - a.row(j).head(j).squaredNorm();
        if (!(d > 0.0))
            return static_cast<std::size_t>(j);
        d = std::sqrt(d);
        a(j, j) = d;
        for (Index i = j + 1; i < n; ++i)
            a(i, j) = (a(i, j) - a.row(i).head(j).dot(a.row(j).head(j))) / d;
    }
    return static_cast<std::size_t>(n);
}

} // namespace

void Dataset::validate() const
{
    if (static_cast<std::size_t>(z.size()) != points.size())
        throw Error("dataset: " + std::to_string(points.size()) + " points but " + std::to_string(z.size()) +
                    " observations");
    if (!z.allFinite())
        throw Error("dataset: non-finite observation");
    for (double c : points.coords())
        if (!std::isfinite(c))
            throw Error("dataset: non-finite coordinate");
}

double assemble_loglik(std::size_t n, double logdet, double quadform)
{
    return -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * quadform;
}

RejectedPoint::RejectedPoint(const MaternParams& p, const NotPositiveDefinite& cause)
    : Error(describe(p, cause))
    , params_(p)
    , pivot_(cause.pivot())
{}

LoglikResult loglik_dense(const Dataset& ds, const MaternParams& p, std::size_t guard)
{
    const auto t0 = std::chrono::steady_clock::now();
    ds.validate();
    p.validate();
    const MatrixXd c = dense_covariance(ds.points, p, guard);
    Eigen::LLT<MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
        throw RejectedPoint(p, NotPositiveDefinite(failing_pivot(c)));

    LoglikResult r;
    const VectorXd diag = llt.matrixLLT().diagonal();
    r.logdet = 2.0 * diag.array().log().sum();
    r.min_pivot = diag.minCoeff();
    const VectorXd v = llt.matrixL().solve(ds.z);
    r.quadform = v.squaredNorm();
    r.loglik = assemble_loglik(ds.size(), r.logdet, r.quadform);
    r.seconds = elapsed(t0);
    return r;
}

HLikelihood::HLikelihood(const Dataset& ds, const HOptions& opt)
    : opt_(opt)
{
    ds.validate();
    opt_.ctl.validate();
    ct_ = std::make_shared<const ClusterTree>(build_cluster_tree(ds.points, opt_.n_min));
    bct_ = build_block_cluster_tree(ct_, opt_.eta);
    z_ = ct_->permute(ds.z, PermDirection::e2i);
}

LoglikResult HLikelihood::evaluate(const MaternParams& p) const
{
    const auto t0 = std::chrono::steady_clock::now();
    p.validate();
    const KernelEvaluator ev(p, ct_);
    const HMatrix c = symmetrize(build_hmatrix(bct_, ev, opt_.ctl), opt_.ctl);

    HFactor f;
    try {
        f = factorize(c, opt_.ctl, opt_.form);
    }
    catch (const NotPositiveDefinite& e) {
        throw RejectedPoint(p, e);
    }

    LoglikResult r;
    r.logdet = f.log_determinant();
    r.quadform = quadratic_form(f, z_);
    r.min_pivot = f.min_pivot();
    r.max_rank = f.lower().max_rank();
    r.loglik = assemble_loglik(size(), r.logdet, r.quadform);
    if (opt_.with_cg)
        r.quadform_cg = quadform_cg(c, f, z_).value;
    r.seconds = elapsed(t0);
    return r;
}

LoglikResult loglik_h(const Dataset& ds, const MaternParams& p, const HOptions& opt)
{
    return HLikelihood(ds, opt).evaluate(p);
}

CgResult quadform_cg(const HMatrix& c, const HFactor& f, const VectorXd& z, int max_iter, double tol)
{
    if (c.size() != static_cast<std::size_t>(z.size()) || f.size() != c.size())
        throw Error("quadform_cg: dimension mismatch");

    CgResult out;
    VectorXd u = VectorXd::Zero(z.size());
    VectorXd r = z;
    out.residual = r.norm();
    if (out.residual <= tol)
        return out;

    VectorXd s = solve_full(f, r);
    VectorXd d = s;
    double rs = r.dot(s);
    for (int it = 1; it <= max_iter; ++it) {
        const VectorXd q = matvec(c, d);
        const double alpha = rs / d.dot(q);
        u += alpha * d;
        r -= alpha * q;
        out.iterations = it;
        out.residual = r.norm();
        if (out.residual <= tol) {
            out.value = z.dot(u);
            return out;
        }
        s = solve_full(f, r);
        const double next = r.dot(s);
        d = s + (next / rs) * d;
        rs = next;
    }
    throw Error("quadform_cg: no convergence after " + std::to_string(max_iter) +
                " iterations (residual " + std::to_string(out.residual) + ")");
}

} // namespace hcov
