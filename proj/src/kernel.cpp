#include "hcov/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace hcov {

bool MaternParams::valid() const noexcept
{
    return std::isfinite(sigma2) && std::isfinite(ell) && std::isfinite(nu) && std::isfinite(nugget) &&
           sigma2 > 0.0 && ell > 0.0 && nu > 0.0 && nugget >= 0.0;
}

void MaternParams::validate() const
{
    if (!valid())
        throw Error("invalid Matern parameters (need sigma2 > 0, ell > 0, nu > 0, nugget >= 0)");
}

namespace {

constexpr double pi = std::numbers::pi;
constexpr double eps = 1e-16;

// Taylor coefficients of 1/Gamma(1+x) = sum_k c[k] x^k
constexpr std::array<double, 26> rgamma_coeff = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

} // namespace

BesselK::BesselK(double nu)
    : nu_(nu)
{
    if (!(nu >= 0.0) || !std::isfinite(nu))
        throw Error("bessel_k: order must be finite and nonnegative");

    steps_ = static_cast<int>(nu + 0.5);
    mu_ = nu - steps_;

    // gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu) = -sum_{k even} c_k mu^(k-2)
    // gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2     =  sum_{k odd}  c_k mu^(k-1)
    // (k counted from 1 as in the usual 1/Gamma(z) series)
    const double mu2 = mu_ * mu_;
    double g1 = 0.0, g2 = 0.0, p = 1.0;
    for (std::size_t k = 0; k + 1 < rgamma_coeff.size(); k += 2) {
        g2 += rgamma_coeff[k] * p;
        g1 -= rgamma_coeff[k + 1] * p;
        p *= mu2;
    }
    gam1_ = g1;
    gam2_ = g2;
    gampl_ = gam2_ - mu_ * gam1_; // 1/Gamma(1+mu)
    gammi_ = gam2_ + mu_ * gam1_; // 1/Gamma(1-mu)

    const double pimu = pi * mu_;
    fact_ = std::abs(pimu) < eps ? 1.0 : pimu / std::sin(pimu);
}

double BesselK::operator()(double x) const
{
    if (!(x > 0.0))
        throw Error("bessel_k: argument must be positive");

    const double xmu = mu_;
    const double xmu2 = xmu * xmu;
    const double xi = 1.0 / x;
    const double xi2 = 2.0 * xi;
    double rkmu, rk1;

    if (x < 2.0) {
        // Temme's series
        const double x2 = 0.5 * x;
        double d = -std::log(x2);
        double e = xmu * d;
        const double fact2 = std::abs(e) < eps ? 1.0 : std::sinh(e) / e;
        double ff = fact_ * (gam1_ * std::cosh(e) + gam2_ * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / gampl_;
        double q = 0.5 / (e * gammi_);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        for (int i = 1; i < 10000; ++i) {
            ff = (i * ff + p + q) / (i * static_cast<double>(i) - xmu2);
            c *= d / i;
            p /= i - xmu;
            q /= i + xmu;
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if (std::abs(del) < std::abs(sum) * eps)
                break;
        }
        rkmu = sum;
        rk1 = sum1 * xi2;
    }
    else {
        // Steed's continued fraction with Thompson-Barnett summation
        double b = 2.0 * (1.0 + x);
        double d = 1.0 / b;
        double h = d, delh = d;
        double q1 = 0.0, q2 = 1.0;
        const double a1 = 0.25 - xmu2;
        double q = a1, c = a1;
        double a = -a1;
        double s = 1.0 + q * delh;
        for (int i = 2; i < 100000; ++i) {
            a -= 2 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::abs(dels / s) < eps)
                break;
        }
        h = a1 * h;
        rkmu = std::sqrt(pi / (2.0 * x)) * std::exp(-x) / s;
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
    }

    for (int i = 1; i <= steps_; ++i) {
        const double next = (xmu + i) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = next;
    }
    return rkmu;
}

double bessel_k(double nu, double x)
{
    // K_{-nu} = K_nu
    return BesselK(std::abs(nu))(x);
}

namespace {

// each octave [2^k, 2^(k+1)), k in [table_kmin, table_kmax], is cut into
// table_parts equal pieces
constexpr int table_kmin = -24;
constexpr int table_kmax = 8;
constexpr int table_parts = 4;
constexpr int table_terms = 12;

} // namespace

MaternCovariance::MaternCovariance(const MaternParams& p, bool tabulate)
    : p_(p)
    , form_(Form::general)
    , bessel_(p.valid() ? p.nu : 1.0)
{
    p_.validate();
    if (p_.nu == 0.5)
        form_ = Form::half;
    else if (p_.nu == 1.5)
        form_ = Form::three_halves;
    else if (p_.nu == 2.5)
        form_ = Form::five_halves;
    scale_ = p_.sigma2 / (std::exp2(p_.nu - 1.0) * std::tgamma(p_.nu));
    if (!tabulate || form_ != Form::general)
        return;

    // Chebyshev coefficients of g(x) = e^x x^nu K_nu(x) on each interval,
    // from values at the Chebyshev points of the first kind
    constexpr int m = table_terms;
    auto table = std::make_shared<std::vector<double>>();
    table->reserve(static_cast<std::size_t>((table_kmax - table_kmin + 1) * table_parts * m));
    std::array<double, m> f{};
    for (int piece = 0; piece < (table_kmax - table_kmin + 1) * table_parts; ++piece) {
        const double w = std::ldexp(1.0, table_kmin + piece / table_parts) / table_parts;
        const double mid = w * (table_parts + piece % table_parts + 0.5);
        for (int i = 0; i < m; ++i) {
            const double t = std::cos(pi * (i + 0.5) / m);
            const double x = mid + 0.5 * w * t;
            f[static_cast<std::size_t>(i)] = std::exp(x) * std::pow(x, p_.nu) * bessel_(x);
        }
        for (int j = 0; j < m; ++j) {
            double c = 0.0;
            for (int i = 0; i < m; ++i)
                c += f[static_cast<std::size_t>(i)] * std::cos(pi * j * (i + 0.5) / m);
            table->push_back((j == 0 ? 1.0 : 2.0) * c / m);
        }
    }
    table_ = std::move(table);
}

double MaternCovariance::direct(double x) const
{
    if (x > 700.0)
        return 0.0;
    return scale_ * std::pow(x, p_.nu) * bessel_(x);
}

double MaternCovariance::operator()(double h) const
{
    if (h <= 0.0)
        return p_.sigma2;
    const double x = h / p_.ell;
    switch (form_) {
    case Form::half:
        return p_.sigma2 * std::exp(-x);
    case Form::three_halves:
        return p_.sigma2 * (1.0 + x) * std::exp(-x);
    case Form::five_halves:
        return p_.sigma2 * (1.0 + x + x * x / 3.0) * std::exp(-x);
    case Form::general:
        break;
    }
    if (!table_)
        return direct(x);
    const int k = std::ilogb(x);
    if (k < table_kmin || k > table_kmax)
        return direct(x);

    // Clenshaw recurrence on t in [-1, 1]
    const double u = std::ldexp(x, -k) * table_parts - table_parts; // in [0, parts)
    const int part = std::min(static_cast<int>(u), table_parts - 1);
    const double* c = table_->data() + ((k - table_kmin) * table_parts + part) * table_terms;
    const double t = 2.0 * (u - part) - 1.0;
    double b1 = 0.0, b2 = 0.0;
    for (int j = table_terms - 1; j > 0; --j) {
        const double b0 = 2.0 * t * b1 - b2 + c[j];
        b2 = b1;
        b1 = b0;
    }
    return scale_ * std::exp(-x) * (t * b1 - b2 + c[0]);
}

double matern_cov(double h, const MaternParams& p)
{
    if (!(h >= 0.0))
        throw Error("matern_cov: distance must be nonnegative");
    return MaternCovariance(p)(h);
}

double matern_cov_bessel(double h, const MaternParams& p)
{
    p.validate();
    if (!(h >= 0.0))
        throw Error("matern_cov: distance must be nonnegative");
    if (h == 0.0)
        return p.sigma2;
    const double x = h / p.ell;
    return p.sigma2 / (std::exp2(p.nu - 1.0) * std::tgamma(p.nu)) * std::pow(x, p.nu) * bessel_k(p.nu, x);
}

KernelEvaluator::KernelEvaluator(const MaternParams& p, std::shared_ptr<const ClusterTree> ct)
    : cov_(p, true)
    , ct_(std::move(ct))
{
    if (!ct_)
        throw Error("kernel evaluator: missing cluster tree");
    pts_ = ct_->internal_points().coords().data();
    dim_ = ct_->dim();
    n_ = ct_->size();
}

double KernelEvaluator::entry(std::size_t i, std::size_t j) const
{
    if (i >= n_ || j >= n_)
        throw Error("kernel_entry: index out of range");
    return (*this)(i, j);
}

double KernelEvaluator::operator()(std::size_t i, std::size_t j) const
{
    const double* a = pts_ + i * dim_;
    const double* b = pts_ + j * dim_;
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    const double c = cov_(std::sqrt(s));
    return i == j ? c + cov_.params().nugget : c;
}

void KernelEvaluator::fill(IndexRange rows, IndexRange cols, Eigen::Ref<Eigen::MatrixXd> out) const
{
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < rows.size(); ++r)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*this)(rows.begin + r, cols.begin + c);
}

Eigen::MatrixXd dense_covariance(const PointSet& ps, const MaternParams& p, std::size_t guard)
{
    const auto n = ps.size();
    if (n > guard)
        throw Error("dense_covariance: n = " + std::to_string(n) + " exceeds the dense guard " + std::to_string(guard));
    const MaternCovariance cov(p, n > 64);
    Eigen::MatrixXd c(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        c(j, j) = p.sigma2 + p.nugget;
        for (std::size_t i = 0; i < j; ++i) {
            const double v = cov(distance(ps.point(i), ps.point(j)));
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    return c;
}

Eigen::MatrixXd to_internal_order(const Eigen::MatrixXd& m, const ClusterTree& ct)
{
    const auto& i2e = ct.perm_i2e();
    const auto n = static_cast<Eigen::Index>(i2e.size());
    if (m.rows() != n || m.cols() != n)
        throw Error("to_internal_order: dimension mismatch");
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            out(i, j) = m(static_cast<Eigen::Index>(i2e[i]), static_cast<Eigen::Index>(i2e[j]));
    return out;
}

} // namespace hcov
