#include <doctest.h>

#include <cmath>
#include <random>

#include "hcov/kernel.hpp"
#include "hcov/lowrank.hpp"
#include "support.hpp"

using namespace hcov;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i)
            m(i, j) = g(gen);
    return m;
}

MatrixXd orthonormal(Eigen::Index r, Eigen::Index c, std::uint64_t seed)
{
    Eigen::HouseholderQR<MatrixXd> qr(gaussian(r, c, seed));
    return qr.householderQ() * MatrixXd::Identity(r, c);
}

double svd_norm2(const MatrixXd& m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::JacobiSVD<MatrixXd> svd(m);
    return svd.singularValues()(0);
}

// Matérn block between two clusters of random points
struct Block
{
    PointSet rows, cols;
    MaternCovariance cov;
    std::size_t evaluations = 0;

    double operator()(std::size_t i, std::size_t j)
    {
        ++evaluations;
        return cov(distance(rows.point(i), cols.point(j)));
    }

    MatrixXd dense() const
    {
        MatrixXd m(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    cov(distance(rows.point(i), cols.point(j)));
        return m;
    }
};

PointSet shifted(PointSet ps, double dx)
{
    std::vector<double> c = ps.coords();
    for (std::size_t i = 0; i < c.size(); i += ps.dim())
        c[i] += dx;
    return {ps.dim(), std::move(c)};
}

MaternParams params(double ell, double nu)
{
    MaternParams p;
    p.ell = ell;
    p.nu = nu;
    return p;
}

} // namespace

TEST_CASE("truncation control")
{
    VectorXd sv(5);
    sv << 1.0, 0.1, 1e-3, 1e-6, 0.0;
    CHECK(TruncationControl::adaptive(1e-2).keep(sv) == 2);
    CHECK(TruncationControl::adaptive(1e-7).keep(sv) == 4);
    CHECK(TruncationControl::adaptive(1e-7, 3).keep(sv) == 3);
    CHECK(TruncationControl::fixed(3).keep(sv) == 3);
    CHECK(TruncationControl::fixed(9).keep(sv) == 4); // zero singular values are dropped
    CHECK(TruncationControl::adaptive(1e-3).keep(VectorXd::Zero(3)) == 0);
    CHECK(TruncationControl::fixed(20).max_rank(10, 50) == 10);
    CHECK(TruncationControl::fixed(20, 100).k_max == 100);

    CHECK_THROWS_AS(TruncationControl::adaptive(0.0).validate(), Error);
    CHECK_THROWS_AS(TruncationControl::adaptive(1e-3, 0).validate(), Error);
    CHECK_FALSE(TruncationControl::adaptive(std::nan("")).valid());
}

TEST_CASE("ACA on an exact rank-one matrix stops after one cross")
{
    const VectorXd a = VectorXd::LinSpaced(30, 1.0, 2.0);
    const VectorXd b = VectorXd::LinSpaced(20, -1.0, 3.0);
    auto entry = [&](std::size_t i, std::size_t j) { return a(static_cast<Eigen::Index>(i)) * b(static_cast<Eigen::Index>(j)); };
    auto lr = aca_crosses(entry, 30, 20, TruncationControl::adaptive(1e-10));
    CHECK(lr.rank() == 1);
    CHECK((lr.to_dense() - a * b.transpose()).norm() <= 1e-14 * (a * b.transpose()).norm());
}

TEST_CASE("ACA on a zero block gives rank zero")
{
    auto lr = aca_approximate([](std::size_t, std::size_t) { return 0.0; }, 12, 7, TruncationControl::adaptive(1e-6));
    CHECK(lr.rank() == 0);
    CHECK(lr.rows() == 12);
    CHECK(lr.cols() == 7);
    CHECK_THROWS_AS(aca_crosses([](std::size_t, std::size_t) { return 1.0; }, 0, 3, TruncationControl::adaptive(1e-6)),
                    Error);
}

TEST_CASE("ACA on a separated Matérn block meets the accuracy and evaluation budget")
{
    Block blk{testing::random_points(64, 3), shifted(testing::random_points(64, 4), 2.0),
              MaternCovariance(params(0.25, 0.5))};
    const auto ctl = TruncationControl::adaptive(1e-6);
    auto crosses = aca_crosses(std::ref(blk), 64, 64, ctl);
    CHECK(blk.evaluations <= crosses.rank() * (64 + 64));

    auto lr = recompress_svd(crosses, ctl);
    const MatrixXd r = blk.dense();
    CHECK(svd_norm2(r - lr.to_dense()) <= 1e-5 * svd_norm2(r));
    CHECK(lr.rank() <= crosses.rank());
}

TEST_CASE("ACA accuracy over random admissible blocks")
{
    std::mt19937_64 gen(77);
    std::uniform_int_distribution<int> size(8, 128);
    std::uniform_real_distribution<double> gap(1.5, 4.0);
    for (int t = 0; t < 20; ++t) {
        const auto p = static_cast<std::size_t>(size(gen));
        const auto q = static_cast<std::size_t>(size(gen));
        const double nu = t % 2 == 0 ? 0.5 : 1.5;
        const double ell = t % 4 < 2 ? 0.25 : 0.75;
        Block blk{testing::random_points(p, 100 + t), shifted(testing::random_points(q, 200 + t), gap(gen)),
                  MaternCovariance(params(ell, nu))};
        const double eps = 1e-6;
        auto crosses = aca_crosses(std::ref(blk), p, q, TruncationControl::adaptive(eps));
        CHECK(blk.evaluations <= crosses.rank() * (p + q));
        auto lr = recompress_svd(crosses, TruncationControl::adaptive(eps));
        const MatrixXd r = blk.dense();
        CHECK(svd_norm2(r - lr.to_dense()) <= 10.0 * eps * svd_norm2(r));
    }
}

TEST_CASE("fixed-rank ACA respects the rank")
{
    Block blk{testing::random_points(50, 5), shifted(testing::random_points(40, 6), 1.5), MaternCovariance(params(0.5, 0.5))};
    auto lr = aca_approximate(std::ref(blk), 50, 40, TruncationControl::fixed(4));
    CHECK(lr.rank() == 4);
}

TEST_CASE("recompression removes duplicated columns")
{
    for (double eps : {1e-5, 1e-10}) {
        const MatrixXd a = gaussian(60, 6, 1), b = gaussian(45, 6, 2);
        LowRankBlock doubled(MatrixXd(60, 12), MatrixXd(45, 12));
        doubled.A << a, a;
        doubled.B << 0.5 * b, 0.5 * b;
        auto lr = recompress_svd(doubled, TruncationControl::adaptive(eps));
        CHECK(lr.rank() == 6);
        CHECK((lr.to_dense() - a * b.transpose()).norm() <= 1e-9 * (a * b.transpose()).norm());
    }
}

TEST_CASE("fixed rank on an exact rank-k input changes nothing")
{
    const MatrixXd a = gaussian(40, 5, 3), b = gaussian(30, 5, 4);
    auto lr = recompress_svd(LowRankBlock(a, b), TruncationControl::fixed(5));
    CHECK(lr.rank() == 5);
    CHECK((lr.to_dense() - a * b.transpose()).norm() <= 1e-12 * (a * b.transpose()).norm());
}

TEST_CASE("recompression finds the rank under small noise")
{
    MatrixXd a(100, 15), b(80, 15);
    a << gaussian(100, 10, 5), 1e-12 * gaussian(100, 5, 6);
    b << gaussian(80, 10, 7), gaussian(80, 5, 8);
    CHECK(recompress_svd(LowRankBlock(a, b), TruncationControl::adaptive(1e-8)).rank() == 10);
    CHECK(recompress_svd(LowRankBlock(a, b), TruncationControl::adaptive(1e-5)).rank() == 10);
}

TEST_CASE("recompression error equals the first dropped singular value")
{
    // known spectrum 10^{-i/2}
    const Eigen::Index k = 12;
    VectorXd sigma(k);
    for (Eigen::Index i = 0; i < k; ++i)
        sigma(i) = std::pow(10.0, -0.5 * static_cast<double>(i));
    const MatrixXd u = orthonormal(70, k, 9), v = orthonormal(50, k, 10);
    // spread the spectrum over both factors with a mixing matrix
    const MatrixXd mix = gaussian(k, k, 11);
    const LowRankBlock lr(u * sigma.asDiagonal() * mix, v * mix.inverse().transpose());
    const MatrixXd m = u * sigma.asDiagonal() * v.transpose();

    for (double eps : {3e-2, 3e-4, 3e-9}) {
        const auto out = recompress_svd(lr, TruncationControl::adaptive(eps));
        Eigen::Index expect = 0;
        while (expect < k && sigma(expect) > eps)
            ++expect;
        CHECK(out.rank() == static_cast<std::size_t>(expect));
        const double err = svd_norm2(m - out.to_dense());
        CHECK(err <= eps * sigma(0));
        CHECK(err == doctest::Approx(sigma(expect)).epsilon(1e-6));
    }
}

TEST_CASE("recompression is idempotent")
{
    for (double eps : {1e-4, 1e-9}) {
        const auto ctl = TruncationControl::adaptive(eps);
        MatrixXd a = gaussian(50, 20, 12);
        a.rightCols(10) *= 1e-6;
        const LowRankBlock lr(a, gaussian(40, 20, 13));
        const auto once = recompress_svd(lr, ctl);
        const auto twice = recompress_svd(once, ctl);
        CHECK(twice.rank() == once.rank());
        CHECK((twice.to_dense() - once.to_dense()).norm() <= 1e-12 * once.to_dense().norm());
    }
}

TEST_CASE("spectral norm of factored blocks")
{
    VectorXd a(2), b(2);
    a << 3.0, 4.0;
    b << 1.0, 0.0;
    CHECK(lowrank_norm2(LowRankBlock(a, b)) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(lowrank_norm2(LowRankBlock(4, 3)) == 0.0);

    const LowRankBlock lr(gaussian(50, 5, 14), gaussian(40, 5, 15));
    CHECK(lowrank_norm2(lr) == doctest::Approx(svd_norm2(lr.to_dense())).epsilon(1e-6));
}

TEST_CASE("truncated SVD of dense blocks")
{
    auto id = dense_to_lowrank(MatrixXd::Identity(3, 3), TruncationControl::fixed(3));
    CHECK(id.rank() == 3);
    CHECK((id.to_dense() - MatrixXd::Identity(3, 3)).norm() == doctest::Approx(0.0).epsilon(1e-15));

    const VectorXd d = (VectorXd(3) << 1.0, 1e-3, 1e-9).finished();
    auto lr = dense_to_lowrank(MatrixXd(d.asDiagonal()), TruncationControl::adaptive(1e-6));
    CHECK(lr.rank() == 2);
    CHECK(svd_norm2(MatrixXd(d.asDiagonal()) - lr.to_dense()) == doctest::Approx(1e-9).epsilon(1e-6));

    // the truncated SVD is never worse than ACA at the same accuracy
    Block blk{testing::random_points(80, 16), shifted(testing::random_points(60, 17), 1.2), MaternCovariance(params(0.3, 0.5))};
    const MatrixXd r = blk.dense();
    for (double eps : {1e-3, 1e-6}) {
        const auto ctl = TruncationControl::adaptive(eps);
        const auto svd = dense_to_lowrank(r, ctl);
        const auto aca = aca_crosses(std::ref(blk), 80, 60, TruncationControl::fixed(svd.rank()));
        CHECK(svd_norm2(r - svd.to_dense()) <= svd_norm2(r - aca.to_dense()) * (1.0 + 1e-9));
    }
}
