#pragma once
// Shared fixtures for the unit tests.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcov/geometry.hpp"
#include "hcov/hmatrix.hpp"
#include "hcov/kernel.hpp"

namespace testing {

inline hcov::PointSet random_points(std::size_t n, std::uint64_t seed, std::size_t dim = 2, double side = 1.0)
{
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, side);
    std::vector<double> c(n * dim);
    for (auto& x : c)
        x = u(gen);
    return {dim, std::move(c)};
}

inline hcov::PointSet grid_points(std::size_t m)
{
    std::vector<double> c;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            c.push_back(static_cast<double>(i) / static_cast<double>(m - 1));
            c.push_back(static_cast<double>(j) / static_cast<double>(m - 1));
        }
    return {2, std::move(c)};
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = g(gen);
    return v;
}

// everything needed to build C~ for one point set
struct Problem
{
    hcov::PointSet points;
    std::shared_ptr<const hcov::ClusterTree> ct;
    hcov::BlockClusterTree bct;
    hcov::KernelEvaluator ev;

    Problem(hcov::PointSet ps, const hcov::MaternParams& p, std::size_t n_min = 32, double eta = 2.0)
        : points(std::move(ps))
        , ct(std::make_shared<const hcov::ClusterTree>(hcov::build_cluster_tree(points, n_min)))
        , bct(hcov::build_block_cluster_tree(ct, eta))
        , ev(p, ct)
    {}

    hcov::HMatrix build(const hcov::TruncationControl& ctl) const { return hcov::build_hmatrix(bct, ev, ctl); }

    //! dense covariance in internal order
    Eigen::MatrixXd dense() const { return hcov::to_internal_order(hcov::dense_covariance(points, ev.params()), *ct); }
};

inline double norm2(const Eigen::MatrixXd& m)
{
    // largest eigenvalue of m^T m; accurate enough for norm ratios
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.transpose() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

} // namespace testing

namespace testing {

inline std::vector<std::string> split_ws(const std::string& line)
{
    std::vector<std::string> out;
    std::string tok;
    for (char ch : line + ' ') {
        if (ch == ' ' || ch == '\t' || ch == '\r') {
            if (!tok.empty())
                out.push_back(tok);
            tok.clear();
        }
        else {
            tok += ch;
        }
    }
    return out;
}

// rows match when literal tokens agree and numeric tokens have equal values
inline bool same_row(const std::string& a, const std::string& b)
{
    const auto ta = split_ws(a), tb = split_ws(b);
    if (ta.size() != tb.size())
        return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        char* ea = nullptr;
        char* eb = nullptr;
        const double va = std::strtod(ta[i].c_str(), &ea);
        const double vb = std::strtod(tb[i].c_str(), &eb);
        const bool na = *ea == '\0' && ea != ta[i].c_str();
        const bool nb = *eb == '\0' && eb != tb[i].c_str();
        if (na != nb)
            return false;
        if (na ? va != vb : ta[i] != tb[i])
            return false;
    }
    return true;
}

} // namespace testing
