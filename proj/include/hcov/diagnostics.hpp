#pragma once
//
// Norm and error diagnostics for approximate covariance matrices, and the
// Kullback-Leibler divergence between zero-mean Gaussians.
//

#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "hcov/factor.hpp"
#include "hcov/hmatrix.hpp"

namespace hcov {

//! y = A x
using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct PowerIterationOptions
{
    int max_iter = 50;
    double rel_tol = 1e-6;
    std::uint64_t seed = 20180807;
};

/// Spectral norm of A by power iteration on A^T A. \a apply_t applies A^T;
/// pass the same map for symmetric operators.
double power_norm2(std::size_t n, const LinearMap& apply, const LinearMap& apply_t,
                   const PowerIterationOptions& opt = {});

double power_norm2(const Eigen::MatrixXd& m, const PowerIterationOptions& opt = {});

struct ErrorMetrics
{
    double norm2_ref = 0.0;      // |C|_2
    double norm2_diff = 0.0;     // |C - C~|_2
    double frobenius_diff = 0.0; // |C - C~|_F
    std::optional<double> inverse_error; // |C C~^{-1} - I|_2
    std::optional<double> factor_error;  // |I - (L D L^T)^{-1} C~|_2
};

/// \a oracle is the internally ordered reference matrix. The inverse metrics
/// are filled in only when a factor of C~ is given.
ErrorMetrics spectral_error_metrics(const HMatrix& approx, const Eigen::MatrixXd& oracle, const HFactor* factor = nullptr,
                                    const PowerIterationOptions& opt = {});

ErrorMetrics spectral_error_metrics(const HMatrix& approx, const HMatrix& oracle, const HFactor* factor = nullptr,
                                    const PowerIterationOptions& opt = {});

//! |I - (L D L^T)^{-1} C~|_2
double inversion_error(const HMatrix& c, const HFactor& f, const PowerIterationOptions& opt = {});

/// KL divergence of N(0, C) from N(0, C~):
///   1/2 (tr(C~^{-1} C) - n - ln(det C / det C~)).
/// Computed as 1/2 sum(mu - log1p(mu)) over the eigenvalues mu of
/// L~^{-1} (C - C~) L~^{-T}, which avoids cancellation when C~ is close to C.
double kld_dense(const Eigen::MatrixXd& c, const Eigen::MatrixXd& approx);

inline constexpr std::size_t kld_dense_limit = 2000;

/// Dense route for n <= kld_dense_limit; otherwise the trace is estimated with
/// Rademacher probes through the factor of C~, and both log-determinants come
/// from factors (the one of C is computed here under \a ctl).
double kld(const HMatrix& c, const HMatrix& approx, const HFactor& approx_factor, const TruncationControl& ctl,
           int probes = 100, std::uint64_t seed = 1);

double kld(const Eigen::MatrixXd& c, const HMatrix& approx);

} // namespace hcov
