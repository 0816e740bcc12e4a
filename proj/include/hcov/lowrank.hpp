#pragma once
//
// Factored low-rank blocks R ~ A B^T, adaptive cross approximation and
// SVD-based recompression.
//

#include <cstddef>
#include <functional>

#include <Eigen/Dense>

namespace hcov {

/// Rank control for low-rank truncation: either a fixed rank k or a relative
/// spectral accuracy eps, always capped by k_max.
struct TruncationControl
{
    enum class Mode { fixed_rank, adaptive };

    Mode mode = Mode::adaptive;
    std::size_t rank = 0;  // fixed_rank
    double eps = 1e-5;     // adaptive
    std::size_t k_max = 100;

    static TruncationControl fixed(std::size_t k, std::size_t k_max = 0);
    static TruncationControl adaptive(double eps, std::size_t k_max = 100);
    //! no practical truncation: adaptive at 1e-14 without a rank cap
    static TruncationControl full();

    bool valid() const noexcept;
    void validate() const;

    //! number of singular values to keep from a descending spectrum
    std::size_t keep(const Eigen::VectorXd& sv) const;
    //! rank cap for iterative construction
    std::size_t max_rank(std::size_t p, std::size_t q) const;
};

struct LowRankBlock
{
    Eigen::MatrixXd A; // p x k
    Eigen::MatrixXd B; // q x k

    LowRankBlock() = default;
    LowRankBlock(std::size_t p, std::size_t q)
        : A(static_cast<Eigen::Index>(p), 0)
        , B(static_cast<Eigen::Index>(q), 0)
    {}
    LowRankBlock(Eigen::MatrixXd a, Eigen::MatrixXd b);

    std::size_t rows() const noexcept { return static_cast<std::size_t>(A.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(B.rows()); }
    std::size_t rank() const noexcept { return static_cast<std::size_t>(A.cols()); }

    Eigen::MatrixXd to_dense() const { return A * B.transpose(); }
    LowRankBlock transposed() const { return {B, A}; }
};

using EntryFn = std::function<double(std::size_t, std::size_t)>;

/// Partially pivoted ACA on the p x q matrix given entry-wise, followed by
/// recompression under the same control. Stops when the newest cross
/// satisfies |a_k||b_k| <= eps |a_1||b_1| (adaptive) or at the rank cap.
LowRankBlock aca_approximate(const EntryFn& entry, std::size_t p, std::size_t q, const TruncationControl& ctl);

//! ACA without the final recompression
LowRankBlock aca_crosses(const EntryFn& entry, std::size_t p, std::size_t q, const TruncationControl& ctl);

/// Thin QR of both factors and an SVD of the small core. For adaptive
/// accuracy eps >= 1e-7 the factors are orthogonalized through their Gram
/// matrices instead, which is several times cheaper for small blocks.
LowRankBlock recompress_svd(const LowRankBlock& lr, const TruncationControl& ctl);

/// Spectral norm: exact for rank <= 1, power iteration in factored form otherwise.
double lowrank_norm2(const LowRankBlock& lr, int iterations = 100);

/// Truncated SVD of a dense block.
LowRankBlock dense_to_lowrank(const Eigen::MatrixXd& m, const TruncationControl& ctl);

} // namespace hcov
