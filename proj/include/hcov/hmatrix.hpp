#pragma once
//
// Hierarchical matrices over a block cluster tree: assembly, matrix-vector
// products and truncated arithmetic.
//
// All vectors and dense matrices exchanged with an HMatrix are in the
// internal (cluster tree) ordering.
//

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "hcov/geometry.hpp"
#include "hcov/kernel.hpp"
#include "hcov/lowrank.hpp"

namespace hcov {

struct HBlock
{
    enum class Kind { dense, lowrank, hierarchical };

    IndexRange rows, cols;
    int row_cluster = -1, col_cluster = -1;
    Kind kind = Kind::dense;

    Eigen::MatrixXd dense;
    LowRankBlock lowrank;
    bool pending = false; // lowrank holds updates not yet recompressed

    int nrow_sons = 0, ncol_sons = 0;
    std::vector<HBlock> sons; // row-major

    HBlock& son(int i, int j) { return sons[static_cast<std::size_t>(i * ncol_sons + j)]; }
    const HBlock& son(int i, int j) const { return sons[static_cast<std::size_t>(i * ncol_sons + j)]; }

    bool is_leaf() const noexcept { return kind != Kind::hierarchical; }
    bool is_diagonal() const noexcept { return row_cluster >= 0 && row_cluster == col_cluster; }
    std::size_t nrows() const noexcept { return rows.size(); }
    std::size_t ncols() const noexcept { return cols.size(); }
};

class HMatrix
{
public:
    HMatrix() = default;
    HMatrix(std::shared_ptr<const ClusterTree> ct, HBlock root, bool symmetric = false);

    std::size_t size() const noexcept { return root_.nrows(); }
    const HBlock& root() const noexcept { return root_; }
    HBlock& root() noexcept { return root_; }

    const ClusterTree& cluster_tree() const { return *ct_; }
    const std::shared_ptr<const ClusterTree>& cluster_tree_ptr() const noexcept { return ct_; }

    bool symmetric() const noexcept { return symmetric_; }
    void set_symmetric(bool s) noexcept { symmetric_ = s; }

    std::size_t max_rank() const;
    Eigen::MatrixXd to_dense() const;

    //! y += alpha * op(H) * x, for one or several columns
    void apply(double alpha, const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Ref<Eigen::MatrixXd> y,
               bool transpose = false) const;

    void scale(double alpha);

private:
    std::shared_ptr<const ClusterTree> ct_;
    HBlock root_;
    bool symmetric_ = false;
};

/// Dense leaves entry-wise, admissible leaves by ACA plus recompression.
HMatrix build_hmatrix(const BlockClusterTree& bct, const KernelEvaluator& ev, const TruncationControl& ctl);

//! H-matrix whose entries come from an internally ordered dense matrix
HMatrix hmatrix_from_dense(const BlockClusterTree& bct, const Eigen::MatrixXd& m, const TruncationControl& ctl);

//! identity on the block structure of \a bct (rank-0 admissible leaves)
HMatrix identity_hmatrix(const BlockClusterTree& bct);

/// 1/2 (H + H^T), leaf by leaf with recompression under \a ctl.
HMatrix symmetrize(const HMatrix& h, const TruncationControl& ctl);

Eigen::VectorXd matvec(const HMatrix& h, const Eigen::VectorXd& x);

/// C <- beta C + alpha A B with every leaf update truncated under \a ctl.
void truncated_multiply_add(HMatrix& c, double alpha, const HMatrix& a, const HMatrix& b, double beta,
                            const TruncationControl& ctl);

//! C <- C + alpha A (A and C share the block structure)
void truncated_add(HMatrix& c, double alpha, const HMatrix& a, const TruncationControl& ctl);

struct StorageReport
{
    std::size_t bytes = 0;         // payload + per-block bookkeeping
    std::size_t payload_bytes = 0; // numeric words only
    double bytes_per_dof = 0.0;
    std::size_t dense_leaves = 0;
    std::size_t lowrank_leaves = 0;
    std::size_t inner_blocks = 0;
    std::size_t max_rank = 0;
};

StorageReport storage_report(const HMatrix& h);

namespace detail {

//! a block, possibly viewed transposed
struct BlockView
{
    const HBlock* block;
    bool transposed = false;

    HBlock::Kind kind() const noexcept { return block->kind; }
    IndexRange rows() const noexcept { return transposed ? block->cols : block->rows; }
    IndexRange cols() const noexcept { return transposed ? block->rows : block->cols; }
    int nrow_sons() const noexcept { return transposed ? block->ncol_sons : block->nrow_sons; }
    int ncol_sons() const noexcept { return transposed ? block->nrow_sons : block->ncol_sons; }
    BlockView son(int i, int j) const
    {
        return transposed ? BlockView{&block->son(j, i), true} : BlockView{&block->son(i, j), false};
    }
};

//! y += alpha * op(b) * x with block-local row/column offsets
void apply_block(const HBlock& b, bool transpose, double alpha, const Eigen::Ref<const Eigen::MatrixXd>& x,
                 Eigen::Ref<Eigen::MatrixXd> y);

Eigen::MatrixXd block_to_dense(const HBlock& b);

/// C += alpha * A * op(B). With lower_only set and C a diagonal block, blocks
/// strictly above the diagonal are left untouched.
void multiply(double alpha, const HBlock& a, BlockView b, HBlock& c, const TruncationControl& ctl,
              bool lower_only = false);

/// C += U W^T. Low-rank targets collect updates and are recompressed under
/// ctl once the collected rank grows large; call flush() before relying on
/// the ranks.
void add_lowrank(HBlock& c, const Eigen::Ref<const Eigen::MatrixXd>& u, const Eigen::Ref<const Eigen::MatrixXd>& w,
                 const TruncationControl& ctl, bool lower_only = false);

void scale_block(HBlock& b, double alpha);

//! recompresses every low-rank leaf with collected updates
void flush(HBlock& b, const TruncationControl& ctl);

//! multiplies column j of the block by d(j) for global column index j
void scale_columns(HBlock& b, const Eigen::VectorXd& d);

void set_zero(HBlock& b);

} // namespace detail

} // namespace hcov
