#include "hcov/hmatrix.hpp"

#include <algorithm>

#include "hcov/error.hpp"
#include "hcov/parallel.hpp"

namespace hcov {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

Index idx(std::size_t i)
{
    return static_cast<Index>(i);
}

Index row_offset(const HBlock& parent, const HBlock& son)
{
    return idx(son.rows.begin - parent.rows.begin);
}

Index col_offset(const HBlock& parent, const HBlock& son)
{
    return idx(son.cols.begin - parent.cols.begin);
}

HBlock skeleton(const BlockClusterTree& bct, int node_id)
{
    const auto& node = bct.node(node_id);
    const auto& ct = bct.cluster_tree();
    HBlock b;
    b.rows = ct.cluster(node.row).range;
    b.cols = ct.cluster(node.col).range;
    b.row_cluster = node.row;
    b.col_cluster = node.col;
    switch (node.kind) {
    case BlockKind::dense:
        b.kind = HBlock::Kind::dense;
        break;
    case BlockKind::admissible:
        b.kind = HBlock::Kind::lowrank;
        b.lowrank = LowRankBlock(b.nrows(), b.ncols());
        break;
    case BlockKind::inner:
        b.kind = HBlock::Kind::hierarchical;
        b.nrow_sons = node.nrow_sons;
        b.ncol_sons = node.ncol_sons;
        b.sons.reserve(node.sons.size());
        for (int s : node.sons)
            b.sons.push_back(skeleton(bct, s));
        break;
    }
    return b;
}

void collect_leaves(HBlock& b, std::vector<HBlock*>& out)
{
    if (b.is_leaf()) {
        out.push_back(&b);
        return;
    }
    for (auto& s : b.sons)
        collect_leaves(s, out);
}

void check_tree(const BlockClusterTree& bct)
{
    if (bct.nodes().empty())
        throw Error("H-matrix: empty block cluster tree");
}

} // namespace

HMatrix::HMatrix(std::shared_ptr<const ClusterTree> ct, HBlock root, bool symmetric)
    : ct_(std::move(ct))
    , root_(std::move(root))
    , symmetric_(symmetric)
{}

namespace {

std::size_t max_rank_of(const HBlock& b)
{
    switch (b.kind) {
    case HBlock::Kind::lowrank:
        return b.lowrank.rank();
    case HBlock::Kind::dense:
        return 0;
    case HBlock::Kind::hierarchical:
        break;
    }
    std::size_t r = 0;
    for (const auto& s : b.sons)
        r = std::max(r, max_rank_of(s));
    return r;
}

} // namespace

std::size_t HMatrix::max_rank() const
{
    return max_rank_of(root_);
}

MatrixXd HMatrix::to_dense() const
{
    return detail::block_to_dense(root_);
}

void HMatrix::apply(double alpha, const Eigen::Ref<const MatrixXd>& x, Eigen::Ref<MatrixXd> y, bool transpose) const
{
    if (x.rows() != idx(size()) || y.rows() != idx(size()) || x.cols() != y.cols())
        throw Error("matvec: length mismatch");
    detail::apply_block(root_, transpose, alpha, x, y);
}

void HMatrix::scale(double alpha)
{
    detail::scale_block(root_, alpha);
}

HMatrix build_hmatrix(const BlockClusterTree& bct, const KernelEvaluator& ev, const TruncationControl& ctl)
{
    check_tree(bct);
    ctl.validate();
    if (&bct.cluster_tree() != &ev.cluster_tree())
        throw Error("build_hmatrix: kernel and block tree use different cluster trees");

    HBlock root = skeleton(bct, 0);
    std::vector<HBlock*> leaves;
    collect_leaves(root, leaves);

    parallel_for(leaves.size(), [&](std::size_t l) {
        HBlock& b = *leaves[l];
        if (b.kind == HBlock::Kind::dense) {
            b.dense.resize(idx(b.nrows()), idx(b.ncols()));
            ev.fill(b.rows, b.cols, b.dense);
        }
        else {
            const auto r0 = b.rows.begin, c0 = b.cols.begin;
            b.lowrank = aca_approximate([&](std::size_t i, std::size_t j) { return ev(r0 + i, c0 + j); }, b.nrows(),
                                        b.ncols(), ctl);
        }
    });

    return HMatrix(bct.cluster_tree_ptr(), std::move(root), false);
}

HMatrix hmatrix_from_dense(const BlockClusterTree& bct, const MatrixXd& m, const TruncationControl& ctl)
{
    check_tree(bct);
    ctl.validate();
    const auto n = idx(bct.cluster_tree().size());
    if (m.rows() != n || m.cols() != n)
        throw Error("hmatrix_from_dense: dimension mismatch");

    HBlock root = skeleton(bct, 0);
    std::vector<HBlock*> leaves;
    collect_leaves(root, leaves);
    for (HBlock* b : leaves) {
        auto sub = m.block(idx(b->rows.begin), idx(b->cols.begin), idx(b->nrows()), idx(b->ncols()));
        if (b->kind == HBlock::Kind::dense)
            b->dense = sub;
        else
            b->lowrank = aca_approximate([&](std::size_t i, std::size_t j) { return sub(idx(i), idx(j)); },
                                         b->nrows(), b->ncols(), ctl);
    }
    return HMatrix(bct.cluster_tree_ptr(), std::move(root), m.isApprox(m.transpose(), 0.0));
}

HMatrix identity_hmatrix(const BlockClusterTree& bct)
{
    check_tree(bct);
    HBlock root = skeleton(bct, 0);
    std::vector<HBlock*> leaves;
    collect_leaves(root, leaves);
    for (HBlock* b : leaves) {
        if (b->kind != HBlock::Kind::dense)
            continue;
        b->dense = MatrixXd::Zero(idx(b->nrows()), idx(b->ncols()));
        if (b->rows == b->cols)
            b->dense.setIdentity();
    }
    return HMatrix(bct.cluster_tree_ptr(), std::move(root), true);
}

namespace {

void symmetrize_pair(HBlock& x, HBlock& y, const TruncationControl& ctl)
{
    if (x.kind != y.kind)
        throw Error("symmetrize: block structure is not symmetric");

    if (&x == &y) {
        switch (x.kind) {
        case HBlock::Kind::dense: {
            MatrixXd avg = 0.5 * (x.dense + x.dense.transpose());
            x.dense = std::move(avg);
            return;
        }
        case HBlock::Kind::lowrank:
            throw Error("symmetrize: low-rank diagonal block");
        case HBlock::Kind::hierarchical:
            for (int i = 0; i < x.nrow_sons; ++i)
                for (int j = i; j < x.ncol_sons; ++j)
                    symmetrize_pair(x.son(i, j), x.son(j, i), ctl);
            return;
        }
    }

    switch (x.kind) {
    case HBlock::Kind::dense: {
        MatrixXd avg = 0.5 * (x.dense + y.dense.transpose());
        y.dense = avg.transpose();
        x.dense = std::move(avg);
        return;
    }
    case HBlock::Kind::lowrank: {
        const auto kx = idx(x.lowrank.rank()), ky = idx(y.lowrank.rank());
        LowRankBlock sum;
        sum.A.resize(idx(x.nrows()), kx + ky);
        sum.B.resize(idx(x.ncols()), kx + ky);
        sum.A << 0.5 * x.lowrank.A, 0.5 * y.lowrank.B;
        sum.B << x.lowrank.B, y.lowrank.A;
        x.lowrank = recompress_svd(sum, ctl);
        y.lowrank = x.lowrank.transposed();
        return;
    }
    case HBlock::Kind::hierarchical:
        if (x.nrow_sons != y.ncol_sons || x.ncol_sons != y.nrow_sons)
            throw Error("symmetrize: block structure is not symmetric");
        for (int i = 0; i < x.nrow_sons; ++i)
            for (int j = 0; j < x.ncol_sons; ++j)
                symmetrize_pair(x.son(i, j), y.son(j, i), ctl);
        return;
    }
}

} // namespace

HMatrix symmetrize(const HMatrix& h, const TruncationControl& ctl)
{
    if (h.root().rows != h.root().cols)
        throw Error("symmetrize: matrix is not square");
    HMatrix out = h;
    symmetrize_pair(out.root(), out.root(), ctl);
    out.set_symmetric(true);
    return out;
}

Eigen::VectorXd matvec(const HMatrix& h, const Eigen::VectorXd& x)
{
    Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
    h.apply(1.0, x, y);
    return y;
}

void truncated_multiply_add(HMatrix& c, double alpha, const HMatrix& a, const HMatrix& b, double beta,
                            const TruncationControl& ctl)
{
    ctl.validate();
    if (a.cluster_tree_ptr() != c.cluster_tree_ptr() || b.cluster_tree_ptr() != c.cluster_tree_ptr())
        throw Error("truncated_multiply_add: operands use different cluster trees");
    if (beta != 1.0)
        c.scale(beta);
    if (alpha != 0.0)
        detail::multiply(alpha, a.root(), {&b.root(), false}, c.root(), ctl, false);
    detail::flush(c.root(), ctl);
    c.set_symmetric(false);
}

namespace {

void add_block(HBlock& c, double alpha, const HBlock& a, const TruncationControl& ctl)
{
    if (c.kind != a.kind || c.rows != a.rows || c.cols != a.cols)
        throw Error("truncated_add: block structures differ");
    switch (c.kind) {
    case HBlock::Kind::dense:
        c.dense += alpha * a.dense;
        return;
    case HBlock::Kind::lowrank:
        detail::add_lowrank(c, alpha * a.lowrank.A, a.lowrank.B, ctl);
        return;
    case HBlock::Kind::hierarchical:
        for (std::size_t s = 0; s < c.sons.size(); ++s)
            add_block(c.sons[s], alpha, a.sons[s], ctl);
        return;
    }
}

} // namespace

void truncated_add(HMatrix& c, double alpha, const HMatrix& a, const TruncationControl& ctl)
{
    ctl.validate();
    add_block(c.root(), alpha, a.root(), ctl);
    detail::flush(c.root(), ctl);
    c.set_symmetric(c.symmetric() && a.symmetric());
}

namespace {

void storage_of(const HBlock& b, StorageReport& r)
{
    r.bytes += sizeof(HBlock);
    switch (b.kind) {
    case HBlock::Kind::dense:
        ++r.dense_leaves;
        r.payload_bytes += sizeof(double) * static_cast<std::size_t>(b.dense.size());
        return;
    case HBlock::Kind::lowrank:
        ++r.lowrank_leaves;
        r.payload_bytes += sizeof(double) * (b.nrows() + b.ncols()) * b.lowrank.rank();
        r.max_rank = std::max(r.max_rank, b.lowrank.rank());
        return;
    case HBlock::Kind::hierarchical:
        ++r.inner_blocks;
        for (const auto& s : b.sons)
            storage_of(s, r);
        return;
    }
}

} // namespace

StorageReport storage_report(const HMatrix& h)
{
    StorageReport r;
    storage_of(h.root(), r);
    r.bytes += r.payload_bytes;
    r.bytes_per_dof = h.size() == 0 ? 0.0 : static_cast<double>(r.bytes) / static_cast<double>(h.size());
    return r;
}

namespace detail {

void apply_block(const HBlock& b, bool transpose, double alpha, const Eigen::Ref<const MatrixXd>& x,
                 Eigen::Ref<MatrixXd> y)
{
    switch (b.kind) {
    case HBlock::Kind::dense:
        if (transpose)
            y.noalias() += alpha * (b.dense.transpose() * x);
        else
            y.noalias() += alpha * (b.dense * x);
        return;
    case HBlock::Kind::lowrank:
        if (b.lowrank.rank() == 0)
            return;
        if (transpose) {
            const MatrixXd t = b.lowrank.A.transpose() * x;
            y.noalias() += alpha * (b.lowrank.B * t);
        }
        else {
            const MatrixXd t = b.lowrank.B.transpose() * x;
            y.noalias() += alpha * (b.lowrank.A * t);
        }
        return;
    case HBlock::Kind::hierarchical:
        for (const auto& s : b.sons) {
            const auto ro = row_offset(b, s), co = col_offset(b, s);
            const auto nr = idx(s.nrows()), nc = idx(s.ncols());
            if (transpose)
                apply_block(s, true, alpha, x.middleRows(ro, nr), y.middleRows(co, nc));
            else
                apply_block(s, false, alpha, x.middleRows(co, nc), y.middleRows(ro, nr));
        }
        return;
    }
}

MatrixXd block_to_dense(const HBlock& b)
{
    switch (b.kind) {
    case HBlock::Kind::dense:
        return b.dense;
    case HBlock::Kind::lowrank:
        return b.lowrank.rank() == 0 ? MatrixXd::Zero(idx(b.nrows()), idx(b.ncols())) : b.lowrank.to_dense();
    case HBlock::Kind::hierarchical:
        break;
    }
    MatrixXd out(idx(b.nrows()), idx(b.ncols()));
    for (const auto& s : b.sons)
        out.block(row_offset(b, s), col_offset(b, s), idx(s.nrows()), idx(s.ncols())) = block_to_dense(s);
    return out;
}

namespace {

MatrixXd view_to_dense(BlockView v)
{
    MatrixXd d = block_to_dense(*v.block);
    if (v.transposed)
        return d.transpose();
    return d;
}

//! y += alpha op(v)^T x
void apply_view_t(BlockView v, double alpha, const Eigen::Ref<const MatrixXd>& x, Eigen::Ref<MatrixXd> y)
{
    apply_block(*v.block, !v.transposed, alpha, x, y);
}

// alpha * A * op(B) as U W^T when at least one factor is a leaf
void leaf_product(double alpha, const HBlock& a, BlockView b, MatrixXd& u, MatrixXd& w)
{
    const auto p = idx(a.nrows());
    const auto s = idx(a.ncols());
    const auto q = idx(b.cols().size());

    if (a.kind == HBlock::Kind::lowrank) {
        const auto k = a.lowrank.A.cols();
        u = alpha * a.lowrank.A;
        w = MatrixXd::Zero(q, k);
        if (k > 0)
            apply_view_t(b, 1.0, a.lowrank.B, w);
        return;
    }
    if (b.kind() == HBlock::Kind::lowrank) {
        const auto& lr = b.block->lowrank;
        const MatrixXd& ub = b.transposed ? lr.B : lr.A;
        const MatrixXd& vb = b.transposed ? lr.A : lr.B;
        u = MatrixXd::Zero(p, ub.cols());
        if (ub.cols() > 0)
            apply_block(a, false, alpha, ub, u);
        w = vb;
        return;
    }
    if (a.kind == HBlock::Kind::dense) {
        if (s <= p) {
            u = alpha * a.dense;
            w = MatrixXd::Zero(q, s);
            apply_view_t(b, 1.0, MatrixXd::Identity(s, s), w);
        }
        else {
            u = alpha * MatrixXd::Identity(p, p);
            w = MatrixXd::Zero(q, p);
            apply_view_t(b, 1.0, a.dense.transpose(), w);
        }
        return;
    }
    // b is a dense leaf
    MatrixXd bd = view_to_dense(b);
    if (s <= q) {
        u = MatrixXd::Zero(p, s);
        apply_block(a, false, alpha, MatrixXd::Identity(s, s), u);
        w = bd.transpose();
    }
    else {
        u = MatrixXd::Zero(p, q);
        apply_block(a, false, alpha, bd, u);
        w = MatrixXd::Identity(q, q);
    }
}

} // namespace

namespace {

// rank a low-rank block may reach before collected updates are recompressed
Index pending_limit(const HBlock& c)
{
    return std::min<Index>(48, idx(std::min(c.nrows(), c.ncols())) / 2);
}

} // namespace

void add_lowrank(HBlock& c, const Eigen::Ref<const MatrixXd>& u, const Eigen::Ref<const MatrixXd>& w,
                 const TruncationControl& ctl, bool lower_only)
{
    if (u.cols() == 0)
        return;
    switch (c.kind) {
    case HBlock::Kind::dense:
        c.dense.noalias() += u * w.transpose();
        return;
    case HBlock::Kind::lowrank: {
        const auto k = c.lowrank.A.cols();
        LowRankBlock sum;
        sum.A.resize(u.rows(), k + u.cols());
        sum.B.resize(w.rows(), k + w.cols());
        sum.A << c.lowrank.A, u;
        sum.B << c.lowrank.B, w;
        c.lowrank = std::move(sum);
        c.pending = true;
        if (idx(c.lowrank.rank()) > pending_limit(c))
            flush(c, ctl);
        return;
    }
    case HBlock::Kind::hierarchical:
        for (int i = 0; i < c.nrow_sons; ++i)
            for (int j = 0; j < c.ncol_sons; ++j) {
                if (lower_only && c.is_diagonal() && j > i)
                    continue;
                auto& s = c.son(i, j);
                add_lowrank(s, u.middleRows(row_offset(c, s), idx(s.nrows())),
                            w.middleRows(col_offset(c, s), idx(s.ncols())), ctl, lower_only && i == j);
            }
        return;
    }
}

void multiply(double alpha, const HBlock& a, BlockView b, HBlock& c, const TruncationControl& ctl, bool lower_only)
{
    if (a.rows != c.rows || b.cols() != c.cols || a.cols != b.rows())
        throw Error("multiply: nonconformable blocks");

    if (!a.is_leaf() && b.kind() == HBlock::Kind::hierarchical && !c.is_leaf()) {
        if (a.nrow_sons != c.nrow_sons || b.ncol_sons() != c.ncol_sons || a.ncol_sons != b.nrow_sons())
            throw Error("multiply: block partitions differ");
        for (int i = 0; i < c.nrow_sons; ++i)
            for (int j = 0; j < c.ncol_sons; ++j) {
                if (lower_only && c.is_diagonal() && j > i)
                    continue;
                for (int k = 0; k < a.ncol_sons; ++k)
                    multiply(alpha, a.son(i, k), b.son(k, j), c.son(i, j), ctl, lower_only && i == j);
            }
        return;
    }

    if (a.is_leaf() || b.kind() != HBlock::Kind::hierarchical) {
        MatrixXd u, w;
        leaf_product(alpha, a, b, u, w);
        add_lowrank(c, u, w, ctl, lower_only);
        return;
    }

    // c is a leaf, a and b are hierarchical
    if (c.kind == HBlock::Kind::dense) {
        const MatrixXd bd = view_to_dense(b);
        apply_block(a, false, alpha, bd, c.dense);
        return;
    }

    // low-rank target: split along the operands' partitions, recurse, merge
    const int nr = a.nrow_sons, nc = b.ncol_sons();
    std::vector<HBlock> parts(static_cast<std::size_t>(nr * nc));
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j) {
            auto& t = parts[static_cast<std::size_t>(i * nc + j)];
            t.kind = HBlock::Kind::lowrank;
            t.rows = a.son(i, 0).rows;
            t.cols = b.son(0, j).cols();
            t.lowrank = LowRankBlock(t.nrows(), t.ncols());
            for (int k = 0; k < a.ncol_sons; ++k)
                multiply(alpha, a.son(i, k), b.son(k, j), t, ctl, false);
            flush(t, ctl);
        }

    Index total = 0;
    for (const auto& t : parts)
        total += t.lowrank.A.cols();
    LowRankBlock merged;
    merged.A = MatrixXd::Zero(idx(c.nrows()), total);
    merged.B = MatrixXd::Zero(idx(c.ncols()), total);
    Index at = 0;
    for (const auto& t : parts) {
        const auto k = t.lowrank.A.cols();
        const auto ro = idx(t.rows.begin - c.rows.begin), co = idx(t.cols.begin - c.cols.begin);
        merged.A.block(ro, at, idx(t.nrows()), k) = t.lowrank.A;
        merged.B.block(co, at, idx(t.ncols()), k) = t.lowrank.B;
        at += k;
    }
    merged = recompress_svd(merged, ctl);
    add_lowrank(c, merged.A, merged.B, ctl);
}

void flush(HBlock& b, const TruncationControl& ctl)
{
    if (b.kind == HBlock::Kind::hierarchical) {
        for (auto& s : b.sons)
            flush(s, ctl);
        return;
    }
    if (b.pending) {
        b.lowrank = recompress_svd(b.lowrank, ctl);
        b.pending = false;
    }
}

void scale_block(HBlock& b, double alpha)
{
    switch (b.kind) {
    case HBlock::Kind::dense:
        b.dense *= alpha;
        return;
    case HBlock::Kind::lowrank:
        b.lowrank.A *= alpha;
        return;
    case HBlock::Kind::hierarchical:
        for (auto& s : b.sons)
            scale_block(s, alpha);
        return;
    }
}

void scale_columns(HBlock& b, const Eigen::VectorXd& d)
{
    const auto seg = d.segment(idx(b.cols.begin), idx(b.ncols()));
    switch (b.kind) {
    case HBlock::Kind::dense:
        b.dense = b.dense * seg.asDiagonal();
        return;
    case HBlock::Kind::lowrank:
        b.lowrank.B = seg.asDiagonal() * b.lowrank.B;
        return;
    case HBlock::Kind::hierarchical:
        for (auto& s : b.sons)
            scale_columns(s, d);
        return;
    }
}

void set_zero(HBlock& b)
{
    switch (b.kind) {
    case HBlock::Kind::dense:
        b.dense.setZero();
        return;
    case HBlock::Kind::lowrank:
        b.lowrank = LowRankBlock(b.nrows(), b.ncols());
        return;
    case HBlock::Kind::hierarchical:
        for (auto& s : b.sons)
            set_zero(s);
        return;
    }
}

} // namespace detail

} // namespace hcov
