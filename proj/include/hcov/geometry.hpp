#pragma once
//
// Cluster trees over scattered locations and the admissibility-partitioned
// block cluster tree built on top of them.
//

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hcov/error.hpp"

namespace hcov {

//! Scattered locations in R^d, stored point-major.
class PointSet
{
public:
    PointSet() = default;
    PointSet(std::size_t dim, std::vector<double> coords);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    bool empty() const noexcept { return size() == 0; }

    std::span<const double> point(std::size_t i) const
    {
        return {coords_.data() + i * dim_, dim_};
    }
    const std::vector<double>& coords() const noexcept { return coords_; }

    void push_back(std::span<const double> p);

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
};

double distance(std::span<const double> a, std::span<const double> b);

struct BoundingBox
{
    std::vector<double> lo, hi;

    static BoundingBox of(const PointSet& ps, std::span<const std::size_t> idx);

    double diameter() const;
    double distance_to(const BoundingBox& other) const;
    //! axis of largest extent; ties go to the lowest axis
    std::size_t widest_axis() const;
};

struct IndexRange
{
    std::size_t begin = 0, end = 0;
    std::size_t size() const noexcept { return end - begin; }
    bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
    bool operator==(const IndexRange&) const = default;
};

struct Cluster
{
    IndexRange range; // internal ordering
    BoundingBox box;
    int sons[2] = {-1, -1};
    int depth = 0;

    bool is_leaf() const noexcept { return sons[0] < 0; }
    std::size_t size() const noexcept { return range.size(); }
};

enum class PermDirection { e2i, i2e };

//! Binary space partitioning of the index set. Node 0 is the root.
class ClusterTree
{
public:
    const std::vector<Cluster>& clusters() const noexcept { return clusters_; }
    const Cluster& cluster(int id) const { return clusters_.at(static_cast<std::size_t>(id)); }
    const Cluster& root() const { return clusters_.front(); }

    std::size_t size() const noexcept { return perm_i2e_.size(); }
    std::size_t n_min() const noexcept { return n_min_; }
    std::size_t dim() const noexcept { return internal_points_.dim(); }
    std::size_t depth() const;
    std::size_t leaf_count() const;

    //! perm_e2i[external] = internal
    const std::vector<std::size_t>& perm_e2i() const noexcept { return perm_e2i_; }
    //! perm_i2e[internal] = external
    const std::vector<std::size_t>& perm_i2e() const noexcept { return perm_i2e_; }

    //! locations reordered into internal index order
    const PointSet& internal_points() const noexcept { return internal_points_; }

    template <typename Vec>
    Vec permute(const Vec& v, PermDirection dir) const;

    friend ClusterTree build_cluster_tree(const PointSet& ps, std::size_t n_min);

private:
    std::vector<Cluster> clusters_;
    std::vector<std::size_t> perm_e2i_, perm_i2e_;
    PointSet internal_points_;
    std::size_t n_min_ = 0;
};

/// Median split along the widest bounding-box axis until clusters hold at
/// most n_min indices. The left son receives the extra index for odd sizes.
ClusterTree build_cluster_tree(const PointSet& ps, std::size_t n_min = 32);

bool is_admissible(const Cluster& tau, const Cluster& sigma, double eta = 2.0);

std::vector<double> apply_permutation(const ClusterTree& ct, std::span<const double> v, PermDirection dir);

enum class BlockKind { inner, admissible, dense };

struct BlockNode
{
    int row = -1, col = -1; // cluster ids
    BlockKind kind = BlockKind::inner;
    int nrow_sons = 0, ncol_sons = 0;
    std::vector<int> sons; // row-major, nrow_sons x ncol_sons
};

class BlockClusterTree
{
public:
    const ClusterTree& cluster_tree() const noexcept { return *ct_; }
    const std::shared_ptr<const ClusterTree>& cluster_tree_ptr() const noexcept { return ct_; }
    const std::vector<BlockNode>& nodes() const noexcept { return nodes_; }
    const BlockNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const BlockNode& root() const { return nodes_.front(); }
    double eta() const noexcept { return eta_; }

    std::vector<int> leaves() const;
    std::size_t count(BlockKind kind) const;

    friend BlockClusterTree build_block_cluster_tree(std::shared_ptr<const ClusterTree> ct, double eta);

private:
    std::shared_ptr<const ClusterTree> ct_;
    std::vector<BlockNode> nodes_;
    double eta_ = 2.0;
};

/// Refine (root, root) by the son rule until blocks are admissible or both
/// clusters are leaves.
BlockClusterTree build_block_cluster_tree(std::shared_ptr<const ClusterTree> ct, double eta = 2.0);

template <typename Vec>
Vec ClusterTree::permute(const Vec& v, PermDirection dir) const
{
    const auto& perm = dir == PermDirection::e2i ? perm_e2i_ : perm_i2e_;
    if (static_cast<std::size_t>(v.size()) != perm.size())
        throw Error("permutation: length mismatch");
    Vec out(v.size());
    // e2i: out[e2i[e]] = v[e];  i2e: out[i2e[i]] = v[i]
    for (std::size_t k = 0; k < perm.size(); ++k)
        out[perm[k]] = v[k];
    return out;
}

} // namespace hcov
