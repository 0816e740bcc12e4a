#include "hcov/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hcov {

PointSet::PointSet(std::size_t dim, std::vector<double> coords)
    : dim_(dim)
    , coords_(std::move(coords))
{
    if (dim_ == 0)
        throw Error("point set: dimension must be positive");
    if (coords_.size() % dim_ != 0)
        throw Error("point set: coordinate count is not a multiple of the dimension");
    for (double c : coords_)
        if (!std::isfinite(c))
            throw Error("point set: non-finite coordinate");
}

void PointSet::push_back(std::span<const double> p)
{
    if (dim_ == 0)
        dim_ = p.size();
    if (p.size() != dim_ || dim_ == 0)
        throw Error("point set: dimension mismatch");
    for (double c : p)
        if (!std::isfinite(c))
            throw Error("point set: non-finite coordinate");
    coords_.insert(coords_.end(), p.begin(), p.end());
}

double distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

BoundingBox BoundingBox::of(const PointSet& ps, std::span<const std::size_t> idx)
{
    BoundingBox box;
    const auto d = ps.dim();
    box.lo.assign(d, std::numeric_limits<double>::infinity());
    box.hi.assign(d, -std::numeric_limits<double>::infinity());
    for (auto i : idx) {
        auto p = ps.point(i);
        for (std::size_t a = 0; a < d; ++a) {
            box.lo[a] = std::min(box.lo[a], p[a]);
            box.hi[a] = std::max(box.hi[a], p[a]);
        }
    }
    return box;
}

double BoundingBox::diameter() const
{
    double s = 0.0;
    for (std::size_t a = 0; a < lo.size(); ++a)
        s += (hi[a] - lo[a]) * (hi[a] - lo[a]);
    return std::sqrt(s);
}

double BoundingBox::distance_to(const BoundingBox& other) const
{
    double s = 0.0;
    for (std::size_t a = 0; a < lo.size(); ++a) {
        const double gap = std::max({0.0, other.lo[a] - hi[a], lo[a] - other.hi[a]});
        s += gap * gap;
    }
    return std::sqrt(s);
}

std::size_t BoundingBox::widest_axis() const
{
    std::size_t best = 0;
    for (std::size_t a = 1; a < lo.size(); ++a)
        if (hi[a] - lo[a] > hi[best] - lo[best])
            best = a;
    return best;
}

namespace {

int split(std::vector<Cluster>& clusters, const PointSet& ps, std::vector<std::size_t>& idx,
          IndexRange range, int depth, std::size_t n_min)
{
    const auto id = static_cast<int>(clusters.size());
    std::span<std::size_t> part(idx.data() + range.begin, range.size());
    clusters.push_back({range, BoundingBox::of(ps, part), {-1, -1}, depth});

    if (range.size() <= n_min)
        return id;

    const auto axis = clusters[id].box.widest_axis();
    std::stable_sort(part.begin(), part.end(), [&](std::size_t a, std::size_t b) {
        return ps.point(a)[axis] < ps.point(b)[axis];
    });

    const auto mid = range.begin + (range.size() + 1) / 2;
    const int left = split(clusters, ps, idx, {range.begin, mid}, depth + 1, n_min);
    const int right = split(clusters, ps, idx, {mid, range.end}, depth + 1, n_min);
    clusters[id].sons[0] = left;
    clusters[id].sons[1] = right;
    return id;
}

} // namespace

ClusterTree build_cluster_tree(const PointSet& ps, std::size_t n_min)
{
    if (ps.empty())
        throw Error("empty input");
    if (n_min < 1)
        throw Error("cluster tree: n_min must be at least 1");

    ClusterTree ct;
    ct.n_min_ = n_min;
    const auto n = ps.size();

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    split(ct.clusters_, ps, idx, {0, n}, 0, n_min);

    ct.perm_i2e_ = idx;
    ct.perm_e2i_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ct.perm_e2i_[idx[i]] = i;

    std::vector<double> coords;
    coords.reserve(n * ps.dim());
    for (auto e : idx) {
        auto p = ps.point(e);
        coords.insert(coords.end(), p.begin(), p.end());
    }
    ct.internal_points_ = PointSet(ps.dim(), std::move(coords));
    return ct;
}

std::size_t ClusterTree::depth() const
{
    int d = 0;
    for (const auto& c : clusters_)
        d = std::max(d, c.depth);
    return static_cast<std::size_t>(d);
}

std::size_t ClusterTree::leaf_count() const
{
    return static_cast<std::size_t>(
        std::count_if(clusters_.begin(), clusters_.end(), [](const Cluster& c) { return c.is_leaf(); }));
}

bool is_admissible(const Cluster& tau, const Cluster& sigma, double eta)
{
    const double dist = tau.box.distance_to(sigma.box);
    if (dist <= 0.0)
        return false;
    return std::min(tau.box.diameter(), sigma.box.diameter()) <= eta * dist;
}

std::vector<double> apply_permutation(const ClusterTree& ct, std::span<const double> v, PermDirection dir)
{
    return ct.permute(std::vector<double>(v.begin(), v.end()), dir);
}

namespace {

int refine(std::vector<BlockNode>& nodes, const ClusterTree& ct, int row, int col, double eta)
{
    const auto id = static_cast<int>(nodes.size());
    nodes.push_back({row, col, BlockKind::inner, 0, 0, {}});

    const auto& tau = ct.cluster(row);
    const auto& sigma = ct.cluster(col);

    if (is_admissible(tau, sigma, eta)) {
        nodes[id].kind = BlockKind::admissible;
        return id;
    }
    if (tau.is_leaf() && sigma.is_leaf()) {
        nodes[id].kind = BlockKind::dense;
        return id;
    }

    // a side without sons is kept whole
    std::vector<int> rs = tau.is_leaf() ? std::vector<int>{row} : std::vector<int>{tau.sons[0], tau.sons[1]};
    std::vector<int> cs = sigma.is_leaf() ? std::vector<int>{col} : std::vector<int>{sigma.sons[0], sigma.sons[1]};

    std::vector<int> sons;
    for (int r : rs)
        for (int c : cs)
            sons.push_back(refine(nodes, ct, r, c, eta));

    auto& node = nodes[id];
    node.nrow_sons = static_cast<int>(rs.size());
    node.ncol_sons = static_cast<int>(cs.size());
    node.sons = std::move(sons);
    return id;
}

} // namespace

BlockClusterTree build_block_cluster_tree(std::shared_ptr<const ClusterTree> ct, double eta)
{
    if (!ct)
        throw Error("block cluster tree: missing cluster tree");
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw Error("block cluster tree: eta must be positive");
    BlockClusterTree bct;
    bct.ct_ = std::move(ct);
    bct.eta_ = eta;
    refine(bct.nodes_, *bct.ct_, 0, 0, eta);
    return bct;
}

std::vector<int> BlockClusterTree::leaves() const
{
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].kind != BlockKind::inner)
            out.push_back(static_cast<int>(i));
    return out;
}

std::size_t BlockClusterTree::count(BlockKind kind) const
{
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [kind](const BlockNode& b) { return b.kind == kind; }));
}

} // namespace hcov
