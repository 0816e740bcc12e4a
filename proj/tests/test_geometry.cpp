#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "hcov/geometry.hpp"
#include "support.hpp"

using namespace hcov;

namespace {

std::shared_ptr<const ClusterTree> tree(const PointSet& ps, std::size_t n_min)
{
    return std::make_shared<const ClusterTree>(build_cluster_tree(ps, n_min));
}

Cluster box_cluster(std::vector<double> lo, std::vector<double> hi)
{
    Cluster c;
    c.box.lo = std::move(lo);
    c.box.hi = std::move(hi);
    return c;
}

} // namespace

TEST_CASE("collinear points split at the median")
{
    PointSet ps(2, {0.0, 0.0, 3.0, 0.0, 1.0, 0.0, 2.0, 0.0});
    auto ct = build_cluster_tree(ps, 1);
    CHECK(ct.depth() == 2);
    const auto& root = ct.root();
    REQUIRE(!root.is_leaf());
    CHECK(ct.cluster(root.sons[0]).size() == 2);
    CHECK(ct.cluster(root.sons[1]).size() == 2);
    CHECK(ct.leaf_count() == 4);

    // internal order sorts along x
    for (std::size_t i = 0; i + 1 < 4; ++i)
        CHECK(ct.internal_points().point(i)[0] < ct.internal_points().point(i + 1)[0]);
}

TEST_CASE("a single point gives a single leaf and identity permutations")
{
    PointSet ps(2, {0.5, 0.5});
    auto ct = build_cluster_tree(ps, 32);
    CHECK(ct.clusters().size() == 1);
    CHECK(ct.root().is_leaf());
    CHECK(ct.perm_e2i() == std::vector<std::size_t>{0});
    CHECK(ct.perm_i2e() == std::vector<std::size_t>{0});

    std::vector<double> v{7.0};
    CHECK(apply_permutation(ct, v, PermDirection::e2i) == v);
}

TEST_CASE("leaf sizes and counts on random points")
{
    auto ps = testing::random_points(1000, 11);
    auto ct = build_cluster_tree(ps, 32);
    std::size_t leaves = 0, covered = 0;
    for (const auto& c : ct.clusters()) {
        if (c.is_leaf()) {
            ++leaves;
            covered += c.size();
            CHECK(c.size() <= 32);
        }
        else {
            // median split: sibling sizes differ by at most one, left gets the extra
            const auto& l = ct.cluster(c.sons[0]);
            const auto& r = ct.cluster(c.sons[1]);
            CHECK(l.size() + r.size() == c.size());
            CHECK(l.size() >= r.size());
            CHECK(l.size() - r.size() <= 1);
            CHECK(l.range.begin == c.range.begin);
            CHECK(r.range.end == c.range.end);
        }
    }
    CHECK(leaves == ct.leaf_count());
    CHECK(leaves >= 32);
    CHECK(covered == 1000);
}

TEST_CASE("permutations are mutually inverse and match the stored tables")
{
    auto ps = testing::random_points(300, 5);
    auto ct = build_cluster_tree(ps, 16);
    const auto& e2i = ct.perm_e2i();
    const auto& i2e = ct.perm_i2e();
    for (std::size_t k = 0; k < 300; ++k) {
        CHECK(i2e[e2i[k]] == k);
        CHECK(e2i[i2e[k]] == k);
    }

    std::vector<double> v(300);
    std::mt19937_64 gen(9);
    std::normal_distribution<double> g;
    for (auto& x : v)
        x = g(gen);
    const auto there = apply_permutation(ct, v, PermDirection::e2i);
    const auto back = apply_permutation(ct, there, PermDirection::i2e);
    CHECK(back == v);

    // external index k lands on internal slot e2i[k]
    std::vector<double> ids(300);
    std::iota(ids.begin(), ids.end(), 0.0);
    const auto moved = apply_permutation(ct, ids, PermDirection::e2i);
    for (std::size_t k = 0; k < 300; ++k)
        CHECK(moved[e2i[k]] == static_cast<double>(k));

    // internal points are the external points in i2e order
    for (std::size_t i = 0; i < 300; ++i)
        CHECK(distance(ct.internal_points().point(i), ps.point(i2e[i])) == 0.0);

    CHECK_THROWS_AS(apply_permutation(ct, std::vector<double>(3), PermDirection::e2i), Error);
}

TEST_CASE("admissibility on hand-made boxes")
{
    auto a = box_cluster({0.0, 0.0}, {1.0, 1.0});
    auto far = box_cluster({11.0, 0.0}, {12.0, 1.0});
    CHECK(is_admissible(a, far, 2.0));

    auto overlapping = box_cluster({0.5, 0.5}, {2.0, 2.0});
    CHECK_FALSE(is_admissible(a, overlapping, 2.0));

    // diam sqrt(2) vs eta * dist = 1.0
    auto near = box_cluster({1.5, 0.0}, {2.5, 1.0});
    CHECK(a.box.diameter() == doctest::Approx(std::sqrt(2.0)));
    CHECK(a.box.distance_to(near.box) == doctest::Approx(0.5));
    CHECK_FALSE(is_admissible(a, near, 2.0));
    CHECK(is_admissible(a, near, 3.0));
}

TEST_CASE("admissibility is symmetric")
{
    auto ps = testing::random_points(400, 21);
    auto ct = build_cluster_tree(ps, 8);
    const auto& cl = ct.clusters();
    for (std::size_t i = 0; i < cl.size(); i += 3)
        for (std::size_t j = 0; j < cl.size(); j += 5)
            CHECK(is_admissible(cl[i], cl[j], 2.0) == is_admissible(cl[j], cl[i], 2.0));
}

TEST_CASE("small problems give one dense block")
{
    auto ps = testing::random_points(20, 3);
    auto bct = build_block_cluster_tree(tree(ps, 32), 2.0);
    CHECK(bct.nodes().size() == 1);
    CHECK(bct.root().kind == BlockKind::dense);
    CHECK(bct.leaves().size() == 1);
}

TEST_CASE("two separated groups give two dense and two admissible blocks")
{
    std::vector<double> c;
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 64; ++i) {
        c.push_back(u(gen));
        c.push_back(u(gen));
    }
    for (int i = 0; i < 64; ++i) {
        c.push_back(10.0 + u(gen));
        c.push_back(u(gen));
    }
    auto bct = build_block_cluster_tree(tree(PointSet(2, c), 64), 2.0);
    CHECK(bct.count(BlockKind::dense) == 2);
    CHECK(bct.count(BlockKind::admissible) == 2);
    for (int id : bct.leaves()) {
        const auto& node = bct.node(id);
        CHECK((node.kind == BlockKind::dense) == (node.row == node.col));
    }
}

TEST_CASE("leaves partition the index product exactly")
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto ps = testing::random_points(500, seed);
        auto ct = tree(ps, 16);
        auto bct = build_block_cluster_tree(ct, 2.0);
        std::vector<int> hits(500 * 500, 0);
        std::size_t area = 0;
        for (int id : bct.leaves()) {
            const auto& node = bct.node(id);
            const auto rows = ct->cluster(node.row).range;
            const auto cols = ct->cluster(node.col).range;
            area += rows.size() * cols.size();
            for (auto i = rows.begin; i < rows.end; ++i)
                for (auto j = cols.begin; j < cols.end; ++j)
                    ++hits[i * 500 + j];

            if (node.kind == BlockKind::admissible)
                CHECK(is_admissible(ct->cluster(node.row), ct->cluster(node.col), 2.0));
            else
                CHECK((ct->cluster(node.row).is_leaf() && ct->cluster(node.col).is_leaf()));
        }
        CHECK(area == 500u * 500u);
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
}

TEST_CASE("three-dimensional point sets")
{
    auto ps = testing::random_points(600, 8, 3);
    auto ct = tree(ps, 32);
    CHECK(ct->dim() == 3);
    auto bct = build_block_cluster_tree(ct, 2.0);
    std::size_t area = 0;
    for (int id : bct.leaves())
        area += ct->cluster(bct.node(id).row).size() * ct->cluster(bct.node(id).col).size();
    CHECK(area == 600u * 600u);
    CHECK(bct.count(BlockKind::admissible) > 0);
}

TEST_CASE("invalid inputs are rejected")
{
    CHECK_THROWS_AS(PointSet(2, {1.0, 2.0, 3.0}), Error);
    CHECK_THROWS_AS(build_cluster_tree(PointSet(), 32), Error);
    CHECK_THROWS_AS(build_cluster_tree(testing::random_points(10, 1), 0), Error);
    CHECK_THROWS_AS(build_block_cluster_tree(tree(testing::random_points(10, 1), 4), 0.0), Error);
}
