#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "se3/error.hpp"
#include "se3/graph.hpp"
#include "se3/parallel.hpp"

using namespace se3;

namespace {

std::vector<Vec3> random_cloud(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    return pts;
}

// O(N^2) reference: sort every other point by (distance, index).
std::vector<std::vector<std::size_t>> brute_knn(const std::vector<Vec3>& pts, std::size_t k) {
    std::vector<std::vector<std::size_t>> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (j != i) idx.push_back(j);
        }
        auto dist = [&](std::size_t j) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) s += (pts[j][c] - pts[i][c]) * (pts[j][c] - pts[i][c]);
            return s;
        };
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
        idx.resize(std::min(k, idx.size()));
        out[i] = idx;
    }
    return out;
}

}  // namespace

TEST(Knn, CollinearTieGoesToLowerIndex) {
    std::vector<Vec3> pts = {{-1, 0, 0}, {0, 0, 0}, {1, 0, 0}};
    const NeighborGraph g = knn_neighborhoods(pts, 1);
    EXPECT_EQ(g.neighbors(1), std::vector<std::size_t>{0});
    EXPECT_EQ(g.neighbors(0), std::vector<std::size_t>{1});
    EXPECT_EQ(g.neighbors(2), std::vector<std::size_t>{1});
}

TEST(Knn, AgreesWithBruteForceOn200Clouds) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 40;
        const std::size_t k = 1 + rng() % 8;
        const auto pts = random_cloud(rng, n);
        const NeighborGraph g = knn_neighborhoods(pts, k);
        const auto ref = brute_knn(pts, k);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(g.neighbors(i), ref[i]);
            EXPECT_EQ(g.neighbors(i).size(), std::min(k, n - 1));
            for (std::size_t j : g.neighbors(i)) EXPECT_NE(j, i);
        }
    }
}

TEST(Knn, ClampsLargeKWithWarning) {
    std::mt19937_64 rng(2);
    const auto pts = random_cloud(rng, 4);
    const NeighborGraph g = knn_neighborhoods(pts, 10);
    EXPECT_EQ(g.edges(), 12u);
    ASSERT_EQ(g.warnings.size(), 1u);
    EXPECT_NE(g.warnings[0].find("clamped"), std::string::npos);
    EXPECT_THROW(knn_neighborhoods(pts, 0), ArgumentError);
    EXPECT_THROW(knn_neighborhoods(std::vector<Vec3>{{0, 0, 0}}, 1), ArgumentError);
}

TEST(Knn, InvariantUnderRigidMotions) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = random_cloud(rng, 30);
        const Rotation g = rotation_sample(rng);
        const Vec3 t = {u(rng), u(rng), u(rng)};
        std::vector<Vec3> moved;
        for (const Vec3& p : pts) {
            Vec3 q = g.apply(p);
            moved.push_back({q[0] + t[0], q[1] + t[1], q[2] + t[2]});
        }
        EXPECT_EQ(knn_neighborhoods(pts, 6).src, knn_neighborhoods(moved, 6).src);
    }
}

TEST(Knn, IndependentOfThreadCount) {
    std::mt19937_64 rng(4);
    const auto pts = random_cloud(rng, 300);
    const int saved = thread_count();
    set_thread_count(1);
    const auto a = knn_neighborhoods(pts, 8).src;
    set_thread_count(4);
    const auto b = knn_neighborhoods(pts, 8).src;
    set_thread_count(saved);
    EXPECT_EQ(a, b);
}

TEST(RelativeGeometry, TranslationLeavesEdgeVectorsBitwiseEqual) {
    // Dyadic coordinates keep the shifted differences exact.
    std::vector<Vec3> pts = {{0.5, 1.25, -2.0}, {3.0, -0.75, 0.125}, {-1.5, 2.0, 4.0}, {0.0, 0.0, 1.0}};
    std::vector<Vec3> shifted;
    for (const Vec3& p : pts) shifted.push_back({p[0] + 5, p[1] - 3, p[2] + 2});
    const NeighborGraph g = fully_connected(4);
    EXPECT_EQ(relative_geometry(g, pts).vectors, relative_geometry(g, shifted).vectors);
}

TEST(RelativeGeometry, UnitPairAndAntisymmetry) {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}};
    const auto geo = relative_geometry(fully_connected(2), pts);
    EXPECT_EQ(geo.vectors[0], (Vec3{1, 0, 0}));
    EXPECT_EQ(geo.vectors[1], (Vec3{-1, 0, 0}));
    EXPECT_EQ(geo.radii[0], 1.0);

    std::mt19937_64 rng(5);
    const auto cloud = random_cloud(rng, 12);
    const NeighborGraph g = fully_connected(12);
    const auto all = relative_geometry(g, cloud);
    for (std::size_t e = 0; e < g.edges(); ++e) {
        for (std::size_t f = 0; f < g.edges(); ++f) {
            if (g.src[e] == g.dst[f] && g.dst[e] == g.src[f]) {
                for (int c = 0; c < 3; ++c) EXPECT_EQ(all.vectors[e][c], -all.vectors[f][c]);
            }
        }
    }
}

TEST(RelativeGeometry, RotationMapsEdgeVectors) {
    std::mt19937_64 rng(6);
    const auto pts = random_cloud(rng, 10);
    const Rotation g = rotation_sample(rng);
    std::vector<Vec3> rotated;
    for (const Vec3& p : pts) rotated.push_back(g.apply(p));
    const NeighborGraph graph = knn_neighborhoods(pts, 4);
    const auto a = relative_geometry(graph, pts);
    const auto b = relative_geometry(graph, rotated);
    const Eigen::Matrix3d r = to_matrix(g);
    for (std::size_t e = 0; e < graph.edges(); ++e) {
        const Eigen::Vector3d expect = r * Eigen::Vector3d(a.vectors[e][0], a.vectors[e][1], a.vectors[e][2]);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(b.vectors[e][c], expect(c), 1e-12);
    }
}

TEST(RelativeGeometry, DuplicatesAreFlaggedAndCanBeDropped) {
    std::vector<Vec3> pts = {{0, 0, 0}, {1, 1, 1}, {0, 0, 0}, {2, 0, 0}};
    const auto geo = relative_geometry(fully_connected(4), pts);
    EXPECT_EQ(geo.degenerate.size(), 2u);
    EXPECT_EQ(dedupe_points(pts), (std::vector<std::size_t>{0, 1, 3}));
}

TEST(PlusZ, SymmetryBreakingBehaviour) {
    std::mt19937_64 rng(7);
    const auto pts = random_cloud(rng, 8);
    FeatureMap base;
    base[0] = Tensor({8, 1, 1}, 0.5);
    const FeatureMap f = plus_z_features(pts, base);
    ASSERT_EQ(f.at(0).shape, (Shape{8, 3, 1}));
    ASSERT_EQ(f.at(1).shape, (Shape{8, 1, 3}));
    EXPECT_EQ(f.at(0)[0], 0.5);

    const Rotation about_z = Rotation::from_axis_angle({0, 0, 1}, 1.1);
    const Rotation about_x = Rotation::from_axis_angle({1, 0, 0}, 1.1);
    std::vector<Vec3> rz, rx;
    for (const Vec3& p : pts) {
        rz.push_back(about_z.apply(p));
        rx.push_back(about_x.apply(p));
    }
    const FeatureMap fz = plus_z_features(rz, base);
    const FeatureMap fx = plus_z_features(rx, base);
    double moved = 0.0;
    for (std::size_t i = 0; i < f.at(0).size(); ++i) {
        EXPECT_NEAR(fz.at(0)[i], f.at(0)[i], 1e-12);
        moved = std::max(moved, std::abs(fx.at(0)[i] - f.at(0)[i]));
    }
    EXPECT_GT(moved, 1e-3);

    std::vector<Vec3> flat = pts;
    for (Vec3& p : flat) p[2] = 0.0;
    const FeatureMap ff = plus_z_features(flat, {});
    for (double v : ff.at(0).data) EXPECT_EQ(v, 0.0);
    // (x, y, 0) in SH ordering is (-y, 0, -x).
    EXPECT_EQ(ff.at(1)[0], -flat[0][1]);
    EXPECT_EQ(ff.at(1)[1], 0.0);
    EXPECT_EQ(ff.at(1)[2], -flat[0][0]);
}

TEST(PointCloudIo, RoundTripsJsonLines) {
    PointCloud a;
    a.positions = {{0.1, 0.2, 0.3}, {1.0 / 3.0, -2.0, 5e-17}};
    a.features[0] = Tensor({2, 1, 1}, std::vector<double>{1.0, -1.0});
    a.features[1] = Tensor({2, 1, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    a.adjacency = std::vector<std::vector<std::size_t>>{{1}, {0}};
    a.edge_scalars = Tensor({2, 1}, std::vector<double>{0.25, 0.75});
    PointCloud b;
    b.positions = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}};
    const std::string path = (std::filesystem::temp_directory_path() / "se3_clouds.jsonl").string();
    write_point_clouds(path, std::vector<PointCloud>{a, b});
    const auto back = read_point_clouds(path);
    std::remove(path.c_str());
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].positions, a.positions);
    EXPECT_EQ(back[0].features.at(1).data, a.features.at(1).data);
    EXPECT_EQ(*back[0].adjacency, *a.adjacency);
    EXPECT_EQ(back[0].edge_scalars->data, a.edge_scalars->data);
    EXPECT_FALSE(back[1].adjacency.has_value());

    const NeighborGraph g = from_adjacency(2, *back[0].adjacency, back[0].edge_scalars);
    EXPECT_EQ(g.edges(), 2u);
    EXPECT_THROW(read_point_clouds("/nonexistent/clouds.jsonl"), IoError);
    EXPECT_THROW(from_adjacency(2, {{0}, {}}), ArgumentError);
}

TEST(BatchGraphs, ShiftsIndices) {
    const NeighborGraph a = fully_connected(2), b = fully_connected(3);
    const std::vector<NeighborGraph> parts = {a, b};
    const NeighborGraph g = batch_graphs(parts);
    EXPECT_EQ(g.nodes, 5u);
    EXPECT_EQ(g.edges(), 8u);
    EXPECT_EQ(g.neighbors(2), (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(g.offsets.back(), 8u);
}
