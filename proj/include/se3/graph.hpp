#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "se3/so3.hpp"
#include "se3/tensor.hpp"

namespace se3 {

/// Per-degree node features: degree -> [N, C, 2l+1], SH ordering within the last axis.
using FeatureMap = std::map<int, Tensor>;

struct PointCloud {
    std::vector<Vec3> positions;
    FeatureMap features;
    /// Predefined neighborhoods (e.g. bonds); adjacency[i] lists the j that i attends to.
    std::optional<std::vector<std::vector<std::size_t>>> adjacency;
    /// [E, S], one row per adjacency entry in row-major order of adjacency.
    std::optional<Tensor> edge_scalars;
};

/// Edges are grouped by destination: edge e lets dst[e] = i attend to src[e] = j, and the
/// edges of node i occupy [offsets[i], offsets[i+1]).
struct NeighborGraph {
    std::size_t nodes = 0;
    std::vector<std::size_t> src;
    std::vector<std::size_t> dst;
    std::vector<std::size_t> offsets;
    std::optional<Tensor> edge_scalars;
    std::vector<std::string> warnings;

    std::size_t edges() const { return src.size(); }
    std::vector<std::size_t> neighbors(std::size_t i) const;
};

/// Exact k nearest neighbors by Euclidean distance, ties to the lower index, self excluded.
/// k >= N is clamped to N-1 and noted in warnings.
NeighborGraph knn_neighborhoods(std::span<const Vec3> points, std::size_t k);
/// Every ordered pair i != j.
NeighborGraph fully_connected(std::size_t nodes);
/// Explicit neighborhoods; self entries are rejected.
NeighborGraph from_adjacency(std::size_t nodes, const std::vector<std::vector<std::size_t>>& adjacency,
                             std::optional<Tensor> edge_scalars = std::nullopt);
/// Disjoint union; node and edge indices of later graphs are shifted.
NeighborGraph batch_graphs(std::span<const NeighborGraph> graphs);

struct EdgeGeometry {
    std::vector<Vec3> vectors;  // x_src - x_dst
    std::vector<double> radii;
    std::vector<std::size_t> degenerate;  // edges with a zero vector
};

EdgeGeometry relative_geometry(const NeighborGraph& graph, std::span<const Vec3> points);

/// Indices of the first occurrence of each distinct position, in order.
std::vector<std::size_t> dedupe_points(std::span<const Vec3> points);

/// Appends two degree-0 channels (z and z minus the cloud's mean z) and one degree-1 channel
/// holding (x, y, 0) in SH ordering. Deliberately breaks rotation symmetry away from the z axis.
FeatureMap plus_z_features(std::span<const Vec3> points, const FeatureMap& base);

/// Applies D_l(g) to the last axis of every degree-l block.
FeatureMap rotate_features(const FeatureMap& feats, const Rotation& g);

std::vector<PointCloud> read_point_clouds(const std::string& path);
void write_point_clouds(const std::string& path, std::span<const PointCloud> clouds);

}  // namespace se3
