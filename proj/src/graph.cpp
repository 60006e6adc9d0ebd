#include "se3/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "se3/error.hpp"
#include "se3/parallel.hpp"

namespace se3 {

namespace {

void check_points(std::span<const Vec3> points) {
    if (points.size() < 2) throw ArgumentError("graph: need at least 2 points, got " + std::to_string(points.size()));
    for (const Vec3& p : points) {
        for (double c : p) {
            if (!std::isfinite(c)) throw ArgumentError("graph: non-finite position");
        }
    }
}

NeighborGraph from_lists(std::size_t nodes, const std::vector<std::vector<std::size_t>>& lists) {
    NeighborGraph g;
    g.nodes = nodes;
    g.offsets.push_back(0);
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j : lists[i]) {
            g.src.push_back(j);
            g.dst.push_back(i);
        }
        g.offsets.push_back(g.src.size());
    }
    return g;
}

}  // namespace

std::vector<std::size_t> NeighborGraph::neighbors(std::size_t i) const {
    return {src.begin() + static_cast<std::ptrdiff_t>(offsets.at(i)),
            src.begin() + static_cast<std::ptrdiff_t>(offsets.at(i + 1))};
}

NeighborGraph knn_neighborhoods(std::span<const Vec3> points, std::size_t k) {
    check_points(points);
    if (k < 1) throw ArgumentError("knn_neighborhoods: k must be >= 1");
    const std::size_t n = points.size();
    std::vector<std::string> warnings;
    if (k >= n) {
        warnings.push_back("knn_neighborhoods: k=" + std::to_string(k) + " clamped to " + std::to_string(n - 1));
        k = n - 1;
    }
    std::vector<std::vector<std::size_t>> lists(n);
    parallel_for(n, [&](std::size_t first, std::size_t last) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t i = first; i < last; ++i) {
            d.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double s = 0.0;
                for (int c = 0; c < 3; ++c) s += (points[j][c] - points[i][c]) * (points[j][c] - points[i][c]);
                d.emplace_back(s, j);
            }
            // Pair ordering compares distance, then index: the lower index wins ties.
            std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
            for (std::size_t t = 0; t < k; ++t) lists[i].push_back(d[t].second);
        }
    }, 16);
    NeighborGraph g = from_lists(n, lists);
    g.warnings = std::move(warnings);
    return g;
}

NeighborGraph fully_connected(std::size_t nodes) {
    if (nodes < 2) throw ArgumentError("fully_connected: need at least 2 nodes");
    std::vector<std::vector<std::size_t>> lists(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j = 0; j < nodes; ++j) {
            if (j != i) lists[i].push_back(j);
        }
    }
    return from_lists(nodes, lists);
}

NeighborGraph from_adjacency(std::size_t nodes, const std::vector<std::vector<std::size_t>>& adjacency,
                             std::optional<Tensor> edge_scalars) {
    if (adjacency.size() != nodes) throw ArgumentError("from_adjacency: adjacency has " + std::to_string(adjacency.size()) + " rows for " + std::to_string(nodes) + " nodes");
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j : adjacency[i]) {
            if (j >= nodes) throw ArgumentError("from_adjacency: neighbor " + std::to_string(j) + " out of range");
            if (j == i) throw ArgumentError("from_adjacency: node " + std::to_string(i) + " lists itself");
        }
    }
    NeighborGraph g = from_lists(nodes, adjacency);
    if (edge_scalars) {
        if (edge_scalars->rank() != 2 || edge_scalars->dim(0) != g.edges()) {
            throw ArgumentError("from_adjacency: edge scalars " + shape_string(edge_scalars->shape) + " for " + std::to_string(g.edges()) + " edges");
        }
        g.edge_scalars = std::move(edge_scalars);
    }
    return g;
}

NeighborGraph batch_graphs(std::span<const NeighborGraph> graphs) {
    NeighborGraph out;
    out.offsets.push_back(0);
    const bool scalars = !graphs.empty() && graphs[0].edge_scalars.has_value();
    std::vector<double> scalar_values;
    std::size_t width = scalars ? graphs[0].edge_scalars->dim(1) : 0;
    for (const NeighborGraph& g : graphs) {
        if (g.edge_scalars.has_value() != scalars || (scalars && g.edge_scalars->dim(1) != width)) {
            throw ArgumentError("batch_graphs: inconsistent edge scalars");
        }
        const std::size_t base = out.nodes, edge_base = out.src.size();
        for (std::size_t e = 0; e < g.edges(); ++e) {
            out.src.push_back(g.src[e] + base);
            out.dst.push_back(g.dst[e] + base);
        }
        for (std::size_t i = 1; i < g.offsets.size(); ++i) out.offsets.push_back(g.offsets[i] + edge_base);
        out.nodes += g.nodes;
        if (scalars) scalar_values.insert(scalar_values.end(), g.edge_scalars->data.begin(), g.edge_scalars->data.end());
        out.warnings.insert(out.warnings.end(), g.warnings.begin(), g.warnings.end());
    }
    if (scalars) out.edge_scalars = Tensor({out.src.size(), width}, std::move(scalar_values));
    return out;
}

EdgeGeometry relative_geometry(const NeighborGraph& graph, std::span<const Vec3> points) {
    if (points.size() != graph.nodes) throw ArgumentError("relative_geometry: " + std::to_string(points.size()) + " points for " + std::to_string(graph.nodes) + " nodes");
    EdgeGeometry geo;
    geo.vectors.resize(graph.edges());
    geo.radii.resize(graph.edges());
    for (std::size_t e = 0; e < graph.edges(); ++e) {
        const Vec3& xj = points[graph.src[e]];
        const Vec3& xi = points[graph.dst[e]];
        const Vec3 v{xj[0] - xi[0], xj[1] - xi[1], xj[2] - xi[2]};
        geo.vectors[e] = v;
        geo.radii[e] = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (geo.radii[e] == 0.0) geo.degenerate.push_back(e);
    }
    return geo;
}

std::vector<std::size_t> dedupe_points(std::span<const Vec3> points) {
    std::set<Vec3> seen;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (seen.insert(points[i]).second) keep.push_back(i);
    }
    return keep;
}

FeatureMap plus_z_features(std::span<const Vec3> points, const FeatureMap& base) {
    const std::size_t n = points.size();
    for (const auto& [degree, t] : base) {
        if (t.rank() != 3 || t.dim(0) != n || t.dim(2) != static_cast<std::size_t>(2 * degree + 1)) {
            throw ArgumentError("plus_z_features: degree-" + std::to_string(degree) + " features " + shape_string(t.shape));
        }
    }
    double mean_z = 0.0;
    for (const Vec3& p : points) mean_z += p[2];
    mean_z /= static_cast<double>(std::max<std::size_t>(n, 1));

    auto append = [&](const Tensor* old, std::size_t d, std::size_t extra, auto&& fill) {
        const std::size_t c = old ? old->dim(1) : 0;
        Tensor t({n, c + extra, d});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                for (std::size_t m = 0; m < d; ++m) t[(i * (c + extra) + ch) * d + m] = (*old)[(i * c + ch) * d + m];
            }
            fill(i, t.data.data() + (i * (c + extra) + c) * d);
        }
        return t;
    };
    FeatureMap out = base;
    const Tensor* s = base.count(0) ? &base.at(0) : nullptr;
    out[0] = append(s, 1, 2, [&](std::size_t i, double* dst) {
        dst[0] = points[i][2];
        dst[1] = points[i][2] - mean_z;
    });
    const Tensor* v = base.count(1) ? &base.at(1) : nullptr;
    out[1] = append(v, 3, 1, [&](std::size_t i, double* dst) {
        const Vec3 t = to_type1({points[i][0], points[i][1], 0.0});
        std::copy(t.begin(), t.end(), dst);
    });
    return out;
}

FeatureMap rotate_features(const FeatureMap& feats, const Rotation& g) {
    FeatureMap out;
    for (const auto& [l, t] : feats) {
        const Eigen::MatrixXd d = wigner_d(l, g);
        const auto dl = static_cast<std::size_t>(2 * l + 1);
        if (t.rank() == 0 || t.shape.back() != dl) throw ArgumentError("rotate_features: degree-" + std::to_string(l) + " block " + shape_string(t.shape));
        Tensor r(t.shape);
        for (std::size_t row = 0; row < t.size() / dl; ++row) {
            Eigen::Map<Eigen::VectorXd>(r.data.data() + row * dl, static_cast<Eigen::Index>(dl)) =
                d * Eigen::Map<const Eigen::VectorXd>(t.data.data() + row * dl, static_cast<Eigen::Index>(dl));
        }
        out[l] = std::move(r);
    }
    return out;
}

// ---- JSON lines -----------------------------------------------------------------------------

std::vector<PointCloud> read_point_clouds(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open point-cloud file " + path);
    std::vector<PointCloud> clouds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ArgumentError(where + ": " + e.what());
        }
        try {
            PointCloud c;
            for (const auto& p : j.at("positions")) c.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
            const std::size_t n = c.positions.size();
            if (j.contains("features")) {
                for (const auto& [key, arr] : j.at("features").items()) {
                    const int degree = std::stoi(key);
                    const std::size_t d = static_cast<std::size_t>(2 * degree + 1);
                    if (arr.size() != n) throw ArgumentError(where + ": degree-" + key + " features need one row per point");
                    const std::size_t ch = n ? arr.at(0).size() : 0;
                    Tensor t({n, ch, d});
                    for (std::size_t i = 0; i < n; ++i) {
                        if (arr.at(i).size() != ch) throw ArgumentError(where + ": ragged degree-" + key + " features");
                        for (std::size_t cc = 0; cc < ch; ++cc) {
                            const auto& v = arr.at(i).at(cc);
                            if (v.size() != d) throw ArgumentError(where + ": degree-" + key + " vectors need " + std::to_string(d) + " entries");
                            for (std::size_t m = 0; m < d; ++m) t[(i * ch + cc) * d + m] = v.at(m).get<double>();
                        }
                    }
                    c.features[degree] = std::move(t);
                }
            }
            if (j.contains("adjacency")) c.adjacency = j.at("adjacency").get<std::vector<std::vector<std::size_t>>>();
            if (j.contains("edge_scalars")) {
                const auto rows = j.at("edge_scalars").get<std::vector<std::vector<double>>>();
                const std::size_t w = rows.empty() ? 0 : rows[0].size();
                std::vector<double> flat;
                for (const auto& r : rows) {
                    if (r.size() != w) throw ArgumentError(where + ": ragged edge_scalars");
                    flat.insert(flat.end(), r.begin(), r.end());
                }
                c.edge_scalars = Tensor({rows.size(), w}, std::move(flat));
            }
            clouds.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError(where + ": " + e.what());
        }
    }
    return clouds;
}

void write_point_clouds(const std::string& path, std::span<const PointCloud> clouds) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write point-cloud file " + path);
    for (const PointCloud& c : clouds) {
        nlohmann::json j;
        j["positions"] = c.positions;
        if (!c.features.empty()) {
            nlohmann::json f = nlohmann::json::object();
            for (const auto& [degree, t] : c.features) {
                nlohmann::json rows = nlohmann::json::array();
                const std::size_t n = t.dim(0), ch = t.dim(1), d = t.dim(2);
                for (std::size_t i = 0; i < n; ++i) {
                    nlohmann::json row = nlohmann::json::array();
                    for (std::size_t cc = 0; cc < ch; ++cc) {
                        row.push_back(std::vector<double>(t.data.begin() + static_cast<std::ptrdiff_t>((i * ch + cc) * d),
                                                          t.data.begin() + static_cast<std::ptrdiff_t>((i * ch + cc + 1) * d)));
                    }
                    rows.push_back(std::move(row));
                }
                f[std::to_string(degree)] = std::move(rows);
            }
            j["features"] = std::move(f);
        }
        if (c.adjacency) j["adjacency"] = *c.adjacency;
        if (c.edge_scalars) {
            nlohmann::json rows = nlohmann::json::array();
            const std::size_t w = c.edge_scalars->dim(1);
            for (std::size_t e = 0; e < c.edge_scalars->dim(0); ++e) {
                rows.push_back(std::vector<double>(c.edge_scalars->data.begin() + static_cast<std::ptrdiff_t>(e * w),
                                                   c.edge_scalars->data.begin() + static_cast<std::ptrdiff_t>((e + 1) * w)));
            }
            j["edge_scalars"] = std::move(rows);
        }
        out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace se3
