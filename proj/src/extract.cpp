// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/extract.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "occufield/render.hpp"

namespace occufield {
namespace {

// Canonical cube layout matching the tables: corners 0-3 loop around the
// z=0 face, 4-7 around the z=1 face, edges 8-11 vertical.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeVert[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                  {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Unique key for a lattice edge: anchor point index and axis (0=x,1=y,2=z).
std::uint64_t edge_key(int res, int x, int y, int z, int axis) {
    const std::uint64_t point =
        (std::uint64_t(z) * std::uint64_t(res) + std::uint64_t(y)) * std::uint64_t(res) +
        std::uint64_t(x);
    return point * 3 + std::uint64_t(axis);
}

}  // namespace

IsoMesh marching_cubes(const FieldView& view, const Vec3& bounds_min, const Vec3& bounds_max,
                       int resolution, Real iso, int threads) {
    if (resolution < 2) throw ConfigError("marching_cubes: resolution must be >= 2 per axis");
    const int res = resolution;
    const Vec3 extent = bounds_max - bounds_min;
    if (!(extent.x > 0 && extent.y > 0 && extent.z > 0))
        throw ConfigError("marching_cubes: degenerate bounds");
    const Vec3 cell = extent / Real(res - 1);

    auto grid_point = [&](int x, int y, int z) {
        return bounds_min + Vec3{cell.x * Real(x), cell.y * Real(y), cell.z * Real(z)};
    };

    // Field sampling dominates; do it in parallel, then walk cells serially
    // so vertex numbering is reproducible.
    std::vector<Real> values(std::size_t(res) * std::size_t(res) * std::size_t(res));
    parallel_for(res * res, resolve_thread_count(threads), [&](int yz) {
        const int y = yz % res;
        const int z = yz / res;
        const std::size_t base = (std::size_t(z) * std::size_t(res) + std::size_t(y)) *
                                 std::size_t(res);
        for (int x = 0; x < res; ++x)
            values[base + std::size_t(x)] = view.alpha(grid_point(x, y, z));
    });
    auto value_at = [&](int x, int y, int z) -> Real {
        return values[(std::size_t(z) * std::size_t(res) + std::size_t(y)) * std::size_t(res) +
                      std::size_t(x)];
    };

    IsoMesh mesh;
    mesh.resolution = res;
    std::unordered_map<std::uint64_t, int> vertex_of_edge;

    auto interp_vertex = [&](int cx, int cy, int cz, int edge) {
        const int* a = kCorner[kEdgeVert[edge][0]];
        const int* b = kCorner[kEdgeVert[edge][1]];
        const int ax = cx + a[0], ay = cy + a[1], az = cz + a[2];
        const int bx = cx + b[0], by = cy + b[1], bz = cz + b[2];
        const int axis = bx != ax ? 0 : (by != ay ? 1 : 2);
        // Anchor at the lexicographically smaller endpoint.
        const bool flip = bx < ax || by < ay || bz < az;
        const int ox = flip ? bx : ax, oy = flip ? by : ay, oz = flip ? bz : az;
        const std::uint64_t key = edge_key(res, ox, oy, oz, axis);
        auto it = vertex_of_edge.find(key);
        if (it != vertex_of_edge.end()) return it->second;

        const Real va = value_at(ax, ay, az);
        const Real vb = value_at(bx, by, bz);
        const Vec3 pa = grid_point(ax, ay, az);
        const Vec3 pb = grid_point(bx, by, bz);
        Vec3 p;
        if (std::abs(iso - va) < Real(1e-12)) {
            p = pa;
        } else if (std::abs(iso - vb) < Real(1e-12) || std::abs(va - vb) < Real(1e-12)) {
            p = pb;
        } else {
            p = pa + (pb - pa) * ((iso - va) / (vb - va));
        }
        const int idx = int(mesh.vertices.size());
        mesh.vertices.push_back(p);
        vertex_of_edge.emplace(key, idx);
        return idx;
    };

    for (int cz = 0; cz < res - 1; ++cz) {
        for (int cy = 0; cy < res - 1; ++cy) {
            for (int cx = 0; cx < res - 1; ++cx) {
                int cube = 0;
                for (int i = 0; i < 8; ++i) {
                    if (value_at(cx + kCorner[i][0], cy + kCorner[i][1], cz + kCorner[i][2]) < iso)
                        cube |= 1 << i;
                }
                if (mc::kEdgeTable[cube] == 0) continue;
                const int* tri = mc::kTriTable[cube];
                for (int i = 0; tri[i] != -1; i += 3) {
                    const int v0 = interp_vertex(cx, cy, cz, tri[i]);
                    const int v1 = interp_vertex(cx, cy, cz, tri[i + 1]);
                    const int v2 = interp_vertex(cx, cy, cz, tri[i + 2]);
                    if (v0 == v1 || v1 == v2 || v0 == v2) continue;  // degenerate sliver
                    mesh.triangles.push_back({v0, v1, v2});
                }
            }
        }
    }
    return mesh;
}

void write_obj(const std::string& path, const IsoMesh& mesh) {
    std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
    if (!out) throw ConfigError("cannot open mesh for writing: " + path);
    out << "# occupancy iso-surface: " << mesh.vertices.size() << " vertices, "
        << mesh.triangles.size() << " triangles\n";
    char line[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(line, sizeof(line), "v %.6f %.6f %.6f\n", double(v.x), double(v.y),
                      double(v.z));
        out << line;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(line, sizeof(line), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        out << line;
    }
    if (!out) throw ConfigError("mesh write failed: " + path);
}

long long euler_characteristic(const IsoMesh& mesh) {
    std::unordered_set<std::uint64_t> edges;
    edges.reserve(mesh.triangles.size() * 3);
    auto add = [&edges](int a, int b) {
        const std::uint64_t lo = std::uint64_t(std::min(a, b));
        const std::uint64_t hi = std::uint64_t(std::max(a, b));
        edges.insert((hi << 32) | lo);
    };
    for (const auto& t : mesh.triangles) {
        add(t[0], t[1]);
        add(t[1], t[2]);
        add(t[2], t[0]);
    }
    return (long long)(mesh.vertices.size()) - (long long)(edges.size()) +
           (long long)(mesh.triangles.size());
}

}  // namespace occufield
