// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "occufield/field.hpp"

namespace occufield {

namespace mc {
extern const int kEdgeTable[256];
extern const int kTriTable[256][16];
}  // namespace mc

struct IsoMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    int resolution = 0;  // grid points per axis
};

// Alpha iso-surface at level iso over a regular resolution³ point grid with
// linear edge interpolation. Shared lattice-edge vertices are emitted once;
// cells are walked in a fixed order so output is deterministic. No crossing
// anywhere yields an empty, valid mesh.
IsoMesh marching_cubes(const FieldView& view, const Vec3& bounds_min, const Vec3& bounds_max,
                       int resolution, Real iso, int threads = 0);

// Wavefront OBJ, vertices then faces, 1-based indices, fixed 6-decimal
// floats, LF endings — byte-stable across runs and platforms.
void write_obj(const std::string& path, const IsoMesh& mesh);

// V − E + F over unique undirected edges (2 for a closed sphere-like mesh).
long long euler_characteristic(const IsoMesh& mesh);

}  // namespace occufield
