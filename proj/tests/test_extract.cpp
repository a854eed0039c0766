// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "occufield/extract.hpp"

using namespace occufield;

namespace {

AnalyticField make_sphere(Real radius) {
    return AnalyticField({Shape{Shape::Kind::Sphere, Vec3{}, radius, {}, Real(0.2)}}, Real(200),
                         ColorSpec{});
}

Real mean_radius_error(const IsoMesh& mesh, Real radius) {
    REQUIRE(!mesh.vertices.empty());
    Real acc = 0;
    for (const Vec3& v : mesh.vertices) acc += std::abs(norm(v) - radius);
    return acc / Real(mesh.vertices.size());
}

}  // namespace

TEST_CASE("sphere mesh lies on the analytic surface") {
    AnalyticField field = make_sphere(Real(0.5));
    auto view = field.bind({});
    const Vec3 lo{Real(-0.75), Real(-0.75), Real(-0.75)};
    const Vec3 hi{Real(0.75), Real(0.75), Real(0.75)};

    const IsoMesh mesh = marching_cubes(*view, lo, hi, 64, Real(0.5));
    CHECK(mesh.resolution == 64);
    CHECK(mesh.vertices.size() > 1000);
    CHECK(mesh.triangles.size() > 1000);

    const Real cell = Real(1.5) / Real(63);
    CHECK(mean_radius_error(mesh, Real(0.5)) < cell);  // typically far below one cell

    // Closed, genus-0 surface.
    CHECK(euler_characteristic(mesh) == 2);

    // Every triangle references valid vertices.
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            CHECK(t[std::size_t(k)] >= 0);
            CHECK(t[std::size_t(k)] < int(mesh.vertices.size()));
        }
}

TEST_CASE("doubling the resolution tightens the surface fit") {
    AnalyticField field = make_sphere(Real(0.5));
    auto view = field.bind({});
    const Vec3 lo{Real(-0.75), Real(-0.75), Real(-0.75)};
    const Vec3 hi{Real(0.75), Real(0.75), Real(0.75)};

    const IsoMesh coarse = marching_cubes(*view, lo, hi, 32, Real(0.5));
    const IsoMesh fine = marching_cubes(*view, lo, hi, 64, Real(0.5));
    const Real e32 = mean_radius_error(coarse, Real(0.5));
    const Real e64 = mean_radius_error(fine, Real(0.5));
    CHECK(e64 < e32);
    CHECK(e64 * Real(1.5) < e32);  // roughly first-order convergence
}

TEST_CASE("torus meshes have Euler characteristic zero") {
    AnalyticField field({Shape{Shape::Kind::Torus, Vec3{}, Real(0.08), {}, Real(0.25)}}, Real(200),
                        ColorSpec{});
    auto view = field.bind({});
    const Vec3 lo{Real(-0.5), Real(-0.5), Real(-0.5)};
    const Vec3 hi{Real(0.5), Real(0.5), Real(0.5)};
    const IsoMesh mesh = marching_cubes(*view, lo, hi, 48, Real(0.5));
    CHECK(!mesh.vertices.empty());
    CHECK(euler_characteristic(mesh) == 0);
}

TEST_CASE("a level set with no crossings yields an empty mesh") {
    AnalyticField field = make_sphere(Real(0.01));  // far inside the first cell gap
    auto view = field.bind({});
    const Vec3 lo{Real(0.3), Real(0.3), Real(0.3)};  // box that misses the sphere
    const Vec3 hi{Real(0.6), Real(0.6), Real(0.6)};
    const IsoMesh mesh = marching_cubes(*view, lo, hi, 16, Real(0.5));
    CHECK(mesh.vertices.empty());
    CHECK(mesh.triangles.empty());
    CHECK(euler_characteristic(mesh) == 0);

    // An empty mesh still writes a valid (empty) OBJ.
    write_obj("/tmp/occufield_test_empty.obj", mesh);
    std::ifstream in("/tmp/occufield_test_empty.obj");
    REQUIRE(bool(in));
    std::string line;
    while (std::getline(in, line)) {
        CHECK(line.rfind("v ", 0) != 0);
        CHECK(line.rfind("f ", 0) != 0);
    }
}

TEST_CASE("extraction is deterministic and thread-invariant") {
    AnalyticField field = make_sphere(Real(0.3));
    auto view = field.bind({});
    const Vec3 lo{Real(-0.5), Real(-0.5), Real(-0.5)};
    const Vec3 hi{Real(0.5), Real(0.5), Real(0.5)};

    const IsoMesh a = marching_cubes(*view, lo, hi, 24, Real(0.5), 1);
    const IsoMesh b = marching_cubes(*view, lo, hi, 24, Real(0.5), 4);
    REQUIRE(a.vertices.size() == b.vertices.size());
    REQUIRE(a.triangles.size() == b.triangles.size());
    for (std::size_t i = 0; i < a.vertices.size(); ++i) {
        CHECK(a.vertices[i].x == b.vertices[i].x);
        CHECK(a.vertices[i].y == b.vertices[i].y);
        CHECK(a.vertices[i].z == b.vertices[i].z);
    }
    for (std::size_t i = 0; i < a.triangles.size(); ++i) CHECK(a.triangles[i] == b.triangles[i]);

    // Byte-identical OBJ output across runs.
    write_obj("/tmp/occufield_test_a.obj", a);
    write_obj("/tmp/occufield_test_b.obj", b);
    std::ifstream fa("/tmp/occufield_test_a.obj", std::ios::binary);
    std::ifstream fb("/tmp/occufield_test_b.obj", std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(!sa.str().empty());
}

TEST_CASE("obj output uses the documented fixed format") {
    AnalyticField field = make_sphere(Real(0.3));
    auto view = field.bind({});
    const IsoMesh mesh = marching_cubes(*view, Vec3{Real(-0.5), Real(-0.5), Real(-0.5)},
                                        Vec3{Real(0.5), Real(0.5), Real(0.5)}, 12, Real(0.5));
    REQUIRE(!mesh.vertices.empty());
    write_obj("/tmp/occufield_test_fmt.obj", mesh);

    std::ifstream in("/tmp/occufield_test_fmt.obj");
    std::string line;
    int v_lines = 0, f_lines = 0;
    bool seen_face = false;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0) {
            CHECK_FALSE(seen_face);  // vertices precede faces
            ++v_lines;
            // Three fixed 6-decimal floats.
            std::istringstream ss(line.substr(2));
            std::string tok;
            int toks = 0;
            while (ss >> tok) {
                const auto dotpos = tok.find('.');
                REQUIRE(dotpos != std::string::npos);
                CHECK(tok.size() - dotpos - 1 == 6);
                ++toks;
            }
            CHECK(toks == 3);
        } else if (line.rfind("f ", 0) == 0) {
            seen_face = true;
            ++f_lines;
            std::istringstream ss(line.substr(2));
            int a = 0, b = 0, c = 0;
            ss >> a >> b >> c;
            // 1-based, in range.
            for (int idx : {a, b, c}) {
                CHECK(idx >= 1);
                CHECK(idx <= int(mesh.vertices.size()));
            }
        }
    }
    CHECK(v_lines == int(mesh.vertices.size()));
    CHECK(f_lines == int(mesh.triangles.size()));

    CHECK_THROWS_AS(write_obj("/nonexistent_dir/mesh.obj", mesh), ConfigError);
}

TEST_CASE("marching_cubes validates its grid") {
    AnalyticField field = make_sphere(Real(0.3));
    auto view = field.bind({});
    const Vec3 lo{Real(-0.5), Real(-0.5), Real(-0.5)};
    const Vec3 hi{Real(0.5), Real(0.5), Real(0.5)};
    CHECK_THROWS_AS(marching_cubes(*view, lo, hi, 1, Real(0.5)), ConfigError);
    CHECK_THROWS_AS(marching_cubes(*view, hi, lo, 16, Real(0.5)), ConfigError);
}
