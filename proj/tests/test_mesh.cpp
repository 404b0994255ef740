#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"
#include "helfrich/mesh_io.hpp"
#include "test_util.hpp"

namespace helfrich {
namespace {

constexpr const char* kTetraOff =
    "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

TEST(LoadMesh, TetrahedronCounts) {
  const auto path = test::write_temp("tetra.off", kTetraOff);
  const TriangleMesh m = load_mesh(path);
  const MeshTopology topo = build_topology(m);
  EXPECT_EQ(m.num_vertices(), 4u);
  EXPECT_EQ(topo.edges.size(), 6u);
  EXPECT_EQ(m.num_faces(), 4u);
  EXPECT_EQ(euler_characteristic(m), 2);
  EXPECT_EQ(genus(m), 0);
  EXPECT_NEAR(signed_volume(m), 1.0 / 6.0, 1e-15);
}

TEST(LoadMesh, TorusIsGenusOne) {
  std::ostringstream off;
  write_off(off, make_torus(2.0, 0.5, 24, 12));
  const TriangleMesh m = load_mesh(test::write_temp("torus.off", off.str()));
  EXPECT_EQ(euler_characteristic(m), 0);
  EXPECT_EQ(genus(m), 1);
}

TEST(LoadMesh, IcosahedronCounts) {
  std::ostringstream off;
  write_off(off, make_icosahedron());
  const TriangleMesh m = load_mesh(test::write_temp("ico.off", off.str()));
  EXPECT_EQ(m.num_vertices(), 12u);
  EXPECT_EQ(build_topology(m).edges.size(), 30u);
  EXPECT_EQ(m.num_faces(), 20u);
  EXPECT_EQ(euler_characteristic(m), 2);
}

TEST(LoadMesh, FanTriangulatesPolygons) {
  // Unit cube with quad faces, wound outward.
  const char* cube =
      "OFF\n8 6 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n"
      "4 0 3 2 1\n4 4 5 6 7\n4 0 1 5 4\n4 2 3 7 6\n4 1 2 6 5\n4 0 4 7 3\n";
  const TriangleMesh m = load_mesh(test::write_temp("cube.off", cube));
  EXPECT_EQ(m.num_faces(), 12u);
  EXPECT_NEAR(signed_volume(m), 1.0, 1e-14);
}

TEST(LoadMesh, ObjWithNegativeIndices) {
  const char* obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf -4 -2 -3\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";
  const TriangleMesh m = load_mesh(test::write_temp("tetra.obj", obj));
  EXPECT_EQ(m.num_faces(), 4u);
  EXPECT_NEAR(signed_volume(m), 1.0 / 6.0, 1e-15);
}

TEST(LoadMesh, RejectsOpenBoundary) {
  const char* open = "OFF\n4 3 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n";
  EXPECT_THROW(load_mesh(test::write_temp("open.off", open)), MeshError);
}

TEST(LoadMesh, RejectsNonManifoldEdge) {
  // Three triangles share edge (0, 1).
  const char* fan = "OFF\n5 3 0\n0 0 0\n1 0 0\n0 1 0\n0 -1 0\n0 0 1\n3 0 1 2\n3 1 0 3\n3 0 1 4\n";
  EXPECT_THROW(load_mesh(test::write_temp("nonmanifold.off", fan)), MeshError);
}

TEST(LoadMesh, RejectsGarbage) {
  EXPECT_THROW(load_mesh(test::write_temp("bad.off", "OFF\n3 1 0\n0 0\n")), MeshError);
  EXPECT_THROW(load_mesh(test::temp_dir() / "does_not_exist.off"), MeshError);
}

TEST(LoadMesh, RejectsDegenerateFace) {
  const char* flat =
      "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n2 0 0\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
  EXPECT_THROW(load_mesh(test::write_temp("flat.off", flat)), MeshError);
}

TEST(LoadMesh, RepairsMixedWinding) {
  // One face of the tetrahedron reversed.
  const char* mixed = "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
  const TriangleMesh m = load_mesh(test::write_temp("mixed.off", mixed));
  EXPECT_NEAR(signed_volume(m), 1.0 / 6.0, 1e-15);
}

TEST(Icosphere, FaceCountsAndRadius) {
  EXPECT_EQ(make_icosphere(0).num_faces(), 20u);
  EXPECT_EQ(make_icosphere(3).num_faces(), 1280u);
  const Vec3 c(1, 0, 0);
  const TriangleMesh m = make_icosphere(2, 0.5, c);
  for (const Vec3& v : m.vertices) EXPECT_NEAR((v - c).norm(), 0.5, 1e-15);
  EXPECT_GT(signed_volume(m), 0.0);
}

TEST(Icosphere, LevelLimit) {
  EXPECT_THROW(make_icosphere(8), MeshError);
  EXPECT_THROW(make_icosphere(-1), MeshError);
  EXPECT_THROW(make_icosphere(1, 0.0), MeshError);
}

TEST(Orientation, FlipsOutwardWinding) {
  const TriangleMesh outward = flip_winding(make_icosphere(4));
  ASSERT_LT(signed_volume(outward), 0.0);
  OrientationStatus st;
  const TriangleMesh m = orient_for_positive_volume(outward, &st);
  EXPECT_TRUE(st.flipped);
  EXPECT_NEAR(signed_volume(m), 4.0 * M_PI / 3.0, 0.01 * 4.0 * M_PI / 3.0);
  EXPECT_DOUBLE_EQ(signed_volume(m), -signed_volume(outward));
}

TEST(Orientation, IdempotentAndInvolution) {
  const TriangleMesh m = make_icosphere(2);
  const TriangleMesh once = orient_for_positive_volume(m);
  EXPECT_EQ(once.faces, m.faces);
  EXPECT_EQ(orient_for_positive_volume(once).faces, once.faces);
  EXPECT_EQ(orient_for_positive_volume(flip_winding(m)).faces, flip_winding(flip_winding(m)).faces);
}

TEST(Orientation, TetrahedronVolume) {
  EXPECT_NEAR(signed_volume(orient_for_positive_volume(make_tetrahedron())), 1.0 / 6.0, 1e-15);
}

TEST(MeshIo, RoundTripIsExact) {
  TriangleMesh m = make_icosphere(3, 1.2345678901234567, Vec3(0.1, -0.2, 1.0 / 3.0));
  for (const auto fmt : {MeshFormat::Off, MeshFormat::Obj}) {
    const auto path = test::temp_dir() / (fmt == MeshFormat::Off ? "rt.off" : "rt.obj");
    save_mesh(path, m, fmt);
    const TriangleMesh back = load_mesh(path);
    ASSERT_EQ(back.faces, m.faces);
    for (std::size_t i = 0; i < m.num_vertices(); ++i) EXPECT_EQ(back.vertices[i], m.vertices[i]);
  }
}

TEST(MeshTopology, EulerMatchesAngleDefect) {
  for (const TriangleMesh& m : {make_tetrahedron(), make_icosphere(3), make_torus(1.0, 0.3, 30, 12)}) {
    const GeometryCache c = build_cache(m);
    EXPECT_EQ(std::lround(c.angle_defect_total / (2.0 * M_PI)), euler_characteristic(m));
  }
}

TEST(MeshTopology, GenusSumsOverComponents) {
  const TriangleMesh two = merge(make_icosphere(1), translate(make_icosphere(1), Vec3(10, 0, 0)));
  EXPECT_EQ(num_components(two), 2);
  EXPECT_EQ(euler_characteristic(two), 4);
  EXPECT_EQ(genus(two), 0);
}

TEST(Quality, ExtremesAreAttained) {
  const TriangleMesh m = make_ellipsoid(2, Vec3(2.0, 1.0, 0.5));
  const MeshQualityReport q = quality_report(m);
  EXPECT_GT(q.min_edge_length, 0.0);
  double lo = 1e300, hi = 0.0;
  for (const Face& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      const double len = (m.vertices[f[k]] - m.vertices[f[(k + 1) % 3]]).norm();
      lo = std::min(lo, len);
      hi = std::max(hi, len);
    }
  }
  EXPECT_EQ(q.min_edge_length, lo);
  EXPECT_EQ(q.max_edge_length, hi);
  std::size_t total = 0;
  for (std::size_t c : q.aspect_histogram) total += c;
  EXPECT_EQ(total, m.num_faces());
}

}  // namespace
}  // namespace helfrich
