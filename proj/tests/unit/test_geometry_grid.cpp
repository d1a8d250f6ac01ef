#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numeric>
#include <set>

#include "ionhom/errors.hpp"
#include "ionhom/geometry_grid.hpp"

using namespace ionhom;

namespace {

// Independent component counter: union-find over right/up neighbours.
int count_components(const TaggedGrid& g, Phase tag) {
  const int n = g.n;
  std::vector<int> parent(g.cell_count());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = g.index(i, j);
      if (g.tags[c] != tag) continue;
      const int right = i + 1 < n ? g.index(i + 1, j) : (g.periodic ? g.index(0, j) : -1);
      const int up = j + 1 < n ? g.index(i, j + 1) : (g.periodic ? g.index(i, 0) : -1);
      for (int nb : {right, up}) {
        if (nb >= 0 && g.tags[nb] == tag) parent[find(c)] = find(nb);
      }
    }
  }
  std::set<int> roots;
  for (int c = 0; c < static_cast<int>(g.cell_count()); ++c) {
    if (g.tags[c] == tag) roots.insert(find(c));
  }
  return static_cast<int>(roots.size());
}

}  // namespace

TEST_CASE("empty unit cell") {
  const TaggedGrid g = voxelize_unit_cell(UnitCellGeometry::empty(), 16);
  CHECK(g.count(Phase::I) == 0);
  CHECK(g.measure(Phase::E) == 1.0);
  CHECK(g.interface_measure() == 0.0);
}

TEST_CASE("square inclusion measures") {
  const TaggedGrid g = voxelize_unit_cell(UnitCellGeometry::square(0.5), 16);
  CHECK(g.count(Phase::I) == 64);
  CHECK(g.measure(Phase::I) == 0.25);
  CHECK(g.measure(Phase::E) == 0.75);
  CHECK(g.measure(Phase::I) + g.measure(Phase::E) == 1.0);
  CHECK(g.interface_faces.size() == 32);
  CHECK(g.interface_measure() == 2.0);
  // Inclusion sits strictly inside the cell.
  for (int j = 0; j < 16; ++j) {
    CHECK(g.tag(0, j) == Phase::E);
    CHECK(g.tag(15, j) == Phase::E);
    CHECK(g.tag(j, 0) == Phase::E);
  }
}

TEST_CASE("stripe measures and interface lines") {
  const TaggedGrid g = voxelize_unit_cell(UnitCellGeometry::stripe(0.5), 8);
  CHECK(g.measure(Phase::E) == 0.5);
  CHECK(g.interface_measure() == 2.0);
  std::set<int> columns;
  for (const auto& f : g.interface_faces) {
    CHECK(f.axis == 0);
    const int ci = f.intra_cell % 8;
    const int ce = f.extra_cell % 8;
    columns.insert(std::max(ci, ce));
  }
  CHECK(columns == std::set<int>{2, 6});
  CHECK(g.interface_faces.size() == 16);
}

TEST_CASE("interface faces separate one I cell from one E cell, normal pointing to E") {
  for (const auto& geom : {UnitCellGeometry::square(0.5), UnitCellGeometry::cross(0.25),
                           UnitCellGeometry::stripe(0.25)}) {
    const TaggedGrid g = tile_domain(geom, 2, 16);
    for (const auto& f : g.interface_faces) {
      CHECK(g.tags[f.intra_cell] == Phase::I);
      CHECK(g.tags[f.extra_cell] == Phase::E);
      const int offset = f.axis == 0 ? 1 : g.n;
      CHECK(f.extra_cell - f.intra_cell == f.sign * offset);
    }
  }
}

TEST_CASE("unresolvable shapes are rejected") {
  CHECK_THROWS_AS(voxelize_unit_cell(UnitCellGeometry::square(0.3), 16), Error);
  try {
    voxelize_unit_cell(UnitCellGeometry::square(0.3), 16);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResolutionMismatch);
  }
  CHECK_THROWS_AS(voxelize_unit_cell(UnitCellGeometry::square(0.5), 6), Error);
  CHECK_THROWS_AS(voxelize_unit_cell(UnitCellGeometry::square(3.0 / 16.0), 16), Error);
}

TEST_CASE("tiling connectivity") {
  SUBCASE("square inclusions are disjoint blocks") {
    const TaggedGrid g = tile_domain(UnitCellGeometry::square(0.5), 2, 8);
    CHECK(count_components(g, Phase::I) == 4);
    CHECK(connected_components(g, Phase::I).count == 4);
    const TaggedGrid g4 = tile_domain(UnitCellGeometry::square(0.5), 4, 8);
    CHECK(count_components(g4, Phase::I) == 16);
    CHECK(connected_components(g4, Phase::I).count == 16);
    CHECK(connected_components(g4, Phase::E).count == 1);
  }
  SUBCASE("cross channels form one intracellular syncytium") {
    const TaggedGrid g = tile_domain(UnitCellGeometry::cross(0.5), 4, 8);
    CHECK(count_components(g, Phase::I) == 1);
    CHECK(connected_components(g, Phase::I).count == 1);
    CHECK(connected_components(g, Phase::E).count == count_components(g, Phase::E));
    CHECK(connected_components(g, Phase::E).count == 25);
  }
  SUBCASE("empty tiling") {
    const TaggedGrid g = tile_domain(UnitCellGeometry::empty(), 3, 8);
    CHECK(connected_components(g, Phase::E).count == 1);
  }
  SUBCASE("stripes do not connect across intracellular stripes") {
    const TaggedGrid g = tile_domain(UnitCellGeometry::stripe(0.5), 2, 8);
    CHECK(count_components(g, Phase::E) == 2);
    CHECK(connected_components(g, Phase::E).count == 2);
  }
}

TEST_CASE("labels are consistent with the component count") {
  const TaggedGrid g = tile_domain(UnitCellGeometry::square(0.5), 3, 8);
  const Components c = connected_components(g, Phase::I);
  std::set<int> seen;
  for (std::size_t k = 0; k < g.cell_count(); ++k) {
    if (g.tags[k] == Phase::I) {
      CHECK(c.labels[k] >= 0);
      seen.insert(c.labels[k]);
    } else {
      CHECK(c.labels[k] == -1);
    }
  }
  CHECK(static_cast<int>(seen.size()) == c.count);
}

TEST_CASE("tiling by one cell reproduces the unit cell") {
  for (const auto& geom : {UnitCellGeometry::square(0.5), UnitCellGeometry::empty(),
                           UnitCellGeometry::stripe(0.25)}) {
    const TaggedGrid a = voxelize_unit_cell(geom, 16);
    const TaggedGrid b = tile_domain(geom, 1, 16);
    CHECK(a.tags == b.tags);
    CHECK(a.measure(Phase::I) == b.measure(Phase::I));
    if (geom.shape == Shape::CenteredSquareInclusion) {
      REQUIRE(a.interface_faces.size() == b.interface_faces.size());
      for (std::size_t f = 0; f < a.interface_faces.size(); ++f) {
        CHECK(a.interface_faces[f].intra_cell == b.interface_faces[f].intra_cell);
        CHECK(a.interface_faces[f].extra_cell == b.interface_faces[f].extra_cell);
      }
    }
  }
}

TEST_CASE("tags are periodic and the membrane length scales with 1/epsilon") {
  const UnitCellGeometry geom = UnitCellGeometry::square(0.5);
  const TaggedGrid unit = voxelize_unit_cell(geom, 8);
  for (int eps_inv : {1, 2, 4}) {
    const TaggedGrid g = tile_domain(geom, eps_inv, 8);
    for (int j = 0; j < g.n; ++j) {
      for (int i = 0; i < g.n; ++i) CHECK(g.tag(i, j) == unit.tag(i % 8, j % 8));
    }
    CHECK(g.interface_measure() == doctest::Approx(eps_inv * unit.interface_measure()));
    CHECK(g.epsilon() == 1.0 / eps_inv);
  }
}

TEST_CASE("tag raster") {
  const TaggedGrid g = voxelize_unit_cell(UnitCellGeometry::square(0.5), 8);
  const std::string csv = tag_raster_csv(g);
  CHECK(csv.substr(0, 16) == "0,0,0,0,0,0,0,0\n");
  CHECK(csv.find("0,0,1,1,1,1,0,0\n") != std::string::npos);
}
