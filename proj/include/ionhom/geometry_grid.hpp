#pragma once

#include <string>
#include <vector>

#include "ionhom/model_params.hpp"

namespace ionhom {

enum class Shape { CenteredSquareInclusion, CrossChannel, Stripe, Empty };

/// Unit cell Y = (0,1)^2 split into Y_I and Y_E by a voxel-aligned shape.
///  - CenteredSquareInclusion(a): Y_I is the centred square of side a (isolated cells).
///  - CrossChannel(w): Y_I is a centred plus-shaped cross of arm width w; its arms
///    reach all four edges, so Y_I tiles into a connected syncytium.
///  - Stripe(theta): Y_E is the centred vertical band of width theta.
///  - Empty: Y_E = Y.
struct UnitCellGeometry {
  Shape shape = Shape::Empty;
  double size = 0.0;

  static UnitCellGeometry square(double a) { return {Shape::CenteredSquareInclusion, a}; }
  static UnitCellGeometry cross(double w) { return {Shape::CrossChannel, w}; }
  static UnitCellGeometry stripe(double theta) { return {Shape::Stripe, theta}; }
  static UnitCellGeometry empty() { return {Shape::Empty, 0.0}; }

  std::string name() const;
};

/// A membrane face between one I-cell and one E-cell.
struct InterfaceFace {
  int intra_cell = 0;
  int extra_cell = 0;
  int axis = 0;  // 0: face normal along x, 1: along y
  int sign = 1;  // +1 if the E-cell sits on the positive side of the I-cell
};

/// Structured n x n grid over (0,1)^2 with one compartment tag per cell.
/// Cell (i, j) has index j * n + i and centre ((i + 1/2) h, (j + 1/2) h).
struct TaggedGrid {
  int n = 0;
  double h = 0.0;
  bool periodic = false;  // unit cells wrap; tiled tissue grids have a no-flux boundary
  int epsilon_inv = 1;
  int n_per_cell = 0;
  std::vector<Phase> tags;
  std::vector<InterfaceFace> interface_faces;

  int index(int i, int j) const { return j * n + i; }
  Phase tag(int i, int j) const { return tags[index(i, j)]; }
  std::size_t cell_count() const { return tags.size(); }
  Point center(int cell) const {
    return {((cell % n) + 0.5) * h, ((cell / n) + 0.5) * h};
  }
  double cell_area() const { return h * h; }

  int count(Phase p) const;
  /// Area fraction of the compartment (exact voxel arithmetic).
  double measure(Phase p) const;
  /// Total membrane length: face count times h.
  double interface_measure() const;
  double epsilon() const { return 1.0 / epsilon_inv; }
};

/// Throws ResolutionMismatch when the shape does not sit on grid faces at resolution n.
TaggedGrid voxelize_unit_cell(const UnitCellGeometry& geom, int n);

/// epsilon-periodic tissue grid of (epsilon_inv * n_per_cell)^2 cells.
TaggedGrid tile_domain(const UnitCellGeometry& geom, int epsilon_inv, int n_per_cell);

struct Components {
  int count = 0;
  std::vector<int> labels;  // -1 on cells of the other compartment
};

/// 4-neighbour flood fill; wraps across the boundary on periodic grids.
Components connected_components(const TaggedGrid& grid, Phase tag);

/// Cell-tag raster, one CSV row per grid row (top row first), 1 = I, 0 = E.
std::string tag_raster_csv(const TaggedGrid& grid);

}  // namespace ionhom
