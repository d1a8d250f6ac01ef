#include "ionhom/geometry_grid.hpp"

#include <cmath>
#include <sstream>

#include "ionhom/errors.hpp"

namespace ionhom {

std::string UnitCellGeometry::name() const {
  std::ostringstream os;
  switch (shape) {
    case Shape::CenteredSquareInclusion: os << "square(a=" << size << ")"; break;
    case Shape::CrossChannel: os << "cross(w=" << size << ")"; break;
    case Shape::Stripe: os << "stripe(theta=" << size << ")"; break;
    case Shape::Empty: os << "empty"; break;
  }
  return os.str();
}

int TaggedGrid::count(Phase p) const {
  int c = 0;
  for (Phase t : tags) c += (t == p);
  return c;
}

double TaggedGrid::measure(Phase p) const {
  return static_cast<double>(count(p)) / static_cast<double>(tags.size());
}

double TaggedGrid::interface_measure() const {
  return static_cast<double>(interface_faces.size()) * h;
}

namespace {

// Number of cells spanned by the shape and the offset that centres it.
struct Band {
  int offset = 0;
  int width = 0;
  bool contains(int k) const { return k >= offset && k < offset + width; }
};

Band resolve_band(const UnitCellGeometry& geom, int n) {
  if (!(geom.size > 0.0 && geom.size < 1.0)) {
    fail(ErrorKind::InvalidInput, geom.name() + ": size parameter must lie in (0,1)");
  }
  const double cells = geom.size * n;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-9) {
    std::ostringstream os;
    os << geom.name() << " does not resolve on n=" << n << " (size*n = " << cells << ")";
    fail(ErrorKind::ResolutionMismatch, os.str());
  }
  const int width = static_cast<int>(rounded);
  if ((n - width) % 2 != 0) {
    std::ostringstream os;
    os << geom.name() << " cannot be centred on n=" << n << " (n - size*n is odd)";
    fail(ErrorKind::ResolutionMismatch, os.str());
  }
  return {(n - width) / 2, width};
}

std::vector<Phase> unit_cell_tags(const UnitCellGeometry& geom, int n) {
  if (n < 8) fail(ErrorKind::InvalidInput, "unit-cell resolution must be >= 8");
  std::vector<Phase> tags(static_cast<std::size_t>(n) * n, Phase::E);
  if (geom.shape == Shape::Empty) return tags;
  const Band band = resolve_band(geom, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      bool intra = false;
      switch (geom.shape) {
        case Shape::CenteredSquareInclusion: intra = band.contains(i) && band.contains(j); break;
        case Shape::CrossChannel: intra = band.contains(i) || band.contains(j); break;
        case Shape::Stripe: intra = !band.contains(i); break;
        case Shape::Empty: break;
      }
      tags[static_cast<std::size_t>(j) * n + i] = intra ? Phase::I : Phase::E;
    }
  }
  return tags;
}

void collect_interfaces(TaggedGrid& grid) {
  grid.interface_faces.clear();
  const int n = grid.n;
  auto visit = [&](int a, int b, int axis) {
    if (grid.tags[a] == grid.tags[b]) return;
    if (grid.tags[a] == Phase::I) {
      grid.interface_faces.push_back({a, b, axis, +1});
    } else {
      grid.interface_faces.push_back({b, a, axis, -1});
    }
  };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = grid.index(i, j);
      if (i + 1 < n) {
        visit(c, grid.index(i + 1, j), 0);
      } else if (grid.periodic) {
        visit(c, grid.index(0, j), 0);
      }
      if (j + 1 < n) {
        visit(c, grid.index(i, j + 1), 1);
      } else if (grid.periodic) {
        visit(c, grid.index(i, 0), 1);
      }
    }
  }
}

}  // namespace

TaggedGrid voxelize_unit_cell(const UnitCellGeometry& geom, int n) {
  TaggedGrid grid;
  grid.n = n;
  grid.h = 1.0 / n;
  grid.periodic = true;
  grid.epsilon_inv = 1;
  grid.n_per_cell = n;
  grid.tags = unit_cell_tags(geom, n);
  collect_interfaces(grid);
  return grid;
}

TaggedGrid tile_domain(const UnitCellGeometry& geom, int epsilon_inv, int n_per_cell) {
  if (epsilon_inv < 1) fail(ErrorKind::InvalidInput, "epsilon_inv must be >= 1");
  const auto cell = unit_cell_tags(geom, n_per_cell);
  TaggedGrid grid;
  grid.n = epsilon_inv * n_per_cell;
  grid.h = 1.0 / grid.n;
  grid.periodic = false;
  grid.epsilon_inv = epsilon_inv;
  grid.n_per_cell = n_per_cell;
  grid.tags.resize(static_cast<std::size_t>(grid.n) * grid.n);
  for (int j = 0; j < grid.n; ++j) {
    for (int i = 0; i < grid.n; ++i) {
      grid.tags[grid.index(i, j)] =
          cell[static_cast<std::size_t>(j % n_per_cell) * n_per_cell + (i % n_per_cell)];
    }
  }
  collect_interfaces(grid);
  return grid;
}

Components connected_components(const TaggedGrid& grid, Phase tag) {
  Components out;
  out.labels.assign(grid.cell_count(), -1);
  const int n = grid.n;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(grid.cell_count()); ++start) {
    if (grid.tags[start] != tag || out.labels[start] >= 0) continue;
    const int label = out.count++;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      const int i = c % n;
      const int j = c / n;
      const int di[4] = {1, -1, 0, 0};
      const int dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        int ni = i + di[k];
        int nj = j + dj[k];
        if (grid.periodic) {
          ni = (ni + n) % n;
          nj = (nj + n) % n;
        } else if (ni < 0 || nj < 0 || ni >= n || nj >= n) {
          continue;
        }
        const int nb = grid.index(ni, nj);
        if (grid.tags[nb] == tag && out.labels[nb] < 0) {
          out.labels[nb] = label;
          stack.push_back(nb);
        }
      }
    }
  }
  return out;
}

std::string tag_raster_csv(const TaggedGrid& grid) {
  std::string out;
  out.reserve(grid.cell_count() * 2);
  for (int j = grid.n - 1; j >= 0; --j) {
    for (int i = 0; i < grid.n; ++i) {
      if (i > 0) out += ',';
      out += grid.tag(i, j) == Phase::I ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

}  // namespace ionhom
