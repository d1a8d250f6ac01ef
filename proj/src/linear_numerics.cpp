#include "ionhom/linear_numerics.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ionhom/errors.hpp"

namespace ionhom {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int k = row_offsets[r]; k < row_offsets[r + 1]; ++k) s += values[k] * x[columns[k]];
    y[r] = s;
  }
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(rows);
  multiply(x, y);
  return y;
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
      if (columns[k] == r) d[r] += values[k];
    }
  }
  return d;
}

bool CsrMatrix::is_symmetric(double tol) const {
  auto entry = [&](int r, int c) {
    const auto first = columns.begin() + row_offsets[r];
    const auto last = columns.begin() + row_offsets[r + 1];
    const auto it = std::lower_bound(first, last, c);
    return (it != last && *it == c) ? values[it - columns.begin()] : 0.0;
  };
  for (int r = 0; r < rows; ++r) {
    for (int k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
      const double a = values[k];
      const double b = entry(columns[k], r);
      if (std::abs(a - b) > tol * std::max({1.0, std::abs(a), std::abs(b)})) return false;
    }
  }
  return true;
}

void TripletBuilder::add_edge(int a, int b, double weight) {
  add(a, a, weight);
  add(b, b, weight);
  add(a, b, -weight);
  add(b, a, -weight);
}

CsrMatrix TripletBuilder::build() const {
  CsrMatrix m;
  m.rows = rows_;
  std::vector<int> order(entries_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ea = entries_[a];
    const auto& eb = entries_[b];
    return ea.row != eb.row ? ea.row < eb.row : ea.col < eb.col;
  });
  m.row_offsets.assign(rows_ + 1, 0);
  int last_row = -1;
  int last_col = -1;
  for (int idx : order) {
    const auto& e = entries_[idx];
    if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= rows_) {
      fail(ErrorKind::InvalidInput, "matrix entry out of range");
    }
    if (e.row == last_row && e.col == last_col) {
      m.values.back() += e.value;
      continue;
    }
    m.columns.push_back(e.col);
    m.values.push_back(e.value);
    m.row_offsets[e.row + 1]++;
    last_row = e.row;
    last_col = e.col;
  }
  for (int r = 0; r < rows_; ++r) m.row_offsets[r + 1] += m.row_offsets[r];
  return m;
}

NullSpace NullSpace::from_vectors(std::vector<std::vector<double>> vectors) {
  NullSpace ns;
  // Modified Gram-Schmidt; near-dependent vectors are dropped.
  for (auto& v : vectors) {
    for (const auto& b : ns.basis_) {
      const double c = dot(b, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
    }
    const double nv = norm2(v);
    if (nv <= 1e-12) continue;
    for (double& x : v) x /= nv;
    ns.basis_.push_back(std::move(v));
  }
  return ns;
}

NullSpace NullSpace::from_components(const std::vector<int>& labels, int count) {
  NullSpace ns;
  ns.labels_ = labels;
  ns.component_count_ = count;
  std::vector<int> sizes(count, 0);
  for (int l : labels) {
    if (l >= 0) sizes[l]++;
  }
  ns.basis_.assign(count, std::vector<double>(labels.size(), 0.0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) ns.basis_[labels[i]][i] = 1.0 / std::sqrt(double(sizes[labels[i]]));
  }
  return ns;
}

void NullSpace::project(std::span<double> x) const {
  for (const auto& b : basis_) {
    const double c = dot(b, x);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= c * b[i];
  }
}

CgResult solve_spd(const SparseSystem& system, const CgOptions& options,
                   std::span<const double> initial_guess) {
  const auto& a = system.matrix;
  const int n = a.rows;
  if (static_cast<int>(system.rhs.size()) != n) {
    fail(ErrorKind::InvalidInput, "right-hand side size does not match matrix");
  }
  const int max_iter = options.max_iter > 0 ? options.max_iter : 10 * std::max(n, 1);

  std::vector<double> b = system.rhs;
  const double b_norm_raw = norm2(b);
  if (!system.null_space.empty()) {
    system.null_space.project(b);
    std::vector<double> removed(n);
    for (int i = 0; i < n; ++i) removed[i] = system.rhs[i] - b[i];
    if (options.throw_on_incompatible &&
        norm2(removed) > options.incompatible_fraction * b_norm_raw) {
      std::ostringstream os;
      os << "null-space projection removed " << norm2(removed) << " of |b| = " << b_norm_raw;
      fail(ErrorKind::IncompatibleRHS, os.str());
    }
  }

  CgResult result;
  result.x.assign(n, 0.0);
  if (!initial_guess.empty()) {
    std::copy(initial_guess.begin(), initial_guess.end(), result.x.begin());
    system.null_space.project(result.x);
  }
  const double b_norm = norm2(b);
  if (b_norm == 0.0) {
    std::fill(result.x.begin(), result.x.end(), 0.0);
    return result;
  }

  std::vector<double> inv_diag = a.diagonal();
  for (double& d : inv_diag) {
    if (!(d > 0.0)) fail(ErrorKind::SingularSystem, "nonpositive diagonal in SPD solve");
    d = 1.0 / d;
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  auto true_residual = [&] {
    a.multiply(result.x, r);
    for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
    system.null_space.project(r);
  };
  auto precondition = [&] {
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    system.null_space.project(z);
  };

  true_residual();
  result.relative_residual = norm2(r) / b_norm;
  int it = 0;
  while (result.relative_residual > options.tol) {
    precondition();
    p = z;
    double rz = dot(r, z);
    bool restarted = false;
    while (it < max_iter) {
      a.multiply(p, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) fail(ErrorKind::SingularSystem, "CG breakdown: p.Ap <= 0");
      const double alpha = rz / pap;
      for (int i = 0; i < n; ++i) {
        result.x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      ++it;
      if (norm2(r) / b_norm <= options.tol) {
        restarted = true;
        break;
      }
      precondition();
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    // Confirm against the true residual; restart from it if the recursion drifted.
    true_residual();
    result.relative_residual = norm2(r) / b_norm;
    if (!restarted && result.relative_residual > options.tol) {
      std::ostringstream os;
      os << "CG reached " << max_iter << " iterations at relative residual "
         << result.relative_residual;
      fail(ErrorKind::NotConverged, os.str());
    }
    if (it >= max_iter && result.relative_residual > options.tol) {
      fail(ErrorKind::NotConverged, "CG iteration cap reached during residual restart");
    }
  }
  system.null_space.project(result.x);
  result.iterations = it;
  return result;
}

struct DirectSpdSolver::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  CsrMatrix full;
  std::vector<int> pattern_offsets;
  std::vector<int> pattern_columns;
  std::vector<int> labels;
  std::vector<int> pins;
  std::vector<int> sizes;
  int n = 0;
  bool ready = false;
};

DirectSpdSolver::DirectSpdSolver() : impl_(std::make_unique<Impl>()) {}
DirectSpdSolver::~DirectSpdSolver() = default;
DirectSpdSolver::DirectSpdSolver(DirectSpdSolver&&) noexcept = default;
DirectSpdSolver& DirectSpdSolver::operator=(DirectSpdSolver&&) noexcept = default;

bool DirectSpdSolver::factorized() const { return impl_->ready; }

void DirectSpdSolver::factorize(const CsrMatrix& matrix, const NullSpace& null_space) {
  auto& s = *impl_;
  s.ready = false;
  s.n = matrix.rows;
  if (!null_space.empty() && !null_space.has_components()) {
    fail(ErrorKind::InvalidInput, "direct solver supports component null spaces only");
  }
  s.labels = null_space.component_labels();
  s.pins.assign(null_space.component_count(), -1);
  s.sizes.assign(null_space.component_count(), 0);
  std::vector<char> pinned(s.n, 0);
  for (int i = 0; i < static_cast<int>(s.labels.size()); ++i) {
    const int l = s.labels[i];
    if (l < 0) continue;
    s.sizes[l]++;
    if (s.pins[l] < 0) {
      s.pins[l] = i;
      pinned[i] = 1;
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(matrix.values.size());
  for (int r = 0; r < s.n; ++r) {
    if (pinned[r]) {
      triplets.emplace_back(r, r, 1.0);
      continue;
    }
    for (int k = matrix.row_offsets[r]; k < matrix.row_offsets[r + 1]; ++k) {
      const int c = matrix.columns[k];
      if (pinned[c]) continue;
      triplets.emplace_back(r, c, matrix.values[k]);
    }
  }
  Eigen::SparseMatrix<double> a(s.n, s.n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();

  const bool same_pattern =
      s.pattern_offsets.size() == static_cast<std::size_t>(a.outerSize() + 1) &&
      std::equal(s.pattern_offsets.begin(), s.pattern_offsets.end(), a.outerIndexPtr()) &&
      s.pattern_columns.size() == static_cast<std::size_t>(a.nonZeros()) &&
      std::equal(s.pattern_columns.begin(), s.pattern_columns.end(), a.innerIndexPtr());
  if (!same_pattern) {
    s.ldlt.analyzePattern(a);
    s.pattern_offsets.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1);
    s.pattern_columns.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
  }
  s.ldlt.factorize(a);
  s.full = matrix;
  if (s.ldlt.info() != Eigen::Success) {
    fail(ErrorKind::SingularSystem, "sparse LDL^T factorization failed");
  }
  const auto d = s.ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) {
      fail(ErrorKind::SingularSystem, "matrix is not positive definite after gauge pinning");
    }
  }
  s.ready = true;
}

std::vector<double> DirectSpdSolver::solve(std::span<const double> rhs) const {
  const auto& s = *impl_;
  if (!s.ready) fail(ErrorKind::InvalidInput, "solve called before factorize");
  Eigen::VectorXd b(s.n);
  for (int i = 0; i < s.n; ++i) b[i] = rhs[i];
  if (!s.pins.empty()) {
    std::vector<double> sums(s.pins.size(), 0.0);
    std::vector<double> scale(s.pins.size(), 0.0);
    for (int i = 0; i < s.n; ++i) {
      const int l = s.labels[i];
      if (l < 0) continue;
      sums[l] += b[i];
      scale[l] += std::abs(b[i]);
    }
    for (std::size_t l = 0; l < sums.size(); ++l) {
      if (std::abs(sums[l]) > 1e-8 * std::max(scale[l], std::numeric_limits<double>::min())) {
        std::ostringstream os;
        os.precision(6);
        os << "right-hand side has nonzero sum " << sums[l] << " on null-space component " << l;
        fail(ErrorKind::IncompatibleRHS, os.str());
      }
    }
    for (int i = 0; i < s.n; ++i) {
      const int l = s.labels[i];
      if (l >= 0) b[i] -= sums[l] / s.sizes[l];
    }
  }
  Eigen::VectorXd r = b;
  for (int pin : s.pins) b[pin] = 0.0;
  Eigen::VectorXd x = s.ldlt.solve(b);
  // One step of iterative refinement against the full operator, so the
  // pinned rows see their residual too.
  for (int row = 0; row < s.n; ++row) {
    for (int k = s.full.row_offsets[row]; k < s.full.row_offsets[row + 1]; ++k) {
      r[row] -= s.full.values[k] * x[s.full.columns[k]];
    }
  }
  if (!s.pins.empty()) {
    std::vector<double> sums(s.pins.size(), 0.0);
    for (int i = 0; i < s.n; ++i) {
      if (s.labels[i] >= 0) sums[s.labels[i]] += r[i];
    }
    for (int i = 0; i < s.n; ++i) {
      if (s.labels[i] >= 0) r[i] -= sums[s.labels[i]] / s.sizes[s.labels[i]];
    }
    for (int pin : s.pins) r[pin] = 0.0;
  }
  x += s.ldlt.solve(r);
  std::vector<double> out(x.data(), x.data() + s.n);
  if (!s.pins.empty()) {
    std::vector<double> means(s.pins.size(), 0.0);
    for (int i = 0; i < s.n; ++i) {
      if (s.labels[i] >= 0) means[s.labels[i]] += out[i];
    }
    for (std::size_t l = 0; l < means.size(); ++l) means[l] /= s.sizes[l];
    for (int i = 0; i < s.n; ++i) {
      if (s.labels[i] >= 0) out[i] -= means[s.labels[i]];
    }
  }
  return out;
}

double relative_change(std::span<const double> next, std::span<const double> prev) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < next.size(); ++i) {
    diff = std::max(diff, std::abs(next[i] - prev[i]));
    scale = std::max(scale, std::abs(next[i]));
  }
  if (diff == 0.0) return 0.0;
  if (scale == 0.0) return std::numeric_limits<double>::infinity();
  return diff / scale;
}

PicardResult picard_loop(const PicardStep& step, std::vector<double> x0,
                         const PicardSettings& settings) {
  if (!(settings.tol > 0.0) || settings.max_iter < 1 ||
      !(settings.damping > 0.0 && settings.damping <= 1.0)) {
    fail(ErrorKind::InvalidInput, "invalid Picard settings");
  }
  PicardResult result;
  result.x = std::move(x0);
  for (int it = 1; it <= settings.max_iter; ++it) {
    std::vector<double> next = step(result.x);
    if (next.size() != result.x.size()) {
      fail(ErrorKind::InvalidInput, "Picard step changed the state size");
    }
    if (settings.damping < 1.0) {
      for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = (1.0 - settings.damping) * result.x[i] + settings.damping * next[i];
      }
    }
    result.last_change = relative_change(next, result.x);
    result.x = std::move(next);
    result.iterations = it;
    if (result.last_change <= settings.tol) return result;
  }
  std::ostringstream os;
  os << "no convergence after " << settings.max_iter << " iterations (last relative change "
     << result.last_change << ")";
  fail(ErrorKind::PicardDivergence, os.str());
}

}  // namespace ionhom

namespace ionhom {

GraphOperator::GraphOperator(int nodes, std::vector<Edge> edges) : edges_(std::move(edges)) {
  TripletBuilder builder(nodes);
  for (int r = 0; r < nodes; ++r) builder.add(r, r, 0.0);
  for (const auto& [a, b] : edges_) builder.add_edge(a, b, 0.0);
  matrix_ = builder.build();
  auto slot = [&](int r, int c) {
    const auto first = matrix_.columns.begin() + matrix_.row_offsets[r];
    const auto last = matrix_.columns.begin() + matrix_.row_offsets[r + 1];
    return static_cast<int>(std::lower_bound(first, last, c) - matrix_.columns.begin());
  };
  diag_slot_.resize(nodes);
  for (int r = 0; r < nodes; ++r) diag_slot_[r] = slot(r, r);
  edge_slots_.reserve(edges_.size());
  for (const auto& [a, b] : edges_) {
    if (a == b) fail(ErrorKind::InvalidInput, "graph edge connects a node to itself");
    edge_slots_.push_back({slot(a, a), slot(b, b), slot(a, b), slot(b, a)});
  }
}

const CsrMatrix& GraphOperator::assemble(std::span<const double> diagonal,
                                         std::span<const double> weights) {
  std::fill(matrix_.values.begin(), matrix_.values.end(), 0.0);
  if (!diagonal.empty()) {
    for (int r = 0; r < matrix_.rows; ++r) matrix_.values[diag_slot_[r]] += diagonal[r];
  }
  for (std::size_t e = 0; e < edge_slots_.size(); ++e) {
    const double w = weights[e];
    const auto& s = edge_slots_[e];
    matrix_.values[s[0]] += w;
    matrix_.values[s[1]] += w;
    matrix_.values[s[2]] -= w;
    matrix_.values[s[3]] -= w;
  }
  return matrix_;
}

GraphComponents graph_components(int nodes, const std::vector<GraphOperator::Edge>& edges,
                                 const std::vector<char>& active) {
  std::vector<int> parent(nodes);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!active.empty() && !active[e]) continue;
    const int ra = find(edges[e].first);
    const int rb = find(edges[e].second);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  GraphComponents out;
  out.labels.assign(nodes, -1);
  std::vector<int> root_label(nodes, -1);
  for (int x = 0; x < nodes; ++x) {
    const int r = find(x);
    if (root_label[r] < 0) root_label[r] = out.count++;
    out.labels[x] = root_label[r];
  }
  return out;
}

}  // namespace ionhom
