#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace ionhom {

/// Compressed sparse row matrix.
struct CsrMatrix {
  int rows = 0;
  std::vector<int> row_offsets{0};
  std::vector<int> columns;
  std::vector<double> values;

  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  std::vector<double> diagonal() const;
  bool is_symmetric(double tol) const;
};

/// Accumulates (row, col, value) entries; duplicates are summed in insertion order.
class TripletBuilder {
 public:
  explicit TripletBuilder(int rows) : rows_(rows) {}
  void add(int row, int col, double value) { entries_.push_back({row, col, value}); }
  /// Adds the symmetric 2x2 edge block  w * [[1, -1], [-1, 1]].
  void add_edge(int a, int b, double weight);
  CsrMatrix build() const;

 private:
  struct Entry {
    int row;
    int col;
    double value;
  };
  int rows_;
  std::vector<Entry> entries_;
};

/// Orthonormal basis of a declared null space. Component indicators
/// (one constant mode per connected component) are the common case and
/// also keep the labels, which the direct solver needs for pinning.
class NullSpace {
 public:
  NullSpace() = default;
  static NullSpace from_vectors(std::vector<std::vector<double>> vectors);
  static NullSpace from_components(const std::vector<int>& labels, int count);

  bool empty() const { return basis_.empty(); }
  std::size_t dimension() const { return basis_.size(); }
  const std::vector<std::vector<double>>& basis() const { return basis_; }
  bool has_components() const { return !labels_.empty(); }
  const std::vector<int>& component_labels() const { return labels_; }
  int component_count() const { return component_count_; }

  /// x <- x - sum_k (b_k . x) b_k.
  void project(std::span<double> x) const;

 private:
  std::vector<std::vector<double>> basis_;
  std::vector<int> labels_;
  int component_count_ = 0;
};

struct SparseSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  NullSpace null_space;
};

struct CgOptions {
  double tol = 1e-12;
  int max_iter = 0;  // 0 means 10 * n
  /// Largest fraction of |b| the null-space projection may remove before
  /// the right-hand side is declared incompatible.
  double incompatible_fraction = 1e-8;
  bool throw_on_incompatible = true;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for matrices that are SPD on the
/// orthogonal complement of the declared null space. The right-hand side is
/// projected before iterating and the solution after.
CgResult solve_spd(const SparseSystem& system, const CgOptions& options,
                   std::span<const double> initial_guess = {});

/// Sparse LDL^T factorization for repeated solves with a fixed sparsity pattern.
/// A component-type null space is handled by pinning one node per component
/// and returning the zero-mean (per component) solution.
class DirectSpdSolver {
 public:
  DirectSpdSolver();
  ~DirectSpdSolver();
  DirectSpdSolver(DirectSpdSolver&&) noexcept;
  DirectSpdSolver& operator=(DirectSpdSolver&&) noexcept;

  void factorize(const CsrMatrix& matrix, const NullSpace& null_space = {});
  std::vector<double> solve(std::span<const double> rhs) const;
  bool factorized() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Fixed-pattern assembly of  diag(d) + sum_e w_e (u_a - u_b)(u_a - u_b)^T  over a
/// graph with edges e = (a, b). Values are refilled in a fixed order on every call.
class GraphOperator {
 public:
  using Edge = std::pair<int, int>;

  GraphOperator() = default;
  GraphOperator(int nodes, std::vector<Edge> edges);

  const CsrMatrix& assemble(std::span<const double> diagonal, std::span<const double> weights);
  const CsrMatrix& matrix() const { return matrix_; }
  int nodes() const { return matrix_.rows; }
  const std::vector<Edge>& edges() const { return edges_; }

 private:
  std::vector<Edge> edges_;
  CsrMatrix matrix_;
  std::vector<int> diag_slot_;
  std::vector<std::array<int, 4>> edge_slots_;  // aa, bb, ab, ba
};

/// Connected components of the graph restricted to edges with active[e] != 0
/// (all edges when active is empty). Labels are assigned in order of first node.
struct GraphComponents {
  int count = 0;
  std::vector<int> labels;
};

GraphComponents graph_components(int nodes, const std::vector<GraphOperator::Edge>& edges,
                                 const std::vector<char>& active = {});

struct PicardSettings {
  double tol = 1e-10;
  int max_iter = 50;
  double damping = 1.0;
};

struct PicardResult {
  std::vector<double> x;
  int iterations = 0;
  double last_change = 0.0;
};

/// max |a - b| / max |a|.
double relative_change(std::span<const double> next, std::span<const double> prev);

using PicardStep = std::function<std::vector<double>(const std::vector<double>&)>;

/// x <- (1 - damping) x + damping step(x) until the relative change drops to tol.
/// Throws PicardDivergence when max_iter is reached.
PicardResult picard_loop(const PicardStep& step, std::vector<double> x0,
                         const PicardSettings& settings);

}  // namespace ionhom
