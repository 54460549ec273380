#pragma once

#include <cstdint>
#include <vector>

#include "grafem/types.hpp"

namespace grafem {

/// Symmetric sparse matrix in CSR form whose structure is frozen at
/// finalize(). Values may be rewritten freely afterwards; the structure
/// (and its hash) never changes. This is the object whose constant shape
/// the whole engine is built around.
class FixedPatternSparse {
 public:
  FixedPatternSparse() = default;
  explicit FixedPatternSparse(int n) : n_(n) {}

  int rows() const { return n_; }
  bool finalized() const { return finalized_; }

  /// Declare a structural entry (i, j). Symmetric counterpart must be
  /// declared too; duplicates are fine. Only valid before finalize().
  void reserve_entry(int i, int j);
  void finalize();

  /// Zero all stored values (structure untouched).
  void set_zero();
  /// Accumulate into an existing structural entry. Entry must exist.
  void add(int i, int j, double v);
  double get(int i, int j) const;

  VecX multiply(const VecX& x) const;
  VecX diagonal() const;

  /// FNV-1a hash of the structure arrays only.
  std::uint64_t structure_hash() const;
  /// Max relative asymmetry max|A_ij - A_ji| / max|A_ij|.
  double asymmetry() const;

  /// Dirichlet projection preserving the pattern: for every constrained
  /// dof k with prescribed value values[k]: rhs -= A(:,k) * value on free
  /// rows, row/col k zeroed, diagonal set to 1, rhs[k] = value.
  void project_dirichlet(const std::vector<int>& dofs, const VecX& values, VecX& rhs);

  /// Add s * m[i] to every diagonal entry (diagonal shift regularization).
  void shift_diagonal(const VecX& m, double s);

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return col_; }
  std::vector<double>& values() { return val_; }
  const std::vector<double>& values() const { return val_; }

 private:
  int find(int i, int j) const;

  int n_ = 0;
  bool finalized_ = false;
  std::vector<std::pair<int, int>> pending_;
  std::vector<int> row_ptr_, col_;
  std::vector<double> val_;
};

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  bool negative_curvature = false;
};

/// Jacobi-preconditioned conjugate gradient. Reductions are serial and
/// fixed-order so repeated runs are bit-stable. `x` holds the initial
/// guess on entry and the solution on exit. A non-positive or tiny
/// preconditioner diagonal falls back to identity scaling for that row.
CgResult cg_solve(const FixedPatternSparse& A, const VecX& b, VecX& x, double tol,
                  int max_iters);

/// Moore-Penrose pseudo-inverse via SVD with cutoff 1e-12 * sigma_max.
/// Optionally reports rank deficiency relative to min(rows, cols).
MatX pinv_small(const MatX& m, bool* rank_deficient = nullptr);

}  // namespace grafem
