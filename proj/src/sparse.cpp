#include "grafem/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace grafem {

void FixedPatternSparse::reserve_entry(int i, int j) {
  if (finalized_) throw SolveError("sparse structure is finalized");
  pending_.emplace_back(i, j);
}

void FixedPatternSparse::finalize() {
  std::sort(pending_.begin(), pending_.end());
  pending_.erase(std::unique(pending_.begin(), pending_.end()), pending_.end());
  row_ptr_.assign(n_ + 1, 0);
  for (const auto& [i, j] : pending_) row_ptr_[i + 1]++;
  for (int i = 0; i < n_; ++i) row_ptr_[i + 1] += row_ptr_[i];
  col_.resize(pending_.size());
  for (size_t k = 0; k < pending_.size(); ++k) col_[k] = pending_[k].second;
  val_.assign(pending_.size(), 0.0);
  pending_.clear();
  pending_.shrink_to_fit();
  finalized_ = true;
}

void FixedPatternSparse::set_zero() { std::fill(val_.begin(), val_.end(), 0.0); }

int FixedPatternSparse::find(int i, int j) const {
  const auto begin = col_.begin() + row_ptr_[i];
  const auto end = col_.begin() + row_ptr_[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return -1;
  return static_cast<int>(it - col_.begin());
}

void FixedPatternSparse::add(int i, int j, double v) {
  const int k = find(i, j);
  if (k < 0) throw SolveError("entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") not in the fixed pattern");
  val_[k] += v;
}

double FixedPatternSparse::get(int i, int j) const {
  const int k = find(i, j);
  return k < 0 ? 0.0 : val_[k];
}

VecX FixedPatternSparse::multiply(const VecX& x) const {
  VecX y(n_);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) acc += val_[k] * x[col_[k]];
    y[i] = acc;
  }
  return y;
}

VecX FixedPatternSparse::diagonal() const {
  VecX d = VecX::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    const int k = find(i, i);
    if (k >= 0) d[i] = val_[k];
  }
  return d;
}

std::uint64_t FixedPatternSparse::structure_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(static_cast<std::uint64_t>(n_));
  for (int v : row_ptr_) mix(static_cast<std::uint64_t>(v));
  for (int v : col_) mix(static_cast<std::uint64_t>(v));
  return h;
}

double FixedPatternSparse::asymmetry() const {
  double worst = 0.0, scale = 0.0;
  for (int i = 0; i < n_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int j = col_[k];
      scale = std::max(scale, std::abs(val_[k]));
      if (j < i) continue;
      const int k2 = find(j, i);
      const double other = k2 < 0 ? 0.0 : val_[k2];
      worst = std::max(worst, std::abs(val_[k] - other));
    }
  }
  return scale > 0.0 ? worst / scale : 0.0;
}

void FixedPatternSparse::project_dirichlet(const std::vector<int>& dofs, const VecX& values,
                                           VecX& rhs) {
  std::vector<char> fixed(n_, 0);
  for (int d : dofs) fixed[d] = 1;
  for (int d : dofs) {
    const double v = values[d];
    for (int k = row_ptr_[d]; k < row_ptr_[d + 1]; ++k) {
      const int j = col_[k];
      if (!fixed[j]) {
        // symmetric: A(j,d) == A(d,j)
        const int k2 = find(j, d);
        if (k2 >= 0) {
          rhs[j] -= val_[k2] * v;
          val_[k2] = 0.0;
        }
      }
      val_[k] = 0.0;
    }
    const int kd = find(d, d);
    if (kd >= 0) val_[kd] = 1.0;
    rhs[d] = v;
  }
}

void FixedPatternSparse::shift_diagonal(const VecX& m, double s) {
  for (int i = 0; i < n_; ++i) {
    const int k = find(i, i);
    if (k >= 0) val_[k] += s * m[i];
  }
}

CgResult cg_solve(const FixedPatternSparse& A, const VecX& b, VecX& x, double tol,
                  int max_iters) {
  CgResult result;
  const int n = A.rows();
  VecX diag = A.diagonal();
  VecX precond(n);
  for (int i = 0; i < n; ++i)
    precond[i] = (std::abs(diag[i]) > 1e-300) ? 1.0 / diag[i] : 1.0;

  // fixed-order serial dot for run-to-run determinism
  auto dot = [](const VecX& u, const VecX& v) {
    double acc = 0.0;
    for (int i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return acc;
  };

  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    x.setZero();
    result.converged = true;
    return result;
  }

  VecX r = b - A.multiply(x);
  VecX z(n);
  for (int i = 0; i < n; ++i) z[i] = precond[i] * r[i];
  VecX p = z;
  double rz = dot(r, z);

  for (int it = 0; it < max_iters; ++it) {
    const VecX Ap = A.multiply(p);
    const double pAp = dot(p, Ap);
    if (pAp <= 0.0) {
      // indefiniteness (or exhausted subspace); caller decides the fallback
      result.negative_curvature = pAp < 0.0;
      result.iterations = it;
      result.relative_residual = std::sqrt(dot(r, r)) / bnorm;
      result.converged = result.relative_residual <= tol;
      return result;
    }
    const double alpha = rz / pAp;
    for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (int i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
    result.iterations = it + 1;
    const double rnorm = std::sqrt(dot(r, r));
    if (rnorm / bnorm <= tol) {
      result.relative_residual = rnorm / bnorm;
      result.converged = true;
      return result;
    }
    for (int i = 0; i < n; ++i) z[i] = precond[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  result.relative_residual = std::sqrt(dot(r, r)) / bnorm;
  result.converged = result.relative_residual <= tol;
  return result;
}

MatX pinv_small(const MatX& m, bool* rank_deficient) {
  Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() ? 1e-12 * sv(0) : 0.0;
  VecX inv = VecX::Zero(sv.size());
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) {
      inv(i) = 1.0 / sv(i);
      ++rank;
    }
  }
  if (rank_deficient) *rank_deficient = rank < std::min(m.rows(), m.cols());
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace grafem
