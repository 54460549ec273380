#include "grafem/fracture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace grafem {

Vec6 stress_transform_row(const Vec3& d) {
  Vec6 row;
  row << d.x() * d.x(), d.y() * d.y(), d.z() * d.z(), d.x() * d.y(), d.x() * d.z(),
      d.y() * d.z();
  return row;
}

bool build_T(const TetMesh& mesh, const SimState& state, int tet, Mat6& T) {
  const auto& t = mesh.tets[tet];
  for (int k = 0; k < 6; ++k) {
    const auto& le = TetMesh::local_edges[k];
    const Vec3 d = state.position(mesh, t[le[1]]) - state.position(mesh, t[le[0]]);
    const double len = d.norm();
    if (len < 1e-14 * std::max(1.0, mesh.rest_edge_lengths[mesh.tet_edges[tet][k]])) {
      return false;
    }
    T.row(k) = stress_transform_row(d / len).transpose();
  }
  return true;
}

Vec6 edge_normal_stresses(const Mat6& T, const Vec6& sigma_c) { return T * sigma_c; }

NonlocalTable build_nonlocal_table(const TetMesh& mesh, double r_d) {
  NonlocalTable table;
  const int nt = mesh.num_tets();
  table.neighbors.resize(nt);
  if (r_d <= 0.0) {
    for (int e = 0; e < nt; ++e) table.neighbors[e] = {{e, 1.0}};
    return table;
  }
  for (int e = 0; e < nt; ++e) {
    auto& list = table.neighbors[e];
    double wsum = 0.0;
    for (int o = 0; o < nt; ++o) {
      const double r = (mesh.rest_centroids[o] - mesh.rest_centroids[e]).norm();
      if (r > r_d) continue;
      const double w = 1.0 - r / r_d;
      if (w <= 0.0) continue;
      list.emplace_back(o, w);
      wsum += w;
    }
    for (auto& [o, w] : list) w /= wsum;
  }
  return table;
}

EdgeStressReport nonlocal_screen(const TetMesh& mesh, const SimState& state,
                                 const std::vector<Vec6>& per_tet_sigma_c,
                                 const NonlocalTable& table) {
  const int nt = mesh.num_tets();
  EdgeStressReport report;
  report.tet_edge_stress.assign(nt, Vec6::Zero());
  report.tet_degenerate.assign(nt, 0);
  std::vector<Vec6> screened(nt, Vec6::Zero());

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int e = 0; e < nt; ++e) {
    Mat6 T;
    if (!build_T(mesh, state, e, T)) {
      report.tet_degenerate[e] = 1;
      continue;
    }
    report.tet_edge_stress[e] = T * per_tet_sigma_c[e];
    Vec6 avg = Vec6::Zero();
    for (const auto& [o, w] : table.neighbors[e]) avg += w * per_tet_sigma_c[o];
    screened[e] = T * avg;
  }

  report.edge_screening.assign(mesh.num_edges(), -std::numeric_limits<double>::infinity());
  for (int e = 0; e < nt; ++e) {
    if (report.tet_degenerate[e]) continue;
    for (int k = 0; k < 6; ++k) {
      const int edge = mesh.tet_edges[e][k];
      report.edge_screening[edge] = std::max(report.edge_screening[edge], screened[e][k]);
    }
  }
  for (auto& s : report.edge_screening)
    if (s == -std::numeric_limits<double>::infinity()) s = 0.0;
  return report;
}

std::vector<int> update_damage(SimState& state, const std::vector<double>& screening,
                               const MaterialParams& params) {
  std::vector<int> newly_broken;
  for (size_t e = 0; e < state.edge_damage.size(); ++e) {
    if (state.edge_damage[e]) continue;
    if (screening[e] >= params.sigma_thres) {
      state.edge_damage[e] = 1;
      newly_broken.push_back(static_cast<int>(e));
    }
  }
  return newly_broken;
}

std::pair<std::array<int, 4>, int> fragment_components(const TetMesh& mesh,
                                                       const SimState& state, int tet) {
  std::array<int, 4> label = {0, 1, 2, 3};
  auto root = [&label](int i) {
    while (label[i] != i) i = label[i];
    return i;
  };
  for (int k = 0; k < 6; ++k) {
    if (state.edge_damage[mesh.tet_edges[tet][k]]) continue;
    const auto& le = TetMesh::local_edges[k];
    const int a = root(le[0]), b = root(le[1]);
    if (a != b) label[std::max(a, b)] = std::min(a, b);
  }
  int count = 0;
  for (int i = 0; i < 4; ++i) {
    label[i] = root(i);
    if (label[i] == i) ++count;
  }
  return {label, count};
}

std::vector<double> compute_chi(const TetMesh& mesh, const SimState& state,
                                const std::vector<Vec6>& per_tet_sigma_f,
                                const MaterialParams& params) {
  const int nt = mesh.num_tets();
  std::vector<double> chi(nt, 1.0);
  const double eps = 1e-12 * params.sigma_thres;
  for (int e = 0; e < nt; ++e) {
    int intact = 0;
    for (int k = 0; k < 6; ++k) intact += state.edge_damage[mesh.tet_edges[e][k]] ? 0 : 1;
    if (intact == 6) {
      chi[e] = 1.0;
      continue;
    }
    if (intact == 0) {
      chi[e] = 0.0;
      continue;
    }
    if (fragment_components(mesh, state, e).second >= 2) {
      chi[e] = 0.0;
      continue;
    }
    double surviving = 0.0, total = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double s = std::abs(per_tet_sigma_f[e][k]);
      total += s;
      if (!state.edge_damage[mesh.tet_edges[e][k]]) surviving += s;
    }
    chi[e] = (total < eps) ? static_cast<double>(intact) / 6.0 : surviving / total;
  }
  return chi;
}

}  // namespace grafem
