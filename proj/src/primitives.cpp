#include "grafem/primitives.hpp"

#include <cmath>
#include <functional>
#include <map>

namespace grafem {

namespace {

// six-tet split of a hexahedral cell around the 0-7 diagonal; compatible
// across translated cells
constexpr int kCubeTets[6][4] = {
    {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
};

TetMesh structured_mesh(const std::array<int, 3>& cells,
                        const std::function<Vec3(int, int, int)>& node_at,
                        const std::function<bool(int, int, int)>& keep_cell) {
  const int nx = cells[0], ny = cells[1], nz = cells[2];
  if (nx < 1 || ny < 1 || nz < 1) throw GeometryError("cell counts must be positive");
  auto node_id = [&](int i, int j, int k) { return (i * (ny + 1) + j) * (nz + 1) + k; };

  std::vector<std::array<int, 4>> tets;
  std::vector<char> used(static_cast<size_t>((nx + 1) * (ny + 1) * (nz + 1)), 0);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      for (int k = 0; k < nz; ++k) {
        if (!keep_cell(i, j, k)) continue;
        // cell corner ids, bit order (x, y, z)
        int corner[8];
        for (int b = 0; b < 8; ++b)
          corner[b] = node_id(i + ((b >> 0) & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
        for (const auto& t : kCubeTets) {
          tets.push_back({corner[t[0]], corner[t[1]], corner[t[2]], corner[t[3]]});
          for (int v = 0; v < 4; ++v) used[corner[t[v]]] = 1;
        }
      }
    }
  }
  if (tets.empty()) throw GeometryError("mesh generator removed every cell");

  // compact node numbering over referenced nodes only
  std::vector<int> remap(used.size(), -1);
  std::vector<Vec3> nodes;
  int next = 0;
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      for (int k = 0; k <= nz; ++k) {
        const int id = node_id(i, j, k);
        if (!used[id]) continue;
        remap[id] = next++;
        nodes.push_back(node_at(i, j, k));
      }
  for (auto& t : tets)
    for (int v = 0; v < 4; ++v) t[v] = remap[t[v]];

  // fix index orientation where the point mapping flipped a tet
  for (auto& t : tets) {
    Mat3 dm;
    dm.col(0) = nodes[t[1]] - nodes[t[0]];
    dm.col(1) = nodes[t[2]] - nodes[t[0]];
    dm.col(2) = nodes[t[3]] - nodes[t[0]];
    if (dm.determinant() < 0.0) std::swap(t[2], t[3]);
  }
  return make_mesh(std::move(nodes), std::move(tets));
}

}  // namespace

TetMesh make_box_mesh(const Vec3& size, const std::array<int, 3>& cells, const Vec3& origin) {
  const Vec3 h(size.x() / cells[0], size.y() / cells[1], size.z() / cells[2]);
  return structured_mesh(
      cells,
      [&](int i, int j, int k) -> Vec3 {
        return origin + Vec3(i * h.x(), j * h.y(), k * h.z());
      },
      [](int, int, int) { return true; });
}

TetMesh make_cylinder_mesh(double radius, double length, int axial_cells, int cross_cells) {
  if (!(radius > 0.0) || !(length > 0.0))
    throw GeometryError("cylinder radius and length must be positive");
  const std::array<int, 3> cells = {axial_cells, cross_cells, cross_cells};
  return structured_mesh(
      cells,
      [&](int i, int j, int k) {
        const double x = -0.5 * length + length * static_cast<double>(i) / axial_cells;
        const double u = -1.0 + 2.0 * static_cast<double>(j) / cross_cells;
        const double v = -1.0 + 2.0 * static_cast<double>(k) / cross_cells;
        // square-to-disk mapping keeps the grid structured and non-degenerate
        const double y = u * std::sqrt(1.0 - 0.5 * v * v);
        const double z = v * std::sqrt(1.0 - 0.5 * u * u);
        return Vec3(x, radius * y, radius * z);
      },
      [](int, int, int) { return true; });
}

TetMesh make_notched_bar_mesh(const Vec3& size, const std::array<int, 3>& cells,
                              double notch_depth, double notch_half_angle_deg,
                              const Vec3& origin) {
  if (!(notch_depth >= 0.0 && notch_depth < size.y()))
    throw GeometryError("notch depth must be in [0, height)");
  const Vec3 h(size.x() / cells[0], size.y() / cells[1], size.z() / cells[2]);
  const double xc = origin.x() + 0.5 * size.x();
  const double y_top = origin.y() + size.y();
  const double slope = std::tan(notch_half_angle_deg * M_PI / 180.0);
  return structured_mesh(
      cells,
      [&](int i, int j, int k) -> Vec3 {
        return origin + Vec3(i * h.x(), j * h.y(), k * h.z());
      },
      [&](int i, int j, int k) {
        (void)k;
        // remove the cell when its box overlaps the groove wedge
        const double x0 = origin.x() + i * h.x(), x1 = x0 + h.x();
        const double y1 = origin.y() + (j + 1) * h.y();
        const double wedge_floor = y_top - notch_depth;
        if (y1 <= wedge_floor) return true;
        const double half_width = slope * (y1 - wedge_floor);
        return x0 > xc + half_width || x1 < xc - half_width;
      });
}

}  // namespace grafem
