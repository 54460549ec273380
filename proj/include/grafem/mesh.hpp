#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "grafem/types.hpp"

namespace grafem {

/// Tetrahedral mesh with its induced unique-edge graph and the per-element
/// rest quantities used by the force and stiffness pipeline. Immutable once
/// built; safe to share across threads.
struct TetMesh {
  std::vector<Vec3> rest_positions;
  std::vector<std::array<int, 4>> tets;

  // Induced edge graph. Edges are canonical (min node, max node) pairs,
  // sorted lexicographically; ordering does not depend on tet input order.
  std::vector<std::array<int, 2>> edges;
  // Per tet, the 6 incident edge ids in fixed local order
  // (01, 02, 03, 12, 13, 23).
  std::vector<std::array<int, 6>> tet_edges;
  std::vector<std::vector<int>> edge_tets;

  std::vector<double> rest_volumes;
  std::vector<Mat3> rest_shape_inverse;  // maps rest edge-vector matrix to I
  std::vector<Vec3> rest_centroids;
  std::vector<double> rest_edge_lengths;

  int num_nodes() const { return static_cast<int>(rest_positions.size()); }
  int num_tets() const { return static_cast<int>(tets.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_dofs() const { return 3 * num_nodes(); }

  double total_volume() const;
  double mean_face_area() const;

  // Local vertex pairs defining the fixed tet-edge order.
  static constexpr std::array<std::array<int, 2>, 6> local_edges = {
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
};

/// Fills edges / tet_edges / edge_tets from the tet list.
/// Throws GeometryError on empty input or repeated node indices in a tet.
void induce_edge_graph(TetMesh& mesh);

/// Fills volumes, shape inverses, centroids and rest edge lengths.
/// Throws GeometryError on zero-volume or inverted elements.
void rest_quantities(TetMesh& mesh);

/// Build a complete mesh (edge graph + rest quantities) from raw arrays,
/// validating all invariants.
TetMesh make_mesh(std::vector<Vec3> nodes, std::vector<std::array<int, 4>> tets);

/// Parse TetGen .node / .ele text into a fully derived mesh.
/// One-based indices (TetGen default) are detected and converted.
TetMesh load_tetgen(const std::string& node_text, const std::string& ele_text);

TetMesh load_tetgen_files(const std::string& node_path, const std::string& ele_path);

/// Outward-oriented boundary triangles (faces incident to exactly one tet).
std::vector<std::array<int, 3>> boundary_faces(const TetMesh& mesh);

}  // namespace grafem
