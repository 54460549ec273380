#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "grafem/fem.hpp"

namespace grafem {

/// Render-only companion mesh. When edges break, the affected edges, faces
/// and tetrahedra of the render mesh split at their rest centroids into
/// per-corner pieces; the split-off (child) vertices carry no dynamics and
/// follow the mean displacement of the computational nodes they are bound
/// to. The computational mesh itself is never touched.
class VizMesh {
 public:
  enum class EntityKind : int { edge = 0, face = 1, tet = 2 };

  struct Child {
    EntityKind kind;
    int entity;                 // edge / face / tet index
    int rep;                    // smallest node of the bound group at creation
    Vec3 rest_pos;              // entity rest centroid or midpoint
    std::vector<int> parents_at_creation;
  };

  struct Surface {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    int original_vertex_count = 0;  // leading vertices bound 1:1 to nodes
  };

  explicit VizMesh(const TetMesh& mesh);

  /// Create the child vertices required by this step's newly broken edges.
  /// Idempotent; existing children are reused.
  void apply_splits(const std::vector<int>& newly_broken_edges, const SimState& state);

  /// Current child vertex position: rest position plus the mean displacement
  /// of the computational nodes in its (current) bound group.
  Vec3 child_position(int child, const SimState& state) const;

  /// Triangle soup of the exterior surface plus all open fracture surfaces
  /// under the current damage state. Deterministic vertex order.
  Surface build_surface(const SimState& state) const;

  /// Wavefront OBJ (v/f records, 1-based indices).
  void export_frame(const std::string& path, const SimState& state) const;

  /// Volumes of the four corner fragments of one tet at the current
  /// configuration, computed from the centroid-split geometry.
  std::array<double, 4> fragment_volumes(int tet, const SimState& state) const;

  const std::vector<Child>& children() const { return children_; }
  const TetMesh& mesh() const { return *mesh_; }

 private:
  int ensure_child(EntityKind kind, int entity, int rep, const SimState& state);
  void ensure_entity_children(EntityKind kind, int entity, const SimState& state);
  // smallest node of `node`'s component within the entity's intact subgraph
  int group_rep(EntityKind kind, int entity, int node, const SimState& state) const;
  std::vector<int> group_members(EntityKind kind, int entity, int node,
                                 const SimState& state) const;
  Vec3 entity_rest_position(EntityKind kind, int entity) const;
  Vec3 entity_position(EntityKind kind, int entity, int side_node, const SimState& state) const;
  int child_handle(EntityKind kind, int entity, int side_node, const SimState& state) const;

  const TetMesh* mesh_;
  // unique triangular faces
  std::vector<std::array<int, 3>> face_nodes_;   // sorted triple
  std::vector<std::array<int, 3>> face_edges_;   // edge ids (01, 02, 12 of the triple)
  std::vector<int> boundary_face_;               // face id -> -1 or boundary list index
  std::vector<std::array<int, 3>> boundary_tris_;  // outward-oriented triples
  std::vector<int> boundary_tri_face_;           // parallel: face id
  std::vector<std::vector<int>> edge_faces_;     // per edge: incident face ids
  std::vector<std::array<int, 4>> tet_faces_;

  std::map<std::array<int, 3>, int> child_index_;  // (kind, entity, rep) -> child
  std::vector<Child> children_;
};

}  // namespace grafem
