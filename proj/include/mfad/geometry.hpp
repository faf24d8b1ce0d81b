// Node sets on disk/ball/shell domains: quasi-uniform interior sampling,
// boundary rings/spheres, ghost nodes, and kd-tree nearest-neighbor queries.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mfad {

using Point = std::array<double, 3>;  // third component unused when d = 2

inline double dist2(const Point& a, const Point& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
inline double norm2(const Point& a) {
  return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

enum class DomainKind { Disk, Ball, Shell };

struct Domain {
  DomainKind kind = DomainKind::Disk;
  double r_outer = 1.0;
  double r_inner = 0.0;  // shell only

  static Domain disk(double radius);
  static Domain ball(double radius);
  static Domain shell(double r_inner, double r_outer);

  int dim() const { return kind == DomainKind::Disk ? 2 : 3; }
  int boundary_components() const { return kind == DomainKind::Shell ? 2 : 1; }

  // > 0 strictly inside, 0 on boundary, < 0 outside (distance to boundary)
  double interior_clearance(const Point& p) const;
  bool inside(const Point& p) const { return interior_clearance(p) > 0.0; }
  // distance from p to the analytic boundary surface(s)
  double boundary_residual(const Point& p) const;
};

// Index layout of a node set: [interior | boundary | ghost], contiguous.
struct Partition {
  int n_interior = 0;
  int n_boundary = 0;
  int n_ghost = 0;

  int total() const { return n_interior + n_boundary + n_ghost; }
  int non_ghost() const { return n_interior + n_boundary; }
  int boundary_begin() const { return n_interior; }
  int ghost_begin() const { return n_interior + n_boundary; }
};

struct NodeSet {
  Domain domain;
  int d = 2;
  std::vector<Point> points;  // ordered [interior | boundary | ghost]
  Partition part;
  std::vector<Point> normals;          // outward unit normal per boundary node
  std::vector<int> boundary_component; // 0 = outer, 1 = inner (shell)
  double h = 0.0;                      // realized spacing, N^(-1/d) over non-ghost nodes
  double ghost_offset = 0.0;           // 0 until ghosts are appended

  int size() const { return static_cast<int>(points.size()); }
  bool is_ghost(int i) const { return i >= part.ghost_begin(); }
  // global index of j-th boundary node
  int boundary_index(int j) const { return part.boundary_begin() + j; }
  int ghost_index(int j) const { return part.ghost_begin() + j; }
  // boundary-node indices belonging to a component
  std::vector<int> component_boundary(int comp) const;

  void validate() const;  // throws std::runtime_error on violated invariants
};

NodeSet generate_nodes(const Domain& domain, double h_target, uint64_t seed);

// One ghost per boundary node at x_b + offset * normal. offset <= 0 selects the
// realized spacing h. Deterministic given (nodes, offset, seed).
NodeSet generate_ghosts(const NodeSet& nodes, double offset, uint64_t seed);

// kd-tree over a fixed point cloud; k-NN by Euclidean distance, ties broken by
// lower index.
class KdTree {
 public:
  KdTree() = default;
  // builds over points[0..count); count < 0 means all
  KdTree(const std::vector<Point>& points, int dim, int count = -1);

  std::vector<int> nearest(const Point& query, int n) const;
  int size() const { return static_cast<int>(perm_.size()); }

 private:
  struct Node {
    int left = -1, right = -1;
    int point = -1;
    int axis = 0;
  };
  int build(int lo, int hi, int depth);
  void search(int node, const Point& q, int n,
              std::vector<std::pair<double, int>>& heap) const;

  const std::vector<Point>* pts_ = nullptr;
  int dim_ = 2;
  std::vector<int> perm_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Spec-level query; tree is built per call over non-ghost nodes unless
// include_ghosts is set. Assembly holds its own persistent KdTree instead.
std::vector<int> nearest_neighbors(const NodeSet& nodes, const Point& query, int n,
                                   bool include_ghosts = false);

void save_nodes_csv(const NodeSet& nodes, const std::string& path);
NodeSet load_nodes_csv(const std::string& path);

}  // namespace mfad
