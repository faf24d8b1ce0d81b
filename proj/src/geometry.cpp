#include "mfad/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mfad/util.hpp"

namespace mfad {

Domain Domain::disk(double radius) {
  if (radius <= 0) throw std::invalid_argument("disk radius must be positive");
  return Domain{DomainKind::Disk, radius, 0.0};
}
Domain Domain::ball(double radius) {
  if (radius <= 0) throw std::invalid_argument("ball radius must be positive");
  return Domain{DomainKind::Ball, radius, 0.0};
}
Domain Domain::shell(double r_inner, double r_outer) {
  if (r_inner <= 0 || r_outer <= r_inner)
    throw std::invalid_argument("shell radii must satisfy 0 < r_inner < r_outer");
  return Domain{DomainKind::Shell, r_outer, r_inner};
}

double Domain::interior_clearance(const Point& p) const {
  const double r = norm2(p);
  if (kind == DomainKind::Shell) return std::min(r_outer - r, r - r_inner);
  return r_outer - r;
}

double Domain::boundary_residual(const Point& p) const {
  const double r = norm2(p);
  if (kind == DomainKind::Shell) return std::min(std::abs(r_outer - r), std::abs(r - r_inner));
  return std::abs(r_outer - r);
}

std::vector<int> NodeSet::component_boundary(int comp) const {
  std::vector<int> out;
  for (int j = 0; j < part.n_boundary; ++j)
    if (boundary_component[j] == comp) out.push_back(boundary_index(j));
  return out;
}

void NodeSet::validate() const {
  if (static_cast<int>(points.size()) != part.total())
    throw std::runtime_error("node set: partition does not match point count");
  if (static_cast<int>(normals.size()) != part.n_boundary)
    throw std::runtime_error("node set: one normal per boundary node required");
  if (part.n_ghost != 0 && part.n_ghost != part.n_boundary)
    throw std::runtime_error("node set: ghost count must equal boundary count");

  // distinctness via nearest-neighbor query
  if (size() >= 2) {
    KdTree tree(points, d);
    for (int i = 0; i < size(); ++i) {
      auto nn = tree.nearest(points[i], 2);
      const int other = nn[0] == i ? nn[1] : nn[0];
      if (dist2(points[i], points[other]) <= 0.0)
        throw std::runtime_error("node set: duplicate points");
    }
  }

  const double tol = 1e-12 * domain.r_outer;
  for (int j = 0; j < part.n_boundary; ++j) {
    const Point& b = points[boundary_index(j)];
    if (domain.boundary_residual(b) > tol)
      throw std::runtime_error("node set: boundary node off the analytic surface");
    const double nl = norm2(normals[j]);
    if (std::abs(nl - 1.0) > 1e-12)
      throw std::runtime_error("node set: boundary normal not unit length");
  }
  for (int j = 0; j < part.n_ghost; ++j) {
    if (domain.interior_clearance(points[ghost_index(j)]) >= 0.0)
      throw std::runtime_error("node set: ghost node not strictly outside the domain");
  }
}

namespace {

// background grid for min-separation rejection tests
struct SeparationGrid {
  double cell;
  double origin;
  int dim;
  std::unordered_map<int64_t, std::vector<int>> cells;
  const std::vector<Point>* pts;

  SeparationGrid(double r_min, double extent, int d, const std::vector<Point>* p)
      : cell(r_min), origin(-extent), dim(d), pts(p) {}

  int64_t key(const Point& p) const {
    const int64_t ix = static_cast<int64_t>(std::floor((p[0] - origin) / cell));
    const int64_t iy = static_cast<int64_t>(std::floor((p[1] - origin) / cell));
    const int64_t iz = dim == 3 ? static_cast<int64_t>(std::floor((p[2] - origin) / cell)) : 0;
    return (ix * 73856093LL) ^ (iy * 19349663LL) ^ (iz * 83492791LL);
  }

  void insert(const Point& p, int idx) { cells[key(p)].push_back(idx); }

  bool too_close(const Point& p, double r_min) const {
    const double r2 = r_min * r_min;
    const int zlo = dim == 3 ? -1 : 0, zhi = dim == 3 ? 1 : 0;
    Point q;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = zlo; dz <= zhi; ++dz) {
          q = {p[0] + dx * cell, p[1] + dy * cell, p[2] + dz * cell};
          auto it = cells.find(key(q));
          if (it == cells.end()) continue;
          for (int idx : it->second)
            if (dist2(p, (*pts)[idx]) < r2) return true;
        }
    return false;
  }
};

std::vector<Point> circle_points(double radius, int count) {
  std::vector<Point> out(count);
  for (int j = 0; j < count; ++j) {
    const double a = 2.0 * std::numbers::pi * j / count;
    out[j] = {radius * std::cos(a), radius * std::sin(a), 0.0};
  }
  return out;
}

// Fibonacci spiral: quasi-even sphere coverage with spacing ~ sqrt(4*pi/n)*R
std::vector<Point> sphere_points(double radius, int count) {
  std::vector<Point> out(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int j = 0; j < count; ++j) {
    const double z = 1.0 - 2.0 * (j + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden * j;
    out[j] = {radius * r * std::cos(a), radius * r * std::sin(a), radius * z};
  }
  return out;
}

double domain_measure(const Domain& dom) {
  const double pi = std::numbers::pi;
  switch (dom.kind) {
    case DomainKind::Disk:
      return pi * dom.r_outer * dom.r_outer;
    case DomainKind::Ball:
      return 4.0 / 3.0 * pi * std::pow(dom.r_outer, 3);
    case DomainKind::Shell:
      return 4.0 / 3.0 * pi * (std::pow(dom.r_outer, 3) - std::pow(dom.r_inner, 3));
  }
  return 0.0;
}

}  // namespace

NodeSet generate_nodes(const Domain& domain, double h_target, uint64_t seed) {
  if (h_target <= 0) throw std::invalid_argument("h_target must be positive");
  const int d = domain.dim();
  const double expected = domain_measure(domain) / std::pow(h_target, d);
  if (expected < 50)
    throw std::invalid_argument("h_target too large: expected node count below 50");

  // boundary nodes, outer component first
  std::vector<Point> boundary;
  std::vector<int> component;
  auto add_component = [&](double radius, int comp) {
    std::vector<Point> pts;
    if (d == 2) {
      const int nb = std::max(8, (int)std::llround(2.0 * std::numbers::pi * radius / h_target));
      pts = circle_points(radius, nb);
    } else {
      const int nb =
          std::max(16, (int)std::llround(4.0 * std::numbers::pi * radius * radius /
                                         (h_target * h_target)));
      pts = sphere_points(radius, nb);
    }
    for (auto& p : pts) {
      boundary.push_back(p);
      component.push_back(comp);
    }
  };
  add_component(domain.r_outer, 0);
  if (domain.kind == DomainKind::Shell) add_component(domain.r_inner, 1);

  // interior: dart throwing against a grid of already-accepted nodes.
  // r_min chosen so a near-maximal sample lands at ~1 node per h_target^d.
  const double r_min = (d == 2 ? 0.80 : 0.84) * h_target;
  const double extent = domain.r_outer * 1.5 + h_target;
  std::vector<Point> accepted = boundary;
  SeparationGrid grid(r_min, extent, d, &accepted);
  for (int i = 0; i < (int)accepted.size(); ++i) grid.insert(accepted[i], i);

  Rng rng(seed);
  const int reject_limit = 4000;
  int consecutive_rejects = 0;
  std::vector<Point> interior;
  const long long attempt_budget = 400LL * (long long)std::max(1.0, expected) + 100000;
  long long attempts = 0;
  while (consecutive_rejects < reject_limit && attempts < attempt_budget) {
    ++attempts;
    Point p{rng.uniform(-domain.r_outer, domain.r_outer),
            rng.uniform(-domain.r_outer, domain.r_outer),
            d == 3 ? rng.uniform(-domain.r_outer, domain.r_outer) : 0.0};
    if (domain.interior_clearance(p) < 0.5 * r_min || grid.too_close(p, r_min)) {
      ++consecutive_rejects;
      continue;
    }
    consecutive_rejects = 0;
    accepted.push_back(p);
    grid.insert(p, (int)accepted.size() - 1);
    interior.push_back(p);
  }
  if (attempts >= attempt_budget && consecutive_rejects < reject_limit)
    throw std::runtime_error("node generation did not converge within attempt budget");

  NodeSet out;
  out.domain = domain;
  out.d = d;
  out.points = interior;
  out.points.insert(out.points.end(), boundary.begin(), boundary.end());
  out.part.n_interior = (int)interior.size();
  out.part.n_boundary = (int)boundary.size();
  out.boundary_component = component;
  out.normals.resize(boundary.size());
  for (size_t j = 0; j < boundary.size(); ++j) {
    const Point& b = boundary[j];
    const double r = norm2(b);
    const double sign = component[j] == 1 ? -1.0 : 1.0;  // inner normal points inward
    out.normals[j] = {sign * b[0] / r, sign * b[1] / r, sign * b[2] / r};
  }
  const int n_non_ghost = out.part.non_ghost();
  if (n_non_ghost < 50)
    throw std::invalid_argument("h_target too large: node count below 50");
  out.h = std::pow((double)n_non_ghost, -1.0 / d);
  return out;
}

NodeSet generate_ghosts(const NodeSet& nodes, double offset, uint64_t seed) {
  if (nodes.part.n_ghost != 0) throw std::invalid_argument("node set already has ghosts");
  const double off = offset > 0 ? offset : nodes.h;
  NodeSet out = nodes;
  out.ghost_offset = off;

  std::vector<Point> ghosts(nodes.part.n_boundary);
  for (int j = 0; j < nodes.part.n_boundary; ++j) {
    const Point& b = nodes.points[nodes.boundary_index(j)];
    const Point& n = nodes.normals[j];
    ghosts[j] = {b[0] + off * n[0], b[1] + off * n[1], b[2] + off * n[2]};
    if (nodes.domain.interior_clearance(ghosts[j]) >= 0.0)
      throw std::runtime_error("ghost node falls inside the domain");
  }

  // ghost-ghost separation with deterministic jitter fallback
  const double min_sep = 0.5 * off;
  Rng rng(seed);
  for (int j = 0; j < (int)ghosts.size(); ++j) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      bool ok = true;
      for (int i = 0; i < j; ++i)
        if (dist2(ghosts[j], ghosts[i]) < min_sep * min_sep) { ok = false; break; }
      if (ok) break;
      if (attempt == 7) throw std::runtime_error("ghost separation could not be enforced");
      // jitter tangentially
      const Point& n = nodes.normals[j];
      Point t{rng.uniform(-1, 1), rng.uniform(-1, 1), nodes.d == 3 ? rng.uniform(-1, 1) : 0.0};
      const double dot = t[0] * n[0] + t[1] * n[1] + t[2] * n[2];
      t = {t[0] - dot * n[0], t[1] - dot * n[1], t[2] - dot * n[2]};
      const double tl = norm2(t);
      if (tl < 1e-12) continue;
      const Point& b = nodes.points[nodes.boundary_index(j)];
      const double amp = 0.25 * off;
      ghosts[j] = {b[0] + off * n[0] + amp * t[0] / tl, b[1] + off * n[1] + amp * t[1] / tl,
                   b[2] + off * n[2] + amp * t[2] / tl};
      if (nodes.domain.interior_clearance(ghosts[j]) >= 0.0)
        throw std::runtime_error("jittered ghost node falls inside the domain");
    }
  }

  out.points.insert(out.points.end(), ghosts.begin(), ghosts.end());
  out.part.n_ghost = (int)ghosts.size();
  return out;
}

// ---------------------------------------------------------------------------
// kd-tree

KdTree::KdTree(const std::vector<Point>& points, int dim, int count)
    : pts_(&points), dim_(dim) {
  const int n = count < 0 ? (int)points.size() : count;
  perm_.resize(n);
  for (int i = 0; i < n; ++i) perm_[i] = i;
  nodes_.reserve(n);
  root_ = build(0, n, 0);
}

int KdTree::build(int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % dim_;
  const int mid = (lo + hi) / 2;
  std::nth_element(perm_.begin() + lo, perm_.begin() + mid, perm_.begin() + hi,
                   [&](int a, int b) {
                     const double ca = (*pts_)[a][axis], cb = (*pts_)[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int id = (int)nodes_.size();
  nodes_.push_back(Node{});
  nodes_[id].point = perm_[mid];
  nodes_[id].axis = axis;
  const int l = build(lo, mid, depth + 1);
  const int r = build(mid + 1, hi, depth + 1);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

namespace {
// max-heap ordering on (dist2, index): the current worst candidate on top
inline bool heap_less(const std::pair<double, int>& a, const std::pair<double, int>& b) {
  return a.first < b.first || (a.first == b.first && a.second < b.second);
}
}  // namespace

void KdTree::search(int node, const Point& q, int n,
                    std::vector<std::pair<double, int>>& heap) const {
  if (node < 0) return;
  const Node& nd = nodes_[node];
  const Point& p = (*pts_)[nd.point];
  const double d2 = dist2(q, p);
  const std::pair<double, int> cand{d2, nd.point};
  if ((int)heap.size() < n) {
    heap.push_back(cand);
    std::push_heap(heap.begin(), heap.end(), heap_less);
  } else if (heap_less(cand, heap.front())) {
    std::pop_heap(heap.begin(), heap.end(), heap_less);
    heap.back() = cand;
    std::push_heap(heap.begin(), heap.end(), heap_less);
  }
  const double diff = q[nd.axis] - p[nd.axis];
  const int near = diff <= 0 ? nd.left : nd.right;
  const int far = diff <= 0 ? nd.right : nd.left;
  search(near, q, n, heap);
  if ((int)heap.size() < n || diff * diff <= heap.front().first) search(far, q, n, heap);
}

std::vector<int> KdTree::nearest(const Point& query, int n) const {
  if (n > size()) throw std::invalid_argument("knn: requested more neighbors than points");
  std::vector<std::pair<double, int>> heap;
  heap.reserve(n + 1);
  search(root_, query, n, heap);
  std::sort(heap.begin(), heap.end(), heap_less);
  std::vector<int> out(heap.size());
  for (size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].second;
  return out;
}

std::vector<int> nearest_neighbors(const NodeSet& nodes, const Point& query, int n,
                                   bool include_ghosts) {
  const int count = include_ghosts ? nodes.size() : nodes.part.non_ghost();
  KdTree tree(nodes.points, nodes.d, count);
  return tree.nearest(query, n);
}

// ---------------------------------------------------------------------------
// plain-text node-set format

void save_nodes_csv(const NodeSet& nodes, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  char buf[128];
  std::snprintf(buf, sizeof buf, "# d=%d N=%d Nb=%d Ng=%d h=%.17g\n", nodes.d, nodes.size(),
                nodes.part.n_boundary, nodes.part.n_ghost, nodes.h);
  f << buf;
  std::snprintf(buf, sizeof buf, "# domain=%d r_outer=%.17g r_inner=%.17g ghost_offset=%.17g\n",
                (int)nodes.domain.kind, nodes.domain.r_outer, nodes.domain.r_inner,
                nodes.ghost_offset);
  f << buf;
  auto cls = [&](int i) {
    if (nodes.is_ghost(i)) return 'g';
    return i >= nodes.part.boundary_begin() ? 'b' : 'i';
  };
  for (int i = 0; i < nodes.size(); ++i) {
    const Point& p = nodes.points[i];
    if (nodes.d == 2)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%c\n", p[0], p[1], cls(i));
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%c\n", p[0], p[1], p[2], cls(i));
    f << buf;
  }
  for (int j = 0; j < nodes.part.n_boundary; ++j) {
    const Point& nrm = nodes.normals[j];
    if (nodes.d == 2)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", nrm[0], nrm[1],
                    nodes.boundary_component[j]);
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", nrm[0], nrm[1], nrm[2],
                    nodes.boundary_component[j]);
    f << buf;
  }
}

NodeSet load_nodes_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  NodeSet out;
  std::string line;
  int N = 0, Nb = 0, Ng = 0, dom_kind = 0;
  double r_outer = 1, r_inner = 0;
  if (!std::getline(f, line) ||
      std::sscanf(line.c_str(), "# d=%d N=%d Nb=%d Ng=%d h=%lg", &out.d, &N, &Nb, &Ng, &out.h) != 5)
    throw std::runtime_error("bad node file header: " + path);
  if (!std::getline(f, line) ||
      std::sscanf(line.c_str(), "# domain=%d r_outer=%lg r_inner=%lg ghost_offset=%lg", &dom_kind,
                  &r_outer, &r_inner, &out.ghost_offset) != 4)
    throw std::runtime_error("bad node file domain line: " + path);
  out.domain.kind = static_cast<DomainKind>(dom_kind);
  out.domain.r_outer = r_outer;
  out.domain.r_inner = r_inner;

  std::vector<Point> interior, boundary, ghost;
  for (int i = 0; i < N; ++i) {
    if (!std::getline(f, line)) throw std::runtime_error("truncated node file: " + path);
    Point p{0, 0, 0};
    char c = 'i';
    const int got = out.d == 2 ? std::sscanf(line.c_str(), "%lg,%lg,%c", &p[0], &p[1], &c)
                               : std::sscanf(line.c_str(), "%lg,%lg,%lg,%c", &p[0], &p[1], &p[2], &c);
    if (got != out.d + 1) throw std::runtime_error("bad node row in " + path);
    (c == 'i' ? interior : c == 'b' ? boundary : ghost).push_back(p);
  }
  out.points = interior;
  out.points.insert(out.points.end(), boundary.begin(), boundary.end());
  out.points.insert(out.points.end(), ghost.begin(), ghost.end());
  out.part.n_interior = (int)interior.size();
  out.part.n_boundary = (int)boundary.size();
  out.part.n_ghost = (int)ghost.size();
  if (out.part.n_boundary != Nb || out.part.n_ghost != Ng)
    throw std::runtime_error("node file header disagrees with rows: " + path);

  out.normals.resize(Nb);
  out.boundary_component.resize(Nb);
  for (int j = 0; j < Nb; ++j) {
    if (!std::getline(f, line)) throw std::runtime_error("truncated normals in " + path);
    Point n{0, 0, 0};
    int comp = 0;
    const int got = out.d == 2 ? std::sscanf(line.c_str(), "%lg,%lg,%d", &n[0], &n[1], &comp)
                               : std::sscanf(line.c_str(), "%lg,%lg,%lg,%d", &n[0], &n[1], &n[2], &comp);
    if (got != out.d + 1) throw std::runtime_error("bad normal row in " + path);
    out.normals[j] = n;
    out.boundary_component[j] = comp;
  }
  return out;
}

}  // namespace mfad
