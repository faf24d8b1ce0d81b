// Node generation, ghost placement, and nearest-neighbor queries against
// brute-force oracles.
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "mfad/geometry.hpp"
#include "mfad/util.hpp"

using namespace mfad;

// oracle: exhaustive O(N) scan with the same ordering contract
static std::vector<int> brute_force_knn(const std::vector<Point>& pts, int d, const Point& q,
                                        int n) {
  std::vector<std::pair<double, int>> all;
  for (int i = 0; i < (int)pts.size(); ++i) {
    double d2 = 0;
    for (int s = 0; s < d; ++s) d2 += (pts[i][s] - q[s]) * (pts[i][s] - q[s]);
    all.emplace_back(d2, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = all[i].second;
  return out;
}

static double min_pairwise(const std::vector<Point>& pts, int count) {
  double best = 1e300;
  for (int i = 0; i < count; ++i)
    for (int j = i + 1; j < count; ++j) best = std::min(best, dist2(pts[i], pts[j]));
  return std::sqrt(best);
}

TEST_CASE("disk node generation lands near the target density") {
  NodeSet ns = generate_nodes(Domain::disk(1.0), 0.07, 11);
  ns.validate();
  // pi / 0.07^2 ~ 641; rate-based acceptance, not node-exact
  CHECK(ns.part.non_ghost() > 450);
  CHECK(ns.part.non_ghost() < 900);
  CHECK(min_pairwise(ns.points, ns.part.non_ghost()) >= 0.5 * 0.07);
  for (int j = 0; j < ns.part.n_boundary; ++j)
    CHECK(ns.domain.boundary_residual(ns.points[ns.boundary_index(j)]) <= 1e-12);
  CHECK(ns.h == doctest::Approx(std::pow((double)ns.part.non_ghost(), -0.5)));
}

TEST_CASE("degenerate resolution is rejected") {
  CHECK_THROWS_WITH_AS(generate_nodes(Domain::disk(1.0), 0.9, 1), doctest::Contains("h_target"),
                       std::invalid_argument);
}

TEST_CASE("shell interior points stay between the spheres") {
  NodeSet ns = generate_nodes(Domain::shell(0.3, 1.0), 0.09, 3);
  ns.validate();
  int outer = 0, inner = 0;
  for (int j = 0; j < ns.part.n_boundary; ++j)
    (ns.boundary_component[j] == 0 ? outer : inner)++;
  CHECK(outer > 0);
  CHECK(inner > 0);
  for (int i = 0; i < ns.part.n_interior; ++i) {
    const double r = norm2(ns.points[i]);
    CHECK(r > 0.3);
    CHECK(r < 1.0);
  }
}

TEST_CASE("ghosts sit along the outward normal") {
  SUBCASE("unit disk") {
    NodeSet ns = generate_nodes(Domain::disk(1.0), 0.15, 5);
    NodeSet g = generate_ghosts(ns, 0.1, 9);
    g.validate();
    CHECK(g.part.n_ghost == g.part.n_boundary);
    // find the boundary node at angle 0: (1, 0)
    for (int j = 0; j < g.part.n_boundary; ++j) {
      const Point& b = g.points[g.boundary_index(j)];
      if (std::abs(b[0] - 1.0) < 1e-14 && std::abs(b[1]) < 1e-14) {
        const Point& gh = g.points[g.ghost_index(j)];
        CHECK(gh[0] == doctest::Approx(1.1).epsilon(1e-13));
        CHECK(gh[1] == doctest::Approx(0.0).epsilon(1e-13));
      }
    }
  }

  SUBCASE("shell inner boundary goes toward the center") {
    // synthetic set with a known inner-boundary node
    NodeSet ns;
    ns.domain = Domain::shell(0.3, 1.0);
    ns.d = 3;
    ns.points = {{0.6, 0, 0}, {0, 0.55, 0}, {0.5, 0.3, 0.1},
                 {1.0, 0, 0},              // outer boundary
                 {0.3, 0, 0}};             // inner boundary
    ns.part.n_interior = 3;
    ns.part.n_boundary = 2;
    ns.normals = {{1, 0, 0}, {-1, 0, 0}};
    ns.boundary_component = {0, 1};
    ns.h = 0.1;
    NodeSet g = generate_ghosts(ns, 0.05, 1);
    const Point& inner_ghost = g.points[g.ghost_index(1)];
    CHECK(inner_ghost[0] == doctest::Approx(0.25));
    CHECK(norm2(inner_ghost) < 0.3);  // strictly outside the shell domain
    g.validate();
  }

  SUBCASE("count preservation and determinism") {
    NodeSet ns = generate_nodes(Domain::disk(1.0), 0.07, 21);
    NodeSet a = generate_ghosts(ns, 0.0, 77);
    NodeSet b = generate_ghosts(ns, 0.0, 77);
    REQUIRE(a.part.n_ghost == ns.part.n_boundary);
    for (int i = 0; i < a.size(); ++i) {
      CHECK(a.points[i][0] == b.points[i][0]);
      CHECK(a.points[i][1] == b.points[i][1]);
    }
  }
}

TEST_CASE("knn: line of points, self plus adjacent") {
  std::vector<Point> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({0.1 * i, 0.0, 0.0});
  KdTree tree(pts, 2);
  auto got = tree.nearest(pts[7], 3);
  CHECK(got[0] == 7);
  std::vector<int> rest{got[1], got[2]};
  std::sort(rest.begin(), rest.end());
  CHECK(rest == std::vector<int>{6, 8});
}

TEST_CASE("knn: n=1 returns the closest point") {
  Rng rng(4);
  std::vector<Point> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({rng.uniform(), rng.uniform(), 0.0});
  KdTree tree(pts, 2);
  Point q{0.4, 0.6, 0.0};
  auto got = tree.nearest(q, 1);
  for (int i = 0; i < 100; ++i) CHECK(dist2(q, pts[got[0]]) <= dist2(q, pts[i]));
}

TEST_CASE("knn matches the brute-force oracle on randomized trials") {
  Rng rng(99);
  std::vector<Point> pts;
  for (int i = 0; i < 500; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0});
  KdTree tree(pts, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    Point q{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), 0.0};
    const int n = 1 + (int)rng.index(40);
    CHECK(tree.nearest(q, n) == brute_force_knn(pts, 2, q, n));
  }
  CHECK_THROWS_AS((void)tree.nearest({0, 0, 0}, 501), std::invalid_argument);
}

TEST_CASE("knn in 3d against the oracle") {
  Rng rng(7);
  std::vector<Point> pts;
  for (int i = 0; i < 400; ++i)
    pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  KdTree tree(pts, 3);
  for (int trial = 0; trial < 200; ++trial) {
    Point q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(tree.nearest(q, 25) == brute_force_knn(pts, 3, q, 25));
  }
}

TEST_CASE("node file round trip") {
  NodeSet ns = generate_ghosts(generate_nodes(Domain::disk(1.0), 0.12, 13), 0.0, 14);
  const std::string path = (std::filesystem::temp_directory_path() / "mfad_nodes.csv").string();
  save_nodes_csv(ns, path);
  NodeSet back = load_nodes_csv(path);
  REQUIRE(back.size() == ns.size());
  CHECK(back.part.n_boundary == ns.part.n_boundary);
  CHECK(back.part.n_ghost == ns.part.n_ghost);
  CHECK(back.h == ns.h);
  for (int i = 0; i < ns.size(); ++i)
    for (int s = 0; s < 2; ++s) CHECK(back.points[i][s] == ns.points[i][s]);
  for (int j = 0; j < ns.part.n_boundary; ++j) {
    CHECK(back.boundary_component[j] == ns.boundary_component[j]);
    for (int s = 0; s < 2; ++s) CHECK(back.normals[j][s] == ns.normals[j][s]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("ball node generation density") {
  NodeSet ns = generate_nodes(Domain::ball(1.0), 0.12, 8);
  ns.validate();
  const double expected = 4.0 / 3.0 * 3.14159265 / (0.12 * 0.12 * 0.12);
  CHECK(ns.part.non_ghost() > 0.55 * expected);
  CHECK(ns.part.non_ghost() < 1.6 * expected);
}
