#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "mpinf/generators.hpp"
#include "mpinf/model_io.hpp"

using namespace mpinf;

namespace {

gen::instance_spec grid_spec(int rows, int cols, int labels, gen::interaction inter, std::uint64_t seed) {
  gen::instance_spec s;
  s.topo = gen::topology::grid;
  s.rows = rows;
  s.cols = cols;
  s.labels = labels;
  s.inter = inter;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("grid(2,2) has 4 variables and 4 edges and is byte-reproducible", "[generators]") {
  const auto spec = grid_spec(2, 2, 2, gen::interaction::random, 123);
  const model a = gen::generate(spec);
  CHECK(a.num_vars() == 4);
  CHECK(a.num_edges() == 4);
  const model b = gen::generate(spec);
  CHECK(io::model_to_json(a).dump() == io::model_to_json(b).dump());
}

TEST_CASE("complete(5) has 10 edges", "[generators]") {
  gen::instance_spec s;
  s.topo = gen::topology::complete;
  s.n = 5;
  s.labels = 3;
  s.seed = 1;
  const model m = gen::generate(s);
  CHECK(m.num_vars() == 5);
  CHECK(m.num_edges() == 10);
}

TEST_CASE("chain(n) has n-1 edges in order", "[generators]") {
  gen::instance_spec s;
  s.topo = gen::topology::chain;
  s.n = 7;
  s.labels = 2;
  s.seed = 2;
  const model m = gen::generate(s);
  CHECK(m.num_edges() == 6);
  for (int e = 0; e < 6; ++e) CHECK(m.edge_vars(e) == std::vector<int>{e, e + 1});
}

TEST_CASE("random_tree(n) is a spanning tree", "[generators]") {
  gen::instance_spec s;
  s.topo = gen::topology::random_tree;
  s.n = 12;
  s.labels = 2;
  s.seed = 3;
  const model m = gen::generate(s);
  REQUIRE(m.num_edges() == 11);
  // union-find connectivity check
  std::vector<int> parent(m.num_vars());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (int e = 0; e < m.num_edges(); ++e) {
    const int a = find(m.edge_vars(e)[0]), b = find(m.edge_vars(e)[1]);
    CHECK(a != b);  // acyclic
    parent[a] = b;
  }
  for (int v = 1; v < m.num_vars(); ++v) CHECK(find(v) == find(0));  // connected
}

TEST_CASE("different seeds give different instances", "[generators]") {
  const model a = gen::generate(grid_spec(3, 3, 3, gen::interaction::random, 1));
  const model b = gen::generate(grid_spec(3, 3, 3, gen::interaction::random, 2));
  CHECK(io::model_to_json(a).dump() != io::model_to_json(b).dump());
}

TEST_CASE("attractive and supermodular tables pass the supermodularity check", "[generators]") {
  for (gen::interaction inter : {gen::interaction::attractive, gen::interaction::supermodular_ising}) {
    const model m = gen::generate(grid_spec(3, 3, 2, inter, 5));
    for (int e = 0; e < m.num_edges(); ++e) {
      const auto& t = m.theta().factor[e];
      // theta(0,0) + theta(1,1) >= theta(0,1) + theta(1,0)
      CHECK(t[0] + t[3] >= t[1] + t[2]);
    }
  }
}

TEST_CASE("interaction tables match their definitions", "[generators]") {
  const model rep = gen::generate(grid_spec(2, 2, 3, gen::interaction::repulsive, 7));
  for (int e = 0; e < rep.num_edges(); ++e) {
    const auto& t = rep.theta().factor[e];
    const double w = -t[0];
    CHECK(w >= 0.0);
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y) CHECK(t[x * 3 + y] == (x == y ? -w : 0.0));
  }

  const model circ = gen::generate(grid_spec(2, 2, 4, gen::interaction::circular_distance, 8));
  for (int e = 0; e < circ.num_edges(); ++e) {
    const auto& t = circ.theta().factor[e];
    const double w = -t[1];  // distance 1 entry
    CHECK(w >= 0.0);
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y) {
        const int d = std::min(std::abs(x - y), 4 - std::abs(x - y));
        CHECK(t[x * 4 + y] == Catch::Approx(-w * d).margin(1e-15));
      }
  }

  const model mixed = gen::generate(grid_spec(3, 3, 2, gen::interaction::mixed, 9));
  bool saw_plus = false, saw_minus = false;
  for (int e = 0; e < mixed.num_edges(); ++e) {
    const double diag = mixed.theta().factor[e][0];
    saw_plus |= diag > 0;
    saw_minus |= diag < 0;
  }
  CHECK(saw_plus);
  CHECK(saw_minus);
}

TEST_CASE("generated instances are finite and compatible", "[generators]") {
  for (gen::interaction inter :
       {gen::interaction::random, gen::interaction::attractive, gen::interaction::repulsive,
        gen::interaction::mixed, gen::interaction::circular_distance}) {
    const model m = gen::generate(grid_spec(4, 3, 3, inter, 11));
    CHECK(check_compatibility(m));
    for (const auto& tab : m.theta().unary)
      for (double c : tab) CHECK(std::isfinite(c));
    for (const auto& tab : m.theta().factor)
      for (double c : tab) CHECK(std::isfinite(c));
  }
}

TEST_CASE("unary scale controls the unary range", "[generators]") {
  auto spec = grid_spec(3, 3, 4, gen::interaction::random, 13);
  spec.unary_scale = 0.0;
  const model m = gen::generate(spec);
  for (const auto& tab : m.theta().unary)
    for (double c : tab) CHECK(c == 0.0);
}

TEST_CASE("invalid specs are rejected", "[generators]") {
  auto bad_labels = grid_spec(2, 2, 1, gen::interaction::random, 0);
  CHECK_THROWS_AS(gen::generate(bad_labels), std::invalid_argument);

  auto bad_super = grid_spec(2, 2, 3, gen::interaction::supermodular_ising, 0);
  CHECK_THROWS_AS(gen::generate(bad_super), std::invalid_argument);

  auto bad_grid = grid_spec(0, 2, 2, gen::interaction::random, 0);
  CHECK_THROWS_AS(gen::generate(bad_grid), std::invalid_argument);

  auto bad_scale = grid_spec(2, 2, 2, gen::interaction::random, 0);
  bad_scale.pairwise_scale = -1.0;
  CHECK_THROWS_AS(gen::generate(bad_scale), std::invalid_argument);

  gen::instance_spec bad_n;
  bad_n.topo = gen::topology::complete;
  bad_n.n = 0;
  CHECK_THROWS_AS(gen::generate(bad_n), std::invalid_argument);
}
