#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mpinf/model.hpp"

namespace mpinf::gen {

enum class topology { grid, complete, chain, random_tree };
enum class interaction { random, attractive, repulsive, mixed, circular_distance, supermodular_ising };

// Reproducible instance family. Generation is deterministic for a fixed
// spec: one mt19937_64 stream seeded with `seed`, consumed as documented in
// generate(). Doubles come from the top 53 bits of the raw output, so the
// values are identical on every platform.
struct instance_spec {
  topology topo = topology::grid;
  int rows = 0, cols = 0;  // grid
  int n = 0;               // complete / chain / random_tree
  int labels = 2;
  interaction inter = interaction::random;
  double unary_scale = 1.0;
  double pairwise_scale = 1.0;
  std::uint64_t seed = 0;
};

inline const char* to_string(topology t) {
  switch (t) {
    case topology::grid: return "grid";
    case topology::complete: return "complete";
    case topology::chain: return "chain";
    case topology::random_tree: return "random_tree";
  }
  return "?";
}

inline const char* to_string(interaction i) {
  switch (i) {
    case interaction::random: return "random";
    case interaction::attractive: return "attractive";
    case interaction::repulsive: return "repulsive";
    case interaction::mixed: return "mixed";
    case interaction::circular_distance: return "circular_distance";
    case interaction::supermodular_ising: return "supermodular_ising";
  }
  return "?";
}

namespace detail {

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }  // [0,1)
inline double symmetric(std::mt19937_64& rng) { return 2.0 * unit(rng) - 1.0; }                    // [-1,1)

}  // namespace detail

// Deterministic instance generator. Stream order: topology draws first
// (random_tree parents only), then unary entries in variable order, then
// per-factor draws in canonical (lexicographic) edge order.
//
// Interactions (pairwise tables over labels x, y; w drawn per edge):
//   random             each entry iid uniform[-1,1) * pairwise_scale
//   attractive         pairwise_scale * w * [x==y],  w ~ U[0,1)
//   repulsive         -pairwise_scale * w * [x==y]
//   mixed              attractive or repulsive, sign drawn per edge
//   circular_distance -pairwise_scale * w * min(|x-y|, K-|x-y|)
//   supermodular_ising pairwise_scale * w * [x==y], labels fixed to 2
// Unary entries are iid uniform[-1,1) * unary_scale.
inline model generate(const instance_spec& spec) {
  if (spec.labels < 2) throw std::invalid_argument("generate: labels must be >= 2");
  if (!(spec.unary_scale >= 0) || !(spec.pairwise_scale >= 0))
    throw std::invalid_argument("generate: scales must be >= 0");
  if (spec.inter == interaction::supermodular_ising && spec.labels != 2)
    throw std::invalid_argument("generate: supermodular_ising requires exactly 2 labels");

  int num_vars = 0;
  std::vector<std::vector<int>> edges;
  std::mt19937_64 rng(spec.seed);

  switch (spec.topo) {
    case topology::grid: {
      if (spec.rows < 1 || spec.cols < 1) throw std::invalid_argument("generate: grid needs rows, cols >= 1");
      num_vars = spec.rows * spec.cols;
      for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c) {
          const int v = r * spec.cols + c;
          if (c + 1 < spec.cols) edges.push_back({v, v + 1});
          if (r + 1 < spec.rows) edges.push_back({v, v + spec.cols});
        }
      break;
    }
    case topology::complete: {
      if (spec.n < 1) throw std::invalid_argument("generate: complete needs n >= 1");
      num_vars = spec.n;
      for (int i = 0; i < spec.n; ++i)
        for (int j = i + 1; j < spec.n; ++j) edges.push_back({i, j});
      break;
    }
    case topology::chain: {
      if (spec.n < 1) throw std::invalid_argument("generate: chain needs n >= 1");
      num_vars = spec.n;
      for (int i = 0; i + 1 < spec.n; ++i) edges.push_back({i, i + 1});
      break;
    }
    case topology::random_tree: {
      if (spec.n < 1) throw std::invalid_argument("generate: random_tree needs n >= 1");
      num_vars = spec.n;
      for (int v = 1; v < spec.n; ++v) {
        const int parent = static_cast<int>(rng() % static_cast<std::uint64_t>(v));
        edges.push_back({parent, v});
      }
      break;
    }
  }
  std::sort(edges.begin(), edges.end());

  const int K = spec.labels;
  potentials p;
  p.unary.resize(num_vars);
  for (int v = 0; v < num_vars; ++v) {
    p.unary[v].resize(K);
    for (int x = 0; x < K; ++x) p.unary[v][x] = detail::symmetric(rng) * spec.unary_scale;
  }

  p.factor.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto& tab = p.factor[e];
    tab.assign(static_cast<std::size_t>(K) * K, 0.0);
    switch (spec.inter) {
      case interaction::random:
        for (auto& c : tab) c = detail::symmetric(rng) * spec.pairwise_scale;
        break;
      case interaction::attractive:
      case interaction::supermodular_ising: {
        const double w = detail::unit(rng) * spec.pairwise_scale;
        for (int x = 0; x < K; ++x) tab[static_cast<std::size_t>(x) * K + x] = w;
        break;
      }
      case interaction::repulsive: {
        const double w = detail::unit(rng) * spec.pairwise_scale;
        for (int x = 0; x < K; ++x) tab[static_cast<std::size_t>(x) * K + x] = -w;
        break;
      }
      case interaction::mixed: {
        const double w = detail::unit(rng) * spec.pairwise_scale;
        const double s = (rng() & 1) ? 1.0 : -1.0;
        for (int x = 0; x < K; ++x) tab[static_cast<std::size_t>(x) * K + x] = s * w;
        break;
      }
      case interaction::circular_distance: {
        const double w = detail::unit(rng) * spec.pairwise_scale;
        for (int x = 0; x < K; ++x)
          for (int y = 0; y < K; ++y) {
            const int d = std::min(std::abs(x - y), K - std::abs(x - y));
            tab[static_cast<std::size_t>(x) * K + y] = -w * d;
          }
        break;
      }
    }
  }

  hypergraph g{std::vector<int>(num_vars, K), std::move(edges)};
  return model(std::move(g), std::move(p));
}

}  // namespace mpinf::gen
