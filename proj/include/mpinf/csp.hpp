#pragma once

#include <vector>

#include "mpinf/model.hpp"

namespace mpinf::csp {

// Boolean tables marking maximal components of a potential vector; read as
// a CSP instance over the same hypergraph.
struct active_mask {
  std::vector<std::vector<char>> unary;
  std::vector<std::vector<char>> factor;

  std::uint64_t digest() const {
    std::uint64_t h = mpinf::detail::fnv_offset;
    for (const auto& tab : unary) {
      h = mpinf::detail::fnv1a64(h, tab.data(), tab.size());
      h = mpinf::detail::fnv1a64(h, "u", 1);
    }
    for (const auto& tab : factor) {
      h = mpinf::detail::fnv1a64(h, tab.data(), tab.size());
      h = mpinf::detail::fnv1a64(h, "f", 1);
    }
    return h;
  }
};

struct degenerate_table_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ⌈θ⌉ with a tolerance band: an entry is active iff it is within eps of its
// table's maximum.
inline active_mask make_active_mask(const potentials& p, double eps) {
  if (!(eps >= 0)) throw std::invalid_argument("active_mask: eps must be >= 0");
  auto mask_table = [eps](const std::vector<double>& tab) {
    double best = neg_inf;
    for (double x : tab) best = std::max(best, x);
    if (best == neg_inf) throw degenerate_table_error("active_mask: table is all -inf");
    std::vector<char> out(tab.size());
    for (std::size_t i = 0; i < tab.size(); ++i) out[i] = tab[i] >= best - eps ? 1 : 0;
    return out;
  };
  active_mask c;
  c.unary.reserve(p.unary.size());
  c.factor.reserve(p.factor.size());
  for (const auto& tab : p.unary) c.unary.push_back(mask_table(tab));
  for (const auto& tab : p.factor) c.factor.push_back(mask_table(tab));
  return c;
}

inline active_mask make_active_mask(const belief_vector& b, double eps) {
  potentials p{b.unary, b.factor};
  return make_active_mask(p, eps);
}

struct csp_result {
  std::vector<assignment> solutions;
  bool truncated = false;
};

inline constexpr std::size_t default_solution_limit = 1000000;

// All assignments satisfying every unary and factor relation, found by
// backtracking over variables in index order with forward pruning by the
// unary masks. A factor is checked as soon as its last variable is bound.
inline csp_result solve_csp(const model& m, const active_mask& c, std::size_t limit = default_solution_limit) {
  if (static_cast<int>(c.unary.size()) != m.num_vars() || static_cast<int>(c.factor.size()) != m.num_edges())
    throw std::invalid_argument("solve_csp: mask shape mismatch");
  for (int v = 0; v < m.num_vars(); ++v)
    if (static_cast<int>(c.unary[v].size()) != m.domain(v))
      throw std::invalid_argument("solve_csp: mask shape mismatch");
  for (int e = 0; e < m.num_edges(); ++e)
    if (c.factor[e].size() != m.table_size(e)) throw std::invalid_argument("solve_csp: mask shape mismatch");

  const int n = m.num_vars();
  std::vector<std::vector<int>> edges_closing_at(n);  // edges whose max variable is v
  for (int e = 0; e < m.num_edges(); ++e) edges_closing_at[m.edge_vars(e).back()].push_back(e);

  csp_result out;
  assignment x(n, 0);
  std::vector<int> x_edge;
  auto consistent_at = [&](int v) {
    for (int e : edges_closing_at[v]) {
      const auto& vars = m.edge_vars(e);
      x_edge.resize(vars.size());
      for (std::size_t k = 0; k < vars.size(); ++k) x_edge[k] = x[vars[k]];
      if (!c.factor[e][m.flat_index(e, x_edge)]) return false;
    }
    return true;
  };

  // Iterative depth-first search; states at depth v run 0..|X_v|-1.
  int depth = 0;
  x[0] = -1;
  while (depth >= 0) {
    ++x[depth];
    if (x[depth] >= m.domain(depth)) {
      --depth;
      continue;
    }
    if (!c.unary[depth][x[depth]] || !consistent_at(depth)) continue;
    if (depth == n - 1) {
      if (out.solutions.size() >= limit) {
        out.truncated = true;
        return out;
      }
      out.solutions.push_back(x);
    } else {
      ++depth;
      x[depth] = -1;
    }
  }
  return out;
}

// active_mask then solve_csp: recover (approximate) ground states from a
// table vector such as max-marginals or a converged reparameterization.
inline csp_result decode_ground_states(const model& m, const potentials& p, double eps,
                                       std::size_t limit = default_solution_limit) {
  return solve_csp(m, make_active_mask(p, eps), limit);
}

inline csp_result decode_ground_states(const model& m, const belief_vector& b, double eps,
                                       std::size_t limit = default_solution_limit) {
  return solve_csp(m, make_active_mask(b, eps), limit);
}

}  // namespace mpinf::csp
