#pragma once

#include <vector>

#include "mpinf/model.hpp"
#include "mpinf/semiring.hpp"

namespace mpinf::oracle {

struct capacity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct degenerate_model_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t default_state_cap = std::size_t{1} << 22;

// Number of joint states, or throws capacity_error beyond the cap.
inline std::size_t checked_joint_count(const model& m, std::size_t cap = default_state_cap) {
  std::size_t count = 1;
  for (int v = 0; v < m.num_vars(); ++v) {
    count *= static_cast<std::size_t>(m.domain(v));
    if (count > cap)
      throw capacity_error("oracle: joint state count exceeds cap of " + std::to_string(cap) + " states");
  }
  return count;
}

namespace detail {

template <class F>
void enumerate_assignments(const model& m, F&& f) {
  const int n = m.num_vars();
  assignment x(n, 0);
  for (;;) {
    f(x);
    int v = n - 1;
    while (v >= 0) {
      if (++x[v] < m.domain(v)) break;
      x[v] = 0;
      --v;
    }
    if (v < 0) break;
  }
}

}  // namespace detail

// Φ at finite beta: (1/β) log Σ exp(β ⟨θ,δ(x_V)⟩), max-shifted; at β=inf
// the maximum energy.
inline double log_partition(const model& m, temperature t, std::size_t cap = default_state_cap) {
  checked_joint_count(m, cap);
  double best = neg_inf;
  detail::enumerate_assignments(m, [&](const assignment& x) { best = std::max(best, evaluate(m, x)); });
  if (t.is_infinite() || best == neg_inf) return best;
  double sum = 0.0;
  detail::enumerate_assignments(m, [&](const assignment& x) {
    const double e = evaluate(m, x);
    if (e != neg_inf) sum += std::exp(t.beta() * (e - best));
  });
  return best + std::log(sum) / t.beta();
}

// Finite beta: probability-scale marginals of p(x_V | βθ). β=inf: log-scale
// max-marginals, normalized by subtracting Φ∞ so each table's max is 0.
inline belief_vector exact_marginals(const model& m, temperature t, std::size_t cap = default_state_cap) {
  checked_joint_count(m, cap);
  double best = neg_inf;
  detail::enumerate_assignments(m, [&](const assignment& x) { best = std::max(best, evaluate(m, x)); });
  if (best == neg_inf) throw degenerate_model_error("oracle: all assignments have energy -inf");

  belief_vector out;
  out.unary.resize(m.num_vars());
  out.factor.resize(m.num_edges());

  if (t.is_infinite()) {
    out.scale = belief_scale::log_domain;
    for (int v = 0; v < m.num_vars(); ++v) out.unary[v].assign(m.domain(v), neg_inf);
    for (int e = 0; e < m.num_edges(); ++e) out.factor[e].assign(m.table_size(e), neg_inf);
    std::vector<int> x_edge;
    detail::enumerate_assignments(m, [&](const assignment& x) {
      const double en = evaluate(m, x);
      for (int v = 0; v < m.num_vars(); ++v) out.unary[v][x[v]] = std::max(out.unary[v][x[v]], en);
      for (int e = 0; e < m.num_edges(); ++e) {
        const auto& vars = m.edge_vars(e);
        x_edge.resize(vars.size());
        for (std::size_t k = 0; k < vars.size(); ++k) x_edge[k] = x[vars[k]];
        auto& cell = out.factor[e][m.flat_index(e, x_edge)];
        cell = std::max(cell, en);
      }
    });
    for (auto& tab : out.unary)
      for (auto& c : tab) c = (c == neg_inf) ? neg_inf : c - best;
    for (auto& tab : out.factor)
      for (auto& c : tab) c = (c == neg_inf) ? neg_inf : c - best;
    return out;
  }

  out.scale = belief_scale::probability;
  for (int v = 0; v < m.num_vars(); ++v) out.unary[v].assign(m.domain(v), 0.0);
  for (int e = 0; e < m.num_edges(); ++e) out.factor[e].assign(m.table_size(e), 0.0);
  double z = 0.0;
  std::vector<int> x_edge;
  detail::enumerate_assignments(m, [&](const assignment& x) {
    const double en = evaluate(m, x);
    if (en == neg_inf) return;
    const double w = std::exp(t.beta() * (en - best));
    z += w;
    for (int v = 0; v < m.num_vars(); ++v) out.unary[v][x[v]] += w;
    for (int e = 0; e < m.num_edges(); ++e) {
      const auto& vars = m.edge_vars(e);
      x_edge.resize(vars.size());
      for (std::size_t k = 0; k < vars.size(); ++k) x_edge[k] = x[vars[k]];
      out.factor[e][m.flat_index(e, x_edge)] += w;
    }
  });
  for (auto& tab : out.unary)
    for (auto& c : tab) c /= z;
  for (auto& tab : out.factor)
    for (auto& c : tab) c /= z;
  return out;
}

// All assignments attaining the maximum energy. Comparisons are exact:
// every energy comes from the same summation path.
inline std::vector<assignment> ground_states(const model& m, std::size_t cap = default_state_cap) {
  checked_joint_count(m, cap);
  double best = neg_inf;
  std::vector<assignment> states;
  detail::enumerate_assignments(m, [&](const assignment& x) {
    const double en = evaluate(m, x);
    if (en > best) {
      best = en;
      states.clear();
      states.push_back(x);
    } else if (en == best) {
      states.push_back(x);
    }
  });
  return states;
}

}  // namespace mpinf::oracle
