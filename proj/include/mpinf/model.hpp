#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpinf/semiring.hpp"

namespace mpinf {

struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using assignment = std::vector<int>;

// Variables with finite domains plus hyperedges (strictly increasing index
// tuples of arity >= 2, no duplicates).
struct hypergraph {
  std::vector<int> domain_sizes;
  std::vector<std::vector<int>> edges;

  int num_vars() const { return static_cast<int>(domain_sizes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

// Log-domain potential tables. Factor tables are stored in mixed-radix
// row-major order over the edge's (sorted) variable tuple: the last listed
// variable varies fastest.
struct potentials {
  std::vector<std::vector<double>> unary;   // [v][x_v]
  std::vector<std::vector<double>> factor;  // [e][flat joint index]
};

// One table per incident (edge, variable) pair, indexed [e][pos][x_v].
// Entries stay finite: dead components are never touched by the solvers.
struct message_vector {
  std::vector<std::vector<std::vector<double>>> msg;

  std::vector<double>& at(int e, int pos) { return msg[e][pos]; }
  const std::vector<double>& at(int e, int pos) const { return msg[e][pos]; }
};

// Per-variable log-distributions used by the outer loop of the double-loop
// algorithm; each table is ⊕-normalized to 0.
struct tilde_theta {
  std::vector<std::vector<double>> t;
};

enum class belief_scale { probability, log_domain };

// Per-variable and per-edge tables of (log-)marginal approximations.
struct belief_vector {
  std::vector<std::vector<double>> unary;
  std::vector<std::vector<double>> factor;
  belief_scale scale = belief_scale::log_domain;
};

namespace detail {

inline std::uint64_t fnv1a64(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline constexpr std::uint64_t fnv_offset = 0xcbf29ce484222325ull;

}  // namespace detail

// A validated problem instance: hypergraph + potentials, with precomputed
// incidence lists, factor strides and the canonical (lexicographic) edge
// order used by all deterministic sweeps.
class model {
 public:
  struct pair_ref {
    int edge;
    int pos;
  };

  model(hypergraph graph, potentials theta) : graph_(std::move(graph)), theta_(std::move(theta)) {
    validate_structure();
    build_index();
  }

  const hypergraph& graph() const { return graph_; }
  const potentials& theta() const { return theta_; }

  int num_vars() const { return graph_.num_vars(); }
  int num_edges() const { return graph_.num_edges(); }
  int domain(int v) const { return graph_.domain_sizes[v]; }
  const std::vector<int>& edge_vars(int e) const { return graph_.edges[e]; }
  int arity(int e) const { return static_cast<int>(graph_.edges[e].size()); }
  std::size_t table_size(int e) const { return theta_.factor[e].size(); }
  std::size_t stride(int e, int pos) const { return strides_[e][pos]; }

  // Edges containing v, as (edge, position-within-edge) pairs.
  const std::vector<pair_ref>& incident(int v) const { return incident_[v]; }

  // Edge indices sorted lexicographically by variable tuple.
  const std::vector<int>& canonical_edge_order() const { return edge_order_; }

  std::size_t flat_index(int e, std::span<const int> x_edge) const {
    std::size_t idx = 0;
    const auto& vars = graph_.edges[e];
    for (std::size_t k = 0; k < vars.size(); ++k) idx += strides_[e][k] * static_cast<std::size_t>(x_edge[k]);
    return idx;
  }

  void unflatten(int e, std::size_t idx, std::span<int> x_edge) const {
    const auto& vars = graph_.edges[e];
    for (std::size_t k = 0; k < vars.size(); ++k) {
      x_edge[k] = static_cast<int>(idx / strides_[e][k]);
      idx %= strides_[e][k];
    }
  }

 private:
  void validate_structure();
  void build_index();

  hypergraph graph_;
  potentials theta_;
  std::vector<std::vector<std::size_t>> strides_;
  std::vector<std::vector<pair_ref>> incident_;
  std::vector<int> edge_order_;
};

inline void model::validate_structure() {
  const int n = graph_.num_vars();
  if (n <= 0) throw validation_error("model: no variables");
  for (int v = 0; v < n; ++v)
    if (graph_.domain_sizes[v] < 1) throw validation_error("model: domain size < 1 at variable " + std::to_string(v));
  if (static_cast<int>(theta_.unary.size()) != n) throw validation_error("model: unary table count != num_vars");
  if (theta_.factor.size() != graph_.edges.size()) throw validation_error("model: factor table count != num edges");

  for (int v = 0; v < n; ++v) {
    const auto& tab = theta_.unary[v];
    if (static_cast<int>(tab.size()) != graph_.domain_sizes[v])
      throw validation_error("model: unary[" + std::to_string(v) + "] length mismatch");
    bool any_finite = false;
    for (double x : tab) {
      if (!is_valid_value(x)) throw validation_error("model: unary[" + std::to_string(v) + "] has NaN or +inf");
      any_finite |= (x != neg_inf);
    }
    if (!any_finite) throw validation_error("model: unary[" + std::to_string(v) + "] is all -inf");
  }

  for (int e = 0; e < graph_.num_edges(); ++e) {
    const auto& vars = graph_.edges[e];
    if (vars.size() < 2) throw validation_error("model: factors[" + std::to_string(e) + "] is a singleton");
    std::size_t size = 1;
    for (std::size_t k = 0; k < vars.size(); ++k) {
      if (vars[k] < 0 || vars[k] >= n)
        throw validation_error("model: factors[" + std::to_string(e) + "].vars out of range");
      if (k > 0 && vars[k] <= vars[k - 1])
        throw validation_error("model: factors[" + std::to_string(e) + "].vars not strictly increasing");
      size *= static_cast<std::size_t>(graph_.domain_sizes[vars[k]]);
    }
    const auto& tab = theta_.factor[e];
    if (tab.size() != size) throw validation_error("model: factors[" + std::to_string(e) + "].table length mismatch");
    bool any_finite = false;
    for (double x : tab) {
      if (!is_valid_value(x)) throw validation_error("model: factors[" + std::to_string(e) + "].table has NaN or +inf");
      any_finite |= (x != neg_inf);
    }
    if (!any_finite) throw validation_error("model: factors[" + std::to_string(e) + "].table is all -inf");
  }

  std::vector<int> by_tuple(graph_.num_edges());
  for (int e = 0; e < graph_.num_edges(); ++e) by_tuple[e] = e;
  std::sort(by_tuple.begin(), by_tuple.end(), [this](int a, int b) { return graph_.edges[a] < graph_.edges[b]; });
  for (std::size_t k = 1; k < by_tuple.size(); ++k)
    if (graph_.edges[by_tuple[k]] == graph_.edges[by_tuple[k - 1]])
      throw validation_error("model: factors[" + std::to_string(std::max(by_tuple[k], by_tuple[k - 1])) +
                             "] duplicates factors[" + std::to_string(std::min(by_tuple[k], by_tuple[k - 1])) + "]");
}

inline void model::build_index() {
  strides_.resize(graph_.num_edges());
  incident_.assign(graph_.num_vars(), {});
  for (int e = 0; e < graph_.num_edges(); ++e) {
    const auto& vars = graph_.edges[e];
    strides_[e].assign(vars.size(), 1);
    for (int k = static_cast<int>(vars.size()) - 2; k >= 0; --k)
      strides_[e][k] = strides_[e][k + 1] * static_cast<std::size_t>(graph_.domain_sizes[vars[k + 1]]);
    for (int k = 0; k < static_cast<int>(vars.size()); ++k) incident_[vars[k]].push_back({e, k});
  }
  edge_order_.resize(graph_.num_edges());
  for (int e = 0; e < graph_.num_edges(); ++e) edge_order_[e] = e;
  std::sort(edge_order_.begin(), edge_order_.end(),
            [this](int a, int b) { return graph_.edges[a] < graph_.edges[b]; });
}

inline message_vector zero_messages(const model& m) {
  message_vector a;
  a.msg.resize(m.num_edges());
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& vars = m.edge_vars(e);
    a.msg[e].resize(vars.size());
    for (std::size_t k = 0; k < vars.size(); ++k) a.msg[e][k].assign(m.domain(vars[k]), 0.0);
  }
  return a;
}

inline bool messages_shape_matches(const model& m, const message_vector& a) {
  if (static_cast<int>(a.msg.size()) != m.num_edges()) return false;
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& vars = m.edge_vars(e);
    if (a.msg[e].size() != vars.size()) return false;
    for (std::size_t k = 0; k < vars.size(); ++k)
      if (static_cast<int>(a.msg[e][k].size()) != m.domain(vars[k])) return false;
  }
  return true;
}

inline bool messages_finite(const message_vector& a) {
  for (const auto& per_edge : a.msg)
    for (const auto& tab : per_edge)
      for (double x : tab)
        if (!std::isfinite(x)) return false;
  return true;
}

inline tilde_theta zero_tilde(const model& m) {
  tilde_theta t;
  t.t.resize(m.num_vars());
  for (int v = 0; v < m.num_vars(); ++v) t.t[v].assign(m.domain(v), 0.0);
  return t;
}

// The compatibility condition required by diffusion: a unary component is
// live exactly when every incident factor has a live entry in its slice.
inline bool check_compatibility(const model& m) {
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& vars = m.edge_vars(e);
    const auto& tab = m.theta().factor[e];
    for (int pos = 0; pos < static_cast<int>(vars.size()); ++pos) {
      const int v = vars[pos];
      const int K = m.domain(v);
      std::vector<char> slice_live(K, 0);
      const std::size_t stride = m.stride(e, pos);
      const std::size_t block = stride * static_cast<std::size_t>(K);
      for (std::size_t i = 0; i < tab.size(); ++i) {
        if (tab[i] != neg_inf) slice_live[(i % block) / stride] = 1;
      }
      for (int x = 0; x < K; ++x) {
        const bool unary_live = m.theta().unary[v][x] != neg_inf;
        if (unary_live != static_cast<bool>(slice_live[x])) return false;
      }
    }
  }
  return true;
}

// ⟨θ, δ(x_V)⟩: the energy of a full assignment.
inline double evaluate(const model& m, const assignment& x) {
  if (static_cast<int>(x.size()) != m.num_vars()) throw std::invalid_argument("evaluate: assignment size mismatch");
  for (int v = 0; v < m.num_vars(); ++v)
    if (x[v] < 0 || x[v] >= m.domain(v)) throw std::invalid_argument("evaluate: state index out of range");
  double sum = 0.0;
  for (int v = 0; v < m.num_vars(); ++v) sum += m.theta().unary[v][x[v]];
  std::vector<int> x_edge;
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& vars = m.edge_vars(e);
    x_edge.resize(vars.size());
    for (std::size_t k = 0; k < vars.size(); ++k) x_edge[k] = x[vars[k]];
    sum += m.theta().factor[e][m.flat_index(e, x_edge)];
  }
  return sum;
}

// θ^α_v(x_v) = θ_v(x_v) - Σ_{a∋v} α_{av}(x_v)
inline double reparam_unary(const model& m, const message_vector& a, int v, int x_v) {
  double r = m.theta().unary[v][x_v];
  for (const auto& p : m.incident(v)) r -= a.msg[p.edge][p.pos][x_v];
  return r;
}

// θ^α_a(x_a) = θ_a(x_a) + Σ_{v∈a} α_{av}(x_v)
inline double reparam_factor(const model& m, const message_vector& a, int e, std::span<const int> x_edge) {
  double r = m.theta().factor[e][m.flat_index(e, x_edge)];
  const auto& vars = m.edge_vars(e);
  for (std::size_t k = 0; k < vars.size(); ++k) r += a.msg[e][k][x_edge[k]];
  return r;
}

// A new model whose potentials equal θ^α componentwise.
inline model materialize_reparam(const model& m, const message_vector& a) {
  if (!messages_shape_matches(m, a)) throw std::invalid_argument("materialize_reparam: message shape mismatch");
  potentials p = m.theta();
  for (int v = 0; v < m.num_vars(); ++v)
    for (const auto& pr : m.incident(v))
      for (int x = 0; x < m.domain(v); ++x) p.unary[v][x] -= a.msg[pr.edge][pr.pos][x];
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& vars = m.edge_vars(e);
    auto& tab = p.factor[e];
    for (std::size_t pos = 0; pos < vars.size(); ++pos) {
      const std::size_t stride = m.stride(e, static_cast<int>(pos));
      const std::size_t K = static_cast<std::size_t>(m.domain(vars[pos]));
      const std::size_t blocks = tab.size() / (K * stride);
      std::size_t i = 0;
      for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t x = 0; x < K; ++x)
          for (std::size_t s = 0; s < stride; ++s, ++i) tab[i] += a.msg[e][pos][x];
    }
  }
  return model(m.graph(), std::move(p));
}

// θ̂: unary tables copied, each factor table augmented by the sum of the
// incident per-variable tables θ̃_v.
inline model hat_theta(const model& m, const tilde_theta& tilde) {
  if (static_cast<int>(tilde.t.size()) != m.num_vars()) throw std::invalid_argument("hat_theta: shape mismatch");
  for (int v = 0; v < m.num_vars(); ++v)
    if (static_cast<int>(tilde.t[v].size()) != m.domain(v)) throw std::invalid_argument("hat_theta: shape mismatch");
  potentials p = m.theta();
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& vars = m.edge_vars(e);
    auto& tab = p.factor[e];
    for (std::size_t pos = 0; pos < vars.size(); ++pos) {
      const std::size_t stride = m.stride(e, static_cast<int>(pos));
      const std::size_t K = static_cast<std::size_t>(m.domain(vars[pos]));
      const std::size_t blocks = tab.size() / (K * stride);
      std::size_t i = 0;
      for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t x = 0; x < K; ++x)
          for (std::size_t s = 0; s < stride; ++s, ++i) tab[i] += tilde.t[vars[pos]][x];
    }
  }
  return model(m.graph(), std::move(p));
}

}  // namespace mpinf
