#pragma once

#include <utility>
#include <vector>

#include "mpinf/model.hpp"
#include "mpinf/semiring.hpp"

namespace mpinf {

enum class sweep_order { forward, forward_backward };

struct trace_entry {
  long sweep;
  double residual;      // mean absolute fixed-point violation
  double max_residual;  // largest single violation
  double dual_value;
};

struct solve_report {
  bool converged = false;
  long iterations = 0;
  double final_residual = std::numeric_limits<double>::infinity();
  double dual_value = neg_inf;
  std::vector<trace_entry> residual_trace;
};

inline constexpr double default_tol = 1e-9;
inline constexpr long default_max_sweeps = 10000;

// Coordinate descent on U(θ^α): the averaging update over incident
// (edge, variable) pairs. At finite beta this is the tempered algorithm;
// at beta = inf it is max-sum diffusion. The state keeps the base model
// unchanged and stores only the messages, together with incrementally
// maintained tables of the reparameterized potentials.
class diffusion_state {
 public:
  diffusion_state(model m, temperature t) : diffusion_state(std::move(m), t, message_vector{}) {}

  diffusion_state(model m, temperature t, message_vector alpha)
      : model_(std::move(m)), temp_(t), alpha_(std::move(alpha)) {
    if (alpha_.msg.empty()) alpha_ = zero_messages(model_);
    if (!messages_shape_matches(model_, alpha_)) throw std::invalid_argument("diffusion_state: message shape mismatch");
    if (!messages_finite(alpha_)) throw std::invalid_argument("diffusion_state: messages must be finite");
    if (!check_compatibility(model_)) throw std::invalid_argument("diffusion_state: model violates the compatibility condition");
    rebuild_reparam_tables();
    // Canonical sweep order: edges lexicographic by variable tuple, then
    // position within the edge.
    for (int e : model_.canonical_edge_order())
      for (int pos = 0; pos < model_.arity(e); ++pos) order_.push_back({e, pos});
  }

  const model& base() const { return model_; }
  const message_vector& messages() const { return alpha_; }
  message_vector take_messages() && { return std::move(alpha_); }
  temperature temp() const { return temp_; }
  long sweep_count() const { return sweep_count_; }
  double last_residual() const { return last_residual_; }

  // θ^α_v table (maintained incrementally).
  const std::vector<double>& reparam_unary(int v) const { return unary_[v]; }
  // θ^α_a table (maintained incrementally).
  const std::vector<double>& reparam_factor(int e) const { return factor_[e]; }

  // U(θ^α) = Σ_v ⊕_{x_v} θ^α_v + Σ_a ⊕_{x_a} θ^α_a under the state's
  // temperature.
  double dual_objective() const {
    double u = 0.0;
    for (int v = 0; v < model_.num_vars(); ++v) u += combine_reduce(temp_, unary_[v]);
    for (int e = 0; e < model_.num_edges(); ++e) u += combine_reduce(temp_, factor_[e]);
    return u;
  }

  // α_{av}(x_v) += ½ [θ^α_v(x_v) − ⊕_{x_{a∖v}} θ^α_a(x_a)] for every live
  // x_v; afterwards the two sides agree for this pair. Returns the largest
  // absolute message change.
  double update_pair(int e, int pos) {
    const int v = model_.edge_vars(e)[pos];
    const int K = model_.domain(v);
    reduce_over_pair(e, pos, red_);
    double max_change = 0.0;
    delta_.assign(K, 0.0);
    bool any = false;
    for (int x = 0; x < K; ++x) {
      if (model_.theta().unary[v][x] == neg_inf) continue;  // dead component
      const double d = 0.5 * (unary_[v][x] - red_[x]);
      delta_[x] = d;
      alpha_.msg[e][pos][x] += d;
      unary_[v][x] -= d;
      max_change = std::max(max_change, std::abs(d));
      any |= (d != 0.0);
    }
    if (any) {
      auto& tab = factor_[e];
      const std::size_t stride = model_.stride(e, pos);
      const std::size_t blocks = tab.size() / (static_cast<std::size_t>(K) * stride);
      std::size_t i = 0;
      for (std::size_t b = 0; b < blocks; ++b)
        for (int x = 0; x < K; ++x)
          for (std::size_t s = 0; s < stride; ++s, ++i) tab[i] += delta_[x];
    }
    return max_change;
  }

  // One pass of update_pair over all incident pairs in canonical order
  // (plus a reversed pass for forward_backward). Returns the mean
  // fixed-point residual measured after the pass.
  double sweep(sweep_order order = sweep_order::forward) {
    sweep_pass(order);
    last_residual_ = fixed_point_residual();
    return last_residual_;
  }

  // Mean over live (a, v, x_v) components of |θ^α_v(x_v) − ⊕_{x_{a∖v}} θ^α_a|.
  double fixed_point_residual() const { return residuals().first; }

  // (mean, max) absolute violation of the fixed-point condition.
  std::pair<double, double> residuals() const {
    double sum = 0.0, worst = 0.0;
    std::size_t count = 0;
    for (const auto& p : order_) {
      const int v = model_.edge_vars(p.edge)[p.pos];
      reduce_over_pair(p.edge, p.pos, red_);
      for (int x = 0; x < model_.domain(v); ++x) {
        if (model_.theta().unary[v][x] == neg_inf) continue;
        const double viol = std::abs(unary_[v][x] - red_[x]);
        sum += viol;
        worst = std::max(worst, viol);
        ++count;
      }
    }
    return {count ? sum / static_cast<double>(count) : 0.0, worst};
  }

  // Log-scale beliefs from θ^α, each table ⊕-normalized (max-normalized at
  // beta = inf).
  belief_vector pseudo_marginals() const {
    belief_vector b;
    b.scale = belief_scale::log_domain;
    b.unary.resize(model_.num_vars());
    b.factor.resize(model_.num_edges());
    for (int v = 0; v < model_.num_vars(); ++v) {
      const double norm = combine_reduce(temp_, unary_[v]);
      b.unary[v] = unary_[v];
      for (double& c : b.unary[v]) c = (c == neg_inf) ? neg_inf : c - norm;
    }
    for (int e = 0; e < model_.num_edges(); ++e) {
      const double norm = combine_reduce(temp_, factor_[e]);
      b.factor[e] = factor_[e];
      for (double& c : b.factor[e]) c = (c == neg_inf) ? neg_inf : c - norm;
    }
    return b;
  }

  solve_report run_to_convergence(double tol = default_tol, long max_sweeps = default_max_sweeps,
                                  sweep_order order = sweep_order::forward, bool record_trace = true) {
    if (!(tol > 0)) throw std::invalid_argument("run_to_convergence: tol must be > 0");
    const long begin = sweep_count_;
    solve_report rep;
    auto record = [&](double mean, double worst) {
      if (record_trace) rep.residual_trace.push_back({sweep_count_, mean, worst, dual_objective()});
    };
    auto [mean, worst] = residuals();
    record(mean, worst);
    while (mean > tol && sweep_count_ - begin < max_sweeps) {
      sweep_pass(order);
      std::tie(mean, worst) = residuals();
      record(mean, worst);
    }
    last_residual_ = mean;
    rep.converged = mean <= tol;
    rep.iterations = sweep_count_ - begin;
    rep.final_residual = mean;
    rep.dual_value = dual_objective();
    return rep;
  }

  // θ^α materialized from scratch (exact, not the incremental tables).
  model current_model() const { return materialize_reparam(model_, alpha_); }

 private:
  void sweep_pass(sweep_order order) {
    for (const auto& p : order_) update_pair(p.edge, p.pos);
    if (order == sweep_order::forward_backward)
      for (auto it = order_.rbegin(); it != order_.rend(); ++it) update_pair(it->edge, it->pos);
    ++sweep_count_;
  }

  void rebuild_reparam_tables() {
    unary_.resize(model_.num_vars());
    for (int v = 0; v < model_.num_vars(); ++v) {
      unary_[v] = model_.theta().unary[v];
      for (int x = 0; x < model_.domain(v); ++x)
        if (unary_[v][x] != neg_inf)
          for (const auto& pr : model_.incident(v)) unary_[v][x] -= alpha_.msg[pr.edge][pr.pos][x];
    }
    factor_.resize(model_.num_edges());
    for (int e = 0; e < model_.num_edges(); ++e) {
      factor_[e] = model_.theta().factor[e];
      const auto& vars = model_.edge_vars(e);
      auto& tab = factor_[e];
      for (std::size_t pos = 0; pos < vars.size(); ++pos) {
        const std::size_t stride = model_.stride(e, static_cast<int>(pos));
        const std::size_t K = static_cast<std::size_t>(model_.domain(vars[pos]));
        const std::size_t blocks = tab.size() / (K * stride);
        std::size_t i = 0;
        for (std::size_t b = 0; b < blocks; ++b)
          for (std::size_t x = 0; x < K; ++x)
            for (std::size_t s = 0; s < stride; ++s, ++i)
              if (tab[i] != neg_inf) tab[i] += alpha_.msg[e][pos][x];
      }
    }
  }

  // out[x_v] = ⊕_{x_{a∖v}} θ^α_a(x_a) for the given pair, in one linear
  // pass over the factor table (two passes at finite beta).
  void reduce_over_pair(int e, int pos, std::vector<double>& out) const {
    const auto& tab = factor_[e];
    const int K = model_.domain(model_.edge_vars(e)[pos]);
    const std::size_t stride = model_.stride(e, pos);
    const std::size_t blocks = tab.size() / (static_cast<std::size_t>(K) * stride);
    out.assign(K, neg_inf);
    std::size_t i = 0;
    for (std::size_t b = 0; b < blocks; ++b)
      for (int x = 0; x < K; ++x)
        for (std::size_t s = 0; s < stride; ++s, ++i) out[x] = std::max(out[x], tab[i]);
    if (temp_.is_infinite()) return;
    sums_.assign(K, 0.0);
    i = 0;
    for (std::size_t b = 0; b < blocks; ++b)
      for (int x = 0; x < K; ++x)
        for (std::size_t s = 0; s < stride; ++s, ++i)
          if (tab[i] != neg_inf) sums_[x] += std::exp(temp_.beta() * (tab[i] - out[x]));
    for (int x = 0; x < K; ++x)
      if (out[x] != neg_inf) out[x] += std::log(sums_[x]) / temp_.beta();
  }

  model model_;
  temperature temp_;
  message_vector alpha_;
  std::vector<std::vector<double>> unary_;   // θ^α_v
  std::vector<std::vector<double>> factor_;  // θ^α_a
  std::vector<model::pair_ref> order_;
  long sweep_count_ = 0;
  double last_residual_ = std::numeric_limits<double>::infinity();
  mutable std::vector<double> red_, delta_, sums_;
};

}  // namespace mpinf
