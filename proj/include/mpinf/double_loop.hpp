#pragma once

#include <random>
#include <utility>
#include <vector>

#include "mpinf/csp.hpp"
#include "mpinf/diffusion.hpp"
#include "mpinf/model.hpp"

namespace mpinf {

struct outer_entry {
  int iter;  // 1-based outer iteration
  double bp_residual;
  double u_hat;
  std::uint64_t mask_digest;  // digest of ⌈θ̂^α⌉
  long inner_sweeps;
};

struct outer_trace {
  std::vector<outer_entry> entries;
  bool converged = false;
};

// Passing 0 for inner_tol selects the tightening schedule
// max(1e-9, bp_residual * 1e-3).
inline constexpr double inner_tol_auto = 0.0;
inline constexpr double default_outer_tol = 1e-8;
inline constexpr int default_max_outer = 500;
inline constexpr double default_mask_eps = 1e-8;

// Minorize-maximize search for a BP fixed point: the inner loop is
// diffusion on θ̂ (factors augmented by θ̃), the outer step re-centers θ̃ on
// the reparameterized unary tables. One message vector α persists across
// outer iterations.
class double_loop_state {
 public:
  double_loop_state(model m, temperature t) : double_loop_state(std::move(m), t, tilde_theta{}, message_vector{}) {}

  double_loop_state(model m, temperature t, tilde_theta tilde, message_vector alpha)
      : model_(std::move(m)), temp_(t), alpha_(std::move(alpha)), tilde_(std::move(tilde)) {
    if (alpha_.msg.empty()) alpha_ = zero_messages(model_);
    if (tilde_.t.empty()) tilde_ = zero_tilde(model_);
    if (!messages_shape_matches(model_, alpha_)) throw std::invalid_argument("double_loop_state: message shape mismatch");
    if (static_cast<int>(tilde_.t.size()) != model_.num_vars())
      throw std::invalid_argument("double_loop_state: tilde shape mismatch");
    for (int v = 0; v < model_.num_vars(); ++v)
      if (static_cast<int>(tilde_.t[v].size()) != model_.domain(v))
        throw std::invalid_argument("double_loop_state: tilde shape mismatch");
  }

  // A normalized random initialization for the non-uniform exploration
  // mode: entries uniform in [-1, 0], then ⊕-normalized per variable.
  static tilde_theta random_tilde(const model& m, temperature t, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    tilde_theta out = zero_tilde(m);
    for (auto& tab : out.t) {
      for (double& c : tab) c = -static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const double norm = combine_reduce(t, tab);
      for (double& c : tab) c -= norm;
    }
    return out;
  }

  const model& base() const { return model_; }
  const message_vector& messages() const { return alpha_; }
  const tilde_theta& tilde() const { return tilde_; }
  temperature temp() const { return temp_; }
  int outer_count() const { return outer_count_; }
  double mask_eps() const { return mask_eps_; }
  void set_mask_eps(double eps) { mask_eps_ = eps; }

  model hat_model() const { return hat_theta(model_, tilde_); }

  // Step 1: diffusion on θ̂^α until ⊕_{x_{a∖v}}[θ^α_a + Σ_u θ̃_u] = θ^α_v
  // within tol. Messages are shared with the outer state.
  solve_report inner_solve(double tol, long max_sweeps, bool record_trace = false) {
    diffusion_state ds(hat_model(), temp_, std::move(alpha_));
    solve_report rep = ds.run_to_convergence(tol, max_sweeps, sweep_order::forward, record_trace);
    alpha_ = std::move(ds).take_messages();
    return rep;
  }

  // Step 2: θ̃_v ← θ^α_v − ⊕_{x_v} θ^α_v(x_v).
  void update_tilde() {
    for (int v = 0; v < model_.num_vars(); ++v) {
      auto& tab = tilde_.t[v];
      for (int x = 0; x < model_.domain(v); ++x) tab[x] = reparam_unary(model_, alpha_, v, x);
      const double norm = combine_reduce(temp_, tab);
      for (double& c : tab) c = (c == neg_inf) ? neg_inf : c - norm;
    }
  }

  // Steps 1+2, then measure: returns (bp_residual, U(θ̂^α)) after the step.
  std::pair<double, double> outer_step(double inner_tol, long max_inner) {
    step(inner_tol, max_inner);
    const measurement m = measure();
    return {m.bp_residual, m.u_hat};
  }

  outer_trace run(double outer_tol, int max_outer, double inner_tol = inner_tol_auto,
                  long max_inner = default_max_sweeps) {
    if (!(outer_tol > 0) || !(inner_tol >= 0)) throw std::invalid_argument("double_loop run: tolerances must be positive");
    outer_trace trace;
    double res = bp_residual();
    for (int it = 0; it < max_outer; ++it) {
      const double tol = inner_tol > 0 ? inner_tol : std::max(1e-9, res * 1e-3);
      const solve_report rep = step(tol, max_inner);
      const measurement m = measure();
      res = m.bp_residual;
      trace.entries.push_back({outer_count_, res, m.u_hat, m.mask_digest, rep.iterations});
      if (res <= outer_tol) {
        trace.converged = true;
        break;
      }
    }
    return trace;
  }

  // Mean over incident pairs of the spread (max − min over live x_v) of
  // g_av(x_v) = ⊕_{x_{a∖v}}[θ^α_a + Σ_{u∈a} θ^α_u] − θ^α_v(x_v); zero iff
  // θ^α is a BP fixed point.
  double bp_residual() const { return measure().bp_residual; }

  // Beliefs from θ̂ built on the current θ^α (unary tables added into the
  // factors), each table ⊕-normalized.
  belief_vector bp_marginals() const {
    const model cur = materialize_reparam(model_, alpha_);
    const model bp_hat = hat_theta(cur, tilde_from_tables(cur.theta().unary));
    belief_vector b;
    b.scale = belief_scale::log_domain;
    b.unary.resize(cur.num_vars());
    b.factor.resize(cur.num_edges());
    for (int v = 0; v < cur.num_vars(); ++v) {
      b.unary[v] = cur.theta().unary[v];
      const double norm = combine_reduce(temp_, b.unary[v]);
      for (double& c : b.unary[v]) c = (c == neg_inf) ? neg_inf : c - norm;
    }
    for (int e = 0; e < cur.num_edges(); ++e) {
      b.factor[e] = bp_hat.theta().factor[e];
      const double norm = combine_reduce(temp_, b.factor[e]);
      for (double& c : b.factor[e]) c = (c == neg_inf) ? neg_inf : c - norm;
    }
    return b;
  }

  // U(θ̂^α) = Σ_v ⊕ θ^α_v + Σ_a ⊕ [θ^α_a + Σ_u θ̃_u].
  double u_hat() const { return measure().u_hat; }

  // ⌈θ̂^α⌉, the CSP instance decoded at convergence.
  csp::active_mask hat_mask() const {
    const model cur = materialize_reparam(model_, alpha_);
    const model h = hat_theta(cur, tilde_);
    return csp::make_active_mask(h.theta(), mask_eps_);
  }

 private:
  struct measurement {
    double bp_residual;
    double u_hat;
    std::uint64_t mask_digest;
  };

  solve_report step(double inner_tol, long max_inner) {
    solve_report rep = inner_solve(inner_tol, max_inner);
    update_tilde();
    ++outer_count_;
    return rep;
  }

  // One materialization serving the residual, U(θ̂^α) and the mask digest.
  measurement measure() const {
    const model cur = materialize_reparam(model_, alpha_);
    const model tilde_hat = hat_theta(cur, tilde_);
    const model bp_hat = hat_theta(cur, tilde_from_tables(cur.theta().unary));

    measurement out{};
    double u = 0.0;
    for (int v = 0; v < tilde_hat.num_vars(); ++v) u += combine_reduce(temp_, tilde_hat.theta().unary[v]);
    for (int e = 0; e < tilde_hat.num_edges(); ++e) u += combine_reduce(temp_, tilde_hat.theta().factor[e]);
    out.u_hat = u;
    out.mask_digest = csp::make_active_mask(tilde_hat.theta(), mask_eps_).digest();

    double sum = 0.0;
    std::size_t pairs = 0;
    std::vector<double> red;
    for (int e = 0; e < cur.num_edges(); ++e) {
      const auto& vars = cur.edge_vars(e);
      for (int pos = 0; pos < static_cast<int>(vars.size()); ++pos) {
        const int v = vars[pos];
        reduce_table(bp_hat, e, pos, temp_, red);
        double lo = std::numeric_limits<double>::infinity(), hi = neg_inf;
        bool any_live = false, any_dead_g = false;
        for (int x = 0; x < cur.domain(v); ++x) {
          if (cur.theta().unary[v][x] == neg_inf) continue;
          const double g = red[x] - cur.theta().unary[v][x];
          any_live = true;
          if (g == neg_inf) {
            any_dead_g = true;
            continue;
          }
          lo = std::min(lo, g);
          hi = std::max(hi, g);
        }
        double spread = 0.0;
        if (any_live) {
          if (hi == neg_inf)
            spread = 0.0;  // g is constant -inf
          else if (any_dead_g)
            spread = std::numeric_limits<double>::infinity();
          else
            spread = hi - lo;
        }
        sum += spread;
        ++pairs;
      }
    }
    out.bp_residual = pairs ? sum / static_cast<double>(pairs) : 0.0;
    return out;
  }

  static tilde_theta tilde_from_tables(const std::vector<std::vector<double>>& tables) {
    tilde_theta t;
    t.t = tables;
    return t;
  }

  // out[x_v] = ⊕_{x_{a∖v}} of the given model's factor table.
  static void reduce_table(const model& m, int e, int pos, temperature t, std::vector<double>& out) {
    const auto& tab = m.theta().factor[e];
    const int K = m.domain(m.edge_vars(e)[pos]);
    const std::size_t stride = m.stride(e, pos);
    const std::size_t blocks = tab.size() / (static_cast<std::size_t>(K) * stride);
    out.assign(K, neg_inf);
    std::size_t i = 0;
    for (std::size_t b = 0; b < blocks; ++b)
      for (int x = 0; x < K; ++x)
        for (std::size_t s = 0; s < stride; ++s, ++i) out[x] = std::max(out[x], tab[i]);
    if (t.is_infinite()) return;
    std::vector<double> sums(K, 0.0);
    i = 0;
    for (std::size_t b = 0; b < blocks; ++b)
      for (int x = 0; x < K; ++x)
        for (std::size_t s = 0; s < stride; ++s, ++i)
          if (tab[i] != neg_inf) sums[x] += std::exp(t.beta() * (tab[i] - out[x]));
    for (int x = 0; x < K; ++x)
      if (out[x] != neg_inf) out[x] += std::log(sums[x]) / t.beta();
  }

  model model_;
  temperature temp_;
  message_vector alpha_;
  tilde_theta tilde_;
  int outer_count_ = 0;
  double mask_eps_ = default_mask_eps;
};

}  // namespace mpinf
