#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mpinf/csp.hpp"
#include "mpinf/double_loop.hpp"
#include "mpinf/generators.hpp"
#include "mpinf/oracle.hpp"
#include "test_util.hpp"

using namespace mpinf;

namespace {

model small_tree(std::uint64_t seed, int n = 6, int labels = 3) {
  gen::instance_spec spec;
  spec.topo = gen::topology::random_tree;
  spec.n = n;
  spec.labels = labels;
  spec.seed = seed;
  return gen::generate(spec);
}

model grid_instance(std::uint64_t seed, int rows, int cols, int labels, gen::interaction inter) {
  gen::instance_spec spec;
  spec.topo = gen::topology::grid;
  spec.rows = rows;
  spec.cols = cols;
  spec.labels = labels;
  spec.inter = inter;
  spec.seed = seed;
  return gen::generate(spec);
}

double max_belief_error(const model& m, const belief_vector& got, const belief_vector& want, temperature t) {
  // finite beta: compare probabilities exp(beta * log-belief); beta=inf:
  // both sides are max-normalized log tables
  double err = 0.0;
  auto tab_err = [&](const std::vector<std::vector<double>>& g, const std::vector<std::vector<double>>& w) {
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g[i].size(); ++j) {
        const double a = t.is_infinite() ? g[i][j] : std::exp(t.beta() * g[i][j]);
        if (a == w[i][j]) continue;
        err = std::max(err, std::abs(a - w[i][j]));
      }
  };
  tab_err(got.unary, want.unary);
  tab_err(got.factor, want.factor);
  return err;
}

}  // namespace

TEST_CASE("with zero tilde the inner loop is plain diffusion, step for step", "[double_loop]") {
  const model m = small_tree(60);
  double_loop_state dl(m, temperature::infinite());
  const solve_report inner = dl.inner_solve(1e-10, 3000, true);

  diffusion_state plain(m, temperature::infinite());
  const solve_report ref = plain.run_to_convergence(1e-10, 3000);

  REQUIRE(inner.residual_trace.size() == ref.residual_trace.size());
  for (std::size_t i = 0; i < inner.residual_trace.size(); ++i) {
    CHECK(inner.residual_trace[i].residual ==
          Catch::Approx(ref.residual_trace[i].residual).margin(1e-12));
    CHECK(inner.residual_trace[i].dual_value ==
          Catch::Approx(ref.residual_trace[i].dual_value).margin(1e-12));
  }
  for (int e = 0; e < m.num_edges(); ++e)
    for (int pos = 0; pos < m.arity(e); ++pos)
      for (int x = 0; x < m.domain(m.edge_vars(e)[pos]); ++x)
        CHECK(dl.messages().msg[e][pos][x] == Catch::Approx(plain.messages().msg[e][pos][x]).margin(1e-12));
}

TEST_CASE("inner_solve equals diffusion on the materialized hat model", "[double_loop]") {
  std::mt19937_64 rng(61);
  const model m = small_tree(61);
  tilde_theta tilde = double_loop_state::random_tilde(m, temperature::infinite(), 7);
  double_loop_state dl(m, temperature::infinite(), tilde, message_vector{});
  const solve_report inner = dl.inner_solve(1e-9, 2000, true);

  diffusion_state ref(hat_theta(m, tilde), temperature::infinite());
  const solve_report expect = ref.run_to_convergence(1e-9, 2000);

  REQUIRE(inner.residual_trace.size() == expect.residual_trace.size());
  for (std::size_t i = 0; i < inner.residual_trace.size(); ++i) {
    CHECK(inner.residual_trace[i].residual ==
          Catch::Approx(expect.residual_trace[i].residual).margin(1e-12));
    CHECK(inner.residual_trace[i].dual_value ==
          Catch::Approx(expect.residual_trace[i].dual_value).margin(1e-12));
  }
}

TEST_CASE("inner_solve converges on a single-edge tree at finite beta", "[double_loop]") {
  const model m(hypergraph{{2, 3}, {{0, 1}}},
                potentials{{{0.3, -0.2}, {0.1, 0.4, -0.5}}, {{0.2, -0.1, 0.7, 0.0, -0.3, 0.5}}});
  double_loop_state dl(m, temperature::finite(1.0), double_loop_state::random_tilde(m, temperature::finite(1.0), 3),
                       message_vector{});
  const solve_report rep = dl.inner_solve(1e-9, 2000);
  CHECK(rep.converged);
  CHECK(rep.final_residual <= 1e-9);
}

TEST_CASE("outer_step at a BP fixed point leaves tilde unchanged", "[double_loop]") {
  const model m = small_tree(62);
  double_loop_state dl(m, temperature::infinite());
  const outer_trace trace = dl.run(1e-10, 400);
  REQUIRE(trace.converged);
  const tilde_theta before = dl.tilde();
  const auto [res, u] = dl.outer_step(1e-10, 3000);
  CHECK(res <= 1e-9);
  for (int v = 0; v < m.num_vars(); ++v)
    for (int x = 0; x < m.domain(v); ++x)
      CHECK(dl.tilde().t[v][x] == Catch::Approx(before.t[v][x]).margin(1e-9));
}

TEST_CASE("finite beta: Step 1 does not increase and Steps 1+2 do not decrease U(hat)", "[double_loop]") {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 5; ++trial) {
    const model m = testutil::random_model(rng, 5, 3, false);
    double_loop_state dl(m, temperature::finite(1.0));
    for (int it = 0; it < 5; ++it) {
      const double u_before = dl.u_hat();
      dl.inner_solve(1e-10, 5000);
      const double u_after_step1 = dl.u_hat();
      dl.update_tilde();
      const double u_after_step2 = dl.u_hat();
      CHECK(u_after_step1 <= u_before + 1e-9);
      CHECK(u_after_step2 >= u_before - 1e-9);
    }
  }
}

TEST_CASE("tilde stays normalized after every outer step", "[double_loop]") {
  const model m = small_tree(64);
  for (temperature t : {temperature::finite(1.0), temperature::infinite()}) {
    double_loop_state dl(m, t);
    for (int it = 0; it < 5; ++it) {
      dl.outer_step(1e-9, 2000);
      for (int v = 0; v < m.num_vars(); ++v)
        CHECK(combine_reduce(t, dl.tilde().t[v]) == Catch::Approx(0.0).margin(1e-9));
    }
  }
}

TEST_CASE("u_hat stays constant after the first outer iteration at beta=inf", "[double_loop]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const model m = grid_instance(seed, 6, 6, 3, gen::interaction::random);
    double_loop_state dl(m, temperature::infinite());
    const outer_trace trace = dl.run(1e-8, 120);
    REQUIRE(trace.entries.size() >= 2);
    for (std::size_t k = 1; k < trace.entries.size(); ++k)
      CHECK(std::abs(trace.entries[k].u_hat - trace.entries[k - 1].u_hat) <= 1e-6);
  }
}

TEST_CASE("double loop matches oracle marginals on trees at beta=1", "[double_loop]") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const model m = small_tree(seed);
    double_loop_state dl(m, temperature::finite(1.0));
    const outer_trace trace = dl.run(1e-9, 600);
    CHECK(trace.converged);
    const auto exact = oracle::exact_marginals(m, temperature::finite(1.0));
    CHECK(max_belief_error(m, dl.bp_marginals(), exact, temperature::finite(1.0)) <= 1e-6);
  }
}

TEST_CASE("double loop matches oracle max-marginals on trees at beta=inf", "[double_loop]") {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const model m = small_tree(seed);
    double_loop_state dl(m, temperature::infinite());
    const outer_trace trace = dl.run(1e-9, 600);
    CHECK(trace.converged);
    const auto exact = oracle::exact_marginals(m, temperature::infinite());
    CHECK(max_belief_error(m, dl.bp_marginals(), exact, temperature::infinite()) <= 1e-6);
  }
}

TEST_CASE("double loop reaches a BP fixed point on a loopy grid", "[double_loop]") {
  const model m = grid_instance(3, 10, 10, 4, gen::interaction::random);
  double_loop_state dl(m, temperature::infinite());
  const outer_trace trace = dl.run(1e-6, 200);
  CHECK(trace.converged);
  CHECK(trace.entries.size() <= 200);
}

TEST_CASE("bp_residual of the hand-checked binary edge is 1", "[double_loop]") {
  const model m(hypergraph{{2, 2}, {{0, 1}}}, potentials{{{0, 0}, {0, 0}}, {{0, 1, 2, 0}}});
  double_loop_state dl(m, temperature::infinite());
  CHECK(dl.bp_residual() == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("bp_residual vanishes on a converged single edge", "[double_loop]") {
  const model m(hypergraph{{2, 3}, {{0, 1}}},
                potentials{{{0.4, -0.6}, {0.2, 0.0, -0.9}}, {{1.2, -0.4, 0.3, 0.0, 0.8, -1.1}}});
  double_loop_state dl(m, temperature::infinite());
  const outer_trace trace = dl.run(1e-11, 300);
  REQUIRE(trace.converged);
  CHECK(dl.bp_residual() <= 1e-8);
}

TEST_CASE("bp_marginals of the uniform model are uniform", "[double_loop]") {
  const model m(hypergraph{{2, 2}, {{0, 1}}}, potentials{{{0, 0}, {0, 0}}, {{0, 0, 0, 0}}});
  for (temperature t : {temperature::finite(1.0), temperature::infinite()}) {
    double_loop_state dl(m, t);
    dl.run(1e-9, 50);
    const auto b = dl.bp_marginals();
    for (double c : b.unary[0]) CHECK(c == Catch::Approx(b.unary[0][0]).margin(1e-12));
    for (double c : b.factor[0]) CHECK(c == Catch::Approx(b.factor[0][0]).margin(1e-12));
  }
}

TEST_CASE("beliefs satisfy the normalization invariant after any run", "[double_loop]") {
  std::mt19937_64 rng(65);
  for (int trial = 0; trial < 5; ++trial) {
    const model m = testutil::random_model(rng, 5, 3, false);
    for (temperature t : {temperature::finite(2.0), temperature::infinite()}) {
      double_loop_state dl(m, t);
      dl.run(1e-7, 50);
      const auto b = dl.bp_marginals();
      for (const auto& tab : b.unary) CHECK(combine_reduce(t, tab) == Catch::Approx(0.0).margin(1e-9));
      for (const auto& tab : b.factor) CHECK(combine_reduce(t, tab) == Catch::Approx(0.0).margin(1e-9));
    }
  }
}

TEST_CASE("at convergence tilde equals the normalized reparameterized unaries", "[double_loop]") {
  const model m = small_tree(66);
  const double tol = 1e-9;
  double_loop_state dl(m, temperature::infinite());
  const outer_trace trace = dl.run(tol, 600);
  REQUIRE(trace.converged);
  for (int v = 0; v < m.num_vars(); ++v) {
    std::vector<double> u(m.domain(v));
    for (int x = 0; x < m.domain(v); ++x) u[x] = reparam_unary(m, dl.messages(), v, x);
    const double norm = combine_reduce(temperature::infinite(), u);
    for (int x = 0; x < m.domain(v); ++x)
      CHECK(dl.tilde().t[v][x] == Catch::Approx(u[x] - norm).margin(10 * tol));
  }
}

TEST_CASE("all decoded solutions of the hat CSP share one energy", "[double_loop]") {
  for (std::uint64_t seed = 30; seed < 35; ++seed) {
    const model m = grid_instance(seed, 4, 4, 3, gen::interaction::mixed);
    double_loop_state dl(m, temperature::infinite());
    const outer_trace trace = dl.run(1e-8, 400);
    REQUIRE(trace.converged);
    const auto decoded = csp::solve_csp(m, dl.hat_mask());
    double lo = std::numeric_limits<double>::infinity(), hi = neg_inf;
    for (const auto& x : decoded.solutions) {
      const double e = evaluate(m, x);
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    if (decoded.solutions.size() > 1) CHECK(hi - lo <= 1e-8);
  }
}

TEST_CASE("uniform-init hat mask equals the standalone diffusion mask", "[double_loop]") {
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const model m = grid_instance(seed, 5, 5, 3, gen::interaction::random);

    double_loop_state dl(m, temperature::infinite());
    const outer_trace trace = dl.run(1e-8, 400);
    REQUIRE(trace.converged);

    diffusion_state plain(m, temperature::infinite());
    plain.run_to_convergence(1e-9, 10000);
    potentials reparam;
    for (int v = 0; v < m.num_vars(); ++v) reparam.unary.push_back(plain.reparam_unary(v));
    for (int e = 0; e < m.num_edges(); ++e) reparam.factor.push_back(plain.reparam_factor(e));
    const auto diffusion_mask = csp::make_active_mask(reparam, default_mask_eps);

    const auto dl_mask = dl.hat_mask();
    CHECK(dl_mask.unary == diffusion_mask.unary);
    CHECK(dl_mask.factor == diffusion_mask.factor);
  }
}

TEST_CASE("run reports non-convergence when the outer budget is exhausted", "[double_loop]") {
  const model m = grid_instance(1, 5, 5, 3, gen::interaction::repulsive);
  double_loop_state dl(m, temperature::infinite());
  const outer_trace trace = dl.run(1e-12, 1);
  CHECK_FALSE(trace.converged);
  CHECK(trace.entries.size() == 1);
}

TEST_CASE("double_loop_state validates shapes", "[double_loop]") {
  const model m = small_tree(67);
  tilde_theta bad;
  bad.t = {{0.0, 0.0}};
  CHECK_THROWS_AS(double_loop_state(m, temperature::infinite(), bad, message_vector{}), std::invalid_argument);
  CHECK_THROWS_AS(double_loop_state(m, temperature::infinite()).run(0.0, 5), std::invalid_argument);
}
