// Command-line driver: generate instances, run the solvers, compare against
// the brute-force oracle, and emit residual-trace CSV bundles.
//
// Exit codes: 0 success/converged, 2 usage or validation error,
// 3 iteration-cap stop, 4 capacity (oracle enumeration cap) error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpinf/csp.hpp"
#include "mpinf/diffusion.hpp"
#include "mpinf/double_loop.hpp"
#include "mpinf/experiment.hpp"
#include "mpinf/generators.hpp"
#include "mpinf/model_io.hpp"
#include "mpinf/oracle.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_iteration_cap = 3;
constexpr int exit_capacity = 4;

using mpinf::io::json;

mpinf::temperature parse_beta(const std::string& s) {
  if (s == "inf") return mpinf::temperature::infinite();
  try {
    std::size_t used = 0;
    const double b = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return mpinf::temperature::finite(b);
  } catch (const std::exception&) {
    throw mpinf::validation_error("--beta must be a positive real or \"inf\" (got \"" + s + "\")");
  }
}

json beta_to_json(const mpinf::temperature& t) {
  if (t.is_infinite()) return json("inf");
  return json(t.beta());
}

json tables_to_json(const std::vector<std::vector<double>>& tabs) {
  json out = json::array();
  for (const auto& tab : tabs) {
    json t = json::array();
    for (double x : tab) t.push_back(mpinf::io::detail::encode_value(x));
    out.push_back(std::move(t));
  }
  return out;
}

json beliefs_to_json(const mpinf::belief_vector& b) {
  json out;
  out["scale"] = b.scale == mpinf::belief_scale::probability ? "probability" : "log";
  out["unary"] = tables_to_json(b.unary);
  out["factor"] = tables_to_json(b.factor);
  return out;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

json decode_to_json(const mpinf::model& m, const mpinf::csp::active_mask& mask, std::size_t limit) {
  const auto result = mpinf::csp::solve_csp(m, mask, limit);
  json out;
  out["mask_digest"] = digest_hex(mask.digest());
  out["count"] = result.solutions.size();
  out["truncated"] = result.truncated;
  out["solutions"] = json::array();
  out["values"] = json::array();
  for (const auto& x : result.solutions) {
    out["solutions"].push_back(x);
    out["values"].push_back(mpinf::evaluate(m, x));
  }
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw mpinf::validation_error("cannot open output file: " + path);
  out << content;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

struct generate_options {
  std::string topology = "grid";
  int rows = 4, cols = 4, n = 8;
  int labels = 2;
  std::string interaction = "random";
  double unary_scale = 1.0, pairwise_scale = 1.0;
  std::uint64_t seed = 0;
  std::string output = "model.json";
};

int cmd_generate(const generate_options& opt) {
  mpinf::gen::instance_spec spec;
  if (opt.topology == "grid") spec.topo = mpinf::gen::topology::grid;
  else if (opt.topology == "complete") spec.topo = mpinf::gen::topology::complete;
  else if (opt.topology == "chain") spec.topo = mpinf::gen::topology::chain;
  else if (opt.topology == "random_tree") spec.topo = mpinf::gen::topology::random_tree;
  else throw mpinf::validation_error("unknown topology: " + opt.topology);

  if (opt.interaction == "random") spec.inter = mpinf::gen::interaction::random;
  else if (opt.interaction == "attractive") spec.inter = mpinf::gen::interaction::attractive;
  else if (opt.interaction == "repulsive") spec.inter = mpinf::gen::interaction::repulsive;
  else if (opt.interaction == "mixed") spec.inter = mpinf::gen::interaction::mixed;
  else if (opt.interaction == "circular_distance") spec.inter = mpinf::gen::interaction::circular_distance;
  else if (opt.interaction == "supermodular_ising") spec.inter = mpinf::gen::interaction::supermodular_ising;
  else throw mpinf::validation_error("unknown interaction: " + opt.interaction);

  spec.rows = opt.rows;
  spec.cols = opt.cols;
  spec.n = opt.n;
  spec.labels = opt.labels;
  spec.unary_scale = opt.unary_scale;
  spec.pairwise_scale = opt.pairwise_scale;
  spec.seed = opt.seed;

  const mpinf::model m = mpinf::gen::generate(spec);
  mpinf::io::save_model(m, opt.output);
  std::cout << "wrote " << opt.output << ": vars=" << m.num_vars() << " edges=" << m.num_edges()
            << " labels=" << opt.labels << "\n";
  return exit_ok;
}

struct solve_options {
  std::string model_path;
  std::string algorithm = "diffusion";
  std::string beta = "inf";
  double tol = mpinf::default_tol;
  long max_sweeps = mpinf::default_max_sweeps;
  double outer_tol = mpinf::default_outer_tol;
  int max_outer = mpinf::default_max_outer;
  std::string inner_tol = "auto";
  long max_inner = mpinf::default_max_sweeps;
  std::string tilde_init = "zero";
  std::uint64_t tilde_seed = 0;
  double eps_active = mpinf::default_mask_eps;
  std::size_t decode_limit = 1000;
  std::string output = "results.json";
  std::string trace = "";
};

double parse_inner_tol(const std::string& s) {
  if (s == "auto") return mpinf::inner_tol_auto;
  try {
    const double t = std::stod(s);
    if (!(t > 0)) throw std::invalid_argument(s);
    return t;
  } catch (const std::exception&) {
    throw mpinf::validation_error("--inner-tol must be a positive real or \"auto\"");
  }
}

int cmd_solve(const solve_options& opt) {
  const mpinf::temperature beta = parse_beta(opt.beta);
  const mpinf::model m = mpinf::io::load_model(opt.model_path);
  const std::string trace_path = opt.trace.empty() ? opt.output + ".trace.csv" : opt.trace;

  json out;
  out["model"] = opt.model_path;
  out["algorithm"] = opt.algorithm;
  out["beta"] = beta_to_json(beta);
  out["trace_csv"] = trace_path;
  bool converged = false;

  if (opt.algorithm == "diffusion") {
    mpinf::diffusion_state state(m, beta);
    const mpinf::solve_report rep = state.run_to_convergence(opt.tol, opt.max_sweeps);
    converged = rep.converged;
    out["converged"] = rep.converged;
    out["sweeps"] = rep.iterations;
    out["final_residual"] = rep.final_residual;
    out["dual_value"] = rep.dual_value;
    out["beliefs"] = beliefs_to_json(state.pseudo_marginals());
    if (beta.is_infinite()) {
      mpinf::potentials reparam;
      reparam.unary.reserve(m.num_vars());
      reparam.factor.reserve(m.num_edges());
      for (int v = 0; v < m.num_vars(); ++v) reparam.unary.push_back(state.reparam_unary(v));
      for (int e = 0; e < m.num_edges(); ++e) reparam.factor.push_back(state.reparam_factor(e));
      out["decoded"] = decode_to_json(m, mpinf::csp::make_active_mask(reparam, opt.eps_active), opt.decode_limit);
    }
    std::string csv = "sweep,residual,max_residual,dual_value\n";
    for (const auto& row : rep.residual_trace)
      csv += std::to_string(row.sweep) + "," + fmt_double(row.residual) + "," + fmt_double(row.max_residual) +
             "," + fmt_double(row.dual_value) + "\n";
    write_text(trace_path, csv);
  } else if (opt.algorithm == "double_loop") {
    mpinf::tilde_theta init;
    if (opt.tilde_init == "random")
      init = mpinf::double_loop_state::random_tilde(m, beta, opt.tilde_seed);
    else if (opt.tilde_init != "zero")
      throw mpinf::validation_error("--tilde-init must be \"zero\" or \"random\"");
    mpinf::double_loop_state state(m, beta, std::move(init), mpinf::message_vector{});
    state.set_mask_eps(opt.eps_active);
    const std::uint64_t initial_digest = state.hat_mask().digest();
    const mpinf::outer_trace trace =
        state.run(opt.outer_tol, opt.max_outer, parse_inner_tol(opt.inner_tol), opt.max_inner);
    converged = trace.converged;
    out["converged"] = trace.converged;
    out["outer_iterations"] = trace.entries.size();
    out["final_residual"] = trace.entries.empty() ? state.bp_residual() : trace.entries.back().bp_residual;
    out["u_hat"] = state.u_hat();
    out["beliefs"] = beliefs_to_json(state.bp_marginals());
    if (beta.is_infinite()) out["decoded"] = decode_to_json(m, state.hat_mask(), opt.decode_limit);
    std::string csv = std::string(mpinf::experiment::trace_header) + "\n";
    std::uint64_t prev = initial_digest;
    for (const auto& row : trace.entries) {
      csv += std::to_string(row.iter) + "," + mpinf::experiment::detail::fmt_log10(row.bp_residual) + "," +
             fmt_double(row.u_hat) + "," + (row.mask_digest != prev ? "1" : "0") + "," +
             std::to_string(row.inner_sweeps) + "\n";
      prev = row.mask_digest;
    }
    write_text(trace_path, csv);
  } else {
    throw mpinf::validation_error("--algorithm must be \"diffusion\" or \"double_loop\"");
  }

  write_text(opt.output, out.dump(2) + "\n");
  std::cout << (converged ? "converged" : "stopped at iteration cap") << "; results in " << opt.output << "\n";
  return converged ? exit_ok : exit_iteration_cap;
}

struct compare_options {
  solve_options solve;
  std::size_t cap = mpinf::oracle::default_state_cap;
  std::string output = "report.json";
};

int cmd_compare(const compare_options& opt) {
  const mpinf::temperature beta = parse_beta(opt.solve.beta);
  const mpinf::model m = mpinf::io::load_model(opt.solve.model_path);
  mpinf::oracle::checked_joint_count(m, opt.cap);

  json report;
  report["model"] = opt.solve.model_path;
  report["algorithm"] = opt.solve.algorithm;
  report["beta"] = beta_to_json(beta);

  mpinf::belief_vector beliefs;
  double dual = 0.0;
  mpinf::csp::csp_result decoded;
  bool have_decode = false;

  if (opt.solve.algorithm == "diffusion") {
    mpinf::diffusion_state state(m, beta);
    const auto rep = state.run_to_convergence(opt.solve.tol, opt.solve.max_sweeps, mpinf::sweep_order::forward, false);
    report["solver"] = {{"converged", rep.converged}, {"iterations", rep.iterations}, {"final_residual", rep.final_residual}};
    dual = rep.dual_value;
    beliefs = state.pseudo_marginals();
    if (beta.is_infinite()) {
      mpinf::potentials reparam;
      for (int v = 0; v < m.num_vars(); ++v) reparam.unary.push_back(state.reparam_unary(v));
      for (int e = 0; e < m.num_edges(); ++e) reparam.factor.push_back(state.reparam_factor(e));
      decoded = mpinf::csp::decode_ground_states(m, reparam, opt.solve.eps_active);
      have_decode = true;
    }
  } else if (opt.solve.algorithm == "double_loop") {
    mpinf::double_loop_state state(m, beta);
    state.set_mask_eps(opt.solve.eps_active);
    const auto trace = state.run(opt.solve.outer_tol, opt.solve.max_outer, parse_inner_tol(opt.solve.inner_tol),
                                 opt.solve.max_inner);
    report["solver"] = {{"converged", trace.converged},
                        {"iterations", trace.entries.size()},
                        {"final_residual", trace.entries.empty() ? state.bp_residual() : trace.entries.back().bp_residual}};
    dual = state.u_hat();
    beliefs = state.bp_marginals();
    if (beta.is_infinite()) {
      decoded = mpinf::csp::solve_csp(m, state.hat_mask());
      have_decode = true;
    }
  } else {
    throw mpinf::validation_error("--algorithm must be \"diffusion\" or \"double_loop\"");
  }

  const double phi = mpinf::oracle::log_partition(m, beta, opt.cap);
  const mpinf::belief_vector exact = mpinf::oracle::exact_marginals(m, beta, opt.cap);

  // Finite beta: compare on probability scale (exp(beta * log-belief)).
  // beta = inf: both sides are max-normalized log tables.
  auto table_error = [&](const std::vector<std::vector<double>>& got, const std::vector<std::vector<double>>& want) {
    double err = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
      for (std::size_t j = 0; j < got[i].size(); ++j) {
        const double g = beta.is_infinite() ? got[i][j] : std::exp(beta.beta() * got[i][j]);
        const double w = want[i][j];
        if (g == w) continue;  // covers the -inf == -inf case
        err = std::max(err, std::abs(g - w));
      }
    return err;
  };
  report["belief_error"] = {{"scale", beta.is_infinite() ? "log" : "probability"},
                            {"unary_max_abs", table_error(beliefs.unary, exact.unary)},
                            {"factor_max_abs", table_error(beliefs.factor, exact.factor)}};
  report["oracle"] = {{"log_partition", phi}};
  report["dual_value"] = dual;
  report["dual_gap"] = dual - phi;

  if (have_decode) {
    json dec;
    dec["count"] = decoded.solutions.size();
    dec["truncated"] = decoded.truncated;
    double best = mpinf::neg_inf;
    for (const auto& x : decoded.solutions) best = std::max(best, mpinf::evaluate(m, x));
    if (decoded.solutions.empty()) {
      dec["energy_gap"] = nullptr;
    } else {
      dec["energy_gap"] = phi - best;
    }
    auto truth = mpinf::oracle::ground_states(m, opt.cap);
    std::sort(truth.begin(), truth.end());
    auto got = decoded.solutions;
    std::sort(got.begin(), got.end());
    dec["ground_state_sets_equal"] = !decoded.truncated && got == truth;
    report["decode"] = std::move(dec);
  }

  write_text(opt.output, report.dump(2) + "\n");
  std::cout << "report in " << opt.output << "\n";
  return exit_ok;
}

struct experiment_options {
  mpinf::experiment::config cfg;
  std::string inner_tol = "auto";
  std::string outdir = "experiment_out";
};

int cmd_experiment(experiment_options& opt) {
  opt.cfg.inner_tol = parse_inner_tol(opt.inner_tol);
  opt.cfg.outdir = opt.outdir;
  const auto results = mpinf::experiment::run(opt.cfg);
  for (const auto& r : results) {
    if (r.failed) {
      std::cout << r.name << ": FAILED (" << r.error << ")\n";
      continue;
    }
    std::cout << r.name << ": " << (r.converged ? "converged" : "iteration cap") << " after " << r.outer_iterations
              << " outer iterations, residual " << fmt_double(r.initial_residual) << " -> "
              << fmt_double(r.final_residual) << ", key observation "
              << (r.keyobs_uhat_ok && r.keyobs_mask_ok ? "held" : "VIOLATED") << "\n";
  }
  std::cout << "bundle in " << opt.outdir << "/manifest.json\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete graphical-model inference: max-sum diffusion and the double-loop BP fixed-point solver"};
  app.require_subcommand(1);

  generate_options gen_opt;
  auto* gen_cmd = app.add_subcommand("generate", "Generate a random model instance");
  gen_cmd->add_option("--topology", gen_opt.topology, "grid | complete | chain | random_tree")->capture_default_str();
  gen_cmd->add_option("--rows", gen_opt.rows, "grid rows")->capture_default_str();
  gen_cmd->add_option("--cols", gen_opt.cols, "grid cols")->capture_default_str();
  gen_cmd->add_option("--n", gen_opt.n, "vertex count for complete/chain/random_tree")->capture_default_str();
  gen_cmd->add_option("--labels", gen_opt.labels, "domain size per variable")->capture_default_str();
  gen_cmd->add_option("--interaction", gen_opt.interaction,
                      "random | attractive | repulsive | mixed | circular_distance | supermodular_ising")
      ->capture_default_str();
  gen_cmd->add_option("--unary-scale", gen_opt.unary_scale)->capture_default_str();
  gen_cmd->add_option("--pairwise-scale", gen_opt.pairwise_scale)->capture_default_str();
  gen_cmd->add_option("--seed", gen_opt.seed)->capture_default_str();
  gen_cmd->add_option("-o,--output", gen_opt.output)->capture_default_str();

  solve_options solve_opt;
  auto* solve_cmd = app.add_subcommand("solve", "Run a solver on a model file");
  auto add_solver_flags = [](CLI::App* cmd, solve_options& o) {
    cmd->add_option("-m,--model", o.model_path, "model JSON file")->required();
    cmd->add_option("--algorithm", o.algorithm, "diffusion | double_loop")->capture_default_str();
    cmd->add_option("--beta", o.beta, "positive real or \"inf\"")->capture_default_str();
    cmd->add_option("--tol", o.tol, "diffusion fixed-point tolerance")->capture_default_str();
    cmd->add_option("--max-sweeps", o.max_sweeps)->capture_default_str();
    cmd->add_option("--outer-tol", o.outer_tol, "double-loop BP residual tolerance")->capture_default_str();
    cmd->add_option("--max-outer", o.max_outer)->capture_default_str();
    cmd->add_option("--inner-tol", o.inner_tol, "inner diffusion tolerance or \"auto\"")->capture_default_str();
    cmd->add_option("--max-inner", o.max_inner)->capture_default_str();
    cmd->add_option("--tilde-init", o.tilde_init, "zero | random")->capture_default_str();
    cmd->add_option("--tilde-seed", o.tilde_seed)->capture_default_str();
    cmd->add_option("--eps-active", o.eps_active, "active-mask tolerance band")->capture_default_str();
    cmd->add_option("--decode-limit", o.decode_limit, "max decoded assignments written")->capture_default_str();
  };
  add_solver_flags(solve_cmd, solve_opt);
  solve_cmd->add_option("-o,--output", solve_opt.output)->capture_default_str();
  solve_cmd->add_option("--trace", solve_opt.trace, "trace CSV path (default: <output>.trace.csv)");

  compare_options cmp_opt;
  auto* cmp_cmd = app.add_subcommand("compare", "Run a solver and compare against the exact oracle");
  add_solver_flags(cmp_cmd, cmp_opt.solve);
  cmp_cmd->add_option("--cap", cmp_opt.cap, "oracle joint-state cap")->capture_default_str();
  cmp_cmd->add_option("-o,--output", cmp_opt.output)->capture_default_str();

  experiment_options exp_opt;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the nine-cell convergence experiment");
  exp_cmd->add_option("--rows", exp_opt.cfg.rows)->capture_default_str();
  exp_cmd->add_option("--cols", exp_opt.cfg.cols)->capture_default_str();
  exp_cmd->add_option("--complete-n", exp_opt.cfg.complete_n)->capture_default_str();
  exp_cmd->add_option("--labels", exp_opt.cfg.labels)->capture_default_str();
  exp_cmd->add_option("--unary-scale", exp_opt.cfg.unary_scale)->capture_default_str();
  exp_cmd->add_option("--pairwise-scale", exp_opt.cfg.pairwise_scale)->capture_default_str();
  exp_cmd->add_option("--seed", exp_opt.cfg.seed)->capture_default_str();
  exp_cmd->add_option("--outer-tol", exp_opt.cfg.outer_tol)->capture_default_str();
  exp_cmd->add_option("--max-outer", exp_opt.cfg.max_outer)->capture_default_str();
  exp_cmd->add_option("--inner-tol", exp_opt.inner_tol)->capture_default_str();
  exp_cmd->add_option("--max-inner", exp_opt.cfg.max_inner)->capture_default_str();
  exp_cmd->add_option("--eps-active", exp_opt.cfg.eps_active)->capture_default_str();
  exp_cmd->add_option("--outdir", exp_opt.outdir)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return exit_usage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_generate(gen_opt);
    if (solve_cmd->parsed()) return cmd_solve(solve_opt);
    if (cmp_cmd->parsed()) return cmd_compare(cmp_opt);
    if (exp_cmd->parsed()) return cmd_experiment(exp_opt);
  } catch (const mpinf::oracle::capacity_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_capacity;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}
