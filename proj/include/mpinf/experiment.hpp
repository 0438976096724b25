#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <vector>

#include "mpinf/double_loop.hpp"
#include "mpinf/generators.hpp"
#include "mpinf/model_io.hpp"

namespace mpinf::experiment {

inline constexpr const char* trace_header = "outer_iter,log10_bp_residual,u_hat,mask_changed,inner_sweeps";

struct config {
  int rows = 10, cols = 10;
  int complete_n = 15;
  int labels = 4;
  double unary_scale = 1.0;
  double pairwise_scale = 1.0;
  std::uint64_t seed = 0;
  double outer_tol = 1e-10;
  int max_outer = 500;
  double inner_tol = inner_tol_auto;
  long max_inner = default_max_sweeps;
  double eps_active = default_mask_eps;
  double keyobs_tol = 1e-6;
  std::filesystem::path outdir = "experiment_out";
};

struct cell_result {
  std::string name;
  bool failed = false;       // exception while running the cell
  std::string error;
  bool converged = false;
  int outer_iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double decades_dropped = 0.0;
  // key observation: after the first outer iteration, U∞(θ̂) and ⌈θ̂⌉ stay
  // fixed. Checked over iterations >= 2 against iteration 1.
  bool keyobs_uhat_ok = true;
  bool keyobs_mask_ok = true;
  double keyobs_max_du = 0.0;
  int keyobs_mask_changes = 0;
  std::string trace_file;
  std::string model_file;
};

struct cell_spec {
  gen::interaction inter;
  int labels;
  gen::topology topo;
};

// The nine demo cells: six grid cells and three complete-graph cells.
inline std::vector<cell_spec> default_cells(int labels) {
  return {
      {gen::interaction::random, labels, gen::topology::grid},
      {gen::interaction::attractive, labels, gen::topology::grid},
      {gen::interaction::repulsive, labels, gen::topology::grid},
      {gen::interaction::repulsive, 2, gen::topology::grid},
      {gen::interaction::mixed, labels, gen::topology::grid},
      {gen::interaction::circular_distance, labels, gen::topology::grid},
      {gen::interaction::random, labels, gen::topology::complete},
      {gen::interaction::attractive, labels, gen::topology::complete},
      {gen::interaction::repulsive, labels, gen::topology::complete},
  };
}

namespace detail {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

inline std::string fmt_log10(double x) {
  if (!(x > 0)) return "-inf";
  return fmt(std::log10(x));
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline cell_result run_cell(const config& cfg, const cell_spec& cell, std::uint64_t seed) {
  gen::instance_spec spec;
  spec.topo = cell.topo;
  spec.rows = cfg.rows;
  spec.cols = cfg.cols;
  spec.n = cfg.complete_n;
  spec.labels = cell.labels;
  spec.inter = cell.inter;
  spec.unary_scale = cfg.unary_scale;
  spec.pairwise_scale = cfg.pairwise_scale;
  spec.seed = seed;

  cell_result res;
  res.name = std::string(gen::to_string(cell.inter)) + "_" + std::to_string(cell.labels) + "_" +
             gen::to_string(cell.topo);
  try {
    const model m = gen::generate(spec);
    res.model_file = res.name + ".model.json";
    detail::write_atomic(cfg.outdir / res.model_file, io::model_to_json(m).dump(2) + "\n");

    double_loop_state state(m, temperature::infinite());
    state.set_mask_eps(cfg.eps_active);
    res.initial_residual = state.bp_residual();
    const std::uint64_t initial_digest = state.hat_mask().digest();
    const outer_trace trace = state.run(cfg.outer_tol, cfg.max_outer, cfg.inner_tol, cfg.max_inner);

    std::string csv = std::string(trace_header) + "\n";
    std::uint64_t prev_digest = initial_digest;
    for (const auto& row : trace.entries) {
      csv += std::to_string(row.iter) + "," + detail::fmt_log10(row.bp_residual) + "," + detail::fmt(row.u_hat) +
             "," + (row.mask_digest != prev_digest ? "1" : "0") + "," + std::to_string(row.inner_sweeps) + "\n";
      prev_digest = row.mask_digest;
    }
    res.trace_file = res.name + ".trace.csv";
    detail::write_atomic(cfg.outdir / res.trace_file, csv);

    res.converged = trace.converged;
    res.outer_iterations = static_cast<int>(trace.entries.size());
    res.final_residual = trace.entries.empty() ? res.initial_residual : trace.entries.back().bp_residual;
    if (res.initial_residual > 0 && res.final_residual > 0)
      res.decades_dropped = std::log10(res.initial_residual) - std::log10(res.final_residual);
    else if (res.final_residual == 0)
      res.decades_dropped = std::numeric_limits<double>::infinity();

    for (std::size_t k = 1; k < trace.entries.size(); ++k) {
      const double du = std::abs(trace.entries[k].u_hat - trace.entries[k - 1].u_hat);
      res.keyobs_max_du = std::max(res.keyobs_max_du, du);
      if (du > cfg.keyobs_tol) res.keyobs_uhat_ok = false;
      if (trace.entries[k].mask_digest != trace.entries[0].mask_digest) {
        res.keyobs_mask_ok = false;
        ++res.keyobs_mask_changes;
      }
    }
  } catch (const std::exception& err) {
    res.failed = true;
    res.error = err.what();
  }
  return res;
}

// Runs all cells (in parallel worker threads), writes one trace CSV and one
// model JSON per cell plus a manifest.json summarizing outcomes.
inline std::vector<cell_result> run(const config& cfg) {
  std::filesystem::create_directories(cfg.outdir);
  const auto cells = default_cells(cfg.labels);
  std::vector<std::future<cell_result>> futures;
  for (std::size_t i = 0; i < cells.size(); ++i)
    futures.push_back(std::async(std::launch::async, [&cfg, &cells, i] {
      return run_cell(cfg, cells[i], cfg.seed + i);
    }));
  std::vector<cell_result> results;
  for (auto& f : futures) results.push_back(f.get());

  io::json manifest;
  manifest["cells"] = io::json::array();
  for (const auto& r : results) {
    io::json c;
    c["name"] = r.name;
    c["failed"] = r.failed;
    if (r.failed) c["error"] = r.error;
    c["converged"] = r.converged;
    c["outer_iterations"] = r.outer_iterations;
    c["initial_residual"] = r.initial_residual;
    c["final_residual"] = r.final_residual;
    c["decades_dropped"] = r.decades_dropped;
    c["key_observation"] = {{"u_hat_constant", r.keyobs_uhat_ok},
                            {"mask_constant", r.keyobs_mask_ok},
                            {"max_abs_du", r.keyobs_max_du},
                            {"mask_changes", r.keyobs_mask_changes}};
    c["trace_csv"] = r.trace_file;
    c["model_json"] = r.model_file;
    manifest["cells"].push_back(std::move(c));
  }
  detail::write_atomic(cfg.outdir / "manifest.json", manifest.dump(2) + "\n");
  return results;
}

}  // namespace mpinf::experiment
