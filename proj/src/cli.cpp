#include "pihnn/cli.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "pihnn/analytics.hpp"
#include "pihnn/config.hpp"
#include "pihnn/training.hpp"

namespace pihnn {

namespace fs = std::filesystem;

ApproxTarget approx_target_from_string(std::string_view name) {
  if (name == "inv_shift") return ApproxTarget::InvShift;
  if (name == "exp") return ApproxTarget::Exp;
  throw ContractError("unknown approximation target '" + std::string(name) + "' (expected inv_shift or exp)");
}

std::vector<C64> approx_taylor(ApproxTarget target, int n) {
  std::vector<C64> g(static_cast<std::size_t>(n));
  double term = 1.0;
  for (int k = 0; k < n; ++k) {
    if (target == ApproxTarget::InvShift) {
      // 1 / (1.5 - z) = sum z^k / 1.5^(k+1)
      g[k] = std::pow(1.5, -(k + 1));
    } else {
      g[k] = term;
      term /= (k + 1);
    }
  }
  return g;
}

C64 approx_exact(ApproxTarget target, C64 z) {
  return target == ApproxTarget::InvShift ? 1.0 / (1.5 - z) : std::exp(z);
}

std::vector<ApproxRow> approx_sweep(ApproxTarget target, int n_max) {
  if (n_max < 4) throw ContractError("approx_sweep: n_max must be at least 4");
  std::vector<C64> points;
  for (int i = 0; i < 100; ++i) {
    const double r = i / 99.0;
    for (int k = 0; k < 100; ++k) points.push_back(std::polar(r, 2.0 * std::numbers::pi * k / 100.0));
  }
  std::vector<ApproxRow> rows;
  for (int n = 4; n <= n_max; n *= 2) {
    const std::vector<C64> g = approx_taylor(target, n);
    const ShallowApprox s = constructive_shallow(g, C64{0.0, 0.0}, C64{0.0, 0.0}, n);
    ApproxRow row;
    row.n = n;
    row.solve_discrepancy = s.solve_discrepancy;
    for (C64 a : s.a64()) row.max_abs_a = std::max(row.max_abs_a, std::abs(a));
    for (C64 c : s.c64()) row.max_abs_c = std::max(row.max_abs_c, std::abs(c));
    for (C64 z : points) {
      const HighComplex v = shallow_eval_high(s, HighComplex(z.real(), z.imag()));
      const C64 approx(static_cast<double>(v.real()), static_cast<double>(v.imag()));
      row.sup_error = std::max(row.sup_error, std::abs(approx - approx_exact(target, z)));
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

void apply_thread_override() {
  int threads = 1;
  if (const char* env = std::getenv("PIHNN_THREADS")) {
    try {
      threads = std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw ContractError(std::string("PIHNN_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  Eigen::setNbThreads(threads);
}

std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument("");
    std::size_t used_a = 0;
    std::size_t used_b = 0;
    const int nx = std::stoi(s.substr(0, x), &used_a);
    const int ny = std::stoi(s.substr(x + 1), &used_b);
    if (used_a != x || used_b != s.size() - x - 1 || nx < 1 || ny < 1) throw std::invalid_argument("");
    return {nx, ny};
  } catch (const std::exception&) {
    throw ContractError("--grid expects NxM with positive integers, got '" + s + "'");
  }
}

std::string csv_of(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

struct Common {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool timing = false;
};

fs::path output_dir(const Common& c, const ProblemSpec& problem) {
  return c.out_dir.empty() ? fs::path(problem.output.directory) : fs::path(c.out_dir);
}

ProblemSpec load_with_seed(const std::string& path, const Common& c) {
  ProblemSpec problem = load_config(path);
  if (c.seed) problem.training.seed = *c.seed;
  return problem;
}

int cmd_train(const std::string& config, const Common& c, bool quiet, std::ostream& out, std::ostream& err) {
  const ProblemSpec problem = load_with_seed(config, c);
  TrainOptions opts;
  opts.timing = c.timing;
  const int every = std::max(1, problem.training.epochs / 10);
  if (!quiet) {
    opts.on_epoch = [&](const HistoryRow& r) {
      if (r.epoch % every == 0) out << "epoch " << r.epoch << " train " << format_real(r.train_loss) << '\n';
    };
  }
  const TrainResult res = train(problem, problem.training, opts);
  for (const std::string& w : res.warnings) err << "warning: " << w << '\n';

  const fs::path dir = output_dir(c, problem);
  const fs::path ckpt = dir / (problem.name + "_checkpoint.json");
  const fs::path hist = dir / (problem.name + "_history.csv");
  write_file_atomic(ckpt, checkpoint_to_json(res.nets, problem.name).dump() + "\n");
  write_file_atomic(hist, csv_of([&](std::ostream& os) { res.history.write_csv(os, c.timing); }));

  const LossBreakdown train_loss = evaluate_loss(res.nets, res.train_set, problem);
  out << "final train loss " << format_real(train_loss.total) << '\n';
  if (!res.test_set.empty()) {
    out << "final test loss " << format_real(evaluate_loss(res.nets, res.test_set, problem).total) << '\n';
  }
  out << "wrote " << ckpt.string() << '\n' << "wrote " << hist.string() << '\n';
  return 0;
}

int cmd_eval(const std::string& config, const std::string& checkpoint, const std::string& grid, const Common& c,
             std::ostream& out) {
  const ProblemSpec problem = load_with_seed(config, c);
  const Networks nets = load_checkpoint(checkpoint);
  check_architecture(nets, problem);
  int nx = problem.output.grid_nx;
  int ny = problem.output.grid_ny;
  if (!grid.empty()) std::tie(nx, ny) = parse_grid(grid);
  const GridBox box = problem.output.grid_box.value_or(bounding_box(problem.domain));
  const GridField field = evaluate_grid(nets, problem, box, nx, ny);

  const fs::path dir = output_dir(c, problem);
  const fs::path field_path = dir / (problem.name + "_field.csv");
  write_file_atomic(field_path, csv_of([&](std::ostream& os) { write_field_csv(os, field); }));
  out << "wrote " << field_path.string() << '\n';

  if (problem.ring) {
    const RingErrors e = ring_errors(nets[0], problem.material, *problem.ring, field);
    const fs::path err_path = dir / (problem.name + "_ring_errors.csv");
    write_file_atomic(err_path, csv_of([&](std::ostream& os) {
                        os << "quantity,value\n"
                           << "dphi_rel_l2," << format_real(e.dphi) << '\n'
                           << "dpsi_rel_l2," << format_real(e.dpsi) << '\n'
                           << "srr_rel_l2," << format_real(e.srr) << '\n'
                           << "stt_rel_l2," << format_real(e.stt) << '\n'
                           << "srt_rms," << format_real(e.srt_rms) << '\n'
                           << "points," << e.points << '\n';
                      }));
    out << "ring relative L2: phi' " << format_real(e.dphi) << ", psi' " << format_real(e.dpsi) << '\n';
    out << "wrote " << err_path.string() << '\n';
  }
  return 0;
}

int cmd_init_check(const std::string& config, std::optional<double> beta, std::optional<int> m_e, const Common& c,
                   std::ostream& out, std::ostream& err) {
  const ProblemSpec problem = load_with_seed(config, c);
  DiagnosticsConfig dc;
  dc.beta = beta.value_or(problem.training.beta);
  dc.m_e = m_e.value_or(problem.training.m_e);
  dc.seed = problem.training.seed;
  dc.batch = problem.training.n_train;
  dc.probe = problem.training.probe_factor * problem.training.n_train;
  const auto [lo, hi] = admissible_beta(problem.network.mode);
  if (dc.beta < lo || dc.beta > hi) {
    err << "warning: beta " << dc.beta << " lies outside the admissible range [" << lo << ", " << hi << "]\n";
  }
  const VarianceReport rep = init_diagnostics(problem, dc);
  const fs::path path = output_dir(c, problem) / (problem.name + "_variance.csv");
  write_file_atomic(path, csv_of([&](std::ostream& os) { rep.write_csv(os); }));
  if (rep.overflow) err << "warning: " << rep.overflow_message << '\n';
  for (const VarianceRow& r : rep.rows) {
    out << "layer " << r.layer << " var_y " << format_real(r.var_y) << '\n';
  }
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_approx(int n, const std::string& target, const Common& c, std::ostream& out) {
  const ApproxTarget t = approx_target_from_string(target);
  const std::vector<ApproxRow> rows = approx_sweep(t, n);
  const fs::path dir = c.out_dir.empty() ? fs::path("out") : fs::path(c.out_dir);
  const fs::path path = dir / ("approx_" + target + ".csv");
  write_file_atomic(path, csv_of([&](std::ostream& os) {
                      os << "n,sup_error,max_abs_a,max_abs_c,solve_discrepancy\n";
                      for (const ApproxRow& r : rows) {
                        os << r.n << ',' << format_real(r.sup_error) << ',' << format_real(r.max_abs_a) << ','
                           << format_real(r.max_abs_c) << ',' << format_real(r.solve_discrepancy) << '\n';
                      }
                    }));
  for (const ApproxRow& r : rows) out << "N " << r.n << " sup error " << format_real(r.sup_error) << '\n';
  out << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_sample(const std::string& config, std::optional<int> n, const Common& c, std::ostream& out) {
  const ProblemSpec problem = load_with_seed(config, c);
  Rng rng(derive_seed(problem.training.seed, 0));
  const std::vector<BoundarySample> samples = sample_boundary(problem.domain, n.value_or(problem.training.n_train), rng);
  const fs::path path = output_dir(c, problem) / (problem.name + "_samples.csv");
  write_file_atomic(path, csv_of([&](std::ostream& os) {
                      os << "x,y,nx,ny,piece,subdomain,partner\n";
                      for (const BoundarySample& s : samples) {
                        os << format_real(s.z.real()) << ',' << format_real(s.z.imag()) << ','
                           << format_real(s.normal.x) << ',' << format_real(s.normal.y) << ','
                           << problem.domain.pieces[s.piece].name << ',' << s.subdomains[0] << ',' << s.subdomains[1]
                           << '\n';
                      }
                    }));
  out << "wrote " << samples.size() << " samples to " << path.string() << '\n';
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physics-informed holomorphic networks for plane elasticity", "pihnn"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool with_timing) {
    sub->add_option("--out", common.out_dir, "Output directory (default: the config's outputs.directory)");
    sub->add_option("--seed", seed, "Override the master seed");
    if (with_timing) sub->add_flag("--timing", common.timing, "Record wall-clock time per epoch");
  };

  std::string config;
  std::string checkpoint;
  std::string grid;
  bool quiet = false;
  double beta = 0.0;
  int m_e = 0;
  int n = 0;
  std::string target = "inv_shift";

  CLI::App* train_cmd = app.add_subcommand("train", "Train the networks of a problem");
  train_cmd->add_option("config", config, "Problem file")->required()->check(CLI::ExistingFile);
  train_cmd->add_flag("--quiet", quiet, "Suppress per-epoch progress");
  add_common(train_cmd, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a grid");
  eval_cmd->add_option("config", config, "Problem file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--grid", grid, "Grid size NxM");
  add_common(eval_cmd, false);

  CLI::App* init_cmd = app.add_subcommand("init-check", "Report per-layer variances after initialization");
  init_cmd->add_option("config", config, "Problem file")->required()->check(CLI::ExistingFile);
  CLI::Option* beta_opt = init_cmd->add_option("--beta", beta, "Variance scale");
  CLI::Option* me_opt = init_cmd->add_option("--m-e", m_e, "Layer index where the probe scaling stops");
  add_common(init_cmd, false);

  CLI::App* approx_cmd = app.add_subcommand("approx-demo", "Sweep the constructive shallow approximator");
  approx_cmd->add_option("--n", n, "Largest network width (powers of two from 4)")->default_val(32);
  approx_cmd->add_option("--target", target, "Target function: inv_shift or exp")->default_val("inv_shift");
  approx_cmd->add_option("--out", common.out_dir, "Output directory (default: out)");

  CLI::App* sample_cmd = app.add_subcommand("sample", "Write a boundary sample set");
  sample_cmd->add_option("config", config, "Problem file")->required()->check(CLI::ExistingFile);
  CLI::Option* n_opt = sample_cmd->add_option("--n", n, "Number of points (default: training.n_train)");
  add_common(sample_cmd, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  for (CLI::App* sub : {train_cmd, eval_cmd, init_cmd, sample_cmd}) {
    if (sub->parsed() && sub->count("--seed") > 0) common.seed = seed;
  }

  try {
    apply_thread_override();
    if (train_cmd->parsed()) return cmd_train(config, common, quiet, out, err);
    if (eval_cmd->parsed()) return cmd_eval(config, checkpoint, grid, common, out);
    if (init_cmd->parsed()) {
      return cmd_init_check(config, beta_opt->count() ? std::optional(beta) : std::nullopt,
                            me_opt->count() ? std::optional(m_e) : std::nullopt, common, out, err);
    }
    if (approx_cmd->parsed()) return cmd_approx(n, target, common, out);
    if (sample_cmd->parsed()) return cmd_sample(config, n_opt->count() ? std::optional(n) : std::nullopt, common, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace pihnn
