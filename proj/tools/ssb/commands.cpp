#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "ssb/error.hpp"
#include "ssb/evaluation.hpp"
#include "ssb/message_passing.hpp"
#include "ssb/oracle.hpp"
#include "ssb/posterior.hpp"

namespace ssb::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path out_path(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.paths.output);
  return fs::path(c.paths.output) / name;
}

json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : c.values) j[k] = v;
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json vec_json(const std::vector<double>& v) { return json(v); }

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

Dataset generated_data(const RunConfig& c) {
  const TimeGrid grid = TimeGrid::uniform(c.grid.K, c.grid.horizon);
  Dataset d;
  if (c.dataset.name == "matern") {
    const auto spec = KernelSpec::matern(c.dataset.nu, c.dataset.lengthscale,
                                         std::vector<double>(static_cast<std::size_t>(c.dataset.dim), c.dataset.sigma));
    d = generate_matern_dataset(spec, grid, c.dataset.n, c.seeds.data);
  } else if (c.dataset.name == "tristable") {
    d = generate_tristable_dataset(c.dataset.n, c.grid.K, c.seeds.data);
  } else if (c.dataset.name == "nbody") {
    NBodyConfig nb;
    nb.planets = c.dataset.n;
    nb.intervals = c.grid.K;
    d = generate_nbody_dataset(nb, c.seeds.data);
  } else {
    throw UsageError("unknown dataset '" + c.dataset.name + "' (matern, tristable, nbody)");
  }
  d.snapshots.grid = grid;
  return d;
}

// paths.input when set, otherwise the configured generator
Dataset input_data(const RunConfig& c) {
  if (!c.paths.input.empty()) return load_snapshots(c.paths.input, c.grid.horizon);
  return generated_data(c);
}

// covers everything a cached solve depends on
std::string solve_hash(const RunConfig& c) {
  std::string canon;
  for (const auto& [k, v] : c.values) {
    const bool relevant = k.starts_with("kernel.") || k.starts_with("grid.") || k.starts_with("basis.") ||
                          k.starts_with("solver.") ||
                          (c.paths.input.empty() && (k.starts_with("dataset.") || k == "seeds.data"));
    if (relevant) canon += k + "=" + v + "\n";
  }
  if (!c.paths.input.empty()) canon += "input=" + file_digest(c.paths.input) + "\n";
  return fnv1a_hex(canon);
}

SolveOptions solve_options(const RunConfig& c) {
  SolveOptions o;
  o.tol = c.solver.tol;
  o.max_iters = c.solver.max_iters;
  return o;
}

json report_json(const SolveReport& r) {
  json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["max_tv"] = r.max_tv();
  j["tv_per_step"] = vec_json(r.tv_per_step);
  j["contraction"] = {{"blocks", r.stats.blocks}, {"pruned", r.stats.pruned}, {"fallbacks", r.stats.fallbacks}};
  return j;
}

// Everything needed to read the posterior.
struct Solved {
  Dataset data;
  LiftedPrior prior;
  WaveletGrid grid;
  std::vector<GammaTensor> gammas;
  MessageState state;
  SolveReport report;
  bool from_cache = false;
};

void build_problem(const RunConfig& c, Solved& s) {
  s.data = input_data(c);
  s.prior = build_lifted_prior(c.prior_for(s.data.snapshots), s.data.snapshots.grid);
  s.grid = build_grid(s.prior, c.bins_for(s.prior.order()), c.basis.C);
}

void run_solve(const RunConfig& c, Solved& s) {
  s.gammas = precompute_gamma(s.prior, s.grid, s.data.snapshots, c.basis.layout);
  const GammaChain chain(s.gammas);
  s.state = init_state(s.data.snapshots, chain.cells());
  s.report = solve(s.state, chain, s.data.snapshots, solve_options(c));
}

// Reuses the caches of a previous `solve` into the same output directory when
// its solve hash matches.
Solved solved_problem(const RunConfig& c, std::ostream& log) {
  Solved s;
  build_problem(c, s);
  const fs::path report = fs::path(c.paths.output) / "solve_report.json";
  if (fs::exists(report)) {
    std::ifstream in(report);
    const json j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.value("solve_hash", "") == solve_hash(c)) {
      s.gammas = load_gamma((fs::path(c.paths.output) / "gamma.bin").string());
      s.state = load_messages((fs::path(c.paths.output) / "messages.bin").string());
      s.report.converged = j.value("converged", false);
      s.report.iterations = j.value("iterations", 0);
      s.from_cache = true;
      log << "using cached solve from " << c.paths.output << '\n';
      return s;
    }
  }
  run_solve(c, s);
  return s;
}

void write_trajectories(const fs::path& path, const RunConfig& c, const SnapshotSet& snaps,
                        const std::vector<Trajectory>& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "# config_hash=" << c.hash << '\n';
  out << "sample,t_index,support";
  for (int j = 0; j < snaps.dim(); ++j) out << ",dim_" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t s = 0; s < traj.size(); ++s)
    for (int k = 0; k < snaps.steps(); ++k) {
      const int x = traj[s].x[static_cast<std::size_t>(k)];
      out << s << ',' << k << ',' << x;
      for (int j = 0; j < snaps.dim(); ++j) out << ',' << snaps.supports[static_cast<std::size_t>(k)](x, j);
      out << '\n';
    }
}

void write_cloud(const fs::path& path, const RunConfig& c, const Matrix& pts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << "# config_hash=" << c.hash << '\n';
  for (Eigen::Index j = 0; j < pts.cols(); ++j) out << (j ? "," : "") << "dim_" << j;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < pts.cols(); ++j) out << (j ? "," : "") << pts(i, j);
    out << '\n';
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Data rows of a CSV with '#' metadata lines; first row is the header.
std::vector<std::vector<std::string>> read_table(const std::string& path, std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw EvaluationInputError("cannot read " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      header = split(line);
      have_header = true;
      continue;
    }
    rows.push_back(split(line));
    if (rows.back().size() != header.size()) throw EvaluationInputError(path + ": ragged row");
  }
  if (!have_header) throw EvaluationInputError(path + ": missing header");
  return rows;
}

double to_double(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw EvaluationInputError(path + ": bad number '" + s + "'");
  }
}

Matrix read_cloud(const std::string& path) {
  std::vector<std::string> header;
  const auto rows = read_table(path, header);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = to_double(rows[i][j], path);
  return m;
}

std::vector<std::vector<int>> read_paths(const std::string& path, int steps) {
  std::vector<std::string> header;
  const auto rows = read_table(path, header);
  if (header.size() < 3 || header[0] != "sample" || header[1] != "t_index" || header[2] != "support")
    throw EvaluationInputError(path + ": expected sample,t_index,support columns");
  std::map<long, std::vector<int>> by_sample;
  for (const auto& r : rows) {
    const long s = std::lround(to_double(r[0], path));
    const long k = std::lround(to_double(r[1], path));
    auto& p = by_sample[s];
    if (k != static_cast<long>(p.size())) throw EvaluationInputError(path + ": steps out of order");
    p.push_back(static_cast<int>(std::lround(to_double(r[2], path))));
  }
  std::vector<std::vector<int>> out;
  for (auto& [s, p] : by_sample) {
    if (static_cast<int>(p.size()) != steps) throw EvaluationInputError(path + ": sample " + std::to_string(s) + " has the wrong length");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

int cmd_generate(const RunConfig& c, std::ostream& log) {
  const Dataset d = generated_data(c);
  const fs::path data = out_path(c, "data.csv");
  {
    std::ofstream out(data, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + data.string());
    out << "# config_hash=" << c.hash << '\n';
    write_snapshots_csv(out, d);
  }
  json j;
  j["config"] = config_json(c);
  j["config_hash"] = c.hash;
  j["shape"] = {{"K", d.snapshots.steps() - 1}, {"n", d.snapshots.size(0)}, {"dim", d.snapshots.dim()}};
  write_json(out_path(c, "config.json"), j);
  log << "wrote " << data.string() << " (K=" << d.snapshots.steps() - 1 << ", n=" << d.snapshots.size(0)
      << ", d=" << d.snapshots.dim() << ")\n";
  return 0;
}

int cmd_solve(const RunConfig& c, std::ostream& log) {
  Solved s;
  build_problem(c, s);
  run_solve(c, s);
  save_gamma(out_path(c, "gamma.bin").string(), s.gammas);
  save_messages(out_path(c, "messages.bin").string(), s.state);
  json j = report_json(s.report);
  j["config_hash"] = c.hash;
  j["solve_hash"] = solve_hash(c);
  j["sigma"] = vec_json(s.prior.spec.sigma);
  j["bins"] = c.bins_for(s.prior.order());
  j["cells"] = s.grid.cells();
  j["metadata"] = {{"created_at", utc_now()}, {"seconds", s.report.seconds}};
  write_json(out_path(c, "solve_report.json"), j);
  log << (s.report.converged ? "converged" : "not converged") << " after " << s.report.iterations
      << " iterations, max TV " << s.report.max_tv() << '\n';
  return 0;
}

int cmd_sample(const RunConfig& c, std::ostream& log) {
  Solved s = solved_problem(c, log);
  const PosteriorChain post(s.state, s.gammas);
  const auto traj = sample_trajectories(post, s.grid, c.sample.n, c.sample.start, c.seeds.sample);
  const fs::path path = out_path(c, "samples.csv");
  write_trajectories(path, c, s.data.snapshots, traj);
  log << "wrote " << traj.size() << " trajectories to " << path.string() << '\n';
  return 0;
}

int cmd_argmax(const RunConfig& c, std::ostream& log) {
  Solved s = solved_problem(c, log);
  const PosteriorChain post(s.state, s.gammas);
  const auto t = argmax_trajectory(post, s.grid, c.sample.start);
  const fs::path path = out_path(c, "argmax.csv");
  write_trajectories(path, c, s.data.snapshots, {t});
  log << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& c, std::ostream& log) {
  json j;
  j["config_hash"] = c.hash;
  j["mode"] = c.evaluate.mode;
  if (c.evaluate.mode == "tracking") {
    const Dataset d = input_data(c);
    if (!d.truth) throw Error(ErrorCode::MissingGroundTruth, "tracking metrics need labels in the input data");
    const std::string samples =
        c.evaluate.samples.empty() ? (fs::path(c.paths.output) / "samples.csv").string() : c.evaluate.samples;
    const auto paths = read_paths(samples, d.snapshots.steps());
    const TrackingScore t = score_tracking(paths, d.snapshots, *d.truth);
    j["tracking"] = {{"jump_p", t.jump_p},     {"acc3", t.acc3},       {"acc5", t.acc5},
                     {"traj_acc", t.traj_acc}, {"max_l2", t.max_l2},   {"mean_l2", t.mean_l2},
                     {"traj_kl", t.traj_kl},   {"samples", paths.size()}};
  } else {
    if (c.evaluate.predicted.empty() || c.evaluate.reference.empty())
      throw UsageError("cloud mode needs evaluate.predicted and evaluate.reference");
    const CloudScore s = score_cloud(read_cloud(c.evaluate.predicted), read_cloud(c.evaluate.reference));
    j["cloud"] = {{"w1", s.w1}, {"mmd_gauss", s.mmd_gauss}, {"mmd_id", s.mmd_id}};
  }
  const fs::path path = out_path(c, "metrics.json");
  write_json(path, j);
  log << j.dump(2) << '\n';
  return 0;
}

int cmd_lot(const RunConfig& c, std::ostream& log) {
  const Dataset d = input_data(c);
  LotConfig cfg;
  cfg.kernel = c.prior_for(d.snapshots);
  cfg.bins = c.bins_for(cfg.kernel.order);
  cfg.half_width_factor = c.basis.C;
  cfg.layout = c.basis.layout;
  cfg.solve = solve_options(c);
  cfg.samples = c.lot.samples;
  cfg.seed = c.seeds.sample;
  const LotResult r = leave_one_out_run(d.snapshots, c.lot.j, cfg);
  const double base = wasserstein1(interpolation_baseline(d.snapshots, c.lot.j),
                                   d.snapshots.supports[static_cast<std::size_t>(c.lot.j)]);
  write_cloud(out_path(c, "lot_predicted.csv"), c, r.predicted);
  json j;
  j["config_hash"] = c.hash;
  j["j"] = c.lot.j;
  j["score"] = {{"w1", r.score.w1}, {"mmd_gauss", r.score.mmd_gauss}, {"mmd_id", r.score.mmd_id}};
  j["interpolation_w1"] = base;
  j["solve"] = report_json(r.report);
  write_json(out_path(c, "lot.json"), j);
  log << "held out step " << c.lot.j << ": w1 " << r.score.w1 << " (interpolation " << base << ")\n";
  return 0;
}

int cmd_oracle_check(const RunConfig& c, std::ostream& log) {
  Solved s;
  build_problem(c, s);
  s.gammas = precompute_gamma(s.prior, s.grid, s.data.snapshots, c.basis.layout);
  const CostTensor cost = gamma_contracted_cost_tensor(s.gammas);
  const SinkhornResult sk = vanilla_sinkhorn(cost, s.data.snapshots, c.oracle_iters);
  const GammaChain chain(s.gammas);
  MessageState st = init_state(s.data.snapshots, chain.cells());
  SolveOptions opts;
  opts.tol = 0.0;
  opts.max_iters = c.oracle_iters;
  opts.contraction.prune = false;
  double gap = 0.0;
  std::vector<double> per_iter;
  solve(st, chain, s.data.snapshots, opts, [&](const MessageState& m) {
    const auto& it = sk.history[static_cast<std::size_t>(m.iterations - 1)];
    double g = 0.0;
    for (int k = 0; k < m.steps(); ++k) {
      const auto ks = static_cast<std::size_t>(k);
      for (Eigen::Index x = 0; x < m.log_beta[ks].size(); ++x) {
        // relative gap of the scalings and the implied marginal sums
        if (m.log_beta[ks][x] != it.log_v[ks][x]) g = std::max(g, std::abs(std::expm1(m.log_beta[ks][x] - it.log_v[ks][x])));
        if (m.log_gamma[ks][x] != it.log_s[ks][x]) g = std::max(g, std::abs(std::expm1(m.log_gamma[ks][x] - it.log_s[ks][x])));
      }
    }
    per_iter.push_back(g);
    gap = std::max(gap, g);
  });
  json j;
  j["config_hash"] = c.hash;
  j["iterations"] = c.oracle_iters;
  j["tensor_entries"] = cost.size();
  j["max_iterate_gap"] = gap;
  j["gap_per_iteration"] = per_iter;
  j["pass"] = gap < 1e-10;
  write_json(out_path(c, "oracle_check.json"), j);
  log << "max iterate gap " << gap << " over " << c.oracle_iters << " iterations\n";
  return 0;
}

int cmd_bench(const RunConfig& c, std::ostream& log) {
  std::ostringstream csv;
  csv << std::setprecision(6);
  csv << "# config_hash=" << c.hash << "\n# seconds per message-passing iteration, K=" << c.bench.K
      << " n=" << c.bench.n << ", bins per dimension round(M^(1/d))\nM";
  for (int d : c.bench.d) csv << ",d=" << d;
  csv << '\n';
  for (int m : c.bench.M) {
    csv << m;
    for (int d : c.bench.d) {
      const auto spec = KernelSpec::matern(1.5, 1.0, std::vector<double>(static_cast<std::size_t>(d), 1.0));
      const Dataset data = generate_matern_dataset(spec, TimeGrid::uniform(c.bench.K, c.grid.horizon), c.bench.n, c.seeds.data);
      const LiftedPrior prior = build_lifted_prior(c.prior_for(data.snapshots), data.snapshots.grid);
      const int per = std::max(1, static_cast<int>(std::lround(std::pow(m, 1.0 / d))));
      const WaveletGrid grid = build_grid(prior, std::vector<int>(static_cast<std::size_t>(prior.order() - 1), per), c.basis.C);
      const auto gammas = precompute_gamma(prior, grid, data.snapshots, c.basis.layout);
      const GammaChain chain(gammas);
      MessageState st = init_state(data.snapshots, chain.cells());
      SolveOptions opts;
      opts.tol = 0.0;
      opts.max_iters = c.bench.iters;
      const SolveReport r = solve(st, chain, data.snapshots, opts);
      csv << ',' << r.seconds / r.iterations;
    }
    csv << '\n';
  }
  std::ofstream out(out_path(c, "bench.csv"), std::ios::binary);
  out << csv.str();
  log << csv.str();
  return 0;
}

}  // namespace ssb::cli
