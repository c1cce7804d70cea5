#include "ssb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Eigenvalues>

#include "ssb/assignment.hpp"
#include "ssb/error.hpp"

namespace ssb {

namespace {

double window_accuracy(const std::vector<std::vector<int>>& labels, int w) {
  long total = 0, good = 0;
  for (const auto& l : labels) {
    const int steps = static_cast<int>(l.size());
    const int len = std::min(w, steps);
    for (int s = 0; s + len <= steps; ++s) {
      ++total;
      bool same = true;
      for (int k = s + 1; k < s + len; ++k) same = same && l[static_cast<std::size_t>(k)] == l[static_cast<std::size_t>(s)];
      good += same;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(good) / static_cast<double>(total);
}

int draw_log(const Vector& log_p, std::mt19937_64& rng) {
  const double top = log_p.maxCoeff();
  std::vector<double> w(static_cast<std::size_t>(log_p.size()));
  for (Eigen::Index i = 0; i < log_p.size(); ++i) w[static_cast<std::size_t>(i)] = std::exp(log_p[i] - top);
  return std::discrete_distribution<int>(w.begin(), w.end())(rng);
}

void check_clouds(const Matrix& a, const Matrix& b) {
  require(a.rows() > 0 && b.rows() > 0, ErrorCode::EmptyCloud, "point clouds must be nonempty");
  require(a.cols() == b.cols(), ErrorCode::InconsistentDimension, "point clouds differ in dimension");
}

double verbatim_kernel(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < y.size(); ++j) s += (x[i] - y[j]) * (x[i] - y[j]);
  return 0.5 * s;
}

double mean_kernel(const Matrix& a, const Matrix& b, GaussKernel kind, double h) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      if (kind == GaussKernel::Verbatim) {
        s += verbatim_kernel(a.row(i), b.row(j));
      } else {
        s += std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2.0 * h * h));
      }
    }
  return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

TrackingScore score_tracking(const std::vector<std::vector<int>>& paths, const SnapshotSet& snapshots,
                             const GroundTruth& truth) {
  truth.validate(snapshots);
  TrackingScore score;
  if (paths.empty()) return score;
  const int steps = snapshots.steps();
  const int n_traj = snapshots.size(0);

  std::vector<std::vector<int>> labels;
  for (const auto& p : paths) {
    require(static_cast<int>(p.size()) == steps, ErrorCode::InvalidArgument, "sample horizon differs from the data");
    std::vector<int> l;
    for (int k = 0; k < steps; ++k) {
      const int x = p[static_cast<std::size_t>(k)];
      require(x >= 0 && x < snapshots.size(k), ErrorCode::InvalidArgument, "sample leaves the support");
      l.push_back(truth.labels[static_cast<std::size_t>(k)][static_cast<std::size_t>(x)]);
    }
    labels.push_back(std::move(l));
  }

  long jumps = 0, increments = 0, constant = 0;
  std::map<int, long> hist;
  double l2_sum = 0.0, l2_max = 0.0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const auto& l = labels[s];
    bool same = true;
    int best_label = l[0], best_len = 0, run = 0;
    for (int k = 0; k < steps; ++k) {
      if (k > 0) {
        ++increments;
        const bool change = l[static_cast<std::size_t>(k)] != l[static_cast<std::size_t>(k - 1)];
        jumps += change;
        same = same && !change;
        run = change ? 1 : run + 1;
      } else {
        run = 1;
      }
      const int lab = l[static_cast<std::size_t>(k)];
      if (run > best_len || (run == best_len && lab < best_label)) {
        best_len = run;
        best_label = lab;
      }
    }
    constant += same;
    ++hist[best_label];

    double dist = 0.0;
    for (int k = 0; k < steps; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const int own = paths[s][ks];
      const int matched = truth.index_of(k, best_label);
      dist += (snapshots.supports[ks].row(own) - snapshots.supports[ks].row(matched)).norm();
    }
    dist /= steps;
    l2_sum += dist;
    l2_max = std::max(l2_max, dist);
  }

  const double ns = static_cast<double>(labels.size());
  score.jump_p = increments == 0 ? 0.0 : static_cast<double>(jumps) / static_cast<double>(increments);
  score.acc3 = window_accuracy(labels, 3);
  score.acc5 = window_accuracy(labels, 5);
  score.traj_acc = static_cast<double>(constant) / ns;
  score.mean_l2 = l2_sum / ns;
  score.max_l2 = l2_max;
  double kl = 0.0;
  for (const auto& [label, count] : hist) {
    const double p = static_cast<double>(count) / ns;
    kl += p * std::log(p * n_traj);
  }
  score.traj_kl = std::max(0.0, kl);
  return score;
}

TrackingScore score_tracking(const std::vector<Trajectory>& samples, const SnapshotSet& snapshots,
                             const GroundTruth& truth) {
  std::vector<std::vector<int>> paths;
  for (const auto& t : samples) paths.push_back(t.x);
  return score_tracking(paths, snapshots, truth);
}

double wasserstein1(const Matrix& a, const Matrix& b) {
  check_clouds(a, b);
  const auto n = a.rows();
  const auto m = b.rows();
  Matrix cost(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) cost(i, j) = (a.row(i) - b.row(j)).lpNorm<1>();
  if (n == m) return solve_assignment(cost).cost / static_cast<double>(n);
  const auto flow = solve_transport(cost, std::vector<std::int64_t>(static_cast<std::size_t>(n), m),
                                    std::vector<std::int64_t>(static_cast<std::size_t>(m), n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) total += static_cast<double>(flow(i, j)) * cost(i, j);
  return total / (static_cast<double>(n) * static_cast<double>(m));
}

double mmd(const Matrix& a, const Matrix& b, GaussKernel kind, double bandwidth) {
  check_clouds(a, b);
  const double sq = mean_kernel(a, a, kind, bandwidth) + mean_kernel(b, b, kind, bandwidth) -
                    2.0 * mean_kernel(a, b, kind, bandwidth);
  return std::sqrt(std::max(0.0, sq));
}

double mmd_identity(const Matrix& a, const Matrix& b) {
  check_clouds(a, b);
  const Eigen::RowVectorXd diff = a.colwise().mean() - b.colwise().mean();
  return std::sqrt(std::max(0.0, diff.squaredNorm()));
}

CloudScore score_cloud(const Matrix& predicted, const Matrix& held_out, const CloudOptions& opts) {
  CloudScore s;
  s.w1 = wasserstein1(predicted, held_out);
  s.mmd_gauss = mmd(predicted, held_out, opts.gauss, opts.bandwidth);
  s.mmd_id = mmd_identity(predicted, held_out);
  return s;
}

std::vector<std::vector<int>> w2_matching_baseline(const SnapshotSet& snapshots) {
  const int n = snapshots.size(0);
  for (int k = 1; k < snapshots.steps(); ++k)
    require(snapshots.size(k) == n, ErrorCode::UnequalSupportSizes, "W2 matching needs equal support sizes");
  std::vector<std::vector<int>> paths(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) paths[static_cast<std::size_t>(p)].push_back(p);
  for (int k = 0; k + 1 < snapshots.steps(); ++k) {
    const Matrix& a = snapshots.supports[static_cast<std::size_t>(k)];
    const Matrix& b = snapshots.supports[static_cast<std::size_t>(k + 1)];
    Matrix cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    const auto match = solve_assignment(cost);
    for (auto& path : paths) path.push_back(match.col_of_row[static_cast<std::size_t>(path.back())]);
  }
  return paths;
}

Matrix interpolation_baseline(const SnapshotSet& snapshots, int j) {
  require(j >= 1 && j + 1 < snapshots.steps(), ErrorCode::InvalidHoldOut, "held-out step must be interior");
  const Matrix& a = snapshots.supports[static_cast<std::size_t>(j - 1)];
  const Matrix& b = snapshots.supports[static_cast<std::size_t>(j + 1)];
  require(a.rows() == b.rows(), ErrorCode::UnequalSupportSizes, "interpolation needs equal support sizes");
  Matrix cost(a.rows(), b.rows());
  for (Eigen::Index p = 0; p < a.rows(); ++p)
    for (Eigen::Index q = 0; q < b.rows(); ++q) cost(p, q) = (a.row(p) - b.row(q)).squaredNorm();
  const auto match = solve_assignment(cost);
  const double w = (snapshots.grid[j] - snapshots.grid[j - 1]) / (snapshots.grid[j + 1] - snapshots.grid[j - 1]);
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index p = 0; p < a.rows(); ++p)
    out.row(p) = (1.0 - w) * a.row(p) + w * b.row(match.col_of_row[static_cast<std::size_t>(p)]);
  return out;
}

LotResult leave_one_out_run(const SnapshotSet& snapshots, int j, const LotConfig& config) {
  require(j >= 1 && j + 1 < snapshots.steps(), ErrorCode::InvalidHoldOut,
          "held-out step must have observed neighbours on both sides");
  const SnapshotSet reduced = snapshots.without_step(j);
  const LiftedPrior prior = build_lifted_prior(config.kernel, reduced.grid);
  const WaveletGrid grid = build_grid(prior, config.bins, config.half_width_factor);
  const auto gammas = precompute_gamma(prior, grid, reduced, config.layout);
  const GammaChain chain(gammas);
  MessageState state = init_state(reduced, chain.cells());

  LotResult result;
  result.report = solve(state, chain, reduced, config.solve);
  const PosteriorChain post(state, gammas);
  const int count = config.samples > 0 ? config.samples : snapshots.size(j);
  const int m = prior.order();
  const int d = prior.dim();
  const int axes = m - 1;
  const int a = j - 1;  // the gap is interval a of the reduced chain
  const auto as = static_cast<std::size_t>(a);

  // (derivatives at a, derivatives at a+1) | positions, one Gaussian per dimension
  struct PairConditional {
    Matrix gain;  // 2(m-1) x 2
    Matrix root;
  };
  std::vector<PairConditional> pair_cond;
  for (int dim = 0; dim < d; ++dim) {
    const DimensionChain& ch = prior.dims[static_cast<std::size_t>(dim)];
    const Matrix p = chain_marginal_covariances(ch)[as];
    const Matrix& tr = ch.transition[as];
    Matrix c(2 * m, 2 * m);
    c.topLeftCorner(m, m) = p;
    c.topRightCorner(m, m) = p * tr.transpose();
    c.bottomLeftCorner(m, m) = tr * p;
    c.bottomRightCorner(m, m) = tr * p * tr.transpose() + ch.innovation[as];
    std::vector<int> obs = {0, m}, hid;
    for (int r = 1; r < m; ++r) hid.push_back(r);
    for (int r = m + 1; r < 2 * m; ++r) hid.push_back(r);
    const Matrix c_oo = c(obs, obs), c_ho = c(hid, obs), c_hh = c(hid, hid);
    PairConditional pc;
    pc.gain = c_ho * c_oo.inverse();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c_hh - pc.gain * c_ho.transpose());
    pc.root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    pair_cond.push_back(std::move(pc));
  }

  // bridge eta_j | eta_{j-1}, eta_{j+1} under the full-grid prior
  const LiftedPrior full = build_lifted_prior(config.kernel, snapshots.grid);
  const auto pots = interval_potentials(full);
  const auto& in_pot = pots[static_cast<std::size_t>(j - 1)];
  const auto& out_pot = pots[static_cast<std::size_t>(j)];
  std::vector<Matrix> gain_in, gain_out;
  std::vector<double> bridge_sd;
  for (int dim = 0; dim < d; ++dim) {
    const auto ds = static_cast<std::size_t>(dim);
    const Matrix& a2 = out_pot.transition[ds];
    const Matrix cov = (in_pot.lambda_inv[ds] + a2.transpose() * out_pot.lambda_inv[ds] * a2).inverse();
    gain_in.push_back(cov * in_pot.lambda_inv[ds] * in_pot.transition[ds]);
    gain_out.push_back(cov * a2.transpose() * out_pot.lambda_inv[ds]);
    bridge_sd.push_back(std::sqrt(std::max(0.0, cov(0, 0))));
  }

  // one start per held-out point, systematic over the step weights
  const Vector& w = reduced.weights[as];
  std::mt19937_64 offset_rng(trajectory_seed(config.seed, 0x5717a7ULL));
  const double u0 = std::uniform_real_distribution<double>(0.0, 1.0)(offset_rng);
  std::vector<int> starts;
  double cum = w[0];
  int p = 0;
  for (int s = 0; s < count; ++s) {
    const double target = (s + u0) / count * w.sum();
    while (target > cum && p + 1 < w.size()) cum += w[++p];
    starts.push_back(p);
  }

  const Matrix& before = reduced.supports[as];
  const Matrix& after = reduced.supports[as + 1];
  const StepCells& cells_a = grid.steps[as];
  const StepCells& cells_b = grid.steps[as + 1];
  result.predicted.resize(count, d);
  for (int s = 0; s < count; ++s) {
    std::mt19937_64 rng(trajectory_seed(config.seed, static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const int x = starts[static_cast<std::size_t>(s)];
    const int i = draw_log(post.cell_log_probs(a, x), rng);
    const int flat = draw_log(post.transition_log_probs(a, x, i), rng);
    const int xp = flat / post.cells();
    const auto ca = cells_a.split(i);
    const auto cb = cells_b.split(flat % post.cells());
    for (int dim = 0; dim < d; ++dim) {
      const auto ds = static_cast<std::size_t>(dim);
      Vector za(m), zb(m);
      za[0] = before(x, dim);
      zb[0] = after(xp, dim);
      if (axes > 0) {
        const PairConditional& pc = pair_cond[ds];
        const Vector mean = pc.gain * Eigen::Vector2d(za[0], zb[0]);
        Vector y = mean, z(2 * axes);
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxRejections && !accepted; ++attempt) {
          for (int r = 0; r < 2 * axes; ++r) z[r] = normal(rng);
          y = mean + pc.root * z;
          accepted = cells_a.contains(dim, ca[ds], y.head(axes)) && cells_b.contains(dim, cb[ds], y.tail(axes));
        }
        if (!accepted) {
          y.head(axes) = cells_a.midpoint(dim, ca[ds]);
          y.tail(axes) = cells_b.midpoint(dim, cb[ds]);
        }
        za.tail(axes) = y.head(axes);
        zb.tail(axes) = y.tail(axes);
      }
      result.predicted(s, dim) = (gain_in[ds] * za + gain_out[ds] * zb)[0] + bridge_sd[ds] * normal(rng);
    }
  }
  result.score = score_cloud(result.predicted, snapshots.supports[static_cast<std::size_t>(j)], config.cloud);
  return result;
}

}  // namespace ssb
