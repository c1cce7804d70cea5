#include "ssb/message_passing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ssb/error.hpp"
#include "ssb/logsumexp.hpp"

namespace ssb {

namespace {

void check_shapes(const MessageState& state, const GammaChain& chain, const SnapshotSet& snapshots) {
  require(state.steps() == snapshots.steps() && chain.intervals() == snapshots.intervals(),
          ErrorCode::InconsistentDimension, "state, Gamma chain and snapshots disagree on K");
  require(state.cells() == chain.cells(), ErrorCode::InconsistentDimension,
          "state and Gamma chain disagree on the cell count");
}

double row_lse(const MessageMatrix& l, const MessageMatrix& r, int x) {
  LogSumExp acc;
  for (Eigen::Index i = 0; i < l.cols(); ++i) acc.add(l(x, i) + r(x, i));
  return acc.value();
}

void update_scaling(MessageState& state, const SnapshotSet& snapshots, int k) {
  const auto ks = static_cast<std::size_t>(k);
  const Vector& mu = snapshots.weights[ks];
  for (int x = 0; x < snapshots.size(k); ++x) {
    const double g = row_lse(state.left[ks], state.right[ks], x);
    state.log_gamma[ks][x] = g;
    if (mu[x] <= 0.0) {
      state.log_beta[ks][x] = kNegInf;
      continue;
    }
    if (g == kNegInf)
      fail(ErrorCode::ZeroMarginalMass, "support point " + std::to_string(x) + " at step " +
                                            std::to_string(k) + " receives no mass");
    state.log_beta[ks][x] = std::log(mu[x]) - g;
  }
}

}  // namespace

double SolveReport::max_tv() const {
  double m = 0.0;
  for (double v : tv_per_step) m = std::max(m, v);
  return m;
}

MessageState init_state(const SnapshotSet& snapshots, int cells) {
  require(cells >= 1, ErrorCode::InvalidArgument, "cell count must be >= 1");
  MessageState state;
  for (int k = 0; k < snapshots.steps(); ++k) {
    const int n = snapshots.size(k);
    state.left.push_back(MessageMatrix::Zero(n, cells));
    state.right.push_back(MessageMatrix::Zero(n, cells));
    state.log_beta.push_back(Vector::Zero(n));
    state.log_gamma.push_back(Vector::Zero(n));
  }
  return state;
}

void left_sweep(MessageState& state, const GammaChain& chain, const SnapshotSet& snapshots,
                const ContractionOptions& opts) {
  check_shapes(state, chain, snapshots);
  for (int k = chain.intervals() - 1; k >= 0; --k) {
    const auto ks = static_cast<std::size_t>(k);
    chain[k].pull(state.left[ks + 1], state.log_beta[ks + 1], state.left[ks], opts, state.stats);
    const Vector& mu = snapshots.weights[ks];
    for (int x = 0; x < snapshots.size(k); ++x) {
      if (mu[x] > 0.0 && state.left[ks].row(x).maxCoeff() == kNegInf)
        fail(ErrorCode::AllNegInfMessage, "left message of point " + std::to_string(x) + " at step " +
                                              std::to_string(k) + " is identically zero");
    }
  }
}

void right_sweep(MessageState& state, const GammaChain& chain, const SnapshotSet& snapshots,
                 const ContractionOptions& opts) {
  check_shapes(state, chain, snapshots);
  update_scaling(state, snapshots, 0);
  for (int k = 1; k < snapshots.steps(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    chain[k - 1].push(state.right[ks - 1], state.log_beta[ks - 1], state.right[ks], opts, state.stats);
    update_scaling(state, snapshots, k);
  }
}

std::vector<Vector> implied_log_marginals(const MessageState& state) {
  std::vector<Vector> out;
  for (int k = 0; k < state.steps(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const auto n = state.left[ks].rows();
    Vector p(n);
    for (Eigen::Index x = 0; x < n; ++x)
      p[x] = state.log_beta[ks][x] + row_lse(state.left[ks], state.right[ks], static_cast<int>(x));
    const double z = log_sum_exp(std::span<const double>(p.data(), static_cast<std::size_t>(n)));
    if (z != kNegInf) p.array() -= z;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> marginal_tv(const MessageState& state, const SnapshotSet& snapshots) {
  const auto marg = implied_log_marginals(state);
  std::vector<double> tv;
  for (int k = 0; k < snapshots.steps(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    tv.push_back(0.5 * (marg[ks].array().exp() - snapshots.weights[ks].array()).abs().sum());
  }
  return tv;
}

SolveReport solve(MessageState& state, const GammaChain& chain, const SnapshotSet& snapshots,
                  const SolveOptions& opts, const IterationHook& hook) {
  require(opts.max_iters >= 0, ErrorCode::InvalidArgument, "max_iters must be >= 0");
  const auto start = std::chrono::steady_clock::now();
  SolveReport report;
  const int first = state.iterations;
  left_sweep(state, chain, snapshots, opts.contraction);
  while (true) {
    if (state.iterations > first || state.iterations > 0) {
      report.tv_per_step = marginal_tv(state, snapshots);
      const double worst = report.max_tv();
      state.history.push_back(worst);
      if (worst < opts.tol) {
        report.converged = true;
        break;
      }
    }
    if (state.iterations - first >= opts.max_iters) break;
    right_sweep(state, chain, snapshots, opts.contraction);
    ++state.iterations;
    if (hook) hook(state);
    left_sweep(state, chain, snapshots, opts.contraction);
  }
  report.iterations = state.iterations - first;
  report.stats = state.stats;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ssb
