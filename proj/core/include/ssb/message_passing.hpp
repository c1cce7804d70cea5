#pragma once

// Log-domain belief propagation over the lifted chain.
//
// Bookkeeping: log_gamma[k](x) = lse_i (l[k](x, i) + r[k](x, i)) is the implied
// marginal before scaling and log_beta[k] = log mu_k - log_gamma[k]. The
// neighbour updates use log_beta directly, which is c_k + log mu_k with
// c_k = -log_gamma[k].

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ssb/contraction.hpp"
#include "ssb/marginals.hpp"

namespace ssb {

struct MessageState {
  std::vector<MessageMatrix> left;   // left[k] is n_k x M
  std::vector<MessageMatrix> right;  // right[k] is n_k x M
  std::vector<Vector> log_beta;
  std::vector<Vector> log_gamma;
  int iterations = 0;
  std::vector<double> history;  // max TV after each completed iteration
  ContractionStats stats;

  int steps() const { return static_cast<int>(left.size()); }
  int cells() const { return left.empty() ? 0 : static_cast<int>(left.front().cols()); }
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iters = 200;
  ContractionOptions contraction;
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> tv_per_step;
  double seconds = 0.0;
  ContractionStats stats;

  double max_tv() const;
};

MessageState init_state(const SnapshotSet& snapshots, int cells);

// l[k] for k = K-1 down to 0 from beta[k+1] and l[k+1].
void left_sweep(MessageState& state, const GammaChain& chain, const SnapshotSet& snapshots,
                const ContractionOptions& opts = {});

// beta[0], then r[k], gamma[k], beta[k] for k = 1..K.
void right_sweep(MessageState& state, const GammaChain& chain, const SnapshotSet& snapshots,
                 const ContractionOptions& opts = {});

// Implied marginals beta_k * (l_k . r_k), normalized. Uses the current left
// messages, so call right after a left sweep.
std::vector<Vector> implied_log_marginals(const MessageState& state);
std::vector<double> marginal_tv(const MessageState& state, const SnapshotSet& snapshots);

using IterationHook = std::function<void(const MessageState&)>;

// Runs full iterations until max TV < tol or max_iters. The returned state
// always has left messages consistent with the final scalings.
SolveReport solve(MessageState& state, const GammaChain& chain, const SnapshotSet& snapshots,
                  const SolveOptions& opts = {}, const IterationHook& hook = {});

// Binary cache of the messages and scalings (not the history or stats).
void save_messages(const std::string& path, const MessageState& state);
MessageState load_messages(const std::string& path);

}  // namespace ssb
