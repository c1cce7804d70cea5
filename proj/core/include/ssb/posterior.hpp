#pragma once

// Pairwise posterior beliefs and trajectory reconstruction.
//
//   p_k(x, i, x', j) ∝ r_k(x, i) beta_k(x) Gamma_k(x, x', i, j) beta_{k+1}(x') l_{k+1}(x', j)
//
// Dense beliefs are only materialized on request; sampling and argmax work on
// conditional rows computed on the fly.

#include <cstdint>
#include <optional>
#include <vector>

#include "ssb/message_passing.hpp"
#include "ssb/wavelet.hpp"

namespace ssb {

struct BeliefPair {
  int n_from = 0;
  int n_to = 0;
  int cells = 1;
  std::vector<double> log_p;  // (x, i, x', j) row-major, lse = 0

  double at(int x, int i, int xp, int j) const {
    return log_p[((static_cast<std::size_t>(x) * cells + i) * n_to + xp) * cells + j];
  }
};

std::vector<BeliefPair> pairwise_beliefs(const MessageState& state, const std::vector<GammaTensor>& gammas,
                                         std::size_t cap = 10'000'000);

// Lazy view of the posterior chain.
class PosteriorChain {
 public:
  // Keeps references to both arguments.
  PosteriorChain(const MessageState& state, const std::vector<GammaTensor>& gammas);

  int steps() const { return state_->steps(); }
  int cells() const { return state_->cells(); }
  int size(int k) const { return static_cast<int>(state_->left[static_cast<std::size_t>(k)].rows()); }

  // normalized log p(x_0, i_0), flattened x-major
  Vector start_log_probs() const;
  // normalized log p(i_k | x_k) from the step-k belief marginal
  Vector cell_log_probs(int k, int x) const;
  // normalized log p(x_{k+1}, j | x_k = x, i_k = i), flattened x'-major
  Vector transition_log_probs(int k, int x, int i) const;
  // unnormalized log weights of (x', .) given (x, i); false when the pair
  // carries no mass
  bool transition_block(int k, int x, int i, int xp, Vector& out) const;

 private:
  const MessageState* state_;
  const std::vector<GammaTensor>* gammas_;
};

struct Trajectory {
  std::vector<int> x;     // support index per step
  std::vector<int> cell;  // flat cell index per step
  std::vector<Vector> y;  // derivative part per step, (m-1)*d entries, dimension-major
};

// Per-trajectory generator: mt19937_64 seeded with splitmix64(seed ^ splitmix64(index)).
std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index);

std::vector<Trajectory> sample_trajectories(const PosteriorChain& chain, const WaveletGrid& grid, int n_samples,
                                            std::optional<int> start, std::uint64_t seed);

// Greedy maximizer; ties go to the lowest flat index (support point, then cell).
Trajectory argmax_trajectory(const PosteriorChain& chain, const WaveletGrid& grid, std::optional<int> start);

// Draw of the derivatives at step k given the positions at k and at an adjacent
// step (k+1, or k-1 when k is the last step), restricted to `cell` by
// rejection. Falls back to the cell midpoint after kMaxRejections tries per
// dimension.
inline constexpr int kMaxRejections = 1000;

struct RefineResult {
  Vector y;
  bool fallback = false;
};

RefineResult refine_velocity(const LiftedPrior& prior, const WaveletGrid& grid, int k, const Vector& x_k,
                             const Vector& x_adjacent, int cell, std::uint64_t seed);

// Conditional Gaussian of one dimension's derivatives at step k given the
// position at k and at `other` (k-1 or k+1).
struct DerivativeConditional {
  Vector mean;
  Matrix cov;
};
DerivativeConditional derivative_conditional(const DimensionChain& chain, int k, int other, double x_k,
                                             double x_other);

}  // namespace ssb
