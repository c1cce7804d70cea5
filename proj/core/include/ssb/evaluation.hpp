#pragma once

#include <cstdint>
#include <vector>

#include "ssb/gap_prior.hpp"
#include "ssb/marginals.hpp"
#include "ssb/message_passing.hpp"
#include "ssb/posterior.hpp"
#include "ssb/wavelet.hpp"

namespace ssb {

struct TrackingScore {
  double jump_p = 0.0;
  double acc3 = 0.0;
  double acc5 = 0.0;
  double traj_acc = 0.0;
  double max_l2 = 0.0;
  double mean_l2 = 0.0;
  double traj_kl = 0.0;
};

// paths[s][k] is the support index of sample s at step k. A sample's label at
// step k is the ground-truth trajectory owning that support point. Windows
// longer than the horizon shrink to the horizon. The matched trajectory of a
// sample is the label with the longest constant run (ties to the lowest
// label); the per-sample l2 error is the mean Euclidean distance to it, and
// max_l2 / mean_l2 are the max / mean of that error over samples.
TrackingScore score_tracking(const std::vector<std::vector<int>>& paths, const SnapshotSet& snapshots,
                             const GroundTruth& truth);
TrackingScore score_tracking(const std::vector<Trajectory>& samples, const SnapshotSet& snapshots,
                             const GroundTruth& truth);

struct CloudScore {
  double w1 = 0.0;
  double mmd_gauss = 0.0;
  double mmd_id = 0.0;
};

// Verbatim: K(x, y) = sum_{i,j} (x_i - y_j)^2 / 2 over coordinates. This kernel
// is conditionally negative, so its MMD^2 is never positive and the clamped
// value is 0. Rbf: K(x, y) = exp(-|x - y|^2 / (2 h^2)).
enum class GaussKernel { Verbatim, Rbf };

struct CloudOptions {
  GaussKernel gauss = GaussKernel::Verbatim;
  double bandwidth = 1.0;
};

// W1 under the l1 ground metric with uniform weights.
double wasserstein1(const Matrix& a, const Matrix& b);
double mmd(const Matrix& a, const Matrix& b, GaussKernel kind, double bandwidth = 1.0);
double mmd_identity(const Matrix& a, const Matrix& b);
CloudScore score_cloud(const Matrix& predicted, const Matrix& held_out, const CloudOptions& opts = {});

// Chains squared-l2 optimal assignments between consecutive steps; path p
// starts at support point p of step 0.
std::vector<std::vector<int>> w2_matching_baseline(const SnapshotSet& snapshots);

struct LotConfig {
  KernelSpec kernel;  // sigma already scaled
  std::vector<int> bins;
  double half_width_factor = 3.0;
  GammaLayout layout = GammaLayout::Factorized;
  SolveOptions solve;
  int samples = 0;  // 0: as many as held-out points
  std::uint64_t seed = 0;
  CloudOptions cloud;
};

struct LotResult {
  CloudScore score;
  Matrix predicted;
  SolveReport report;
};

// Drops step j and solves on the remaining steps. Each prediction starts at a
// support point of step j-1 (systematic over its weights), draws the crossing
// pair and its cells from the beliefs, the derivatives at both ends from their
// Gaussian conditional inside those cells, then the position at t_j from the
// prior bridge. j must be an interior step.
LotResult leave_one_out_run(const SnapshotSet& snapshots, int j, const LotConfig& config);

// Baseline for the same task: W2-match steps j-1 and j+1 and interpolate
// linearly in time.
Matrix interpolation_baseline(const SnapshotSet& snapshots, int j);

}  // namespace ssb
