#pragma once

// Brute-force references over the full (n_0 x ... x n_K) coupling tensor.
// Desk-scale only: every tensor is capped at kOracleCap entries.

#include <cstddef>
#include <vector>

#include "ssb/gap_prior.hpp"
#include "ssb/marginals.hpp"
#include "ssb/message_passing.hpp"
#include "ssb/wavelet.hpp"

namespace ssb {

inline constexpr std::size_t kOracleCap = 10'000'000;

enum class CostSource { ExactGaussian, GammaContracted };

// Raw: lse over all cell paths of sum_k logGamma_k, the cost the messages see.
// Density: adds the Gaussian normalizers and counts each interior cell volume
// once, so the result approximates the normalized joint position density.
enum class GammaCostMode { Raw, Density };

struct CostTensor {
  std::vector<int> shape;            // n_0, ..., n_K
  std::vector<double> log_density;   // -C, row-major with x_0 slowest
  CostSource source = CostSource::ExactGaussian;

  std::size_t size() const { return log_density.size(); }
  std::vector<int> unravel(std::size_t flat) const;
  // max C - min C over finite entries
  double c_max() const;
};

CostTensor exact_cost_tensor(const KernelSpec& spec, const TimeGrid& grid, const SnapshotSet& snapshots,
                             std::size_t cap = kOracleCap);

CostTensor gamma_contracted_cost_tensor(const std::vector<GammaTensor>& gammas,
                                        GammaCostMode mode = GammaCostMode::Raw,
                                        std::size_t cap = kOracleCap, bool right_to_left = false);

// Max |difference| between the Density-mode contracted costs at two resolutions.
double refine_error(const LiftedPrior& prior, const WaveletGrid& coarse, const WaveletGrid& fine,
                    const SnapshotSet& snapshots);

struct SinkhornIterate {
  std::vector<Vector> log_s;  // marginal S_k at its update
  std::vector<Vector> log_v;  // v_k right after its update
};

struct SinkhornResult {
  std::vector<Vector> log_v;
  std::vector<SinkhornIterate> history;  // one entry per full cycle
  std::vector<double> dual;              // dual objective after every block update
};

// Cyclic updates v_k <- mu_k / S_k for k = 0..K, starting from v = 1 unless
// init_log_v is given.
SinkhornResult vanilla_sinkhorn(const CostTensor& cost, const SnapshotSet& snapshots, int iters,
                                std::vector<Vector> init_log_v = {});

struct TransportPlan {
  std::vector<int> shape;
  std::vector<double> log_p;  // normalized
  std::vector<Vector> marginals;
};

TransportPlan transport_from_scalings(const CostTensor& cost, const std::vector<Vector>& log_v);

// sum_k <mu_k, log v_k> - sum_x exp(-C(x)) prod_k v_k(x_k). Concave in log v;
// each cyclic update maximizes it over one block.
double entropic_dual(const CostTensor& cost, const std::vector<Vector>& log_v, const SnapshotSet& snapshots);

// Message passing in long double linear arithmetic. Entry t holds the state
// after iteration t+1 (left messages as used in that iteration).
std::vector<MessageState> linear_message_passing(const std::vector<GammaTensor>& gammas,
                                                 const SnapshotSet& snapshots, int iters);

}  // namespace ssb
