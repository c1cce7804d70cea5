#pragma once

// Gaussian autoregressive (GAP) priors and their lifted Gauss-Markov form.
//
// A GAP of order m is the stationary solution of a linear order-m SDE driven by
// white noise. Its position process is not Markov for m >= 2, but the lift
// eta = (w, w', ..., w^(m-1)) is. Everything here works per observation
// dimension: dimensions are independent and each carries its own sigma.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace ssb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kMaxOrder = 4;

enum class KernelFamily { Matern, IntegratedBM };

struct KernelSpec {
  KernelFamily family = KernelFamily::Matern;
  int order = 2;                // m; Matern smoothness is nu = m - 1/2
  double lengthscale = 1.0;     // Matern only, in time units
  std::vector<double> sigma{1.0};  // marginal std per observation dimension
  // IntegratedBM only: unit-variance initial covariance of the lift, scaled
  // by sigma^2 per dimension. Defaults to the identity.
  std::optional<Matrix> initial_covariance;

  static KernelSpec matern(double nu, double lengthscale, std::vector<double> sigma);
  static KernelSpec integrated_bm(int order, std::vector<double> sigma);

  double nu() const { return order - 0.5; }
  int dim() const { return static_cast<int>(sigma.size()); }
  bool stationary() const { return family == KernelFamily::Matern; }
  void validate() const;
};

class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> times);

  // K+1 equally spaced times on [0, horizon].
  static TimeGrid uniform(int intervals, double horizon);

  int intervals() const { return static_cast<int>(times_.size()) - 1; }
  int size() const { return static_cast<int>(times_.size()); }
  double operator[](int k) const { return times_[static_cast<std::size_t>(k)]; }
  double gap(int k) const { return (*this)[k + 1] - (*this)[k]; }
  const std::vector<double>& times() const { return times_; }

  // Grid with step `k` removed.
  TimeGrid without(int k) const;

 private:
  std::vector<double> times_;
};

// Lifted chain of one observation dimension. transition[k] / innovation[k]
// describe eta_{k+1} | eta_k, i.e. interval k in 0-based numbering.
struct DimensionChain {
  double sigma = 1.0;
  Matrix initial;                   // covariance of eta_0 (stationary for Matern)
  std::vector<Matrix> transition;   // A
  std::vector<Matrix> innovation;   // Lambda (PSD-repaired)
};

struct LiftedPrior {
  KernelSpec spec;
  TimeGrid grid;
  std::vector<DimensionChain> dims;

  int order() const { return spec.order; }
  int dim() const { return static_cast<int>(dims.size()); }
  int intervals() const { return grid.intervals(); }
};

Matrix companion_matrix(const KernelSpec& spec);

// Solves F P + P F^T + e_m q e_m^T = 0 by Kronecker vectorization.
Matrix stationary_covariance(const Matrix& drift, double diffusion_intensity);

// Stationary covariance of one Matern lift normalized so that P(0,0) = variance.
Matrix matern_stationary_covariance(const KernelSpec& spec, double variance);

// Closed-form Lambda of the order-m integrated Brownian motion over `dt`.
Matrix integrated_bm_innovation(int order, double dt, double intensity);

// Symmetrize and clamp eigenvalues in (-tol, 0) to zero; anything more
// negative throws NotPsd.
Matrix repair_psd(const Matrix& m, double tol = 1e-10);

LiftedPrior build_lifted_prior(const KernelSpec& spec, const TimeGrid& grid);

// Covariance of eta_k for every k (m x m each), propagated along the chain.
std::vector<Matrix> chain_marginal_covariances(const DimensionChain& chain);

// Full covariance of (eta_0, ..., eta_K), block (a, b) = Cov(eta_a, eta_b).
Matrix lifted_joint_covariance(const DimensionChain& chain);

// k(tau) for the half-integer Matern kernel of the given order.
double matern_covariance(int order, double lengthscale, double variance, double tau);

// (K+1) x (K+1) Gram matrix k(|t_i - t_j|) for observation dimension `dim`.
Matrix joint_position_covariance(const KernelSpec& spec, const TimeGrid& grid, int dim = 0);

// One sampled lifted trajectory: states[k] is m x d, column j = eta_k of dim j.
struct LiftedPath {
  std::vector<Matrix> states;
};

std::vector<LiftedPath> sample_paths(const LiftedPrior& prior, int n_paths, std::uint64_t seed);

}  // namespace ssb
