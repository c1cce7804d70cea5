#pragma once

// Haar cells over the derivative part of the lifted state and the pairwise
// log-Gamma tensors built from them.
//
// Cell layout: within one observation dimension the (m-1) derivative axes are
// flattened row-major with the first derivative slowest; across observation
// dimensions the per-dimension cell indices are flattened row-major with
// dimension 0 slowest.

#include <cstdint>
#include <string>
#include <vector>

#include "ssb/gap_prior.hpp"
#include "ssb/logsumexp.hpp"
#include "ssb/marginals.hpp"

namespace ssb {

inline constexpr double kLogGammaFloor = -745.0;

struct AxisCells {
  int bins = 1;
  double half_width = 0.0;

  double width() const { return 2.0 * half_width / bins; }
  double midpoint(int b) const { return -half_width + (b + 0.5) * width(); }
  // bin containing v, or -1 outside [-half_width, half_width)
  int locate(double v) const;
};

struct StepCells {
  std::vector<std::vector<AxisCells>> axes;  // axes[j][a]: dimension j, derivative a+1

  int dim() const { return static_cast<int>(axes.size()); }
  int cells_in_dim(int j) const;
  int cells() const;
  double log_volume_dim(int j) const;
  double log_volume() const;
  // Z = Vol^{-1/2}; every cell of a step has the same volume
  double log_normalizer() const { return -0.5 * log_volume(); }

  std::vector<int> split(int cell) const;  // per-dimension cell indices
  int join(const std::vector<int>& per_dim) const;
  Vector midpoint(int j, int cell_in_dim) const;  // length m-1
  bool contains(int j, int cell_in_dim, const Vector& y) const;
  // per-axis bin indices of one dimension's cell
  std::vector<int> axis_bins(int j, int cell_in_dim) const;
};

struct WaveletGrid {
  int order = 1;
  std::vector<StepCells> steps;

  int dim() const { return steps.empty() ? 0 : steps.front().dim(); }
  int cells() const { return steps.front().cells(); }
  std::vector<int> cells_per_dim() const;
};

// `bins` holds one count per derivative axis: either m-1 entries shared by all
// observation dimensions or (m-1)*d entries, dimension-major.
WaveletGrid build_grid(const LiftedPrior& prior, const std::vector<int>& bins,
                       double half_width_factor = 3.0);

// Per-interval Gaussian factor data, one entry per observation dimension.
struct IntervalPotential {
  std::vector<Matrix> transition;
  std::vector<Matrix> lambda_inv;
  std::vector<Matrix> initial_inv;  // interval 0 only
  double log_normalizer = 0.0;      // log of the Gaussian normalizing constants
};

std::vector<IntervalPotential> interval_potentials(const LiftedPrior& prior);

// -Q/2 for interval `interval` (0-based, joining steps interval and
// interval+1), plus the initial quadratic on interval 0. z vectors are m*d
// long, laid out (position, derivatives) per dimension.
double log_phi(const LiftedPrior& prior, int interval, const Vector& z_from, const Vector& z_to);
double log_phi(const IntervalPotential& pot, int dim, const Vector& z_from, const Vector& z_to);

enum class GammaLayout { Factorized, Dense };

// Entries (x, x', i, j), row-major; one factor per observation dimension or a
// single dense factor.
struct GammaFactor {
  int n_from = 0;
  int n_to = 0;
  int cells = 1;
  // Pair blocks are stored only when the pair has a finite entry in every
  // factor; slot is -1 otherwise.
  std::vector<std::int64_t> slot;
  std::vector<double> log_values;

  std::size_t pair(int x, int xp) const { return static_cast<std::size_t>(x) * n_to + xp; }
  bool stored(int x, int xp) const { return slot[pair(x, xp)] >= 0; }
  const double* block(int x, int xp) const {
    const std::int64_t s = slot[pair(x, xp)];
    return s < 0 ? nullptr : log_values.data() + static_cast<std::size_t>(s) * cells * cells;
  }
  double at(int x, int xp, int i, int j) const {
    const double* b = block(x, xp);
    return b ? b[static_cast<std::size_t>(i) * cells + j] : kNegInf;
  }
  // (x, x', i, j) row-major, -inf for dropped pairs
  std::vector<double> dense() const;
};

struct GammaTensor {
  int n_from = 0;
  int n_to = 0;
  std::vector<GammaFactor> factors;
  double log_volume_from = 0.0;
  double log_volume_to = 0.0;
  double log_normalizer = 0.0;

  int cells() const;
  std::vector<int> factor_cells() const;
  bool factorized() const { return factors.size() > 1; }
  std::vector<int> split(int cell) const;
  double at(int x, int xp, int i, int j) const;
};

// Fills gamma.factors from dense (x, x', i, j) arrays with the given cell
// counts, dropping pair blocks that are identically -inf in any factor.
void set_gamma_factors(GammaTensor& gamma, std::vector<std::vector<double>> dense, const std::vector<int>& cells);

std::vector<GammaTensor> precompute_gamma(const LiftedPrior& prior, const WaveletGrid& grid,
                                          const SnapshotSet& snapshots,
                                          GammaLayout layout = GammaLayout::Factorized);

// Binary cache: magic "SSBGAMMA", u32 version, K, d, factor count, n per step,
// cells per factor, then f64 log_volume_from/to/log_normalizer per interval and
// every factor's entries in (x, x', i, j) order. Little-endian.
void save_gamma(const std::string& path, const std::vector<GammaTensor>& gammas);
std::vector<GammaTensor> load_gamma(const std::string& path);

}  // namespace ssb
