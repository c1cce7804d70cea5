#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssb/gap_prior.hpp"

namespace ssb {

// Empirical marginals mu_k with finite supports X_k at times t_0..t_K.
struct SnapshotSet {
  TimeGrid grid;
  std::vector<Matrix> supports;  // supports[k] is n_k x d, one point per row
  std::vector<Vector> weights;   // weights[k] has n_k entries summing to 1

  int steps() const { return static_cast<int>(supports.size()); }
  int intervals() const { return steps() - 1; }
  int dim() const { return supports.empty() ? 0 : static_cast<int>(supports.front().cols()); }
  int size(int k) const { return static_cast<int>(supports[static_cast<std::size_t>(k)].rows()); }
  int max_size() const;

  void validate() const;

  // Per-dimension standard deviation of all points pooled across steps.
  std::vector<double> pooled_std() const;

  // Copy with step `k` removed (times included).
  SnapshotSet without_step(int k) const;
};

// labels[k][x] is the trajectory id of support point x at step k.
struct GroundTruth {
  std::vector<std::vector<int>> labels;

  void validate(const SnapshotSet& snapshots) const;
  // support index of trajectory `id` at step k
  int index_of(int k, int id) const;
};

struct Dataset {
  SnapshotSet snapshots;
  std::optional<GroundTruth> truth;
};

SnapshotSet make_uniform_snapshots(std::vector<Matrix> supports, double horizon = 2.0);

// CSV: header t_index,dim_0,...,dim_{d-1}[,weight][,label]. Snapshot times are
// placed on a uniform grid over [0, horizon].
Dataset load_snapshots(const std::string& path, double horizon = 2.0);
Dataset read_snapshots_csv(std::istream& in, double horizon = 2.0);
void save_snapshots(const std::string& path, const Dataset& data, bool write_weights = false);
void write_snapshots_csv(std::ostream& out, const Dataset& data, bool write_weights = false);

// Positions of n independent draws from the prior, support order shuffled per step.
Dataset generate_matern_dataset(const KernelSpec& spec, const TimeGrid& grid, int n_particles,
                                std::uint64_t seed);

// Deterministic three-well gradient flow; particles start at N(0, 0.1^2 I).
struct TristableField {
  double well_width = 0.5;
  double strength = 1.0;
  double sim_time = 6.0;
  int substeps = 50;  // RK4 steps per snapshot interval

  Vector drift(const Vector& x) const;
  // exact minima of the potential, one near each unit-circle anchor
  std::vector<Vector> attractors() const;
};

Dataset generate_tristable_dataset(int n, int intervals, std::uint64_t seed,
                                   const TristableField& field = {});

// Circular orbits around a unit-mass star, integrated with leapfrog.
struct NBodyConfig {
  int planets = 8;
  int intervals = 50;
  double min_radius = 1.0;
  double max_radius = 1.5;
  double max_inclination = 1.0;  // radians
  double sim_time = 25.132741228718345;  // four revolutions at unit radius
  int substeps = 400;          // leapfrog steps per snapshot interval
  double planet_mass = 0.0;    // mutual attraction; 0 = independent two-body orbits
};

Dataset generate_nbody_dataset(const NBodyConfig& config, std::uint64_t seed);

// Specific orbital energy v^2/2 - 1/r of every planet at every snapshot,
// recomputed from the integrator state. energies[k][p].
std::vector<std::vector<double>> nbody_orbit_energies(const NBodyConfig& config,
                                                      std::uint64_t seed);

}  // namespace ssb
