#include "ssb/wavelet.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "ssb/error.hpp"
#include "ssb/logsumexp.hpp"

namespace ssb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Inverse of a PSD covariance with the conditioning jitter rule applied.
Matrix regularized_inverse(const Matrix& cov, double& log_det) {
  const int m = static_cast<int>(cov.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  double lo = eig.eigenvalues().minCoeff();
  double hi = eig.eigenvalues().maxCoeff();
  Matrix use = cov;
  if (lo <= 0.0 || hi / lo > 1e12) {
    const double trace = cov.trace();
    require(trace > 0.0, ErrorCode::SingularLambda, "innovation covariance is zero");
    use += Matrix::Identity(m, m) * (1e-10 * trace / m);
    eig.compute(use);
    lo = eig.eigenvalues().minCoeff();
    require(lo > 0.0, ErrorCode::SingularLambda, "innovation covariance singular after jitter");
  }
  log_det = eig.eigenvalues().array().log().sum();
  const Matrix& v = eig.eigenvectors();
  Matrix inv = v * eig.eigenvalues().cwiseInverse().asDiagonal() * v.transpose();
  return 0.5 * (inv + inv.transpose());
}

double quad(const Matrix& p, const Vector& u) { return u.dot(p * u); }

}  // namespace

int AxisCells::locate(double v) const {
  if (!(v >= -half_width && v < half_width)) return -1;
  const int b = static_cast<int>(std::floor((v + half_width) / width()));
  return std::clamp(b, 0, bins - 1);
}

int StepCells::cells_in_dim(int j) const {
  int c = 1;
  for (const auto& a : axes[static_cast<std::size_t>(j)]) c *= a.bins;
  return c;
}

int StepCells::cells() const {
  int c = 1;
  for (int j = 0; j < dim(); ++j) c *= cells_in_dim(j);
  return c;
}

double StepCells::log_volume_dim(int j) const {
  double v = 0.0;
  for (const auto& a : axes[static_cast<std::size_t>(j)]) v += std::log(a.width());
  return v;
}

double StepCells::log_volume() const {
  double v = 0.0;
  for (int j = 0; j < dim(); ++j) v += log_volume_dim(j);
  return v;
}

std::vector<int> StepCells::split(int cell) const {
  std::vector<int> out(static_cast<std::size_t>(dim()));
  for (int j = dim() - 1; j >= 0; --j) {
    const int c = cells_in_dim(j);
    out[static_cast<std::size_t>(j)] = cell % c;
    cell /= c;
  }
  return out;
}

int StepCells::join(const std::vector<int>& per_dim) const {
  int cell = 0;
  for (int j = 0; j < dim(); ++j) cell = cell * cells_in_dim(j) + per_dim[static_cast<std::size_t>(j)];
  return cell;
}

std::vector<int> StepCells::axis_bins(int j, int cell_in_dim) const {
  const auto& ax = axes[static_cast<std::size_t>(j)];
  std::vector<int> out(ax.size());
  for (int a = static_cast<int>(ax.size()) - 1; a >= 0; --a) {
    out[static_cast<std::size_t>(a)] = cell_in_dim % ax[static_cast<std::size_t>(a)].bins;
    cell_in_dim /= ax[static_cast<std::size_t>(a)].bins;
  }
  return out;
}

Vector StepCells::midpoint(int j, int cell_in_dim) const {
  const auto& ax = axes[static_cast<std::size_t>(j)];
  const auto bins = axis_bins(j, cell_in_dim);
  Vector y(static_cast<Eigen::Index>(ax.size()));
  for (std::size_t a = 0; a < ax.size(); ++a) y[static_cast<Eigen::Index>(a)] = ax[a].midpoint(bins[a]);
  return y;
}

bool StepCells::contains(int j, int cell_in_dim, const Vector& y) const {
  const auto& ax = axes[static_cast<std::size_t>(j)];
  const auto bins = axis_bins(j, cell_in_dim);
  for (std::size_t a = 0; a < ax.size(); ++a) {
    const double lo = -ax[a].half_width + bins[a] * ax[a].width();
    const double v = y[static_cast<Eigen::Index>(a)];
    if (!(v >= lo && v < lo + ax[a].width())) return false;
  }
  return true;
}

std::vector<int> WaveletGrid::cells_per_dim() const {
  std::vector<int> out;
  for (int j = 0; j < dim(); ++j) out.push_back(steps.front().cells_in_dim(j));
  return out;
}

WaveletGrid build_grid(const LiftedPrior& prior, const std::vector<int>& bins,
                       double half_width_factor) {
  const int m = prior.order();
  const int d = prior.dim();
  const int axes = m - 1;
  require(half_width_factor > 0.0, ErrorCode::InvalidArgument, "half-width factor must be positive");
  require(static_cast<int>(bins.size()) == axes || static_cast<int>(bins.size()) == axes * d ||
              (axes == 0 && bins.size() <= 1),
          ErrorCode::InvalidArgument,
          "expected " + std::to_string(axes) + " bin counts per dimension, got " +
              std::to_string(bins.size()));
  for (int b : bins) require(b >= 1, ErrorCode::InvalidArgument, "bin counts must be >= 1");

  WaveletGrid grid;
  grid.order = m;
  std::vector<std::vector<Matrix>> marg(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) marg[static_cast<std::size_t>(j)] = chain_marginal_covariances(prior.dims[static_cast<std::size_t>(j)]);

  for (int k = 0; k <= prior.intervals(); ++k) {
    StepCells step;
    step.axes.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      const Matrix& cov = marg[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      double var = 0.0;
      for (int a = 1; a < m; ++a) var = std::max(var, cov(a, a));
      for (int a = 0; a < axes; ++a) {
        const int nb = static_cast<int>(bins.size()) == axes * d && d > 1
                           ? bins[static_cast<std::size_t>(j * axes + a)]
                           : bins[static_cast<std::size_t>(a)];
        if (var <= 0.0 && nb > 1)
          fail(ErrorCode::DegenerateVariance, "derivative variance is zero at step " + std::to_string(k));
        AxisCells ax;
        ax.bins = nb;
        ax.half_width = var > 0.0 ? half_width_factor * std::sqrt(var) : 0.5;
        step.axes[static_cast<std::size_t>(j)].push_back(ax);
      }
    }
    grid.steps.push_back(std::move(step));
  }
  return grid;
}

std::vector<IntervalPotential> interval_potentials(const LiftedPrior& prior) {
  const int m = prior.order();
  std::vector<IntervalPotential> out(static_cast<std::size_t>(prior.intervals()));
  for (int k = 0; k < prior.intervals(); ++k) {
    auto& pot = out[static_cast<std::size_t>(k)];
    for (const auto& chain : prior.dims) {
      double log_det = 0.0;
      pot.transition.push_back(chain.transition[static_cast<std::size_t>(k)]);
      pot.lambda_inv.push_back(regularized_inverse(chain.innovation[static_cast<std::size_t>(k)], log_det));
      pot.log_normalizer -= 0.5 * (m * kLog2Pi + log_det);
      if (k == 0) {
        pot.initial_inv.push_back(regularized_inverse(chain.initial, log_det));
        pot.log_normalizer -= 0.5 * (m * kLog2Pi + log_det);
      }
    }
  }
  return out;
}

double log_phi(const IntervalPotential& pot, int dim, const Vector& z_from, const Vector& z_to) {
  const auto j = static_cast<std::size_t>(dim);
  const Vector u = z_to - pot.transition[j] * z_from;
  double q = quad(pot.lambda_inv[j], u);
  if (!pot.initial_inv.empty()) q += quad(pot.initial_inv[j], z_from);
  return -0.5 * q;
}

double log_phi(const LiftedPrior& prior, int interval, const Vector& z_from, const Vector& z_to) {
  require(interval >= 0 && interval < prior.intervals(), ErrorCode::InvalidArgument, "interval out of range");
  const int m = prior.order();
  require(z_from.size() == m * prior.dim() && z_to.size() == m * prior.dim(),
          ErrorCode::InconsistentDimension, "state vectors must have m*d entries");
  const auto pots = interval_potentials(prior);
  const auto& pot = pots[static_cast<std::size_t>(interval)];
  double total = 0.0;
  for (int j = 0; j < prior.dim(); ++j)
    total += log_phi(pot, j, z_from.segment(j * m, m), z_to.segment(j * m, m));
  return total;
}

int GammaTensor::cells() const {
  int c = 1;
  for (const auto& f : factors) c *= f.cells;
  return c;
}

std::vector<int> GammaTensor::factor_cells() const {
  std::vector<int> out;
  for (const auto& f : factors) out.push_back(f.cells);
  return out;
}

std::vector<int> GammaTensor::split(int cell) const {
  std::vector<int> out(factors.size());
  for (int f = static_cast<int>(factors.size()) - 1; f >= 0; --f) {
    const int c = factors[static_cast<std::size_t>(f)].cells;
    out[static_cast<std::size_t>(f)] = cell % c;
    cell /= c;
  }
  return out;
}

std::vector<double> GammaFactor::dense() const {
  const std::size_t cc = static_cast<std::size_t>(cells) * cells;
  std::vector<double> out(static_cast<std::size_t>(n_from) * n_to * cc, kNegInf);
  for (int x = 0; x < n_from; ++x)
    for (int xp = 0; xp < n_to; ++xp)
      if (const double* b = block(x, xp)) std::copy(b, b + cc, out.begin() + static_cast<std::ptrdiff_t>(pair(x, xp) * cc));
  return out;
}

void set_gamma_factors(GammaTensor& gamma, std::vector<std::vector<double>> dense, const std::vector<int>& cells) {
  require(dense.size() == cells.size(), ErrorCode::InvalidArgument, "one cell count per factor");
  const std::size_t n_pairs = static_cast<std::size_t>(gamma.n_from) * gamma.n_to;
  std::vector<char> keep(n_pairs, 1);
  for (std::size_t f = 0; f < dense.size(); ++f) {
    const std::size_t cc = static_cast<std::size_t>(cells[f]) * cells[f];
    require(dense[f].size() == n_pairs * cc, ErrorCode::InconsistentDimension, "dense factor has the wrong size");
    for (std::size_t p = 0; p < n_pairs; ++p) {
      const double* b = dense[f].data() + p * cc;
      if (std::all_of(b, b + cc, [](double v) { return v == kNegInf; })) keep[p] = 0;
    }
  }
  gamma.factors.clear();
  for (std::size_t f = 0; f < dense.size(); ++f) {
    GammaFactor fac;
    fac.n_from = gamma.n_from;
    fac.n_to = gamma.n_to;
    fac.cells = cells[f];
    const std::size_t cc = static_cast<std::size_t>(fac.cells) * fac.cells;
    fac.slot.assign(n_pairs, -1);
    std::int64_t next = 0;
    for (std::size_t p = 0; p < n_pairs; ++p)
      if (keep[p]) fac.slot[p] = next++;
    fac.log_values.resize(static_cast<std::size_t>(next) * cc);
    for (std::size_t p = 0; p < n_pairs; ++p)
      if (keep[p])
        std::copy(dense[f].data() + p * cc, dense[f].data() + (p + 1) * cc,
                  fac.log_values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(fac.slot[p]) * cc));
    dense[f] = {};
    gamma.factors.push_back(std::move(fac));
  }
}

double GammaTensor::at(int x, int xp, int i, int j) const {
  if (factors.size() == 1) return factors.front().at(x, xp, i, j);
  double v = 0.0;
  for (int f = static_cast<int>(factors.size()) - 1; f >= 0; --f) {
    const auto& fac = factors[static_cast<std::size_t>(f)];
    v += fac.at(x, xp, i % fac.cells, j % fac.cells);
    i /= fac.cells;
    j /= fac.cells;
  }
  return v;
}

namespace {

// Unfloored per-dimension log-Gamma values of one interval.
std::vector<double> dimension_gamma(const IntervalPotential& pot, int j, const Matrix& from,
                                    const Matrix& to, const StepCells& cells_from,
                                    const StepCells& cells_to) {
  const int m = static_cast<int>(pot.transition.front().rows());
  const int n0 = static_cast<int>(from.rows());
  const int n1 = static_cast<int>(to.rows());
  const int c0 = cells_from.cells_in_dim(j);
  const int c1 = cells_to.cells_in_dim(j);
  const double log_vol = cells_from.log_volume_dim(j) + cells_to.log_volume_dim(j);
  const auto js = static_cast<std::size_t>(j);
  const Matrix& a = pot.transition[js];
  const Matrix& p = pot.lambda_inv[js];
  const bool first = !pot.initial_inv.empty();

  // Q(u) = |W u|^2 with W = sqrt(D) V^T from the eigendecomposition of the
  // precision, so every entry is a short sum of squares of differences.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
  const Matrix w = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::Index w0 = static_cast<Eigen::Index>(n0) * c0;
  const Eigen::Index w1 = static_cast<Eigen::Index>(n1) * c1;

  // transformed predicted next state and the initial quadratic for every (x, cell)
  Matrix pred(m, w0);
  std::vector<double> init(static_cast<std::size_t>(w0), 0.0);
  Vector z(m);
  for (int x = 0; x < n0; ++x)
    for (int c = 0; c < c0; ++c) {
      z[0] = from(x, j);
      if (m > 1) z.tail(m - 1) = cells_from.midpoint(j, c);
      pred.col(static_cast<Eigen::Index>(x) * c0 + c) = w * (a * z);
      if (first) init[static_cast<std::size_t>(x) * c0 + c] = quad(pot.initial_inv[js], z);
    }
  // row-major so each transformed coordinate is contiguous over (x', cell)
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> next(m, w1);
  for (int x = 0; x < n1; ++x)
    for (int c = 0; c < c1; ++c) {
      z[0] = to(x, j);
      if (m > 1) z.tail(m - 1) = cells_to.midpoint(j, c);
      next.col(static_cast<Eigen::Index>(x) * c1 + c) = w * z;
    }

  std::vector<double> out(static_cast<std::size_t>(n0) * n1 * c0 * c1);
  std::vector<double> q(static_cast<std::size_t>(c1));
  std::size_t idx = 0;
  for (int x = 0; x < n0; ++x)
    for (int xp = 0; xp < n1; ++xp)
      for (int c = 0; c < c0; ++c) {
        const auto col = static_cast<Eigen::Index>(x) * c0 + c;
        std::fill(q.begin(), q.end(), 0.0);
        for (int r = 0; r < m; ++r) {
          const double* nr = next.data() + r * w1 + static_cast<Eigen::Index>(xp) * c1;
          const double pr = pred(r, col);
          for (int cp = 0; cp < c1; ++cp) {
            const double diff = nr[cp] - pr;
            q[static_cast<std::size_t>(cp)] += diff * diff;
          }
        }
        const double base = log_vol - 0.5 * init[static_cast<std::size_t>(col)];
        for (int cp = 0; cp < c1; ++cp) out[idx++] = base - 0.5 * q[static_cast<std::size_t>(cp)];
      }
  return out;
}

double floored(double v) { return v < kLogGammaFloor ? kNegInf : v; }

}  // namespace

std::vector<GammaTensor> precompute_gamma(const LiftedPrior& prior, const WaveletGrid& grid,
                                          const SnapshotSet& snapshots, GammaLayout layout) {
  require(snapshots.steps() == prior.grid.size() && static_cast<int>(grid.steps.size()) == prior.grid.size(),
          ErrorCode::InvalidArgument, "prior, grid and snapshots must share the time grid");
  require(snapshots.dim() == prior.dim(), ErrorCode::InconsistentDimension,
          "snapshot dimension differs from the prior");
  const auto pots = interval_potentials(prior);
  const int d = prior.dim();
  std::vector<GammaTensor> out;
  for (int k = 0; k < prior.intervals(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const StepCells& g0 = grid.steps[ks];
    const StepCells& g1 = grid.steps[ks + 1];
    GammaTensor gamma;
    gamma.n_from = snapshots.size(k);
    gamma.n_to = snapshots.size(k + 1);
    gamma.log_volume_from = g0.log_volume();
    gamma.log_volume_to = g1.log_volume();
    gamma.log_normalizer = pots[ks].log_normalizer;

    std::vector<std::vector<double>> raw;
    for (int j = 0; j < d; ++j)
      raw.push_back(dimension_gamma(pots[ks], j, snapshots.supports[ks], snapshots.supports[ks + 1], g0, g1));

    if (layout == GammaLayout::Factorized || d == 1) {
      std::vector<int> cells;
      for (int j = 0; j < d; ++j) {
        cells.push_back(g0.cells_in_dim(j));
        require(cells.back() == g1.cells_in_dim(j), ErrorCode::InvalidArgument, "cell counts differ between steps");
        for (double& v : raw[static_cast<std::size_t>(j)]) v = floored(v);
      }
      set_gamma_factors(gamma, std::move(raw), cells);
    } else {
      const int mc = g0.cells();
      const std::size_t n_pairs = static_cast<std::size_t>(gamma.n_from) * gamma.n_to;
      std::vector<double> dense(n_pairs * mc * mc, 0.0);
      for (int x = 0; x < gamma.n_from; ++x)
        for (int xp = 0; xp < gamma.n_to; ++xp) {
          const std::size_t base = (static_cast<std::size_t>(x) * gamma.n_to + xp) * mc * mc;
          for (int i = 0; i < mc; ++i) {
            const auto ci = g0.split(i);
            for (int jj = 0; jj < mc; ++jj) {
              const auto cj = g1.split(jj);
              double v = 0.0;
              for (int j = 0; j < d; ++j) {
                const int cd = g0.cells_in_dim(j);
                const std::size_t off =
                    ((static_cast<std::size_t>(x) * gamma.n_to + xp) * cd + ci[static_cast<std::size_t>(j)]) * cd +
                    cj[static_cast<std::size_t>(j)];
                v += raw[static_cast<std::size_t>(j)][off];
              }
              dense[base + static_cast<std::size_t>(i) * mc + jj] = floored(v);
            }
          }
        }
      std::vector<std::vector<double>> one;
      one.push_back(std::move(dense));
      set_gamma_factors(gamma, std::move(one), {mc});
    }
    out.push_back(std::move(gamma));
  }
  return out;
}

}  // namespace ssb
