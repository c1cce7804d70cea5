#include "ssb/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "ssb/error.hpp"
#include "ssb/logsumexp.hpp"

namespace ssb {

namespace {

void normalize(Vector& lp) {
  const double z = log_sum_exp(std::span<const double>(lp.data(), static_cast<std::size_t>(lp.size())));
  require(z != kNegInf, ErrorCode::ZeroMarginalMass, "belief row has no mass");
  lp.array() -= z;
}

int draw(const Vector& lp, std::mt19937_64& rng) {
  const double hi = lp.maxCoeff();
  std::vector<double> w(static_cast<std::size_t>(lp.size()));
  for (Eigen::Index i = 0; i < lp.size(); ++i) w[static_cast<std::size_t>(i)] = std::exp(lp[i] - hi);
  std::discrete_distribution<int> dist(w.begin(), w.end());
  return dist(rng);
}

int first_argmax(const Vector& lp) {
  int best = 0;
  for (Eigen::Index i = 1; i < lp.size(); ++i)
    if (lp[i] > lp[best]) best = static_cast<int>(i);
  return best;
}

Vector cell_midpoint(const WaveletGrid& grid, int k, int cell) {
  const StepCells& step = grid.steps[static_cast<std::size_t>(k)];
  const int axes = grid.order - 1;
  Vector y(axes * step.dim());
  if (axes == 0) return y;
  const auto per_dim = step.split(cell);
  for (int j = 0; j < step.dim(); ++j) y.segment(j * axes, axes) = step.midpoint(j, per_dim[static_cast<std::size_t>(j)]);
  return y;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<BeliefPair> pairwise_beliefs(const MessageState& state, const std::vector<GammaTensor>& gammas,
                                         std::size_t cap) {
  require(static_cast<int>(gammas.size()) == state.steps() - 1, ErrorCode::InconsistentDimension,
          "Gamma list and messages disagree on K");
  std::vector<BeliefPair> out;
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    const GammaTensor& g = gammas[k];
    BeliefPair b;
    b.n_from = g.n_from;
    b.n_to = g.n_to;
    b.cells = g.cells();
    const std::size_t total = static_cast<std::size_t>(b.n_from) * b.cells * b.n_to * b.cells;
    require(total <= cap, ErrorCode::SizeCapExceeded, "belief tensor exceeds the size cap");
    b.log_p.resize(total);
    std::size_t p = 0;
    for (int x = 0; x < b.n_from; ++x)
      for (int i = 0; i < b.cells; ++i) {
        const double head = state.right[k](x, i) + state.log_beta[k][x];
        for (int xp = 0; xp < b.n_to; ++xp)
          for (int j = 0; j < b.cells; ++j)
            b.log_p[p++] = head + g.at(x, xp, i, j) + state.log_beta[k + 1][xp] + state.left[k + 1](xp, j);
      }
    const double z = log_sum_exp(b.log_p);
    require(z != kNegInf, ErrorCode::ZeroMarginalMass, "belief has no mass");
    for (double& v : b.log_p) v -= z;
    out.push_back(std::move(b));
  }
  return out;
}

PosteriorChain::PosteriorChain(const MessageState& state, const std::vector<GammaTensor>& gammas)
    : state_(&state), gammas_(&gammas) {
  require(static_cast<int>(gammas.size()) == state.steps() - 1, ErrorCode::InconsistentDimension,
          "Gamma list and messages disagree on K");
}

Vector PosteriorChain::start_log_probs() const {
  const int n = size(0);
  const int m = cells();
  Vector lp(static_cast<Eigen::Index>(n) * m);
  for (int x = 0; x < n; ++x)
    for (int i = 0; i < m; ++i)
      lp[static_cast<Eigen::Index>(x) * m + i] = state_->log_beta[0][x] + state_->left[0](x, i) + state_->right[0](x, i);
  normalize(lp);
  return lp;
}

Vector PosteriorChain::cell_log_probs(int k, int x) const {
  const auto ks = static_cast<std::size_t>(k);
  Vector lp = (state_->left[ks].row(x) + state_->right[ks].row(x)).transpose();
  normalize(lp);
  return lp;
}

bool PosteriorChain::transition_block(int k, int x, int i, int xp, Vector& out) const {
  const auto ks = static_cast<std::size_t>(k);
  const GammaTensor& g = (*gammas_)[ks];
  const int m = cells();
  out.resize(m);
  if (!g.factors.front().stored(x, xp)) {
    out.setConstant(kNegInf);
    return false;
  }
  // Gamma(x, xp, i, .) as a Kronecker sum of factor rows
  const auto ci = g.split(i);
  int len = 1;
  out[0] = 0.0;
  for (std::size_t f = 0; f < g.factors.size(); ++f) {
    const GammaFactor& fac = g.factors[f];
    const double* r = fac.block(x, xp) + static_cast<std::size_t>(ci[f]) * fac.cells;
    for (int p = len - 1; p >= 0; --p)
      for (int q = fac.cells - 1; q >= 0; --q) out[p * fac.cells + q] = out[p] + r[q];
    len *= fac.cells;
  }
  out.array() += state_->log_beta[ks + 1][xp];
  out += state_->left[ks + 1].row(xp).transpose();
  return true;
}

Vector PosteriorChain::transition_log_probs(int k, int x, int i) const {
  const int n1 = size(k + 1);
  const int m = cells();
  Vector lp(static_cast<Eigen::Index>(n1) * m);
  Vector row;
  for (int xp = 0; xp < n1; ++xp) {
    transition_block(k, x, i, xp, row);
    lp.segment(static_cast<Eigen::Index>(xp) * m, m) = row;
  }
  normalize(lp);
  return lp;
}

namespace {

// Draws (x', j) from the transition in two stages, x' from its block masses
// and then j within the block; returns the flat x'-major index.
int draw_transition(const PosteriorChain& chain, int k, int x, int i, std::mt19937_64& rng) {
  const int n1 = chain.size(k + 1);
  std::vector<Vector> rows(static_cast<std::size_t>(n1));
  Vector mass(n1);
  for (int xp = 0; xp < n1; ++xp) {
    auto& row = rows[static_cast<std::size_t>(xp)];
    chain.transition_block(k, x, i, xp, row);
    mass[xp] = log_sum_exp(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  require(mass.maxCoeff() != kNegInf, ErrorCode::ZeroMarginalMass, "belief row has no mass");
  const int xp = draw(mass, rng);
  return xp * chain.cells() + draw(rows[static_cast<std::size_t>(xp)], rng);
}

int argmax_transition(const PosteriorChain& chain, int k, int x, int i) {
  const int n1 = chain.size(k + 1);
  int best = -1;
  double best_v = kNegInf;
  Vector row;
  for (int xp = 0; xp < n1; ++xp) {
    if (!chain.transition_block(k, x, i, xp, row)) continue;
    Eigen::Index j = 0;
    const double v = row.maxCoeff(&j);
    if (best < 0 || v > best_v) {
      best = xp * chain.cells() + static_cast<int>(j);
      best_v = v;
    }
  }
  require(best >= 0 && best_v != kNegInf, ErrorCode::ZeroMarginalMass, "belief row has no mass");
  return best;
}

}  // namespace

std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index));
}

namespace {

void check_start(const PosteriorChain& chain, std::optional<int> start) {
  if (!start) return;
  if (*start < 0 || *start >= chain.size(0))
    fail(ErrorCode::StartNotInSupport, "start index " + std::to_string(*start) + " is not a support point");
  const Vector lp = chain.start_log_probs();
  double best = kNegInf;
  for (int i = 0; i < chain.cells(); ++i) best = std::max(best, lp[static_cast<Eigen::Index>(*start) * chain.cells() + i]);
  if (best == kNegInf)
    fail(ErrorCode::StartNotInSupport, "start index " + std::to_string(*start) + " has zero posterior mass");
}

}  // namespace

std::vector<Trajectory> sample_trajectories(const PosteriorChain& chain, const WaveletGrid& grid, int n_samples,
                                            std::optional<int> start, std::uint64_t seed) {
  require(n_samples >= 0, ErrorCode::InvalidArgument, "n_samples must be >= 0");
  check_start(chain, start);
  const int m = chain.cells();
  const Vector start_lp = start ? Vector() : chain.start_log_probs();
  const Vector start_cells = start ? chain.cell_log_probs(0, *start) : Vector();
  std::vector<Trajectory> out(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    std::mt19937_64 rng(trajectory_seed(seed, static_cast<std::uint64_t>(s)));
    Trajectory& t = out[static_cast<std::size_t>(s)];
    int x = 0, i = 0;
    if (start) {
      x = *start;
      i = draw(start_cells, rng);
    } else {
      const int flat = draw(start_lp, rng);
      x = flat / m;
      i = flat % m;
    }
    t.x.push_back(x);
    t.cell.push_back(i);
    for (int k = 0; k + 1 < chain.steps(); ++k) {
      const int flat = draw_transition(chain, k, x, i, rng);
      x = flat / m;
      i = flat % m;
      t.x.push_back(x);
      t.cell.push_back(i);
    }
    for (int k = 0; k < chain.steps(); ++k) t.y.push_back(cell_midpoint(grid, k, t.cell[static_cast<std::size_t>(k)]));
  }
  return out;
}

Trajectory argmax_trajectory(const PosteriorChain& chain, const WaveletGrid& grid, std::optional<int> start) {
  check_start(chain, start);
  const int m = chain.cells();
  Trajectory t;
  int x = 0, i = 0;
  if (start) {
    x = *start;
    i = first_argmax(chain.cell_log_probs(0, x));
  } else {
    const int flat = first_argmax(chain.start_log_probs());
    x = flat / m;
    i = flat % m;
  }
  t.x.push_back(x);
  t.cell.push_back(i);
  for (int k = 0; k + 1 < chain.steps(); ++k) {
    const int flat = argmax_transition(chain, k, x, i);
    x = flat / m;
    i = flat % m;
    t.x.push_back(x);
    t.cell.push_back(i);
  }
  for (int k = 0; k < chain.steps(); ++k) t.y.push_back(cell_midpoint(grid, k, t.cell[static_cast<std::size_t>(k)]));
  return t;
}

DerivativeConditional derivative_conditional(const DimensionChain& chain, int k, int other, double x_k,
                                             double x_other) {
  const auto marg = chain_marginal_covariances(chain);
  const int steps = static_cast<int>(marg.size());
  require(k >= 0 && k < steps && other >= 0 && other < steps && std::abs(other - k) == 1,
          ErrorCode::InvalidArgument, "conditioning step must be adjacent");
  const int m = static_cast<int>(chain.initial.rows());
  const Matrix& sk = marg[static_cast<std::size_t>(k)];
  Vector cross(m);  // Cov(eta_k, position at `other`)
  if (other == k + 1) {
    cross = sk * chain.transition[static_cast<std::size_t>(k)].row(0).transpose();
  } else {
    cross = chain.transition[static_cast<std::size_t>(other)] * marg[static_cast<std::size_t>(other)].col(0);
  }
  const double v_other = marg[static_cast<std::size_t>(other)](0, 0);

  DerivativeConditional out;
  if (m == 1) return out;
  Eigen::Matrix2d soo;
  soo << sk(0, 0), cross[0], cross[0], v_other;
  Matrix sdo(m - 1, 2);
  sdo.col(0) = sk.col(0).tail(m - 1);
  sdo.col(1) = cross.tail(m - 1);
  const Eigen::Matrix2d inv = soo.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::Vector2d obs(x_k, x_other);
  out.mean = sdo * (inv * obs);
  out.cov = sk.bottomRightCorner(m - 1, m - 1) - sdo * inv * sdo.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

RefineResult refine_velocity(const LiftedPrior& prior, const WaveletGrid& grid, int k, const Vector& x_k,
                             const Vector& x_adjacent, int cell, std::uint64_t seed) {
  const int m = prior.order();
  const int d = prior.dim();
  const int axes = m - 1;
  require(k >= 0 && k <= prior.intervals(), ErrorCode::InvalidArgument, "step out of range");
  require(x_k.size() == d && x_adjacent.size() == d, ErrorCode::InconsistentDimension, "position size mismatch");
  const int other = k < prior.intervals() ? k + 1 : k - 1;
  const StepCells& step = grid.steps[static_cast<std::size_t>(k)];
  const auto per_dim = step.split(cell);

  RefineResult res;
  res.y.resize(axes * d);
  if (axes == 0) return res;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < d; ++j) {
    const int c = per_dim[static_cast<std::size_t>(j)];
    const auto cond = derivative_conditional(prior.dims[static_cast<std::size_t>(j)], k, other, x_k[j], x_adjacent[j]);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cond.cov);
    const Vector ev = eig.eigenvalues().cwiseMax(0.0);
    const double scale = std::max(1.0, cond.cov.diagonal().cwiseAbs().maxCoeff());
    Vector y;
    bool accepted = false;
    if (ev.maxCoeff() <= 1e-14 * scale) {
      if (step.contains(j, c, cond.mean)) {
        y = cond.mean;
        accepted = true;
      }
    } else {
      const Matrix root = eig.eigenvectors() * ev.cwiseSqrt().asDiagonal();
      Vector z(axes);
      for (int attempt = 0; attempt < kMaxRejections && !accepted; ++attempt) {
        for (int a = 0; a < axes; ++a) z[a] = normal(rng);
        y = cond.mean + root * z;
        accepted = step.contains(j, c, y);
      }
    }
    if (!accepted) {
      y = step.midpoint(j, c);
      res.fallback = true;
    }
    res.y.segment(j * axes, axes) = y;
  }
  return res;
}

}  // namespace ssb
