#include "ssb/gap_prior.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "ssb/error.hpp"

namespace ssb {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

double matern_rate(int order, double lengthscale) {
  return std::sqrt(2.0 * order - 1.0) / lengthscale;
}

// Square-root factor S with S S^T = cov, valid for PSD (possibly singular) input.
Matrix psd_sqrt(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

KernelSpec KernelSpec::matern(double nu, double lengthscale, std::vector<double> sigma) {
  KernelSpec s;
  s.family = KernelFamily::Matern;
  const double m = nu + 0.5;
  if (std::abs(m - std::round(m)) > 1e-12 || m < 1.0)
    fail(ErrorCode::UnsupportedOrder, "Matern nu must be a half-integer >= 1/2");
  s.order = static_cast<int>(std::lround(m));
  s.lengthscale = lengthscale;
  s.sigma = std::move(sigma);
  s.validate();
  return s;
}

KernelSpec KernelSpec::integrated_bm(int order, std::vector<double> sigma) {
  KernelSpec s;
  s.family = KernelFamily::IntegratedBM;
  s.order = order;
  s.sigma = std::move(sigma);
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (order < 1 || order > kMaxOrder)
    fail(ErrorCode::UnsupportedOrder, "order " + std::to_string(order) + " not in 1..4");
  require(!sigma.empty(), ErrorCode::InvalidArgument, "sigma must have one entry per dimension");
  for (double s : sigma)
    require(s > 0.0 && std::isfinite(s), ErrorCode::InvalidArgument, "sigma must be positive");
  if (family == KernelFamily::Matern)
    require(lengthscale > 0.0 && std::isfinite(lengthscale), ErrorCode::InvalidArgument,
            "lengthscale must be positive");
  if (initial_covariance) {
    require(initial_covariance->rows() == order && initial_covariance->cols() == order,
            ErrorCode::InvalidArgument, "initial covariance must be m x m");
  }
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  require(times_.size() >= 2, ErrorCode::InvalidArgument, "time grid needs K >= 1");
  for (std::size_t k = 1; k < times_.size(); ++k)
    require(times_[k] > times_[k - 1], ErrorCode::InvalidArgument,
            "time grid must be strictly increasing");
}

TimeGrid TimeGrid::uniform(int intervals, double horizon) {
  require(intervals >= 1 && horizon > 0.0, ErrorCode::InvalidArgument, "bad uniform grid");
  std::vector<double> t(static_cast<std::size_t>(intervals) + 1);
  for (int k = 0; k <= intervals; ++k) t[static_cast<std::size_t>(k)] = horizon * k / intervals;
  return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::without(int k) const {
  require(k >= 0 && k < size(), ErrorCode::InvalidArgument, "step out of range");
  std::vector<double> t = times_;
  t.erase(t.begin() + k);
  return TimeGrid(std::move(t));
}

Matrix companion_matrix(const KernelSpec& spec) {
  spec.validate();
  const int m = spec.order;
  Matrix f = Matrix::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) f(i, i + 1) = 1.0;
  if (spec.family == KernelFamily::Matern) {
    // characteristic polynomial (s + lambda)^m
    const double lam = matern_rate(m, spec.lengthscale);
    for (int j = 0; j < m; ++j) f(m - 1, j) = -binomial(m, j) * std::pow(lam, m - j);
  }
  return f;
}

Matrix stationary_covariance(const Matrix& drift, double diffusion_intensity) {
  const int m = static_cast<int>(drift.rows());
  require(drift.cols() == m && m >= 1, ErrorCode::InvalidArgument, "drift must be square");
  require(diffusion_intensity > 0.0, ErrorCode::InvalidArgument, "intensity must be positive");
  Eigen::EigenSolver<Matrix> es(drift, false);
  for (int i = 0; i < m; ++i)
    if (!(es.eigenvalues()[i].real() < 0.0))
      fail(ErrorCode::NotHurwitz, "drift has an eigenvalue with nonnegative real part");

  const Matrix id = Matrix::Identity(m, m);
  Matrix kron = Matrix::Zero(m * m, m * m);
  // vec(F P) = (I (x) F) vec(P), vec(P F^T) = (F (x) I) vec(P), column-major vec
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      kron.block(a * m, b * m, m, m) += id(a, b) * drift;
      kron.block(a * m, b * m, m, m) += drift(a, b) * id;
    }
  Vector rhs = Vector::Zero(m * m);
  rhs((m - 1) * m + (m - 1)) = -diffusion_intensity;
  Vector sol = kron.fullPivLu().solve(rhs);
  Matrix p = Eigen::Map<Matrix>(sol.data(), m, m);
  p = 0.5 * (p + p.transpose());

  Matrix q = Matrix::Zero(m, m);
  q(m - 1, m - 1) = diffusion_intensity;
  const double resid = (drift * p + p * drift.transpose() + q).cwiseAbs().maxCoeff();
  require(resid < 1e-10 * std::max(1.0, p.cwiseAbs().maxCoeff()), ErrorCode::NotHurwitz,
          "Lyapunov solve did not converge");
  return p;
}

Matrix matern_stationary_covariance(const KernelSpec& spec, double variance) {
  require(spec.stationary(), ErrorCode::NotHurwitz, "IntegratedBM has no stationary covariance");
  const Matrix p = stationary_covariance(companion_matrix(spec), 1.0);
  return p * (variance / p(0, 0));
}

Matrix integrated_bm_innovation(int order, double dt, double intensity) {
  // Lambda(i,j) = q * int_0^dt s^a s^b / (a! b!) ds, a = m-1-i, b = m-1-j
  Matrix out(order, order);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j) {
      const int a = order - 1 - i;
      const int b = order - 1 - j;
      out(i, j) = intensity * std::pow(dt, a + b + 1) / ((a + b + 1) * factorial(a) * factorial(b));
    }
  return out;
}

Matrix repair_psd(const Matrix& m, double tol) {
  Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  Vector ev = es.eigenvalues();
  bool clamped = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tol * scale) fail(ErrorCode::NotPsd, "matrix has a negative eigenvalue");
    if (ev[i] < 0.0) {
      ev[i] = 0.0;
      clamped = true;
    }
  }
  if (!clamped) return sym;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

LiftedPrior build_lifted_prior(const KernelSpec& spec, const TimeGrid& grid) {
  spec.validate();
  LiftedPrior prior;
  prior.spec = spec;
  prior.grid = grid;
  const int m = spec.order;
  const Matrix drift = companion_matrix(spec);

  Matrix unit_initial;
  if (spec.stationary()) {
    unit_initial = matern_stationary_covariance(spec, 1.0);
  } else {
    unit_initial = spec.initial_covariance.value_or(Matrix::Identity(m, m));
    unit_initial = repair_psd(unit_initial);
  }

  std::vector<Matrix> transition;
  std::vector<Matrix> unit_innovation;
  for (int k = 0; k < grid.intervals(); ++k) {
    const double dt = grid.gap(k);
    Matrix a = (drift * dt).exp();
    Matrix lam;
    if (spec.stationary()) {
      lam = repair_psd(unit_initial - a * unit_initial * a.transpose());
    } else {
      lam = integrated_bm_innovation(m, dt, 1.0);
    }
    transition.push_back(std::move(a));
    unit_innovation.push_back(std::move(lam));
  }

  for (double s : spec.sigma) {
    DimensionChain chain;
    chain.sigma = s;
    const double var = s * s;
    chain.initial = unit_initial * var;
    chain.transition = transition;
    chain.innovation.reserve(unit_innovation.size());
    for (const Matrix& l : unit_innovation) chain.innovation.push_back(l * var);
    prior.dims.push_back(std::move(chain));
  }
  return prior;
}

std::vector<Matrix> chain_marginal_covariances(const DimensionChain& chain) {
  std::vector<Matrix> out;
  out.push_back(chain.initial);
  for (std::size_t k = 0; k < chain.transition.size(); ++k) {
    const Matrix& a = chain.transition[k];
    out.push_back(a * out.back() * a.transpose() + chain.innovation[k]);
  }
  return out;
}

Matrix lifted_joint_covariance(const DimensionChain& chain) {
  const auto marg = chain_marginal_covariances(chain);
  const int m = static_cast<int>(chain.initial.rows());
  const int steps = static_cast<int>(marg.size());
  Matrix full = Matrix::Zero(m * steps, m * steps);
  for (int a = 0; a < steps; ++a) {
    full.block(a * m, a * m, m, m) = marg[static_cast<std::size_t>(a)];
    Matrix cross = marg[static_cast<std::size_t>(a)];  // Cov(eta_b, eta_a) for b = a
    for (int b = a + 1; b < steps; ++b) {
      cross = chain.transition[static_cast<std::size_t>(b - 1)] * cross;
      full.block(b * m, a * m, m, m) = cross;
      full.block(a * m, b * m, m, m) = cross.transpose();
    }
  }
  return full;
}

double matern_covariance(int order, double lengthscale, double variance, double tau) {
  require(order >= 1 && order <= kMaxOrder, ErrorCode::UnsupportedOrder, "unsupported order");
  const int p = order - 1;
  const double x = matern_rate(order, lengthscale) * std::abs(tau);
  double poly = 0.0;
  for (int i = 0; i <= p; ++i)
    poly += factorial(p + i) / (factorial(i) * factorial(p - i)) * std::pow(2.0 * x, p - i);
  return variance * std::exp(-x) * factorial(p) / factorial(2 * p) * poly;
}

Matrix joint_position_covariance(const KernelSpec& spec, const TimeGrid& grid, int dim) {
  spec.validate();
  require(spec.stationary(), ErrorCode::NotHurwitz, "Gram matrix needs a stationary kernel");
  require(dim >= 0 && dim < spec.dim(), ErrorCode::InvalidArgument, "dimension out of range");
  const double var = spec.sigma[static_cast<std::size_t>(dim)] *
                     spec.sigma[static_cast<std::size_t>(dim)];
  const int n = grid.size();
  Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g(i, j) = matern_covariance(spec.order, spec.lengthscale, var, grid[i] - grid[j]);
  return g;
}

std::vector<LiftedPath> sample_paths(const LiftedPrior& prior, int n_paths, std::uint64_t seed) {
  require(n_paths >= 0, ErrorCode::InvalidArgument, "n_paths must be >= 0");
  const int m = prior.order();
  const int d = prior.dim();
  const int steps = prior.grid.size();

  std::vector<Matrix> init_factor;
  std::vector<std::vector<Matrix>> innov_factor(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const auto& chain = prior.dims[static_cast<std::size_t>(j)];
    init_factor.push_back(psd_sqrt(chain.initial));
    for (const Matrix& l : chain.innovation) innov_factor[static_cast<std::size_t>(j)].push_back(psd_sqrt(l));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    Vector z(m);
    for (int i = 0; i < m; ++i) z[i] = normal(rng);
    return z;
  };

  std::vector<LiftedPath> paths(static_cast<std::size_t>(n_paths));
  for (auto& path : paths) {
    path.states.assign(static_cast<std::size_t>(steps), Matrix::Zero(m, d));
    for (int j = 0; j < d; ++j) path.states[0].col(j) = init_factor[static_cast<std::size_t>(j)] * draw();
    for (int k = 1; k < steps; ++k) {
      for (int j = 0; j < d; ++j) {
        const auto& chain = prior.dims[static_cast<std::size_t>(j)];
        const auto kk = static_cast<std::size_t>(k - 1);
        path.states[static_cast<std::size_t>(k)].col(j) =
            chain.transition[kk] * path.states[kk].col(j) +
            innov_factor[static_cast<std::size_t>(j)][kk] * draw();
      }
    }
  }
  return paths;
}

}  // namespace ssb
