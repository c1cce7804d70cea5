#include "ssb/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "ssb/error.hpp"
#include "ssb/logsumexp.hpp"

namespace ssb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::size_t checked_size(const std::vector<int>& shape, std::size_t cap) {
  std::size_t total = 1;
  for (int n : shape) {
    require(n >= 1, ErrorCode::InvalidArgument, "empty support");
    if (total > cap / static_cast<std::size_t>(n))
      fail(ErrorCode::SizeCapExceeded, "coupling tensor exceeds " + std::to_string(cap) + " entries");
    total *= static_cast<std::size_t>(n);
  }
  return total;
}

std::vector<int> support_shape(const SnapshotSet& s) {
  std::vector<int> shape;
  for (int k = 0; k < s.steps(); ++k) shape.push_back(s.size(k));
  return shape;
}

// Odometer over a row-major multi-index.
bool advance(std::vector<int>& idx, const std::vector<int>& shape) {
  for (int k = static_cast<int>(idx.size()) - 1; k >= 0; --k) {
    const auto ks = static_cast<std::size_t>(k);
    if (++idx[ks] < shape[ks]) return true;
    idx[ks] = 0;
  }
  return false;
}

}  // namespace

std::vector<int> CostTensor::unravel(std::size_t flat) const {
  std::vector<int> idx(shape.size());
  for (int k = static_cast<int>(shape.size()) - 1; k >= 0; --k) {
    const auto ks = static_cast<std::size_t>(k);
    idx[ks] = static_cast<int>(flat % static_cast<std::size_t>(shape[ks]));
    flat /= static_cast<std::size_t>(shape[ks]);
  }
  return idx;
}

double CostTensor::c_max() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : log_density) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi >= lo ? hi - lo : 0.0;
}

CostTensor exact_cost_tensor(const KernelSpec& spec, const TimeGrid& grid, const SnapshotSet& snapshots,
                             std::size_t cap) {
  require(snapshots.steps() == grid.size(), ErrorCode::InvalidArgument, "grid and snapshots disagree");
  require(snapshots.dim() == spec.dim(), ErrorCode::InconsistentDimension, "dimension mismatch");
  CostTensor cost;
  cost.source = CostSource::ExactGaussian;
  cost.shape = support_shape(snapshots);
  const std::size_t total = checked_size(cost.shape, cap);

  const int d = spec.dim();
  const int steps = grid.size();
  std::vector<Eigen::LLT<Matrix>> chol;
  std::vector<double> log_norm;
  for (int j = 0; j < d; ++j) {
    Matrix g = joint_position_covariance(spec, grid, j);
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) {
      const double s = spec.sigma[static_cast<std::size_t>(j)];
      g.diagonal().array() += 1e-10 * s * s;
      llt.compute(g);
      require(llt.info() == Eigen::Success, ErrorCode::SingularGram, "position Gram matrix is singular");
    }
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    log_norm.push_back(-0.5 * (steps * kLog2Pi + log_det));
    chol.push_back(std::move(llt));
  }

  cost.log_density.resize(total);
  std::vector<int> idx(cost.shape.size(), 0);
  Vector w(steps);
  for (std::size_t flat = 0; flat < total; ++flat) {
    double v = 0.0;
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < steps; ++k)
        w[k] = snapshots.supports[static_cast<std::size_t>(k)](idx[static_cast<std::size_t>(k)], j);
      const Vector z = chol[static_cast<std::size_t>(j)].matrixL().solve(w);
      v += log_norm[static_cast<std::size_t>(j)] - 0.5 * z.squaredNorm();
    }
    cost.log_density[flat] = v;
    advance(idx, cost.shape);
  }
  return cost;
}

CostTensor gamma_contracted_cost_tensor(const std::vector<GammaTensor>& gammas, GammaCostMode mode,
                                        std::size_t cap, bool right_to_left) {
  require(!gammas.empty(), ErrorCode::InvalidArgument, "need at least one interval");
  CostTensor cost;
  cost.source = CostSource::GammaContracted;
  cost.shape.push_back(gammas.front().n_from);
  for (const auto& g : gammas) cost.shape.push_back(g.n_to);
  const std::size_t total = checked_size(cost.shape, cap);
  const int steps = static_cast<int>(cost.shape.size());
  const int m = gammas.front().cells();

  double offset = 0.0;
  if (mode == GammaCostMode::Density) {
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      offset += gammas[k].log_normalizer;
      if (k > 0) offset -= gammas[k].log_volume_from;
    }
  }

  cost.log_density.resize(total);
  // vecs[depth] holds the partial contraction after fixing `depth + 1` support points
  std::vector<std::vector<double>> vecs(static_cast<std::size_t>(steps), std::vector<double>(static_cast<std::size_t>(m)));
  std::vector<int> idx(static_cast<std::size_t>(steps), 0);
  std::vector<double> terms(static_cast<std::size_t>(m));

  auto step_of = [&](int depth) { return right_to_left ? steps - 1 - depth : depth; };
  auto extend = [&](int depth) {
    // fill vecs[depth] from vecs[depth - 1]
    auto& out = vecs[static_cast<std::size_t>(depth)];
    const auto& in = vecs[static_cast<std::size_t>(depth - 1)];
    const int k = step_of(depth);
    for (int c = 0; c < m; ++c) {
      for (int p = 0; p < m; ++p) {
        const double g = right_to_left
                             ? gammas[static_cast<std::size_t>(k)].at(idx[static_cast<std::size_t>(k)],
                                                                     idx[static_cast<std::size_t>(k + 1)], c, p)
                             : gammas[static_cast<std::size_t>(k - 1)].at(idx[static_cast<std::size_t>(k - 1)],
                                                                        idx[static_cast<std::size_t>(k)], p, c);
        terms[static_cast<std::size_t>(p)] = in[static_cast<std::size_t>(p)] + g;
      }
      out[static_cast<std::size_t>(c)] = log_sum_exp(terms);
    }
  };

  std::fill(vecs[0].begin(), vecs[0].end(), 0.0);
  for (int depth = 1; depth < steps; ++depth) extend(depth);
  for (std::size_t done = 0; done < total; ++done) {
    // flat index in x_0-slowest order
    std::size_t flat = 0;
    for (int k = 0; k < steps; ++k) flat = flat * static_cast<std::size_t>(cost.shape[static_cast<std::size_t>(k)]) + idx[static_cast<std::size_t>(k)];
    cost.log_density[flat] = log_sum_exp(vecs[static_cast<std::size_t>(steps - 1)]) + offset;

    // advance the index of the deepest step first, then recompute suffix
    int depth = steps - 1;
    while (depth >= 0) {
      const auto ks = static_cast<std::size_t>(step_of(depth));
      if (++idx[ks] < cost.shape[ks]) break;
      idx[ks] = 0;
      --depth;
    }
    if (depth < 0) break;
    for (int dd = std::max(depth, 1); dd < steps; ++dd) extend(dd);
  }
  return cost;
}

double refine_error(const LiftedPrior& prior, const WaveletGrid& coarse, const WaveletGrid& fine,
                    const SnapshotSet& snapshots) {
  const auto gc = precompute_gamma(prior, coarse, snapshots);
  const auto gf = precompute_gamma(prior, fine, snapshots);
  const auto cc = gamma_contracted_cost_tensor(gc, GammaCostMode::Density);
  const auto cf = gamma_contracted_cost_tensor(gf, GammaCostMode::Density);
  double worst = 0.0;
  for (std::size_t i = 0; i < cc.size(); ++i) {
    const double a = cc.log_density[i];
    const double b = cf.log_density[i];
    if (a == b) continue;
    worst = std::max(worst, std::abs(a - b));
  }
  return worst;
}

namespace {

// log S_k(x) = lse over entries with x_k = x of log_density + sum_{j != k} log v_j
Vector marginalize(const CostTensor& cost, const std::vector<Vector>& log_v, int k) {
  std::vector<LogSumExp> acc(static_cast<std::size_t>(cost.shape[static_cast<std::size_t>(k)]));
  std::vector<int> idx(cost.shape.size(), 0);
  for (std::size_t flat = 0; flat < cost.size(); ++flat) {
    double v = cost.log_density[flat];
    for (std::size_t j = 0; j < idx.size(); ++j)
      if (static_cast<int>(j) != k) v += log_v[j][idx[j]];
    acc[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].add(v);
    advance(idx, cost.shape);
  }
  Vector out(static_cast<Eigen::Index>(acc.size()));
  for (std::size_t x = 0; x < acc.size(); ++x) out[static_cast<Eigen::Index>(x)] = acc[x].value();
  return out;
}

}  // namespace

double entropic_dual(const CostTensor& cost, const std::vector<Vector>& log_v, const SnapshotSet& snapshots) {
  double linear = 0.0;
  for (int k = 0; k < snapshots.steps(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    for (int x = 0; x < snapshots.size(k); ++x)
      if (snapshots.weights[ks][x] > 0.0) linear += snapshots.weights[ks][x] * log_v[ks][x];
  }
  LogSumExp mass;
  std::vector<int> idx(cost.shape.size(), 0);
  for (std::size_t flat = 0; flat < cost.size(); ++flat) {
    double v = cost.log_density[flat];
    for (std::size_t j = 0; j < idx.size(); ++j) v += log_v[j][idx[j]];
    mass.add(v);
    advance(idx, cost.shape);
  }
  return linear - std::exp(mass.value());
}

SinkhornResult vanilla_sinkhorn(const CostTensor& cost, const SnapshotSet& snapshots, int iters,
                                std::vector<Vector> init_log_v) {
  require(iters >= 1, ErrorCode::InvalidArgument, "iters must be >= 1");
  const int steps = static_cast<int>(cost.shape.size());
  require(steps == snapshots.steps(), ErrorCode::InconsistentDimension, "cost and snapshots disagree on K");
  SinkhornResult res;
  if (init_log_v.empty()) {
    for (int k = 0; k < steps; ++k) init_log_v.push_back(Vector::Zero(cost.shape[static_cast<std::size_t>(k)]));
  }
  res.log_v = std::move(init_log_v);
  for (int it = 0; it < iters; ++it) {
    SinkhornIterate rec;
    for (int k = 0; k < steps; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Vector s = marginalize(cost, res.log_v, k);
      const Vector& mu = snapshots.weights[ks];
      for (Eigen::Index x = 0; x < s.size(); ++x) {
        if (mu[x] <= 0.0) {
          res.log_v[ks][x] = kNegInf;
          continue;
        }
        if (s[x] == kNegInf)
          fail(ErrorCode::ZeroMarginalMass, "support point " + std::to_string(x) + " at step " +
                                                std::to_string(k) + " receives no mass");
        res.log_v[ks][x] = std::log(mu[x]) - s[x];
      }
      rec.log_s.push_back(s);
      rec.log_v.push_back(res.log_v[ks]);
      res.dual.push_back(entropic_dual(cost, res.log_v, snapshots));
    }
    res.history.push_back(std::move(rec));
  }
  return res;
}

TransportPlan transport_from_scalings(const CostTensor& cost, const std::vector<Vector>& log_v) {
  TransportPlan plan;
  plan.shape = cost.shape;
  plan.log_p.resize(cost.size());
  std::vector<int> idx(cost.shape.size(), 0);
  for (std::size_t flat = 0; flat < cost.size(); ++flat) {
    double v = cost.log_density[flat];
    for (std::size_t j = 0; j < idx.size(); ++j) v += log_v[j][idx[j]];
    plan.log_p[flat] = v;
    advance(idx, cost.shape);
  }
  const double z = log_sum_exp(plan.log_p);
  require(z != kNegInf, ErrorCode::ZeroMarginalMass, "plan has no mass");
  for (double& v : plan.log_p) v -= z;

  for (int n : cost.shape) plan.marginals.push_back(Vector::Zero(n));
  std::fill(idx.begin(), idx.end(), 0);
  for (std::size_t flat = 0; flat < cost.size(); ++flat) {
    const double p = std::exp(plan.log_p[flat]);
    for (std::size_t j = 0; j < idx.size(); ++j) plan.marginals[j][idx[j]] += p;
    advance(idx, cost.shape);
  }
  return plan;
}

std::vector<MessageState> linear_message_passing(const std::vector<GammaTensor>& gammas,
                                                 const SnapshotSet& snapshots, int iters) {
  using Real = long double;
  const int steps = snapshots.steps();
  require(static_cast<int>(gammas.size()) == steps - 1, ErrorCode::InconsistentDimension,
          "Gamma list and snapshots disagree on K");
  const int m = gammas.front().cells();
  const auto n = [&](int k) { return snapshots.size(k); };

  // linear Gamma, (x, x', i, j) row-major
  std::vector<std::vector<Real>> g(gammas.size());
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    const auto& gt = gammas[k];
    g[k].resize(static_cast<std::size_t>(gt.n_from) * gt.n_to * m * m);
    std::size_t p = 0;
    for (int x = 0; x < gt.n_from; ++x)
      for (int xp = 0; xp < gt.n_to; ++xp)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) g[k][p++] = std::exp(static_cast<Real>(gt.at(x, xp, i, j)));
  }
  auto gam = [&](int k, int x, int xp, int i, int j) -> Real {
    return g[static_cast<std::size_t>(k)][((static_cast<std::size_t>(x) * n(k + 1) + xp) * m + i) * m + j];
  };

  std::vector<std::vector<Real>> l(static_cast<std::size_t>(steps)), r(static_cast<std::size_t>(steps)),
      beta(static_cast<std::size_t>(steps)), gamma(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    l[ks].assign(static_cast<std::size_t>(n(k)) * m, 1.0L);
    r[ks].assign(static_cast<std::size_t>(n(k)) * m, 1.0L);
    beta[ks].assign(static_cast<std::size_t>(n(k)), 1.0L);
    gamma[ks].assign(static_cast<std::size_t>(n(k)), 0.0L);
  }
  auto scale = [&](int k) {
    const auto ks = static_cast<std::size_t>(k);
    for (int x = 0; x < n(k); ++x) {
      Real s = 0.0L;
      for (int i = 0; i < m; ++i) s += l[ks][static_cast<std::size_t>(x) * m + i] * r[ks][static_cast<std::size_t>(x) * m + i];
      gamma[ks][static_cast<std::size_t>(x)] = s;
      beta[ks][static_cast<std::size_t>(x)] = static_cast<Real>(snapshots.weights[ks][x]) / s;
    }
  };
  auto to_log = [](Real v) { return v > 0.0L ? static_cast<double>(std::log(v)) : kNegInf; };

  std::vector<MessageState> history;
  for (int it = 0; it < iters; ++it) {
    for (int k = steps - 2; k >= 0; --k) {
      const auto ks = static_cast<std::size_t>(k);
      for (int x = 0; x < n(k); ++x)
        for (int i = 0; i < m; ++i) {
          Real s = 0.0L;
          for (int xp = 0; xp < n(k + 1); ++xp)
            for (int j = 0; j < m; ++j)
              s += beta[ks + 1][static_cast<std::size_t>(xp)] * l[ks + 1][static_cast<std::size_t>(xp) * m + j] *
                   gam(k, x, xp, i, j);
          l[ks][static_cast<std::size_t>(x) * m + i] = s;
        }
    }
    scale(0);
    for (int k = 1; k < steps; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      for (int xp = 0; xp < n(k); ++xp)
        for (int j = 0; j < m; ++j) {
          Real s = 0.0L;
          for (int x = 0; x < n(k - 1); ++x)
            for (int i = 0; i < m; ++i)
              s += beta[ks - 1][static_cast<std::size_t>(x)] * r[ks - 1][static_cast<std::size_t>(x) * m + i] *
                   gam(k - 1, x, xp, i, j);
          r[ks][static_cast<std::size_t>(xp) * m + j] = s;
        }
      scale(k);
    }

    MessageState st;
    for (int k = 0; k < steps; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      MessageMatrix lm(n(k), m), rm(n(k), m);
      Vector b(n(k)), gg(n(k));
      for (int x = 0; x < n(k); ++x) {
        for (int i = 0; i < m; ++i) {
          lm(x, i) = to_log(l[ks][static_cast<std::size_t>(x) * m + i]);
          rm(x, i) = to_log(r[ks][static_cast<std::size_t>(x) * m + i]);
        }
        b[x] = to_log(beta[ks][static_cast<std::size_t>(x)]);
        gg[x] = to_log(gamma[ks][static_cast<std::size_t>(x)]);
      }
      st.left.push_back(std::move(lm));
      st.right.push_back(std::move(rm));
      st.log_beta.push_back(std::move(b));
      st.log_gamma.push_back(std::move(gg));
    }
    st.iterations = it + 1;
    history.push_back(std::move(st));
  }
  return history;
}

}  // namespace ssb
