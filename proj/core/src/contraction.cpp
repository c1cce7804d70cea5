#include "ssb/contraction.hpp"

#include <algorithm>
#include <cmath>

#include "ssb/error.hpp"
#include "ssb/logsumexp.hpp"

namespace ssb {

namespace {

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
using RowMajorArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr double kUnderflow = 1e-250;

}  // namespace

IntervalKernel::IntervalKernel(const GammaTensor& gamma) : gamma_(&gamma) {
  cells_ = gamma.cells();
  const std::size_t pairs = static_cast<std::size_t>(gamma.n_from) * gamma.n_to;
  pair_max_.assign(pairs, 0.0);
  for (const auto& gf : gamma.factors) {
    Factor f;
    const int c = gf.cells;
    f.cells = c;
    f.rho_fwd.resize(pairs * c);
    f.rho_bwd.resize(pairs * c);
    for (std::size_t p = 0; p < pairs; ++p) {
      double* rf = f.rho_fwd.data() + p * c;
      double* rb = f.rho_bwd.data() + p * c;
      std::fill(rf, rf + c, kNegInf);
      std::fill(rb, rb + c, kNegInf);
      const double* g = gf.block(static_cast<int>(p / gamma.n_to), static_cast<int>(p % gamma.n_to));
      if (!g) {
        pair_max_[p] = kNegInf;
        continue;
      }
      for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) {
          const double v = g[i * c + j];
          rf[i] = std::max(rf[i], v);
          rb[j] = std::max(rb[j], v);
        }
      pair_max_[p] += *std::max_element(rf, rf + c);
    }
    factors_.push_back(std::move(f));
  }
}

double IntervalKernel::exact_entry(bool forward, int x, int xp, int cell, const double* u) const {
  LogSumExp acc;
  for (int c = 0; c < cells_; ++c) {
    if (u[c] == kNegInf) continue;
    const double g = forward ? gamma_->at(x, xp, cell, c) : gamma_->at(x, xp, c, cell);
    acc.add(u[c] + g);
  }
  return acc.value();
}

void IntervalKernel::kron_apply(bool forward, std::size_t pair, const double* in, double* out, Workspace& ws,
                                ContractionStats& stats) const {
  // Each stage is a log-domain product with one factor over the entries that
  // are not -inf. Columns of the message are shifted by their own maximum and
  // factor rows by theirs, so an entry can only underflow when the two peak at
  // different cells; those entries are redone as an exact log-sum-exp.
  const int nf = static_cast<int>(factors_.size());
  double* bufs[2] = {out, ws.scratch.data()};
  int cur = (nf % 2 == 1) ? 0 : 1;
  const double* src = in;
  int pre = 1;
  int post = cells_;
  for (int f = 0; f < nf; ++f) {
    const Factor& fac = factors_[static_cast<std::size_t>(f)];
    const int c = fac.cells;
    post /= c;
    const double* rho = (forward ? fac.rho_fwd.data() : fac.rho_bwd.data()) + pair * c;
    const double* g = gamma_->factors[static_cast<std::size_t>(f)].block(static_cast<int>(pair / gamma_->n_to),
                                                                         static_cast<int>(pair % gamma_->n_to));
    auto glog = [&](int o, int i) { return forward ? g[o * c + i] : g[i * c + o]; };
    auto at = [&](int p, int j, int q) {
      return src[(static_cast<std::size_t>(p) * c + j) * post + q];
    };
    double* dst = bufs[cur];
    std::fill(dst, dst + cells_, kNegInf);

    ws.cols.clear();
    ws.shift.clear();
    ws.in_active.assign(static_cast<std::size_t>(c), 0);
    for (int p = 0; p < pre; ++p)
      for (int q = 0; q < post; ++q) {
        double hi = kNegInf;
        for (int j = 0; j < c; ++j) {
          const double v = at(p, j, q);
          if (v != kNegInf) {
            ws.in_active[static_cast<std::size_t>(j)] = 1;
            hi = std::max(hi, v);
          }
        }
        if (hi != kNegInf) {
          ws.cols.push_back(p * post + q);
          ws.shift.push_back(hi);
        }
      }
    ws.rows_in.clear();
    ws.rows_out.clear();
    for (int j = 0; j < c; ++j)
      if (ws.in_active[static_cast<std::size_t>(j)]) ws.rows_in.push_back(j);
    for (int o = 0; o < c; ++o)
      if (rho[o] != kNegInf) ws.rows_out.push_back(o);

    const int nc = static_cast<int>(ws.cols.size());
    const int ni = static_cast<int>(ws.rows_in.size());
    const int no = static_cast<int>(ws.rows_out.size());
    if (nc > 0 && ni > 0 && no > 0) {
      ws.ex.resize(ni, nc);
      for (int b = 0; b < nc; ++b) {
        const int p = ws.cols[static_cast<std::size_t>(b)] / post;
        const int q = ws.cols[static_cast<std::size_t>(b)] % post;
        const double sh = ws.shift[static_cast<std::size_t>(b)];
        for (int a = 0; a < ni; ++a) ws.ex(a, b) = std::exp(at(p, ws.rows_in[static_cast<std::size_t>(a)], q) - sh);
      }
      ws.e.resize(no, ni);
      for (int a = 0; a < ni; ++a)
        for (int r = 0; r < no; ++r) {
          const int o = ws.rows_out[static_cast<std::size_t>(r)];
          ws.e(r, a) = std::exp(glog(o, ws.rows_in[static_cast<std::size_t>(a)]) - rho[o]);
        }
      ws.y.noalias() = ws.e * ws.ex;
      for (int b = 0; b < nc; ++b) {
        const int p = ws.cols[static_cast<std::size_t>(b)] / post;
        const int q = ws.cols[static_cast<std::size_t>(b)] % post;
        const double sh = ws.shift[static_cast<std::size_t>(b)];
        for (int r = 0; r < no; ++r) {
          const int o = ws.rows_out[static_cast<std::size_t>(r)];
          double& target = dst[(static_cast<std::size_t>(p) * c + o) * post + q];
          const double v = ws.y(r, b);
          if (v < kUnderflow) {
            LogSumExp acc;
            for (int j : ws.rows_in) acc.add(glog(o, j) + at(p, j, q));
            target = acc.value();
            ++stats.fallbacks;
          } else {
            target = std::log(v) + rho[o] + sh;
          }
        }
      }
    }
    src = dst;
    cur ^= 1;
    pre *= c;
  }
}

void IntervalKernel::contract(bool forward, const MessageMatrix& in, const Vector& bias,
                              MessageMatrix& out, const ContractionOptions& opts,
                              ContractionStats& stats) const {
  const int n_dst = forward ? gamma_->n_from : gamma_->n_to;
  const int n_src = forward ? gamma_->n_to : gamma_->n_from;
  const int m = cells_;
  require(in.rows() == n_src && in.cols() == m && bias.size() == n_src, ErrorCode::InconsistentDimension,
          "message shape does not match the Gamma tensor");
  out.resize(n_dst, m);

  RowMajorArray u(n_src, m);
  Vector umax(n_src);
  for (int b = 0; b < n_src; ++b) {
    u.row(b) = in.row(b).array() + bias[b];
    umax[b] = bias[b] == kNegInf ? kNegInf : u.row(b).maxCoeff();
  }

  const double log_m = std::log(static_cast<double>(m));
  const bool fast = opts.mode == ContractionMode::Fast;
  RowMajorArray t(n_src, m);
  RowArray rho(m), lower(m), tmp(m);
  Workspace ws;
  ws.scratch.resize(static_cast<std::size_t>(m));
  std::vector<std::pair<double, int>> cand;
  cand.reserve(static_cast<std::size_t>(n_src));

  for (int a = 0; a < n_dst; ++a) {
    cand.clear();
    for (int b = 0; b < n_src; ++b) {
      const std::size_t pair = forward ? static_cast<std::size_t>(a) * gamma_->n_to + b
                                       : static_cast<std::size_t>(b) * gamma_->n_to + a;
      if (umax[b] == kNegInf || pair_max_[pair] == kNegInf) continue;
      cand.emplace_back(umax[b] + pair_max_[pair], b);
    }
    std::sort(cand.begin(), cand.end(), [](const auto& l, const auto& r) {
      return l.first != r.first ? l.first > r.first : l.second < r.second;
    });

    lower.setConstant(kNegInf);
    int kept = 0;
    for (const auto& [bound, b] : cand) {
      const int x = forward ? a : b;
      const int xp = forward ? b : a;
      const std::size_t pair = static_cast<std::size_t>(x) * gamma_->n_to + xp;

      // row maxima of the Kronecker product, as a Kronecker sum
      int len = 1;
      rho[0] = 0.0;
      for (const Factor& fac : factors_) {
        const double* r = (forward ? fac.rho_fwd.data() : fac.rho_bwd.data()) + pair * fac.cells;
        for (int p = len - 1; p >= 0; --p)
          for (int q = fac.cells - 1; q >= 0; --q) rho[p * fac.cells + q] = rho[p] + r[q];
        len *= fac.cells;
      }

      if (opts.prune && kept > 0) {
        tmp = rho + (umax[b] + log_m);
        if (((tmp < lower - kPruneMargin) || (tmp == kNegInf)).all()) {
          ++stats.pruned;
          continue;
        }
      }
      ++stats.blocks;

      auto row = t.row(kept);
      if (fast) {
        kron_apply(forward, pair, u.row(b).data(), row.data(), ws, stats);
      } else {
        for (int i = 0; i < m; ++i) row[i] = exact_entry(forward, x, xp, i, u.row(b).data());
      }
      lower = lower.max(row);
      ++kept;
    }

    if (kept == 0) {
      out.row(a).setConstant(kNegInf);
      continue;
    }
    if (kept == 1) {
      out.row(a) = t.row(0).matrix();
      continue;
    }
    for (int i = 0; i < m; ++i) {
      const double lo = lower[i];
      if (lo == kNegInf) {
        out(a, i) = kNegInf;
        continue;
      }
      double sum = 0.0;
      for (int r = 0; r < kept; ++r) {
        const double v = t(r, i);
        if (v != kNegInf) sum += std::exp(v - lo);
      }
      out(a, i) = lo + std::log(sum);
    }
  }
}

void IntervalKernel::pull(const MessageMatrix& in, const Vector& bias, MessageMatrix& out,
                          const ContractionOptions& opts, ContractionStats& stats) const {
  contract(true, in, bias, out, opts, stats);
}

void IntervalKernel::push(const MessageMatrix& in, const Vector& bias, MessageMatrix& out,
                          const ContractionOptions& opts, ContractionStats& stats) const {
  contract(false, in, bias, out, opts, stats);
}

GammaChain::GammaChain(const std::vector<GammaTensor>& gammas) : gammas_(&gammas) {
  require(!gammas.empty(), ErrorCode::InvalidArgument, "need at least one interval");
  kernels_.reserve(gammas.size());
  for (const auto& g : gammas) kernels_.emplace_back(g);
}

}  // namespace ssb
