#pragma once

// Log-domain contraction of messages against one interval's Gamma tensor.
//
//   pull: out(x, i)  = lse_{x', j} [bias(x') + in(x', j) + logGamma(x, x', i, j)]
//   push: out(x', j) = lse_{x, i}  [bias(x)  + in(x, i)  + logGamma(x, x', i, j)]
//
// The fast path works per support pair, one factor at a time, on the finite
// entries only: row-shifted linear copies of the factor times column-shifted
// copies of the message, with an exact log-sum-exp for entries whose shifted
// sum underflows. Source points whose upper bound is more than kPruneMargin nats below every output
// entry accumulated so far are skipped.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ssb/wavelet.hpp"

namespace ssb {

using MessageMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPruneMargin = 50.0;

enum class ContractionMode { Fast, Exact };

struct ContractionOptions {
  ContractionMode mode = ContractionMode::Fast;
  bool prune = true;
};

struct ContractionStats {
  std::int64_t blocks = 0;     // pair blocks evaluated
  std::int64_t pruned = 0;     // pair blocks skipped by the bound
  std::int64_t fallbacks = 0;  // stage entries recomputed exactly after underflow

  ContractionStats& operator+=(const ContractionStats& o) {
    blocks += o.blocks;
    pruned += o.pruned;
    fallbacks += o.fallbacks;
    return *this;
  }
};

class IntervalKernel {
 public:
  // Keeps a reference to `gamma`, which must outlive the kernel.
  explicit IntervalKernel(const GammaTensor& gamma);

  int n_from() const { return gamma_->n_from; }
  int n_to() const { return gamma_->n_to; }
  int cells() const { return cells_; }
  const GammaTensor& gamma() const { return *gamma_; }

  void pull(const MessageMatrix& in, const Vector& bias, MessageMatrix& out,
            const ContractionOptions& opts, ContractionStats& stats) const;
  void push(const MessageMatrix& in, const Vector& bias, MessageMatrix& out,
            const ContractionOptions& opts, ContractionStats& stats) const;

 private:
  struct Factor {
    int cells = 1;
    std::vector<double> rho_fwd;  // per pair, row maxima
    std::vector<double> rho_bwd;  // per pair, column maxima
  };

  void contract(bool forward, const MessageMatrix& in, const Vector& bias, MessageMatrix& out,
                const ContractionOptions& opts, ContractionStats& stats) const;
  double exact_entry(bool forward, int x, int xp, int cell, const double* u) const;
  struct Workspace {
    std::vector<double> scratch;
    std::vector<int> cols, rows_in, rows_out;
    std::vector<double> shift;
    std::vector<char> in_active;
    Matrix ex, e, y;
  };
  void kron_apply(bool forward, std::size_t pair, const double* in, double* out, Workspace& ws,
                  ContractionStats& stats) const;

  const GammaTensor* gamma_;
  int cells_ = 1;
  std::vector<Factor> factors_;
  std::vector<double> pair_max_;  // max entry of each (x, x') block
};

// One kernel per interval.
class GammaChain {
 public:
  explicit GammaChain(const std::vector<GammaTensor>& gammas);

  int intervals() const { return static_cast<int>(kernels_.size()); }
  int cells() const { return kernels_.front().cells(); }
  const IntervalKernel& operator[](int k) const { return kernels_[static_cast<std::size_t>(k)]; }
  const std::vector<GammaTensor>& gammas() const { return *gammas_; }

 private:
  const std::vector<GammaTensor>* gammas_;
  std::vector<IntervalKernel> kernels_;
};

}  // namespace ssb
