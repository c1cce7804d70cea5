#include <cmath>
#include <cstdio>
#include <random>

#include "fixtures.hpp"
#include "ssb/oracle.hpp"
#include "ssb/wavelet.hpp"

using namespace ssb;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("velocity cells of a Matern 3/2 prior") {
  const auto prior = build_lifted_prior(KernelSpec::matern(1.5, std::sqrt(3.0), {1.0}), TimeGrid::uniform(2, 2.0));
  const WaveletGrid g = build_grid(prior, {10}, 3.0);
  REQUIRE(g.steps.size() == 3);
  for (const auto& step : g.steps) {
    const AxisCells& ax = step.axes[0][0];
    CHECK(ax.half_width == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(ax.width() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(step.cells() == 10);
    CHECK(step.log_volume() == doctest::Approx(std::log(0.6)).epsilon(1e-12));
  }
  CHECK(g.steps[0].axes[0][0].midpoint(0) == doctest::Approx(-2.7));
  CHECK(g.steps[0].axes[0][0].locate(-3.0) == 0);
  CHECK(g.steps[0].axes[0][0].locate(2.99) == 9);
  CHECK(g.steps[0].axes[0][0].locate(3.0) == -1);
}

TEST_CASE("order one has a single trivial cell") {
  const auto prior = build_lifted_prior(KernelSpec::matern(0.5, 1.0, {1.0, 1.0}), TimeGrid::uniform(2, 1.0));
  const WaveletGrid g = build_grid(prior, {});
  CHECK(g.cells() == 1);
  CHECK(g.steps[0].log_volume() == 0.0);
}

TEST_CASE("doubling the bins halves the width and nests midpoints") {
  const auto prior = build_lifted_prior(KernelSpec::matern(1.5, 1.0, {1.0}), TimeGrid::uniform(1, 1.0));
  const WaveletGrid c = build_grid(prior, {8});
  const WaveletGrid f = build_grid(prior, {16});
  const AxisCells& a = c.steps[0].axes[0][0];
  const AxisCells& b = f.steps[0].axes[0][0];
  CHECK(b.width() == doctest::Approx(a.width() / 2.0));
  for (int i = 0; i < 8; ++i) {
    CHECK(0.5 * (b.midpoint(2 * i) + b.midpoint(2 * i + 1)) == doctest::Approx(a.midpoint(i)));
    CHECK(a.locate(b.midpoint(2 * i)) == i);
    CHECK(a.locate(b.midpoint(2 * i + 1)) == i);
  }
}

TEST_CASE("normalized Haar indicators are orthonormal") {
  // <psi_i, psi_j> = Z^2 |cell_i ∩ cell_j|; cells of one step tile the box
  const auto prior = build_lifted_prior(KernelSpec::matern(2.5, 1.0, {1.0, 2.0}), TimeGrid::uniform(1, 1.0));
  const WaveletGrid g = build_grid(prior, {3, 2});
  const StepCells& s = g.steps[0];
  CHECK(s.cells() == 36);
  const double z2 = std::exp(2.0 * s.log_normalizer());
  for (int i = 0; i < s.cells(); ++i) {
    const auto pi = s.split(i);
    CHECK(s.join(pi) == i);
    for (int j = 0; j < s.cells(); ++j) {
      const auto pj = s.split(j);
      double overlap = 1.0;
      for (int dim = 0; dim < s.dim(); ++dim) {
        const auto bi = s.axis_bins(dim, pi[static_cast<std::size_t>(dim)]);
        const auto bj = s.axis_bins(dim, pj[static_cast<std::size_t>(dim)]);
        for (std::size_t a = 0; a < bi.size(); ++a)
          overlap *= bi[a] == bj[a] ? s.axes[static_cast<std::size_t>(dim)][a].width() : 0.0;
      }
      CHECK(z2 * overlap == doctest::Approx(i == j ? 1.0 : 0.0));
    }
  }
  // cell membership agrees with the midpoint
  for (int c = 0; c < s.cells_in_dim(1); ++c) CHECK(s.contains(1, c, s.midpoint(1, c)));
}

TEST_CASE("degenerate derivative variance") {
  KernelSpec ibm = KernelSpec::integrated_bm(2, {1.0});
  ibm.initial_covariance = Matrix::Zero(2, 2);
  const auto prior = build_lifted_prior(ibm, TimeGrid::uniform(2, 1.0));
  CHECK_THROWS_CODE(build_grid(prior, {4}), ErrorCode::DegenerateVariance);
  CHECK_NOTHROW(build_grid(prior, {1}));
  CHECK_THROWS_CODE(build_grid(prior, {4, 4, 4}), ErrorCode::InvalidArgument);
}

TEST_CASE("log_phi along the mean path and off it") {
  const auto prior = build_lifted_prior(KernelSpec::matern(1.5, 0.7, {1.0}), TimeGrid::uniform(3, 1.5));
  const Vector z = vec({0.4, -1.1});
  const Vector next = prior.dims[0].transition[1] * z;
  CHECK(std::abs(log_phi(prior, 1, z, next)) < 1e-12);

  // downward parabola in t: second differences are constant and negative
  const Vector dir = vec({0.3, 0.8});
  double f[5];
  for (int t = 0; t < 5; ++t) f[t] = log_phi(prior, 1, z, next + (t - 2.0) * dir);
  const double d2 = f[2] - 2.0 * f[1] + f[0];
  CHECK(d2 < 0.0);
  CHECK(f[4] - 2.0 * f[3] + f[2] == doctest::Approx(d2).epsilon(1e-9));
  CHECK(f[2] == doctest::Approx(0.0));
  CHECK(f[1] == doctest::Approx(f[3]).epsilon(1e-12));
}

TEST_CASE("log_phi for OU is the scalar transition quadratic") {
  const double ell = 0.8, sigma = 1.3;
  const auto prior = build_lifted_prior(KernelSpec::matern(0.5, ell, {sigma}), TimeGrid({0.0, 0.5, 1.0}));
  const double a = std::exp(-0.5 / ell);
  const double lam = sigma * sigma * (1.0 - a * a);
  const double x = 0.7, xp = -0.2;
  CHECK(log_phi(prior, 1, vec({x}), vec({xp})) == doctest::Approx(-0.5 * (xp - a * x) * (xp - a * x) / lam).epsilon(1e-12));
  // the first interval also carries the stationary quadratic
  CHECK(log_phi(prior, 0, vec({x}), vec({xp})) ==
        doctest::Approx(-0.5 * ((xp - a * x) * (xp - a * x) / lam + x * x / (sigma * sigma))).epsilon(1e-12));
}

TEST_CASE("order one Gamma is the pair potential") {
  const auto s = fx::line({{0.0, 1.0}, {0.5, -0.3, 2.0}});
  const auto prior = build_lifted_prior(KernelSpec::matern(0.5, 1.0, {1.0}), s.grid);
  const auto g = precompute_gamma(prior, build_grid(prior, {}), s);
  REQUIRE(g.size() == 1);
  CHECK(g[0].cells() == 1);
  for (int x = 0; x < 2; ++x)
    for (int xp = 0; xp < 3; ++xp)
      CHECK(g[0].at(x, xp, 0, 0) ==
            doctest::Approx(log_phi(prior, 0, s.supports[0].row(x).transpose(), s.supports[1].row(xp).transpose())));
}

TEST_CASE("Gamma entries are the midpoint rule") {
  const auto s = fx::random(2, 3, 1, 4);
  const auto prior = build_lifted_prior(KernelSpec::matern(1.5, 1.0, {1.0}), s.grid);
  const WaveletGrid grid = build_grid(prior, {6});
  const auto g = precompute_gamma(prior, grid, s);
  const int k = 1;
  for (int x = 0; x < 3; ++x)
    for (int xp = 0; xp < 3; ++xp)
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
          const Vector z0 = vec({s.supports[1](x, 0), grid.steps[1].midpoint(0, i)[0]});
          const Vector z1 = vec({s.supports[2](xp, 0), grid.steps[2].midpoint(0, j)[0]});
          const double expect = grid.steps[1].log_volume() + grid.steps[2].log_volume() + log_phi(prior, k, z0, z1);
          const double got = g[static_cast<std::size_t>(k)].at(x, xp, i, j);
          if (expect < kLogGammaFloor) {
            CHECK(got == kNegInf);
          } else {
            CHECK(got == doctest::Approx(expect).epsilon(1e-11));
          }
        }
}

TEST_CASE("dense and factorized layouts agree") {
  const auto s = fx::random(2, 3, 2, 8);
  const auto prior = build_lifted_prior(KernelSpec::matern(1.5, 1.0, {1.0, 0.7}), s.grid);
  const WaveletGrid grid = build_grid(prior, {4});
  CHECK(grid.cells() == 16);
  const auto fac = precompute_gamma(prior, grid, s, GammaLayout::Factorized);
  const auto den = precompute_gamma(prior, grid, s, GammaLayout::Dense);
  REQUIRE(fac[0].factors.size() == 2);
  REQUIRE(den[0].factors.size() == 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < fac.size(); ++k)
    for (int x = 0; x < 3; ++x)
      for (int xp = 0; xp < 3; ++xp)
        for (int i = 0; i < 16; ++i)
          for (int j = 0; j < 16; ++j) {
            const double a = fac[k].at(x, xp, i, j), b = den[k].at(x, xp, i, j);
            if (a == kNegInf || b == kNegInf) {
              // flooring happens per factor on one side and on the sum on the other
              CHECK(std::max(a, b) < kLogGammaFloor + 50.0);
              continue;
            }
            worst = std::max(worst, std::abs(a - b));
          }
  CHECK(worst < 1e-10);
}

TEST_CASE("weighted sums of Gamma stay finite") {
  const auto s = fx::random(1, 4, 1, 3);
  const auto prior = build_lifted_prior(KernelSpec::matern(2.5, 1.0, {1.0}), s.grid);
  const auto g = precompute_gamma(prior, build_grid(prior, {5, 3}), s);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int x = 0; x < 4; ++x)
    for (int i = 0; i < 15; ++i) {
      LogSumExp acc;
      for (int xp = 0; xp < 4; ++xp)
        for (int j = 0; j < 15; ++j) acc.add(g[0].at(x, xp, i, j) + u(rng));
      CHECK(acc.value() < 1e300);
    }
}

TEST_CASE("Gamma cache round trip keeps dropped pairs") {
  // far-apart clusters make some pair blocks identically -inf
  const auto s = fx::line({{0.0, 0.1, 50.0}, {0.05, 50.1, 50.2}}, 0.1);
  const auto prior = build_lifted_prior(KernelSpec::matern(1.5, 1.0, {1.0, }), s.grid);
  const auto g = precompute_gamma(prior, build_grid(prior, {4}), s);
  bool dropped = false;
  for (int x = 0; x < 3; ++x)
    for (int xp = 0; xp < 3; ++xp) dropped = dropped || !g[0].factors[0].stored(x, xp);
  CHECK(dropped);
  const std::string path = "test_wavelet_cache.bin";
  save_gamma(path, g);
  const auto back = load_gamma(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == 1);
  CHECK(back[0].log_normalizer == g[0].log_normalizer);
  CHECK(back[0].factors[0].slot == g[0].factors[0].slot);
  CHECK(back[0].factors[0].log_values == g[0].factors[0].log_values);
  CHECK_THROWS_CODE(load_gamma("/nonexistent/cache.bin"), ErrorCode::IoError);
}

TEST_CASE("refinement error") {
  const auto s = fx::random(2, 3, 1, 1);
  const auto prior = build_lifted_prior(KernelSpec::matern(1.5, 1.0, {1.0}), s.grid);
  CHECK(refine_error(prior, build_grid(prior, {1}), build_grid(prior, {1}), s) == 0.0);

  std::vector<double> err;
  for (int m : {8, 16, 32, 64}) err.push_back(refine_error(prior, build_grid(prior, {m}), build_grid(prior, {2 * m}), s));
  for (std::size_t i = 1; i < err.size(); ++i) {
    CHECK(err[i] < err[i - 1]);
    // midpoint rule on a smooth integrand: second order in the cell width
    const double slope = std::log2(err[i - 1] / err[i]);
    CHECK(slope >= 0.8);
    CHECK(slope <= 2.2);
  }
}
