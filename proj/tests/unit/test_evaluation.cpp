#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "ssb/assignment.hpp"
#include "ssb/evaluation.hpp"

using namespace ssb;

namespace {

// Three trajectories on five steps, 1D, supports listed in trajectory order.
struct Fixture {
  SnapshotSet snapshots;
  GroundTruth truth;
};

Fixture three_tracks() {
  Fixture f;
  std::vector<std::vector<double>> pts;
  for (int k = 0; k < 5; ++k) pts.push_back({0.0 + 0.1 * k, 1.0 + 0.1 * k, 2.0 + 0.1 * k});
  f.snapshots = fx::line(pts);
  for (int k = 0; k < 5; ++k) f.truth.labels.push_back({0, 1, 2});
  return f;
}

double brute_w1(const Matrix& a, const Matrix& b) {
  std::vector<int> p(static_cast<std::size_t>(a.rows()));
  std::iota(p.begin(), p.end(), 0);
  double best = 1e300;
  do {
    double c = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) c += (a.row(i) - b.row(p[static_cast<std::size_t>(i)])).cwiseAbs().sum();
    best = std::min(best, c / static_cast<double>(a.rows()));
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

}  // namespace

TEST_CASE("truth scores perfectly") {
  const Fixture f = three_tracks();
  const std::vector<std::vector<int>> paths = {{0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}, {2, 2, 2, 2, 2}};
  const TrackingScore s = score_tracking(paths, f.snapshots, f.truth);
  CHECK(s.jump_p == 0.0);
  CHECK(s.acc3 == 1.0);
  CHECK(s.acc5 == 1.0);
  CHECK(s.traj_acc == 1.0);
  CHECK(s.max_l2 == 0.0);
  CHECK(s.mean_l2 == 0.0);
  CHECK(s.traj_kl == 0.0);
}

TEST_CASE("alternating sample jumps every step") {
  const Fixture f = three_tracks();
  const TrackingScore s = score_tracking({{0, 1, 0, 1, 0}}, f.snapshots, f.truth);
  CHECK(s.jump_p == 1.0);
  CHECK(s.acc3 == 0.0);
  CHECK(s.traj_acc == 0.0);
}

TEST_CASE("one jump on the hand-enumerated fixture") {
  const Fixture f = three_tracks();
  // labels 0 0 0 0 1: windows [0,2] and [1,3] stay, [2,4] jumps
  const TrackingScore one = score_tracking({{0, 0, 0, 0, 1}}, f.snapshots, f.truth);
  CHECK(one.acc3 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(one.acc5 == 0.0);
  CHECK(one.jump_p == 0.25);
  CHECK(one.traj_acc == 0.0);
  // matched track 0: distance 1 at the last step only
  CHECK(one.mean_l2 == doctest::Approx(0.2));
  CHECK(one.max_l2 == doctest::Approx(0.2));

  // with the two true tracks added: 3 + 3 + 2 good windows of 9, 1 jump in 12
  const TrackingScore all = score_tracking({{0, 0, 0, 0, 1}, {1, 1, 1, 1, 1}, {2, 2, 2, 2, 2}}, f.snapshots, f.truth);
  CHECK(all.acc3 == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(all.acc5 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(all.jump_p == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
  CHECK(all.traj_acc == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(all.traj_kl == doctest::Approx(0.0).epsilon(1e-15));

  // every sample matched to track 0: KL of a point mass against uniform on 3
  const TrackingScore same = score_tracking({{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}}, f.snapshots, f.truth);
  CHECK(same.traj_kl == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("scores do not depend on how tracks are labelled") {
  Fixture f = three_tracks();
  const std::vector<std::vector<int>> paths = {{0, 1, 1, 2, 2}, {2, 2, 1, 1, 0}};
  const TrackingScore a = score_tracking(paths, f.snapshots, f.truth);
  for (auto& l : f.truth.labels) l = {2, 0, 1};
  const TrackingScore b = score_tracking(paths, f.snapshots, f.truth);
  CHECK(a.jump_p == b.jump_p);
  CHECK(a.acc3 == b.acc3);
  CHECK(a.acc5 == b.acc5);
  CHECK(a.traj_acc == b.traj_acc);
  CHECK(a.traj_kl == doctest::Approx(b.traj_kl));
}

TEST_CASE("tracking input errors") {
  const Fixture f = three_tracks();
  CHECK_THROWS_CODE(score_tracking({{0, 0, 0}}, f.snapshots, f.truth), ErrorCode::InvalidArgument);
  CHECK_THROWS_CODE(score_tracking({{0, 0, 0, 0, 3}}, f.snapshots, f.truth), ErrorCode::InvalidArgument);
}

TEST_CASE("cloud scores") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(6, 2);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  const CloudScore same = score_cloud(a, a);
  CHECK(same.w1 == 0.0);
  CHECK(same.mmd_gauss == 0.0);
  CHECK(same.mmd_id == 0.0);
  CloudOptions rbf;
  rbf.gauss = GaussKernel::Rbf;
  CHECK(score_cloud(a, a, rbf).mmd_gauss == 0.0);

  Matrix p(1, 3), q(1, 3);
  p << 0.0, 1.0, -2.0;
  q << 0.5, -1.0, 1.0;
  CHECK(wasserstein1(p, q) == doctest::Approx(0.5 + 2.0 + 3.0));

  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(3, 2), y(3, 2);
    for (Eigen::Index i = 0; i < 6; ++i) {
      x.data()[i] = n(rng);
      y.data()[i] = n(rng);
    }
    CHECK(wasserstein1(x, y) == doctest::Approx(brute_w1(x, y)).epsilon(1e-14));
  }

  // unequal sizes: one point against two splits its mass
  Matrix one(1, 1), two(2, 1);
  one << 0.0;
  two << 1.0, 3.0;
  CHECK(wasserstein1(one, two) == doctest::Approx(2.0));

  // identity kernel: distance between the means
  Matrix b = a;
  b.col(0).array() += 0.3;
  b.col(1).array() -= 0.4;
  CHECK(mmd_identity(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mmd(a, b, GaussKernel::Rbf, 1.0) > 0.0);
  CHECK(mmd(a, b, GaussKernel::Verbatim) >= 0.0);

  CHECK_THROWS_CODE(score_cloud(Matrix(0, 2), a), ErrorCode::EmptyCloud);
  CHECK_THROWS_CODE(score_cloud(Matrix::Zero(2, 3), a), ErrorCode::InconsistentDimension);
}

TEST_CASE("assignment solver") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix c(5, 5);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
    const Assignment a = solve_assignment(c);
    std::vector<int> p = {0, 1, 2, 3, 4};
    double best = 1e300;
    do {
      double s = 0.0;
      for (int i = 0; i < 5; ++i) s += c(i, p[static_cast<std::size_t>(i)]);
      best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(a.cost == doctest::Approx(best).epsilon(1e-12));
  }
  Matrix rect(2, 3);
  rect << 5, 1, 9, 2, 8, 0;
  const Assignment r = solve_assignment(rect);
  CHECK(r.col_of_row == std::vector<int>{1, 2});

  Matrix tc(2, 2);
  tc << 0, 1, 1, 0;
  const auto flow = solve_transport(tc, {3, 1}, {2, 2});
  CHECK(flow(0, 0) == 2);
  CHECK(flow(0, 1) == 1);
  CHECK(flow(1, 1) == 1);
}

TEST_CASE("W2 matching baseline") {
  // non-crossing 1D points: identity
  const SnapshotSet mono = fx::line({{0.0, 1.0, 2.0}, {0.1, 1.2, 2.3}, {0.3, 1.1, 2.0}});
  for (const auto& p : w2_matching_baseline(mono)) CHECK(std::all_of(p.begin(), p.end(), [&](int x) { return x == p[0]; }));

  // two points swapping: matching follows proximity
  const SnapshotSet swap = fx::line({{0.0, 1.0}, {0.45, 0.55}, {1.0, 0.0}});
  const auto paths = w2_matching_baseline(swap);
  CHECK(paths[0] == std::vector<int>{0, 0, 1});
  GroundTruth truth;
  truth.labels = {{0, 1}, {0, 1}, {1, 0}};
  CHECK(score_tracking(paths, swap, truth).jump_p == 0.0);
  GroundTruth crossing;
  crossing.labels = {{0, 1}, {1, 0}, {1, 0}};
  CHECK(score_tracking(paths, swap, crossing).jump_p == 1.0);

  // optimal against random permutations
  const SnapshotSet r = fx::random(1, 6, 2, 77);
  const auto m = w2_matching_baseline(r);
  auto cost = [&](const std::vector<int>& to) {
    double c = 0.0;
    for (int i = 0; i < 6; ++i) c += (r.supports[0].row(i) - r.supports[1].row(to[static_cast<std::size_t>(i)])).squaredNorm();
    return c;
  };
  std::vector<int> chosen;
  for (const auto& p : m) chosen.push_back(p[1]);
  std::mt19937_64 rng(3);
  std::vector<int> perm = {0, 1, 2, 3, 4, 5};
  for (int t = 0; t < 100; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(cost(chosen) <= cost(perm) + 1e-12);
  }

  CHECK_THROWS_CODE(w2_matching_baseline(fx::line({{0.0, 1.0}, {0.5}})), ErrorCode::UnequalSupportSizes);
}

TEST_CASE("leave one out beats interpolation when the marginal is not stationary") {
  // integrated Brownian motion: the spread grows like t^1.5, so averaging matched
  // endpoints misplaces it
  const auto spec = KernelSpec::integrated_bm(2, {1.0});
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Dataset d = generate_matern_dataset(spec, TimeGrid::uniform(2, 2.0), 200, seed);
    LotConfig cfg;
    cfg.kernel = spec;
    cfg.bins = {16};
    cfg.seed = seed;
    const LotResult r = leave_one_out_run(d.snapshots, 1, cfg);
    CHECK(r.report.converged);
    CHECK(r.predicted.rows() == 200);
    const double base = wasserstein1(interpolation_baseline(d.snapshots, 1), d.snapshots.supports[1]);
    CHECK_MESSAGE(r.score.w1 < base, "seed " << seed);
  }
}

TEST_CASE("leave one out matches the exact conditional on stationary data") {
  // reference: each true path's x_1 drawn from x_1 | x_0, x_2 under the joint Gaussian
  const auto spec = KernelSpec::matern(1.5, 1.0, {1.0});
  const TimeGrid grid = TimeGrid::uniform(2, 2.0);
  const Matrix cov = joint_position_covariance(spec, grid);
  Eigen::Matrix2d c_oo;
  c_oo << cov(0, 0), cov(0, 2), cov(2, 0), cov(2, 2);
  const Eigen::RowVector2d c_ho(cov(1, 0), cov(1, 2));
  const Eigen::RowVector2d gain = c_ho * c_oo.inverse();
  const double sd = std::sqrt(cov(1, 1) - gain.dot(c_ho));
  double ssb = 0.0, oracle = 0.0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Dataset d = generate_matern_dataset(spec, grid, 100, seed);
    const SnapshotSet& s = d.snapshots;
    const auto& l = d.truth->labels;
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix ref(100, 1);
    for (int t = 0; t < 100; ++t)
      ref(t, 0) = gain[0] * s.supports[0](l[0][static_cast<std::size_t>(t)], 0) +
                  gain[1] * s.supports[2](l[2][static_cast<std::size_t>(t)], 0) + sd * n(rng);
    oracle += wasserstein1(ref, s.supports[1]);
    LotConfig cfg;
    cfg.kernel = spec;
    cfg.bins = {16};
    cfg.seed = seed;
    ssb += leave_one_out_run(s, 1, cfg).score.w1;
  }
  CHECK(std::abs(ssb - oracle) < 0.2 * oracle);
}

TEST_CASE("leave one out is deterministic and checks the step") {
  const auto spec = KernelSpec::matern(1.5, 1.0, {1.0});
  const Dataset d = generate_matern_dataset(spec, TimeGrid::uniform(2, 2.0), 20, 1);
  LotConfig cfg;
  cfg.kernel = spec;
  cfg.bins = {8};
  cfg.seed = 5;
  const LotResult r = leave_one_out_run(d.snapshots, 1, cfg);
  CHECK(leave_one_out_run(d.snapshots, 1, cfg).predicted == r.predicted);
  cfg.samples = 7;
  CHECK(leave_one_out_run(d.snapshots, 1, cfg).predicted.rows() == 7);

  CHECK_THROWS_CODE(leave_one_out_run(d.snapshots, 0, cfg), ErrorCode::InvalidHoldOut);
  CHECK_THROWS_CODE(leave_one_out_run(d.snapshots, 2, cfg), ErrorCode::InvalidHoldOut);
  CHECK_THROWS_CODE(interpolation_baseline(d.snapshots, 2), ErrorCode::InvalidHoldOut);
}

TEST_CASE("leave one out on a duplicated step") {
  // step 1 repeats step 0 a moment later; the inferred cloud should sit on it
  const auto spec = KernelSpec::matern(1.5, 1.0, {1.0});
  const Dataset d = generate_matern_dataset(spec, TimeGrid::uniform(1, 1.0), 30, 3);
  std::vector<Matrix> sup = {d.snapshots.supports[0], d.snapshots.supports[0], d.snapshots.supports[1]};
  SnapshotSet s = make_uniform_snapshots(sup, 1.0);
  s.grid = TimeGrid({0.0, 0.01, 1.0});
  // nudge the duplicate so the support points stay distinct within the solver
  s.supports[1].array() += 1e-4;
  LotConfig cfg;
  cfg.kernel = spec;
  cfg.bins = {16};
  const LotResult r = leave_one_out_run(s, 1, cfg);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix noise(30, 1);
  for (int i = 0; i < 30; ++i) noise(i, 0) = n(rng);
  CHECK(r.score.w1 < wasserstein1(noise, s.supports[1]));
  CHECK(r.score.w1 < 0.1);
}
