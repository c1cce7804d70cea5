#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "ssb/marginals.hpp"

using namespace ssb;

TEST_CASE("CSV without weights gives uniform marginals") {
  std::istringstream in("t_index,dim_0,dim_1\n0,0.0,1.0\n0,2.0,1.0\n1,0.5,0.5\n1,1.5,0.5\n1,3.0,3.0\n");
  const Dataset d = read_snapshots_csv(in);
  CHECK(d.snapshots.steps() == 2);
  CHECK(d.snapshots.dim() == 2);
  CHECK(d.snapshots.weights[1][2] == doctest::Approx(1.0 / 3.0));
  CHECK(d.snapshots.grid[1] == doctest::Approx(2.0));
  CHECK_FALSE(d.truth.has_value());
}

TEST_CASE("CSV weights and labels are preserved") {
  std::istringstream in("t_index,dim_0,weight,label\n0,0.0,0.25,1\n0,1.0,0.75,0\n1,0.0,0.5,0\n1,1.0,0.5,1\n");
  const Dataset d = read_snapshots_csv(in, 1.0);
  CHECK(d.snapshots.weights[0][0] == 0.25);
  CHECK(d.snapshots.weights[0][1] == 0.75);
  REQUIRE(d.truth.has_value());
  CHECK(d.truth->labels[0] == std::vector<int>{1, 0});
  CHECK(d.truth->index_of(1, 1) == 1);
}

TEST_CASE("CSV metadata lines are skipped") {
  std::istringstream in("# config_hash=abc\n#x\nt_index,dim_0\n0,1.0\n# mid\n1,2.0\n");
  const Dataset d = read_snapshots_csv(in);
  CHECK(d.snapshots.steps() == 2);
  CHECK(d.snapshots.supports[1](0, 0) == 2.0);
}

TEST_CASE("CSV errors") {
  {
    std::istringstream in("t_index,dim_0\n0,1.0\n0,1.0\n1,2.0\n");
    CHECK_THROWS_CODE(read_snapshots_csv(in), ErrorCode::DuplicatePoint);
  }
  {
    std::istringstream in("t_index,dim_0\n0,1.0\n1,abc\n");
    CHECK_THROWS_CODE(read_snapshots_csv(in), ErrorCode::ParseError);
  }
  {
    std::istringstream in("t_index,dim_0,dim_1\n0,1.0,2.0\n1,2.0\n");
    CHECK_THROWS_CODE(read_snapshots_csv(in), ErrorCode::InconsistentDimension);
  }
  {
    std::istringstream in("t_index,dim_0,weight\n0,1.0,0.5\n0,2.0,0.4\n1,2.0,1.0\n");
    CHECK_THROWS_CODE(read_snapshots_csv(in), ErrorCode::InvalidArgument);
  }
  {
    std::istringstream in("t_index,dim_0\n0,1.0\n2,2.0\n");
    CHECK_THROWS_CODE(read_snapshots_csv(in), ErrorCode::ParseError);
  }
  CHECK_THROWS_CODE(load_snapshots("/nonexistent/file.csv"), ErrorCode::IoError);
}

TEST_CASE("save and load round trip") {
  const auto spec = KernelSpec::matern(1.5, 1.0, {1.0, 0.5});
  const Dataset d = generate_matern_dataset(spec, TimeGrid::uniform(3, 2.0), 5, 9);
  const std::string path = "test_marginals_roundtrip.csv";
  save_snapshots(path, d, true);
  const Dataset back = load_snapshots(path);
  std::remove(path.c_str());
  REQUIRE(back.snapshots.steps() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(back.snapshots.supports[static_cast<std::size_t>(k)] == d.snapshots.supports[static_cast<std::size_t>(k)]);
    CHECK(back.snapshots.weights[static_cast<std::size_t>(k)] == d.snapshots.weights[static_cast<std::size_t>(k)]);
  }
  CHECK(back.truth->labels == d.truth->labels);
}

TEST_CASE("generators are deterministic and label permutations") {
  const auto spec = KernelSpec::matern(3.5, 1.0, {1.0, 1.0});
  const auto grid = TimeGrid::uniform(20, 2.0);
  const Dataset a = generate_matern_dataset(spec, grid, 25, 3);
  const Dataset b = generate_matern_dataset(spec, grid, 25, 3);
  const Dataset c = generate_matern_dataset(spec, grid, 25, 4);
  CHECK(a.snapshots.supports[7] == b.snapshots.supports[7]);
  CHECK(a.truth->labels == b.truth->labels);
  CHECK(a.snapshots.supports[7] != c.snapshots.supports[7]);
  CHECK_NOTHROW(a.truth->validate(a.snapshots));
  CHECK(a.snapshots.steps() == 21);
  CHECK(a.snapshots.size(0) == 25);

  const Dataset t = generate_tristable_dataset(30, 10, 1);
  CHECK_NOTHROW(t.truth->validate(t.snapshots));
  const Dataset nb = generate_nbody_dataset(NBodyConfig{}, 2);
  CHECK_NOTHROW(nb.truth->validate(nb.snapshots));
  CHECK(nb.snapshots.dim() == 3);
  CHECK(nb.snapshots.steps() == 51);
  CHECK(nb.snapshots.size(10) == 8);
}

TEST_CASE("ground truth follows a single particle") {
  // shuffled supports still trace continuous paths: a particle moves far less
  // between consecutive snapshots than the spread of the cloud
  const Dataset t = generate_tristable_dataset(20, 30, 5);
  for (int k = 0; k + 1 < t.snapshots.steps(); ++k)
    for (int id = 0; id < 20; ++id) {
      const int a = t.truth->index_of(k, id), b = t.truth->index_of(k + 1, id);
      const double step = (t.snapshots.supports[static_cast<std::size_t>(k)].row(a) -
                           t.snapshots.supports[static_cast<std::size_t>(k + 1)].row(b)).norm();
      CHECK(step < 0.5);
    }
}

TEST_CASE("tristable particles settle near an attractor") {
  const TristableField field;
  const auto att = field.attractors();
  REQUIRE(att.size() == 3);
  for (const auto& a : att) CHECK(field.drift(a).norm() < 1e-10);
  const Dataset t = generate_tristable_dataset(50, 10, 7, field);
  const Matrix& last = t.snapshots.supports.back();
  for (int i = 0; i < last.rows(); ++i) {
    double best = 1e9;
    for (const auto& a : att) best = std::min(best, (last.row(i).transpose() - a).norm());
    CHECK(best < 0.1);
  }
}

TEST_CASE("n-body orbits conserve energy") {
  const auto e = nbody_orbit_energies(NBodyConfig{}, 0);
  REQUIRE(e.size() == 51);
  for (std::size_t p = 0; p < e[0].size(); ++p)
    for (const auto& step : e) CHECK(std::abs(step[p] - e[0][p]) < 1e-6);
}

TEST_CASE("Matern generator has the prior standard deviation") {
  const double sigma = 2.0;
  const Dataset d = generate_matern_dataset(KernelSpec::matern(1.5, 0.5, {sigma}), TimeGrid::uniform(4, 2.0), 4000, 1);
  for (const Matrix& s : d.snapshots.supports) {
    const double mean = s.col(0).mean();
    const double sd = std::sqrt((s.col(0).array() - mean).square().mean());
    CHECK(std::abs(sd - sigma) < 3.0 * sigma / std::sqrt(2.0 * 4000));
  }
  const auto pooled = d.snapshots.pooled_std();
  CHECK(pooled[0] == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("dropping a step") {
  const SnapshotSet s = fx::line({{0.0}, {1.0, 2.0}, {3.0}});
  const SnapshotSet r = s.without_step(1);
  CHECK(r.steps() == 2);
  CHECK(r.grid[1] == doctest::Approx(2.0));
  CHECK(r.size(1) == 1);
}
