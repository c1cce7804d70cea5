#include "ssb/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ssb/error.hpp"

namespace ssb {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

double parse_double(const std::string& s, std::size_t row) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, "row " + std::to_string(row) + ": bad number '" + s + "'");
  }
  if (used != s.size())
    fail(ErrorCode::ParseError, "row " + std::to_string(row) + ": bad number '" + s + "'");
  return v;
}

long parse_int(const std::string& s, std::size_t row) {
  const double v = parse_double(s, row);
  if (v != std::floor(v))
    fail(ErrorCode::ParseError, "row " + std::to_string(row) + ": expected integer '" + s + "'");
  return static_cast<long>(v);
}

std::vector<int> shuffled_identity(int n, std::mt19937_64& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// Places trajectory rows positions[k] (row = particle id) into a dataset with
// the support order shuffled per step.
Dataset assemble(const std::vector<Matrix>& positions, double horizon, std::mt19937_64& rng) {
  Dataset data;
  GroundTruth truth;
  std::vector<Matrix> supports;
  for (const Matrix& pos : positions) {
    const int n = static_cast<int>(pos.rows());
    const auto perm = shuffled_identity(n, rng);  // support index x holds particle perm[x]
    Matrix s(n, pos.cols());
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
      s.row(x) = pos.row(perm[static_cast<std::size_t>(x)]);
      labels[static_cast<std::size_t>(x)] = perm[static_cast<std::size_t>(x)];
    }
    supports.push_back(std::move(s));
    truth.labels.push_back(std::move(labels));
  }
  data.snapshots = make_uniform_snapshots(std::move(supports), horizon);
  data.truth = std::move(truth);
  return data;
}

}  // namespace

int SnapshotSet::max_size() const {
  int n = 0;
  for (int k = 0; k < steps(); ++k) n = std::max(n, size(k));
  return n;
}

void SnapshotSet::validate() const {
  require(steps() >= 2, ErrorCode::InvalidArgument, "need at least two snapshots");
  require(grid.size() == steps(), ErrorCode::InvalidArgument, "grid and supports disagree");
  require(weights.size() == supports.size(), ErrorCode::InvalidArgument, "weights missing");
  const int d = dim();
  require(d >= 1, ErrorCode::InconsistentDimension, "dimension must be >= 1");
  for (int k = 0; k < steps(); ++k) {
    const Matrix& s = supports[static_cast<std::size_t>(k)];
    const Vector& w = weights[static_cast<std::size_t>(k)];
    require(s.cols() == d, ErrorCode::InconsistentDimension,
            "step " + std::to_string(k) + " has a different dimension");
    require(s.rows() >= 1, ErrorCode::InvalidArgument, "empty support at step " + std::to_string(k));
    require(w.size() == s.rows(), ErrorCode::InvalidArgument, "weight count mismatch");
    require(w.minCoeff() >= 0.0, ErrorCode::InvalidArgument, "negative weight");
    require(std::abs(w.sum() - 1.0) <= 1e-12, ErrorCode::InvalidArgument,
            "weights at step " + std::to_string(k) + " do not sum to 1");
    std::set<std::vector<double>> seen;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      std::vector<double> p(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) p[static_cast<std::size_t>(j)] = s(r, j);
      if (!seen.insert(p).second)
        fail(ErrorCode::DuplicatePoint, "duplicate support point at step " + std::to_string(k));
    }
  }
}

std::vector<double> SnapshotSet::pooled_std() const {
  const int d = dim();
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (int j = 0; j < d; ++j) {
    double sum = 0.0, sq = 0.0;
    long count = 0;
    for (const Matrix& s : supports) {
      sum += s.col(j).sum();
      sq += s.col(j).squaredNorm();
      count += s.rows();
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
    out[static_cast<std::size_t>(j)] = std::sqrt(var);
  }
  return out;
}

SnapshotSet SnapshotSet::without_step(int k) const {
  require(k >= 0 && k < steps(), ErrorCode::InvalidArgument, "step out of range");
  SnapshotSet out;
  out.grid = grid.without(k);
  out.supports = supports;
  out.weights = weights;
  out.supports.erase(out.supports.begin() + k);
  out.weights.erase(out.weights.begin() + k);
  return out;
}

void GroundTruth::validate(const SnapshotSet& snapshots) const {
  require(static_cast<int>(labels.size()) == snapshots.steps(), ErrorCode::InvalidArgument,
          "ground truth must label every step");
  for (int k = 0; k < snapshots.steps(); ++k) {
    auto l = labels[static_cast<std::size_t>(k)];
    require(static_cast<int>(l.size()) == snapshots.size(k), ErrorCode::InvalidArgument,
            "label count mismatch at step " + std::to_string(k));
    std::sort(l.begin(), l.end());
    for (std::size_t i = 0; i < l.size(); ++i)
      require(l[i] == static_cast<int>(i), ErrorCode::InvalidArgument,
              "labels at step " + std::to_string(k) + " are not a permutation");
  }
}

int GroundTruth::index_of(int k, int id) const {
  const auto& l = labels[static_cast<std::size_t>(k)];
  const auto it = std::find(l.begin(), l.end(), id);
  return it == l.end() ? -1 : static_cast<int>(it - l.begin());
}

SnapshotSet make_uniform_snapshots(std::vector<Matrix> supports, double horizon) {
  SnapshotSet s;
  s.grid = TimeGrid::uniform(static_cast<int>(supports.size()) - 1, horizon);
  for (const Matrix& m : supports) {
    const auto n = m.rows();
    s.weights.push_back(Vector::Constant(n, 1.0 / static_cast<double>(n)));
  }
  s.supports = std::move(supports);
  s.validate();
  return s;
}

Dataset read_snapshots_csv(std::istream& in, double horizon) {
  std::string line;
  std::size_t row = 0;
  // leading '#' lines carry metadata
  do {
    if (!std::getline(in, line)) fail(ErrorCode::ParseError, "row " + std::to_string(row + 1) + ": missing header");
    ++row;
  } while (trim(line).starts_with('#'));
  const auto header = split_csv_line(trim(line));
  require(!header.empty() && trim(header[0]) == "t_index", ErrorCode::ParseError,
          "row " + std::to_string(row) + ": header must start with t_index");
  int d = 0;
  int weight_col = -1, label_col = -1;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string h = trim(header[c]);
    if (h == "dim_" + std::to_string(d) && weight_col < 0 && label_col < 0) {
      ++d;
    } else if (h == "weight" && weight_col < 0 && label_col < 0) {
      weight_col = static_cast<int>(c);
    } else if (h == "label" && label_col < 0) {
      label_col = static_cast<int>(c);
    } else {
      fail(ErrorCode::ParseError, "row " + std::to_string(row) + ": unexpected column '" + h + "'");
    }
  }
  require(d >= 1, ErrorCode::InconsistentDimension, "row " + std::to_string(row) + ": no dim_ columns");

  std::map<long, std::vector<std::vector<double>>> points;
  std::map<long, std::vector<double>> weights;
  std::map<long, std::vector<int>> labels;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty() || line.starts_with('#')) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorCode::InconsistentDimension, "row " + std::to_string(row) + ": expected " +
                                                 std::to_string(header.size()) + " columns");
    const long t = parse_int(trim(cells[0]), row);
    if (t < 0) fail(ErrorCode::ParseError, "row " + std::to_string(row) + ": negative t_index");
    std::vector<double> p(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) p[static_cast<std::size_t>(j)] = parse_double(trim(cells[static_cast<std::size_t>(j + 1)]), row);
    points[t].push_back(std::move(p));
    if (weight_col >= 0) weights[t].push_back(parse_double(trim(cells[static_cast<std::size_t>(weight_col)]), row));
    if (label_col >= 0) labels[t].push_back(static_cast<int>(parse_int(trim(cells[static_cast<std::size_t>(label_col)]), row)));
  }
  require(!points.empty(), ErrorCode::ParseError, "no data rows");
  const long last = points.rbegin()->first;
  for (long t = 0; t <= last; ++t)
    if (!points.count(t)) fail(ErrorCode::ParseError, "t_index " + std::to_string(t) + " has no rows");

  Dataset data;
  std::vector<Matrix> supports;
  for (long t = 0; t <= last; ++t) {
    const auto& pts = points[t];
    Matrix m(static_cast<Eigen::Index>(pts.size()), d);
    for (std::size_t r = 0; r < pts.size(); ++r)
      for (int j = 0; j < d; ++j) m(static_cast<Eigen::Index>(r), j) = pts[r][static_cast<std::size_t>(j)];
    supports.push_back(std::move(m));
  }
  data.snapshots.grid = TimeGrid::uniform(static_cast<int>(last), horizon);
  for (long t = 0; t <= last; ++t) {
    const auto n = static_cast<Eigen::Index>(points[t].size());
    if (weight_col >= 0) {
      data.snapshots.weights.push_back(Eigen::Map<const Vector>(weights[t].data(), n));
    } else {
      data.snapshots.weights.push_back(Vector::Constant(n, 1.0 / static_cast<double>(n)));
    }
  }
  data.snapshots.supports = std::move(supports);
  data.snapshots.validate();
  if (label_col >= 0) {
    GroundTruth truth;
    for (long t = 0; t <= last; ++t) truth.labels.push_back(labels[t]);
    truth.validate(data.snapshots);
    data.truth = std::move(truth);
  }
  return data;
}

Dataset load_snapshots(const std::string& path, double horizon) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  return read_snapshots_csv(in, horizon);
}

void write_snapshots_csv(std::ostream& out, const Dataset& data, bool write_weights) {
  const auto& s = data.snapshots;
  out << "t_index";
  for (int j = 0; j < s.dim(); ++j) out << ",dim_" << j;
  if (write_weights) out << ",weight";
  if (data.truth) out << ",label";
  out << '\n';
  out << std::setprecision(17);
  for (int k = 0; k < s.steps(); ++k) {
    for (int x = 0; x < s.size(k); ++x) {
      out << k;
      for (int j = 0; j < s.dim(); ++j) out << ',' << s.supports[static_cast<std::size_t>(k)](x, j);
      if (write_weights) out << ',' << s.weights[static_cast<std::size_t>(k)][x];
      if (data.truth) out << ',' << data.truth->labels[static_cast<std::size_t>(k)][static_cast<std::size_t>(x)];
      out << '\n';
    }
  }
}

void save_snapshots(const std::string& path, const Dataset& data, bool write_weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  write_snapshots_csv(out, data, write_weights);
}

Dataset generate_matern_dataset(const KernelSpec& spec, const TimeGrid& grid, int n_particles,
                                std::uint64_t seed) {
  require(n_particles >= 1, ErrorCode::InvalidArgument, "need at least one particle");
  const LiftedPrior prior = build_lifted_prior(spec, grid);
  const auto paths = sample_paths(prior, n_particles, seed);
  std::vector<Matrix> positions;
  for (int k = 0; k < grid.size(); ++k) {
    Matrix pos(n_particles, prior.dim());
    for (int p = 0; p < n_particles; ++p)
      pos.row(p) = paths[static_cast<std::size_t>(p)].states[static_cast<std::size_t>(k)].row(0);
    positions.push_back(std::move(pos));
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Dataset data = assemble(positions, grid[grid.size() - 1] - grid[0], rng);
  data.snapshots.grid = grid;
  return data;
}

// V(x) = -sum_a exp(-|x - a|^2 / (2 s^2)) over anchors a at 90, 210, 330 degrees;
// drift = -strength * grad V.
Vector TristableField::drift(const Vector& x) const {
  Vector f = Vector::Zero(2);
  const double s2 = well_width * well_width;
  for (int a = 0; a < 3; ++a) {
    const double ang = M_PI / 2.0 + a * 2.0 * M_PI / 3.0;
    Vector c(2);
    c << std::cos(ang), std::sin(ang);
    const Vector diff = c - x;
    f += diff * (std::exp(-diff.squaredNorm() / (2.0 * s2)) / s2);
  }
  return strength * f;
}

std::vector<Vector> TristableField::attractors() const {
  std::vector<Vector> out;
  const double s2 = well_width * well_width;
  for (int a = 0; a < 3; ++a) {
    const double ang = M_PI / 2.0 + a * 2.0 * M_PI / 3.0;
    Vector x(2);
    x << std::cos(ang), std::sin(ang);
    for (int it = 0; it < 50; ++it) {
      Vector grad = Vector::Zero(2);
      Matrix hess = Matrix::Zero(2, 2);
      for (int b = 0; b < 3; ++b) {
        const double bang = M_PI / 2.0 + b * 2.0 * M_PI / 3.0;
        Vector c(2);
        c << std::cos(bang), std::sin(bang);
        const Vector diff = x - c;
        const double w = std::exp(-diff.squaredNorm() / (2.0 * s2));
        grad += w * diff / s2;
        hess += w * (Matrix::Identity(2, 2) / s2 - diff * diff.transpose() / (s2 * s2));
      }
      const Vector step = hess.ldlt().solve(grad);
      x -= step;
      if (step.norm() < 1e-16) break;
    }
    out.push_back(x);
  }
  return out;
}

Dataset generate_tristable_dataset(int n, int intervals, std::uint64_t seed,
                                   const TristableField& field) {
  require(n >= 1 && intervals >= 1, ErrorCode::InvalidArgument, "n and K must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  std::vector<Vector> state(static_cast<std::size_t>(n), Vector::Zero(2));
  for (auto& x : state) x << normal(rng), normal(rng);

  const double h = field.sim_time / (intervals * field.substeps);
  std::vector<Matrix> positions;
  auto record = [&] {
    Matrix pos(n, 2);
    for (int p = 0; p < n; ++p) pos.row(p) = state[static_cast<std::size_t>(p)].transpose();
    positions.push_back(std::move(pos));
  };
  record();
  for (int k = 0; k < intervals; ++k) {
    for (auto& x : state) {
      for (int s = 0; s < field.substeps; ++s) {
        const Vector k1 = field.drift(x);
        const Vector k2 = field.drift(x + 0.5 * h * k1);
        const Vector k3 = field.drift(x + 0.5 * h * k2);
        const Vector k4 = field.drift(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
    record();
  }
  return assemble(positions, 2.0, rng);
}

namespace {

struct OrbitRun {
  std::vector<Matrix> positions;  // per snapshot, planets x 3
  std::vector<Matrix> velocities;
};

OrbitRun simulate_orbits(const NBodyConfig& cfg, std::uint64_t seed) {
  require(cfg.planets >= 1 && cfg.intervals >= 1 && cfg.substeps >= 1, ErrorCode::InvalidArgument,
          "bad n-body configuration");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int p = cfg.planets;
  Matrix pos(p, 3), vel(p, 3);
  for (int i = 0; i < p; ++i) {
    const double r = cfg.min_radius + (cfg.max_radius - cfg.min_radius) * unit(rng);
    const double inc = cfg.max_inclination * unit(rng);
    const double node = 2.0 * M_PI * unit(rng);
    const double phase = 2.0 * M_PI * unit(rng);
    // orbital plane basis: e1 along the node line, e2 inclined
    Eigen::Vector3d e1(std::cos(node), std::sin(node), 0.0);
    Eigen::Vector3d e2(-std::sin(node) * std::cos(inc), std::cos(node) * std::cos(inc), std::sin(inc));
    const double v = std::sqrt(1.0 / r);
    pos.row(i) = (r * (std::cos(phase) * e1 + std::sin(phase) * e2)).transpose();
    vel.row(i) = (v * (-std::sin(phase) * e1 + std::cos(phase) * e2)).transpose();
  }
  auto accel = [&](const Matrix& x) {
    Matrix a(p, 3);
    for (int i = 0; i < p; ++i) {
      const Eigen::RowVector3d xi = x.row(i);
      const double r = xi.norm();
      Eigen::RowVector3d acc = -xi / (r * r * r);
      if (cfg.planet_mass != 0.0) {
        for (int j = 0; j < p; ++j) {
          if (j == i) continue;
          const Eigen::RowVector3d d = x.row(j) - xi;
          const double dn = d.norm();
          acc += cfg.planet_mass * d / (dn * dn * dn);
        }
      }
      a.row(i) = acc;
    }
    return a;
  };

  OrbitRun run;
  run.positions.push_back(pos);
  run.velocities.push_back(vel);
  const double h = cfg.sim_time / (cfg.intervals * cfg.substeps);
  Matrix acc = accel(pos);
  for (int k = 0; k < cfg.intervals; ++k) {
    for (int s = 0; s < cfg.substeps; ++s) {
      vel += 0.5 * h * acc;
      pos += h * vel;
      acc = accel(pos);
      vel += 0.5 * h * acc;
    }
    run.positions.push_back(pos);
    run.velocities.push_back(vel);
  }
  return run;
}

}  // namespace

Dataset generate_nbody_dataset(const NBodyConfig& config, std::uint64_t seed) {
  const OrbitRun run = simulate_orbits(config, seed);
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  return assemble(run.positions, 2.0, rng);
}

std::vector<std::vector<double>> nbody_orbit_energies(const NBodyConfig& config,
                                                      std::uint64_t seed) {
  const OrbitRun run = simulate_orbits(config, seed);
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < run.positions.size(); ++k) {
    std::vector<double> e;
    for (int i = 0; i < config.planets; ++i)
      e.push_back(0.5 * run.velocities[k].row(i).squaredNorm() - 1.0 / run.positions[k].row(i).norm());
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ssb
