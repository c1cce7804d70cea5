#include "ssb/assignment.hpp"

#include <algorithm>
#include <limits>

#include "ssb/error.hpp"

namespace ssb {

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  require(n <= m, ErrorCode::InvalidArgument, "assignment needs rows <= cols");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[js];
        if (cur < minv[js]) {
          minv[js] = cur;
          way[js] = j0;
        }
        if (minv[js] < delta) {
          delta = minv[js];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) {
          u[static_cast<std::size_t>(p[js])] += delta;
          v[js] -= delta;
        } else {
          minv[js] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.col_of_row.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0) out.col_of_row[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  for (int i = 0; i < n; ++i) out.cost += cost(i, out.col_of_row[static_cast<std::size_t>(i)]);
  return out;
}

Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> solve_transport(
    const Eigen::MatrixXd& cost, const std::vector<std::int64_t>& supply,
    const std::vector<std::int64_t>& demand) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  require(static_cast<int>(supply.size()) == n && static_cast<int>(demand.size()) == m,
          ErrorCode::InvalidArgument, "supply/demand sizes do not match the cost matrix");
  std::int64_t total_s = 0, total_d = 0;
  for (auto s : supply) total_s += s;
  for (auto d : demand) total_d += d;
  require(total_s == total_d, ErrorCode::InvalidArgument, "supply and demand totals differ");

  const double shift = n > 0 && m > 0 ? cost.minCoeff() : 0.0;
  Eigen::MatrixXd c = cost.array() - shift;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> flow =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, m);
  std::vector<std::int64_t> srem(supply), drem(demand);

  // nodes: 0 = source, 1..n rows, n+1..n+m columns, n+m+1 sink
  const int nodes = n + m + 2;
  const int sink = n + m + 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> pot(static_cast<std::size_t>(nodes), 0.0), dist(static_cast<std::size_t>(nodes));
  std::vector<int> prev(static_cast<std::size_t>(nodes));
  std::vector<char> done(static_cast<std::size_t>(nodes));
  std::int64_t remaining = total_s;

  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    dist[0] = 0.0;
    for (;;) {
      int u = -1;
      for (int w = 0; w < nodes; ++w)
        if (!done[static_cast<std::size_t>(w)] && dist[static_cast<std::size_t>(w)] < inf &&
            (u < 0 || dist[static_cast<std::size_t>(w)] < dist[static_cast<std::size_t>(u)]))
          u = w;
      if (u < 0) break;
      done[static_cast<std::size_t>(u)] = 1;
      const double du = dist[static_cast<std::size_t>(u)];
      auto relax = [&](int w, double edge) {
        const double nd = du + std::max(0.0, edge + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(w)]);
        if (nd < dist[static_cast<std::size_t>(w)]) {
          dist[static_cast<std::size_t>(w)] = nd;
          prev[static_cast<std::size_t>(w)] = u;
        }
      };
      if (u == 0) {
        for (int i = 0; i < n; ++i)
          if (srem[static_cast<std::size_t>(i)] > 0) relax(1 + i, 0.0);
      } else if (u <= n) {
        const int i = u - 1;
        for (int j = 0; j < m; ++j) relax(n + 1 + j, c(i, j));
      } else if (u < sink) {
        const int j = u - n - 1;
        for (int i = 0; i < n; ++i)
          if (flow(i, j) > 0) relax(1 + i, -c(i, j));
        if (drem[static_cast<std::size_t>(j)] > 0) relax(sink, 0.0);
      }
    }
    require(dist[static_cast<std::size_t>(sink)] < inf, ErrorCode::InvalidArgument, "transport problem infeasible");
    for (int w = 0; w < nodes; ++w)
      pot[static_cast<std::size_t>(w)] += std::min(dist[static_cast<std::size_t>(w)], dist[static_cast<std::size_t>(sink)]);

    // bottleneck along the path
    std::int64_t push = std::numeric_limits<std::int64_t>::max();
    for (int w = sink; w != 0; w = prev[static_cast<std::size_t>(w)]) {
      const int u = prev[static_cast<std::size_t>(w)];
      if (w == sink) push = std::min(push, drem[static_cast<std::size_t>(u - n - 1)]);
      else if (u == 0) push = std::min(push, srem[static_cast<std::size_t>(w - 1)]);
      else if (u > n) push = std::min(push, flow(w - 1, u - n - 1));
    }
    for (int w = sink; w != 0; w = prev[static_cast<std::size_t>(w)]) {
      const int u = prev[static_cast<std::size_t>(w)];
      if (w == sink) drem[static_cast<std::size_t>(u - n - 1)] -= push;
      else if (u == 0) srem[static_cast<std::size_t>(w - 1)] -= push;
      else if (u <= n) flow(u - 1, w - n - 1) += push;
      else flow(w - 1, u - n - 1) -= push;
    }
    remaining -= push;
  }
  return flow;
}

}  // namespace ssb
