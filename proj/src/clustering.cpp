#include "asa/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "asa/rng.hpp"

namespace asa::clustering {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

void check_points(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw std::invalid_argument("kmeans: no points");
  const std::size_t dim = points[0].size();
  if (dim == 0) throw std::invalid_argument("kmeans: zero-dimensional points");
  for (const auto& p : points)
    if (p.size() != dim)
      throw std::invalid_argument("kmeans: ragged point dimensions");
}

// k-means++ seeding: first centroid uniform, the rest D^2-weighted.
std::vector<std::vector<double>> seed_centroids(
    const std::vector<std::vector<double>>& points, int k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(points[rng.bounded(n)]);
  std::vector<double> d2(n);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& cent : centroids)
        best = std::min(best, sq_dist(points[i], cent));
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total <= 0.0) {
      // All mass on existing centroids (duplicate points): fall back to a
      // uniform draw so seeding still terminates.
      pick = rng.bounded(n);
    } else {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

// Nearest centroid, ties to the lowest cluster id.
int assign_one(const std::vector<double>& p,
               const std::vector<std::vector<double>>& centroids,
               double* dist_out) {
  int best = 0;
  double best_d = sq_dist(p, centroids[0]);
  for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
    const double d = sq_dist(p, centroids[static_cast<std::size_t>(c)]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

void recompute_centroids_objective(ClusterAssignment& a,
                                   const std::vector<std::vector<double>>& points) {
  const std::size_t dim = points[0].size();
  for (int c = 0; c < a.k; ++c) {
    std::vector<double> sum(dim, 0.0);
    int count = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (a.labels[i] != c) continue;
      for (std::size_t j = 0; j < dim; ++j) sum[j] += points[i][j];
      ++count;
    }
    if (count > 0) {
      for (auto& v : sum) v /= count;
      a.centroids[static_cast<std::size_t>(c)] = std::move(sum);
    }
  }
  double obj = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    obj += sq_dist(points[i], a.centroids[static_cast<std::size_t>(a.labels[i])]);
  a.objective = obj;
}

}  // namespace

ClusterAssignment kmeans(const std::vector<std::vector<double>>& points, int k,
                         std::uint64_t seed, int max_iter, double tol) {
  check_points(points);
  const int n = static_cast<int>(points.size());
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > n) throw std::invalid_argument("kmeans: k exceeds point count");
  if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");

  Rng rng(derive_seed(seed, StreamTag::Cluster));
  ClusterAssignment a;
  a.k = k;
  a.centroids = seed_centroids(points, k, rng);
  a.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  std::vector<std::uint8_t> moved(static_cast<std::size_t>(n), 0);

  for (int it = 0; it < max_iter; ++it) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const int c = assign_one(points[static_cast<std::size_t>(i)], a.centroids,
                               &dist[static_cast<std::size_t>(i)]);
      moved[static_cast<std::size_t>(i)] =
          c != a.labels[static_cast<std::size_t>(i)] ? 1 : 0;
      a.labels[static_cast<std::size_t>(i)] = c;
    }
    const bool changed =
        std::find(moved.begin(), moved.end(), std::uint8_t{1}) != moved.end();
    a.assign_distance_evals +=
        static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(k);
    a.objective =
        std::accumulate(dist.begin(), dist.end(), 0.0);
    a.objective_history.push_back(a.objective);
    a.iterations_used = it + 1;

    const std::size_t dim = points[0].size();
    double max_shift2 = 0.0;
    for (int c = 0; c < k; ++c) {
      std::vector<double> sum(dim, 0.0);
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (a.labels[static_cast<std::size_t>(i)] != c) continue;
        const auto& p = points[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < dim; ++j) sum[j] += p[j];
        ++count;
      }
      if (count == 0) continue;  // empty cluster keeps its centroid
      for (auto& v : sum) v /= count;
      max_shift2 =
          std::max(max_shift2, sq_dist(sum, a.centroids[static_cast<std::size_t>(c)]));
      a.centroids[static_cast<std::size_t>(c)] = std::move(sum);
    }
    if (!changed && it > 0) break;
    if (max_shift2 <= tol * tol) {
      // Final assignment against the settled centroids.
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) {
        a.labels[static_cast<std::size_t>(i)] = assign_one(
            points[static_cast<std::size_t>(i)], a.centroids,
            &dist[static_cast<std::size_t>(i)]);
      }
      a.assign_distance_evals +=
          static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(k);
      a.objective = std::accumulate(dist.begin(), dist.end(), 0.0);
      a.objective_history.push_back(a.objective);
      ++a.iterations_used;
      break;
    }
  }
  return a;
}

void repair_min_size(ClusterAssignment& a,
                     const std::vector<std::vector<double>>& points,
                     int n_min) {
  if (n_min < 1) throw std::invalid_argument("repair: n_min must be >= 1");
  const int n = static_cast<int>(points.size());
  if (a.k * n_min > n)
    throw std::invalid_argument("repair: k * n_min exceeds device count");

  std::vector<int> size(static_cast<std::size_t>(a.k), 0);
  for (int l : a.labels) ++size[static_cast<std::size_t>(l)];

  for (int recv = 0; recv < a.k; ++recv) {
    while (size[static_cast<std::size_t>(recv)] < n_min) {
      // Donor: largest cluster that stays at or above n_min after the move;
      // ties break to the lowest id.
      int donor = -1;
      for (int c = 0; c < a.k; ++c) {
        if (c == recv || size[static_cast<std::size_t>(c)] <= n_min) continue;
        if (donor < 0 ||
            size[static_cast<std::size_t>(c)] > size[static_cast<std::size_t>(donor)])
          donor = c;
      }
      if (donor < 0)
        throw std::runtime_error("repair: no donor cluster available");
      // Move the donor member closest to the receiving centroid.
      int pick = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (a.labels[static_cast<std::size_t>(i)] != donor) continue;
        const double d = sq_dist(points[static_cast<std::size_t>(i)],
                                 a.centroids[static_cast<std::size_t>(recv)]);
        if (d < best) {
          best = d;
          pick = i;
        }
      }
      a.labels[static_cast<std::size_t>(pick)] = recv;
      --size[static_cast<std::size_t>(donor)];
      ++size[static_cast<std::size_t>(recv)];
      a.repairs.push_back({pick, donor, recv});
    }
  }
  if (!a.repairs.empty()) recompute_centroids_objective(a, points);
}

const char* tier_name(Tier t) {
  switch (t) {
    case Tier::High: return "high";
    case Tier::Mid: return "mid";
    case Tier::Low: return "low";
  }
  return "?";
}

std::array<Tier, 3> map_tiers(const ClusterAssignment& a,
                              const std::vector<double>& scores) {
  if (a.k != 3) throw std::invalid_argument("map_tiers: requires k == 3");
  if (scores.size() != a.labels.size())
    throw std::invalid_argument("map_tiers: score/label size mismatch");
  std::array<double, 3> mean{};
  std::array<int, 3> count{};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    mean[static_cast<std::size_t>(a.labels[i])] += scores[i];
    ++count[static_cast<std::size_t>(a.labels[i])];
  }
  for (int c = 0; c < 3; ++c)
    if (count[static_cast<std::size_t>(c)] > 0)
      mean[static_cast<std::size_t>(c)] /= count[static_cast<std::size_t>(c)];
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return mean[static_cast<std::size_t>(x)] > mean[static_cast<std::size_t>(y)];
  });
  std::array<Tier, 3> tiers{};
  for (int rank = 0; rank < 3; ++rank)
    tiers[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] =
        static_cast<Tier>(rank);
  return tiers;
}

ConstraintReport check_constraints(
    const std::vector<std::vector<int>>& x,
    const std::vector<std::vector<double>>& u, const std::vector<Task>& tasks,
    const std::vector<double>& caps, const std::vector<int>& labels, int k,
    const std::vector<double>& delays, const ConstraintParams& params) {
  const std::size_t n = caps.size();
  if (x.size() != n || u.size() != n || labels.size() != n ||
      delays.size() != n)
    throw std::invalid_argument("check_constraints: size mismatch");
  const std::size_t m = tasks.size();
  for (std::size_t i = 0; i < n; ++i)
    if (x[i].size() != m || u[i].size() != m)
      throw std::invalid_argument("check_constraints: ragged allocation");

  ConstraintReport r;
  r.device_load.assign(n, 0.0);
  const double inf = std::numeric_limits<double>::infinity();

  // C1: allocated load within capacity.
  r.c1_capacity = true;
  r.c1_margin = inf;
  for (std::size_t i = 0; i < n; ++i) {
    double load = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      load += tasks[j].demand * u[i][j] * x[i][j];
    r.device_load[i] = load;
    const double slack = caps[i] - load;
    r.c1_margin = std::min(r.c1_margin, slack);
    if (slack < 0.0) {
      r.c1_capacity = false;
      r.c1_violators.push_back(static_cast<int>(i));
    }
  }

  // C2: cluster sizes.
  std::vector<int> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) {
    if (l < 0 || l >= k)
      throw std::invalid_argument("check_constraints: label out of range");
    ++size[static_cast<std::size_t>(l)];
  }
  r.c2_min_size = true;
  r.c2_margin = inf;
  for (int c = 0; c < k; ++c) {
    const double slack = size[static_cast<std::size_t>(c)] - params.n_min;
    r.c2_margin = std::min(r.c2_margin, slack);
    if (slack < 0.0) {
      r.c2_min_size = false;
      r.c2_violators.push_back(c);
    }
  }

  // C3: expected delay.
  r.c3_delay = true;
  r.c3_margin = inf;
  for (std::size_t i = 0; i < n; ++i) {
    const double slack = params.tau_max - delays[i];
    r.c3_margin = std::min(r.c3_margin, slack);
    if (slack < 0.0) {
      r.c3_delay = false;
      r.c3_violators.push_back(static_cast<int>(i));
    }
  }

  // C4: per-cluster population variance of device load.
  r.cluster_load_variance.assign(static_cast<std::size_t>(k), 0.0);
  r.c4_load_variance = true;
  r.c4_margin = inf;
  for (int c = 0; c < k; ++c) {
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == c) {
        sum += r.device_load[i];
        ++cnt;
      }
    double var = 0.0;
    if (cnt > 0) {
      const double mean = sum / cnt;
      for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == c) {
          const double d = r.device_load[i] - mean;
          var += d * d;
        }
      var /= cnt;
    }
    r.cluster_load_variance[static_cast<std::size_t>(c)] = var;
    const double slack = params.sigma2_max - var;
    r.c4_margin = std::min(r.c4_margin, slack);
    if (slack < 0.0) {
      r.c4_load_variance = false;
      r.c4_violators.push_back(c);
    }
  }
  return r;
}

Allocation greedy_allocate(const std::vector<Task>& tasks,
                           const std::vector<double>& caps,
                           const std::vector<double>& scores) {
  if (caps.size() != scores.size())
    throw std::invalid_argument("greedy_allocate: caps/scores size mismatch");
  const std::size_t n = caps.size(), m = tasks.size();
  for (const auto& t : tasks)
    if (!(t.demand >= 0.0))
      throw std::invalid_argument("greedy_allocate: demands must be >= 0");

  Allocation alloc;
  alloc.x.assign(n, std::vector<int>(m, 0));
  alloc.u.assign(n, std::vector<double>(m, 0.0));
  alloc.residual = caps;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tasks[a].demand > tasks[b].demand;
  });

  for (const std::size_t j : order) {
    int pick = -1;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (alloc.residual[i] + 1e-12 < tasks[j].demand) continue;
      const double pref = alloc.residual[i] * scores[i];
      if (pref > best + 1e-15) {
        best = pref;
        pick = static_cast<int>(i);
      }
    }
    if (pick < 0) {
      alloc.unassigned.push_back(static_cast<int>(j));
      continue;
    }
    alloc.x[static_cast<std::size_t>(pick)][j] = 1;
    alloc.u[static_cast<std::size_t>(pick)][j] = 1.0;
    alloc.residual[static_cast<std::size_t>(pick)] -= tasks[j].demand;
  }
  std::sort(alloc.unassigned.begin(), alloc.unassigned.end());
  return alloc;
}

std::string assignment_to_csv(const ClusterAssignment& a,
                              const std::array<Tier, 3>& tiers,
                              const std::vector<double>& scores) {
  if (scores.size() != a.labels.size())
    throw std::invalid_argument("assignment csv: score/label size mismatch");
  std::ostringstream out;
  out << "device_id,cluster_id,tier,score\n";
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", scores[i]);
    out << i << ',' << a.labels[i] << ','
        << tier_name(tiers[static_cast<std::size_t>(a.labels[i])]) << ','
        << buf << '\n';
  }
  return out.str();
}

}  // namespace asa::clustering
