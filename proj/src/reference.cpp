#include "asa/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "asa/rng.hpp"

namespace asa::reference {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// Serial forward pass over all samples; per-sample math matches the parallel
// kernel term for term.
struct Activations {
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
};

void run_forward(const std::vector<models::LayerSpan>& spans,
                 const models::ParamVector& params,
                 const std::vector<double>& X, int n, Activations& act) {
  const int layers = static_cast<int>(spans.size());
  act.z.resize(static_cast<std::size_t>(layers));
  act.a.resize(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    act.z[static_cast<std::size_t>(l)].assign(
        static_cast<std::size_t>(n) *
            static_cast<std::size_t>(spans[static_cast<std::size_t>(l)].out),
        0.0);
    act.a[static_cast<std::size_t>(l)].assign(
        act.z[static_cast<std::size_t>(l)].size(), 0.0);
  }
  for (int s = 0; s < n; ++s) {
    for (int l = 0; l < layers; ++l) {
      const models::LayerSpan& sp = spans[static_cast<std::size_t>(l)];
      const double* in =
          (l == 0) ? &X[static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.in)]
                   : &act.a[static_cast<std::size_t>(l - 1)]
                           [static_cast<std::size_t>(s) *
                            static_cast<std::size_t>(sp.in)];
      double* z = &act.z[static_cast<std::size_t>(l)]
                        [static_cast<std::size_t>(s) *
                         static_cast<std::size_t>(sp.out)];
      double* a = &act.a[static_cast<std::size_t>(l)]
                        [static_cast<std::size_t>(s) *
                         static_cast<std::size_t>(sp.out)];
      for (int i = 0; i < sp.out; ++i) {
        double acc = static_cast<double>(
            params.values[sp.b_off + static_cast<std::size_t>(i)]);
        const float* w =
            &params.values[sp.w_off + static_cast<std::size_t>(i) *
                                          static_cast<std::size_t>(sp.in)];
        for (int j = 0; j < sp.in; ++j)
          acc += static_cast<double>(w[j]) * in[j];
        z[i] = acc;
        a[i] = (l == layers - 1) ? acc : (acc > 0.0 ? acc : 0.0);
      }
    }
  }
}

double softmax_loss(std::vector<double>& logits, const std::vector<int>& y,
                    int classes) {
  const int n = static_cast<int>(y.size());
  double loss = 0.0;
  for (int s = 0; s < n; ++s) {
    double* row =
        &logits[static_cast<std::size_t>(s) * static_cast<std::size_t>(classes)];
    double mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (int c = 0; c < classes; ++c) row[c] /= sum;
    loss += -std::log(std::max(row[y[static_cast<std::size_t>(s)]],
                               std::numeric_limits<double>::min()));
  }
  return loss / n;
}

const models::ModelArch& arch_of(const models::NestedModelFamily& family,
                                 int rung) {
  if (rung < 0 || rung >= models::kRungs)
    throw std::invalid_argument("rung out of range");
  return family.archs[static_cast<std::size_t>(rung)];
}

}  // namespace

models::ForwardResult forward(const models::NestedModelFamily& family,
                              const models::ParamVector& params,
                              const std::vector<double>& X,
                              const std::vector<int>& y) {
  const auto spans = models::layer_spans(arch_of(family, params.rung));
  const int n = static_cast<int>(y.size());
  Activations act;
  run_forward(spans, params, X, n, act);
  models::ForwardResult r;
  r.probs = std::move(act.z.back());
  r.loss = softmax_loss(r.probs, y, family.output_dim);
  return r;
}

models::BackwardResult backward(const models::NestedModelFamily& family,
                                const models::ParamVector& params,
                                const std::vector<double>& X,
                                const std::vector<int>& y) {
  const auto spans = models::layer_spans(arch_of(family, params.rung));
  const int layers = static_cast<int>(spans.size());
  const int n = static_cast<int>(y.size());
  Activations act;
  run_forward(spans, params, X, n, act);

  std::vector<double> probs = act.z.back();
  models::BackwardResult r;
  r.loss = softmax_loss(probs, y, family.output_dim);
  r.grad.assign(params.values.size(), 0.0);

  std::vector<double> delta = std::move(probs);
  const int classes = family.output_dim;
  for (int s = 0; s < n; ++s) {
    double* row =
        &delta[static_cast<std::size_t>(s) * static_cast<std::size_t>(classes)];
    for (int c = 0; c < classes; ++c) row[c] /= n;
    row[y[static_cast<std::size_t>(s)]] -= 1.0 / n;
  }

  for (int l = layers - 1; l >= 0; --l) {
    const models::LayerSpan& sp = spans[static_cast<std::size_t>(l)];
    const std::vector<double>& in_act =
        (l == 0) ? X : act.a[static_cast<std::size_t>(l - 1)];
    for (int i = 0; i < sp.out; ++i) {
      double* gw = &r.grad[sp.w_off + static_cast<std::size_t>(i) *
                                          static_cast<std::size_t>(sp.in)];
      double gb = 0.0;
      for (int s = 0; s < n; ++s) {
        const double d = delta[static_cast<std::size_t>(s) *
                                   static_cast<std::size_t>(sp.out) +
                               static_cast<std::size_t>(i)];
        gb += d;
        const double* a = &in_act[static_cast<std::size_t>(s) *
                                  static_cast<std::size_t>(sp.in)];
        for (int j = 0; j < sp.in; ++j) gw[j] += d * a[j];
      }
      r.grad[sp.b_off + static_cast<std::size_t>(i)] = gb;
    }
    if (l == 0) break;
    std::vector<double> prev(
        static_cast<std::size_t>(n) * static_cast<std::size_t>(sp.in), 0.0);
    const std::vector<double>& z_prev = act.z[static_cast<std::size_t>(l - 1)];
    for (int s = 0; s < n; ++s) {
      const double* d =
          &delta[static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.out)];
      double* p =
          &prev[static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.in)];
      const double* z =
          &z_prev[static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.in)];
      for (int j = 0; j < sp.in; ++j) {
        if (z[j] <= 0.0) continue;
        double acc = 0.0;
        for (int i = 0; i < sp.out; ++i)
          acc += static_cast<double>(
                     params.values[sp.w_off +
                                   static_cast<std::size_t>(i) *
                                       static_cast<std::size_t>(sp.in) +
                                   static_cast<std::size_t>(j)]) *
                 d[i];
        p[j] = acc;
      }
    }
    delta = std::move(prev);
  }
  return r;
}

namespace {

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

}  // namespace

std::vector<int> nearest_centroid(
    const std::vector<std::vector<double>>& points,
    const std::vector<std::vector<double>>& centroids) {
  std::vector<int> labels(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i)
    labels[i] = assign_one(points[i], centroids, nullptr);
  return labels;
}

clustering::ClusterAssignment kmeans(
    const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
    int max_iter, double tol) {
  if (points.empty()) throw std::invalid_argument("kmeans: no points");
  const int n = static_cast<int>(points.size());
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: bad k");
  if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");

  Rng rng(derive_seed(seed, StreamTag::Cluster));
  clustering::ClusterAssignment a;
  a.k = k;
  a.centroids = seed_centroids(points, k, rng);
  a.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);

  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int c = assign_one(points[static_cast<std::size_t>(i)], a.centroids,
                               &dist[static_cast<std::size_t>(i)]);
      if (c != a.labels[static_cast<std::size_t>(i)]) {
        a.labels[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    a.assign_distance_evals +=
        static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(k);
    a.objective = std::accumulate(dist.begin(), dist.end(), 0.0);
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
      if (count == 0) continue;
      for (auto& v : sum) v /= count;
      max_shift2 = std::max(
          max_shift2, sq_dist(sum, a.centroids[static_cast<std::size_t>(c)]));
      a.centroids[static_cast<std::size_t>(c)] = std::move(sum);
    }
    if (!changed && it > 0) break;
    if (max_shift2 <= tol * tol) {
      for (int i = 0; i < n; ++i) {
        a.labels[static_cast<std::size_t>(i)] =
            assign_one(points[static_cast<std::size_t>(i)], a.centroids,
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

}  // namespace asa::reference
