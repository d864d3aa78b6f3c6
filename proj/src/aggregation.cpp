#include "asa/aggregation.hpp"

#include <cmath>
#include <stdexcept>

namespace asa::aggregation {

models::ParamVector fedavg(const std::vector<Update>& updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg: no updates");
  const int rung = updates[0].params.rung;
  const std::size_t n = updates[0].params.values.size();
  std::int64_t total = 0;
  for (const auto& u : updates) {
    if (u.params.rung != rung)
      throw std::invalid_argument("fedavg: mixed rungs");
    if (u.params.values.size() != n)
      throw std::invalid_argument("fedavg: mixed parameter lengths");
    if (u.n_samples <= 0)
      throw std::invalid_argument("fedavg: weights must be positive");
    total += u.n_samples;
  }
  if (updates.size() == 1) return updates[0].params;

  std::vector<double> acc(n, 0.0);
  for (const auto& u : updates) {
    const double w = static_cast<double>(u.n_samples);
    for (std::size_t p = 0; p < n; ++p)
      acc[p] += w * static_cast<double>(u.params.values[p]);
  }
  models::ParamVector out;
  out.rung = rung;
  out.values.resize(n);
  const double denom = static_cast<double>(total);
  for (std::size_t p = 0; p < n; ++p)
    out.values[p] = static_cast<float>(acc[p] / denom);
  return out;
}

std::optional<Update> intra_cluster_aggregate(
    const models::NestedModelFamily& family, const std::vector<Update>& updates,
    int cluster_rung, const models::ParamVector& global) {
  if (cluster_rung < 0 || cluster_rung >= models::kRungs)
    throw std::invalid_argument("intra_cluster_aggregate: rung out of range");
  if (updates.empty()) return std::nullopt;

  std::vector<Update> projected;
  projected.reserve(updates.size());
  double loss_acc = 0.0;
  std::int64_t total = 0;
  for (const auto& u : updates) {
    Update p;
    p.device_id = u.device_id;
    p.n_samples = u.n_samples;
    p.loss = u.loss;
    p.params = (u.params.rung == cluster_rung)
                   ? u.params
                   : models::project_params(family, u.params, cluster_rung, global);
    loss_acc += static_cast<double>(u.n_samples) * u.loss;
    total += u.n_samples;
    projected.push_back(std::move(p));
  }
  Update out;
  out.device_id = -1;
  out.params = fedavg(projected);
  out.n_samples = total;
  // Copy rule for a lone member, like fedavg's parameter path.
  out.loss = updates.size() == 1 ? updates[0].loss
                                 : loss_acc / static_cast<double>(total);
  return out;
}

models::ParamVector hierarchical_merge(const models::NestedModelFamily& family,
                                       const std::vector<Update>& cluster_models,
                                       const models::ParamVector& previous_global) {
  if (previous_global.rung != models::kRungs - 1 ||
      previous_global.values.size() != family.total_params)
    throw std::invalid_argument("merge: previous global must be the top rung");
  for (const auto& u : cluster_models)
    if (u.n_samples <= 0)
      throw std::invalid_argument("merge: weights must be positive");

  models::ParamVector out;
  out.rung = models::kRungs - 1;
  out.values.resize(family.total_params);

  for (std::size_t g = 0; g < family.total_params; ++g) {
    double acc = 0.0;
    double wsum = 0.0;
    int covers = 0;
    float last_val = 0.0f;
    for (const auto& u : cluster_models) {
      const auto& pos = family.pos_of[static_cast<std::size_t>(u.params.rung)];
      const std::int32_t q = pos[g];
      if (q < 0) continue;
      const float v = u.params.values[static_cast<std::size_t>(q)];
      const double w = static_cast<double>(u.n_samples);
      acc += w * static_cast<double>(v);
      wsum += w;
      ++covers;
      last_val = v;
    }
    if (covers == 0)
      out.values[g] = previous_global.values[g];
    else if (covers == 1)
      out.values[g] = last_val;
    else
      out.values[g] = static_cast<float>(acc / wsum);
  }
  return out;
}

ConvergenceCheck check_convergence(const std::vector<double>& loss_history,
                                   int window, double threshold) {
  if (window < 2) throw std::invalid_argument("check_convergence: window >= 2");
  if (!(threshold >= 0.0))
    throw std::invalid_argument("check_convergence: threshold must be >= 0");
  ConvergenceCheck c;
  if (loss_history.size() < static_cast<std::size_t>(window)) return c;

  const std::size_t half = static_cast<std::size_t>(window) / 2;
  const std::size_t end = loss_history.size();
  double recent = 0.0, prior = 0.0;
  for (std::size_t i = end - half; i < end; ++i) recent += loss_history[i];
  for (std::size_t i = end - 2 * half; i < end - half; ++i)
    prior += loss_history[i];
  recent /= static_cast<double>(half);
  prior /= static_cast<double>(half);
  c.rate = std::abs(recent - prior) / std::max(std::abs(prior), 1e-12);
  c.converged = c.rate <= threshold;
  return c;
}

}  // namespace asa::aggregation
