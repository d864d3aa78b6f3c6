#include "asa/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asa/rng.hpp"

namespace asa::training {

double lr_schedule(int t, const TrainConfig& cfg) {
  if (t < 1) throw std::invalid_argument("lr_schedule: rounds are 1-based");
  if (!(cfg.lr0 > 0.0)) throw std::invalid_argument("lr_schedule: lr0 must be > 0");
  switch (cfg.schedule) {
    case Schedule::Constant: return cfg.lr0;
    case Schedule::InvSqrt: return cfg.lr0 / std::sqrt(static_cast<double>(t));
    case Schedule::InvT: return cfg.lr0 / static_cast<double>(t);
  }
  throw std::logic_error("lr_schedule: unknown schedule");
}

LocalTrainResult local_train(const models::NestedModelFamily& family,
                             const models::ParamVector& params,
                             const data::Dataset& ds,
                             const std::vector<int>& shard,
                             const TrainConfig& cfg,
                             const models::ParamVector& global_ref, int round,
                             std::uint64_t seed) {
  if (shard.empty()) throw std::invalid_argument("local_train: empty shard");
  if (cfg.batch_size < 1)
    throw std::invalid_argument("local_train: batch_size must be >= 1");
  if (cfg.local_epochs < 0)
    throw std::invalid_argument("local_train: local_epochs must be >= 0");
  if (cfg.prox_mu < 0.0)
    throw std::invalid_argument("local_train: prox_mu must be >= 0");
  if (global_ref.rung != params.rung ||
      global_ref.values.size() != params.values.size())
    throw std::invalid_argument("local_train: global_ref rung mismatch");
  for (int i : shard)
    if (i < 0 || i >= ds.n)
      throw std::invalid_argument("local_train: shard index out of range");

  const std::size_t dim = static_cast<std::size_t>(ds.dim);
  const std::size_t pcount = params.values.size();

  auto gather = [&](const std::vector<int>& order, std::size_t from,
                    std::size_t to, std::vector<double>& X,
                    std::vector<int>& y) {
    X.resize((to - from) * dim);
    y.resize(to - from);
    for (std::size_t r = from; r < to; ++r) {
      const auto src = static_cast<std::size_t>(order[r]);
      std::copy_n(&ds.X[src * dim], dim, &X[(r - from) * dim]);
      y[r - from] = ds.y[src];
    }
  };

  LocalTrainResult res;
  res.params = params;

  if (cfg.local_epochs == 0) {
    std::vector<double> X;
    std::vector<int> y;
    gather(shard, 0, shard.size(), X, y);
    res.mean_loss = models::forward(family, res.params, X, y).loss;
    return res;
  }

  Rng rng(derive_seed(seed, StreamTag::LocalTrain, static_cast<std::uint64_t>(round)));
  const double lr = lr_schedule(round, cfg);
  std::vector<int> order = shard;
  std::vector<double> X;
  std::vector<int> y;
  double epoch_loss = 0.0;
  int epoch_batches = 0;
  double grad_sq_sum = 0.0;
  int total_batches = 0;

  for (int e = 0; e < cfg.local_epochs; ++e) {
    rng.shuffle(order);
    epoch_loss = 0.0;
    epoch_batches = 0;
    for (std::size_t from = 0; from < order.size();
         from += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t to =
          std::min(order.size(), from + static_cast<std::size_t>(cfg.batch_size));
      gather(order, from, to, X, y);
      auto back = models::backward(family, res.params, X, y);
      if (cfg.prox_mu > 0.0) {
        for (std::size_t p = 0; p < pcount; ++p)
          back.grad[p] += cfg.prox_mu *
                          (static_cast<double>(res.params.values[p]) -
                           static_cast<double>(global_ref.values[p]));
      }
      double gsq = 0.0;
      for (std::size_t p = 0; p < pcount; ++p) {
        gsq += back.grad[p] * back.grad[p];
        res.params.values[p] = static_cast<float>(
            static_cast<double>(res.params.values[p]) - lr * back.grad[p]);
      }
      grad_sq_sum += gsq;
      ++total_batches;
      epoch_loss += back.loss;
      ++epoch_batches;
      res.train_ops += (to - from) * pcount;
    }
  }
  res.mean_loss = epoch_loss / epoch_batches;
  res.grad_sq_norm = grad_sq_sum / total_batches;
  return res;
}

UsageSample simulate_usage(const profiles::ResourceProfile& device, int rung,
                           const DemandTable& demands, std::uint64_t seed) {
  if (rung < 0 || rung >= models::kRungs)
    throw std::invalid_argument("simulate_usage: rung out of range");
  const double cpu_cap = device.cpu_cores * device.cpu_speed_ghz;
  if (cpu_cap <= 0.0 || device.ram_gb <= 0.0)
    throw std::invalid_argument("simulate_usage: device has zero capacity");
  Rng rng(seed);
  UsageSample u;
  const auto r = static_cast<std::size_t>(rung);
  double cpu = demands.cpu[r] / cpu_cap;
  double mem = demands.memory[r] / device.ram_gb;
  if (demands.noise_sd > 0.0) {
    cpu += rng.normal(0.0, demands.noise_sd);
    mem += rng.normal(0.0, demands.noise_sd);
  }
  u.cpu = std::clamp(cpu, 0.0, 1.0);
  u.memory = std::clamp(mem, 0.0, 1.0);
  return u;
}

models::Direction monitor_and_adjust(const UsageSample& usage,
                                     const ResourceThresholds& thresholds,
                                     MonitorState& state) {
  if (usage.cpu > thresholds.cpu || usage.memory > thresholds.memory) {
    state.stable_epochs = 0;
    state.last = models::Direction::Down;
    return state.last;
  }
  ++state.stable_epochs;
  if (state.stable_epochs >= kStableEpochsForUp) {
    state.stable_epochs = 0;
    state.last = models::Direction::Up;
    return state.last;
  }
  state.last = models::Direction::Hold;
  return state.last;
}

}  // namespace asa::training
