#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "asa/data.hpp"
#include "asa/models.hpp"
#include "asa/profiles.hpp"

// Device-local training: seeded mini-batch SGD with an optional proximal
// pull toward the global anchor, simulated resource usage, and the
// threshold-based complexity monitor.

namespace asa::training {

enum class Schedule { Constant, InvSqrt, InvT };

struct TrainConfig {
  double lr0 = 0.01;
  Schedule schedule = Schedule::Constant;
  int batch_size = 128;
  int local_epochs = 1;
  // FedProx coefficient; 0 recovers plain SGD.
  double prox_mu = 0.0;
};

// Step size for global round t (1-based): lr0, lr0/sqrt(t), or lr0/t.
double lr_schedule(int t, const TrainConfig& cfg);

struct LocalTrainResult {
  models::ParamVector params;
  // Mean mini-batch loss of the last epoch (pre-update losses); with
  // local_epochs = 0, the full-shard evaluation loss.
  double mean_loss = 0.0;
  // Mean squared L2 norm of the applied mini-batch gradients (proximal term
  // included) across all updates this call.
  double grad_sq_norm = 0.0;
  // sum over batches of batch_size * param_count, the unit cost model for
  // training work.
  std::uint64_t train_ops = 0;
};

// Runs local_epochs of mini-batch SGD over the shard (sample indices into
// ds). Shuffling, batching, and updates all come from the stream derived
// from `seed`, so identical inputs give bit-identical parameters. The
// proximal term pulls toward global_ref, which must be at the same rung.
// local_epochs = 0 evaluates the loss and returns params unchanged.
LocalTrainResult local_train(const models::NestedModelFamily& family,
                             const models::ParamVector& params,
                             const data::Dataset& ds,
                             const std::vector<int>& shard,
                             const TrainConfig& cfg,
                             const models::ParamVector& global_ref, int round,
                             std::uint64_t seed);

struct DemandTable {
  // Per-rung demand: cpu in core-GHz, memory in GB. Defaults put the Complex
  // rung at 0.95 cpu usage on the canonical mid-tier device (2 cores x 1.5
  // GHz), hand-checkable as 2.85 / 3.0.
  std::array<double, models::kRungs> cpu = {0.6, 1.5, 2.85};
  std::array<double, models::kRungs> memory = {0.5, 1.0, 2.0};
  double noise_sd = 0.02;
};

struct UsageSample {
  double cpu = 0.0;
  double memory = 0.0;
};

// usage = clamp(demand / capacity + N(0, noise_sd^2), 0, 1) per dimension,
// with capacity cores * ghz for cpu and ram_gb for memory.
UsageSample simulate_usage(const profiles::ResourceProfile& device, int rung,
                           const DemandTable& demands, std::uint64_t seed);

struct ResourceThresholds {
  double cpu = 0.9;
  double memory = 0.9;
  // Accepted for interface compatibility; no adjustment rule consumes it.
  double network = 0.9;
};

inline constexpr int kStableEpochsForUp = 3;

struct MonitorState {
  int stable_epochs = 0;
  models::Direction last = models::Direction::Hold;
};

// Strictly exceeding either threshold steps complexity Down and resets the
// stability counter. Otherwise the counter advances, and the call that
// reaches kStableEpochsForUp returns Up and resets. Everything else Holds.
models::Direction monitor_and_adjust(const UsageSample& usage,
                                     const ResourceThresholds& thresholds,
                                     MonitorState& state);

}  // namespace asa::training
