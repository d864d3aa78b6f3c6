#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asa/aggregation.hpp"
#include "asa/clustering.hpp"
#include "asa/data.hpp"
#include "asa/models.hpp"
#include "asa/profiles.hpp"
#include "asa/training.hpp"

// The round-driven experiment engine: profile and cluster the fleet, assign
// model rungs by tier, then iterate dropout -> local training -> resource
// monitoring -> two-level aggregation -> evaluation -> convergence check,
// with binary checkpoints and a structured per-round log.

namespace asa::sim {

struct ObjectiveWeights {
  double task = 0.5;       // weight on global training loss
  double balance = 0.25;   // weight on usage variance across devices
  double comm = 0.25;      // weight on bytes relative to single-model FL
  void validate() const;
};

struct ConvergenceCfg {
  int window = 10;
  double threshold = 1e-4;
};

struct SimConfig {
  // Fleet.
  int n_devices = 10;
  std::array<double, 3> tier_mix = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::uint64_t fleet_seed = 7;
  profiles::BenchmarkWorkload workload;
  double weight_compute = 0.5;
  double weight_memory = 0.3;
  double weight_network = 0.2;

  // Clustering.
  int k = 3;
  int kmeans_max_iter = 50;
  double kmeans_tol = 1e-7;
  int n_min = 2;
  int recluster_every = 0;        // 0 = cluster once, before round 1
  bool cluster_on_profile = false;  // false = 1-D capability score
  // Forces every cluster and device to one rung (HierFL / FedAvg-style
  // configurations); -1 assigns rungs by tier, which requires k == 3.
  int uniform_rung = -1;

  // Model family.
  int input_dim = 8;
  int output_dim = 4;
  std::array<std::vector<int>, models::kRungs> hidden = {
      std::vector<int>{16}, std::vector<int>{32}, std::vector<int>{64}};

  // Training.
  training::TrainConfig train;
  training::ResourceThresholds thresholds;
  training::DemandTable demands;
  bool adaptation = true;

  // Rounds.
  int rounds = 250;
  double dropout_p = 0.0;
  double tau_max = 60.0;
  ObjectiveWeights objective;
  std::uint64_t seed = 42;
  ConvergenceCfg convergence;
  int checkpoint_every = 0;  // 0 = checkpoint only when the run ends
  double overhead_s = 0.05;
  // Simulated training cost: flops_per_param_sample * samples * params.
  double flops_per_param_sample = 6.0;

  void validate() const;
};

struct TimeBreakdown {
  double compute = 0.0;
  double comm = 0.0;
  double sync = 0.0;
  double overhead = 0.0;
};

struct DeviceRound {
  int device_id = -1;
  int rung = 0;
  double loss = 0.0;
  double grad_sq = 0.0;
  training::UsageSample usage;
  char adjustment = 'H';  // 'U' / 'D' / 'H'
  std::int64_t bytes_up = 0;
  std::int64_t bytes_down = 0;
  TimeBreakdown times;
  bool straggler = false;
};

struct ClusterRound {
  int cluster = 0;
  double loss = 0.0;
  std::int64_t n_samples = 0;
};

struct RoundLog {
  int round = 0;
  std::vector<int> active;
  std::vector<DeviceRound> devices;
  std::vector<ClusterRound> clusters;
  double global_loss = 0.0;
  double objective = 0.0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
  double convergence_rate = 0.0;
  std::int64_t bytes_total = 0;
};

// Mutable cross-round state; exactly what checkpoints capture.
struct SimState {
  int next_round = 1;
  models::ParamVector global;
  std::vector<int> device_rung;
  std::vector<training::MonitorState> monitor;
  std::vector<double> loss_history;
  bool clustered = false;
  std::vector<int> labels;
  std::vector<int> cluster_rung;
  std::int64_t total_bytes = 0;
  std::uint64_t total_train_ops = 0;
  std::uint64_t total_distance_evals = 0;
};

struct RunOutputs {
  aggregation::GlobalModel model;
  std::vector<RoundLog> logs;
  SimState state;
  std::vector<profiles::DeviceRecord> records;  // last profiling pass
};

struct RunIo {
  std::ostream* round_log = nullptr;       // JSONL sink (header + one line/round)
  std::string checkpoint_path;             // "" = no checkpoints
  std::uint64_t config_hash = 0;
  // Test hook, called at the start of each round attempt; may throw to
  // exercise the restore-and-retry path.
  std::function<void(int round, int attempt)> fault_hook;
};

// Devices surviving Bernoulli(dropout_p) elimination this round, ascending.
// One uniform draw per device from the (seed, round) stream.
std::vector<int> apply_dropout(int n_devices, double dropout_p,
                               std::uint64_t seed, int round);

// Compute and communication components of the simulated round time:
//   compute = flops_per_param_sample * local_epochs * shard * params / flops
//   comm    = 2 * 4 * params / (bandwidth in bytes/s)
// plus the fixed overhead. Synchronization is filled in by the round loop as
// the gap to the slowest included cluster member.
TimeBreakdown simulate_times(const profiles::ResourceProfile& device,
                             std::size_t params, std::size_t shard_size,
                             const SimConfig& cfg);

double objective_scalar(double global_loss, double usage_variance,
                        double comm_ratio, const ObjectiveWeights& w);

int rung_of_tier(clustering::Tier t);

// Test-set accuracy by argmax (ties: lowest class); writes the mean
// cross-entropy through loss_out when given.
double eval_model(const models::NestedModelFamily& family,
                  const models::ParamVector& params, const data::Dataset& test,
                  double* loss_out);

// Runs rounds [state.next_round, until] (until = cfg.rounds when
// rounds_override is negative; 0 runs no rounds and returns the initial
// model). Pass resume to continue a checkpointed run. A round that throws is
// retried once from its entry state; a second failure propagates. Returns
// the final model, all newly produced logs, and the final state.
RunOutputs run_experiment(const SimConfig& cfg,
                          const std::vector<profiles::ResourceProfile>& fleet,
                          const data::Dataset& train, const data::Dataset& test,
                          const data::ShardPlan& shards, const RunIo& io,
                          const SimState* resume = nullptr,
                          int rounds_override = -1);

// Checkpoint wire format: "ASA1", u32 format version, u64 config hash,
// state payload, trailing FNV-1a checksum of everything before it. Loading
// verifies magic, version, checksum, and that the config hash matches.
std::vector<std::uint8_t> serialize_state(const SimState& s,
                                          std::uint64_t config_hash);
SimState parse_state(const std::vector<std::uint8_t>& bytes,
                     std::uint64_t expected_config_hash);
void save_checkpoint(const std::string& path, const SimState& s,
                     std::uint64_t config_hash);
SimState load_checkpoint(const std::string& path,
                         std::uint64_t expected_config_hash);

// One JSON object per line; first line is a header with the config hash and
// tool version. Identical configs and seeds produce byte-identical streams.
void write_log_header(std::ostream& out, std::uint64_t config_hash);
void write_round_log(std::ostream& out, const RoundLog& log);

}  // namespace asa::sim
