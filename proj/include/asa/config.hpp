#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asa/data.hpp"
#include "asa/diagnostics.hpp"
#include "asa/profiles.hpp"
#include "asa/simulator.hpp"

// JSON experiment configuration: namespaced sections (fleet, weights,
// clustering, model, data, training, simulation, diagnostics, output), all
// keys optional with the documented defaults, unknown keys rejected with
// their full path. The config hash is FNV-1a over the canonical (sorted-key)
// dump of the parsed document after any seed override, so byte-level
// formatting differences do not change a run's identity but any value
// change does.

namespace asa::config {

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "idx"
  int n = 2000;
  int classes = 0;  // 0: use the model's output_dim
  int dim = 0;      // 0: use the model's input_dim
  double separation = 2.0;
  std::uint64_t seed = 0;  // 0: derive from the simulation seed
  double test_fraction = 0.25;
  std::string partition = "dirichlet";  // "dirichlet" or "shards"
  double alpha = 0.5;
  int shards_per_client = 2;
  std::string images, labels;            // idx training pair
  std::string test_images, test_labels;  // idx test pair
  int limit = -1;  // cap on training samples, negative = all
};

struct DiagnosticsConfig {
  bool has_oracle = false;
  diag::OracleConfig oracle;
  int fit_t_min = 10;
  double accuracy_bound_constant = 1.0;
  double stability_epsilon = 0.2;
  double stability_delta = 0.05;
  int stability_t0 = 100;
  double step_delta = 1.0;
  double step_epsilon = 1e-3;
  std::string round_log;  // optional existing log to fit against
};

struct OutputConfig {
  std::string round_log = "rounds.jsonl";
  std::string checkpoint = "checkpoint.bin";
  std::string model = "model.bin";
  std::string fleet_csv = "fleet.csv";
  std::string scores_csv = "scores.csv";
  std::string assignment_csv = "assignment.csv";
  std::string summary_csv = "summary.csv";
  double target_accuracy = 0.9;
};

struct ExperimentConfig {
  sim::SimConfig sim;
  DataConfig data;
  DiagnosticsConfig diagnostics;
  OutputConfig output;
  std::string fleet_csv_in;  // load the fleet from CSV instead of generating
  std::uint64_t config_hash = 0;
};

// Parses and validates; throws std::invalid_argument with a message naming
// the offending key or constraint. The seed override replaces
// simulation.seed before hashing.
ExperimentConfig parse_config(const std::string& json_text,
                              std::optional<std::uint64_t> seed_override = {});
ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override = {});

// Fleet per config: generated from the tier mix, or loaded from
// fleet_csv_in (row count must match n_devices).
std::vector<profiles::ResourceProfile> prepare_fleet(const ExperimentConfig& cfg);

struct ExperimentData {
  data::Dataset train;
  data::Dataset test;
  data::ShardPlan shards;
};

// Generates or loads the dataset, splits off the test set (synthetic only;
// IDX sources provide their own test pair), and partitions the training
// set across devices.
ExperimentData prepare_data(const ExperimentConfig& cfg);

}  // namespace asa::config
