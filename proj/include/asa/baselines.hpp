#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asa/simulator.hpp"

// Comparison methods, each a self-contained round loop over the same
// primitives (local training, dropout, aggregation, evaluation) but without
// device tiering or complexity adaptation. Every device always carries the
// largest model.
//
//   fedavg   one-level sample-weighted averaging
//   fedprox  fedavg plus the proximal pull toward the global model
//   hierfl   two-level averaging over capability clusters
//
// The plain fedavg loop is kept deliberately independent of the adaptive
// engine so the two can be checked against each other.

namespace asa::baselines {

enum class Method { FedAvg, FedProx, HierFL };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct BaselineOutputs {
  aggregation::GlobalModel model;
  std::vector<sim::RoundLog> logs;
  std::int64_t total_bytes = 0;
  std::uint64_t total_train_ops = 0;
};

// Runs cfg.rounds rounds (or stops early on convergence). FedAvg ignores
// cfg.train.prox_mu; FedProx applies it and requires it positive. HierFL
// clusters devices once, before the first round, with cfg.k and cfg.n_min.
// Checkpointing fields of io are ignored; only the log sink and config hash
// are used.
BaselineOutputs run_baseline(Method method, const sim::SimConfig& cfg,
                             const std::vector<profiles::ResourceProfile>& fleet,
                             const data::Dataset& train,
                             const data::Dataset& test,
                             const data::ShardPlan& shards,
                             const sim::RunIo& io);

}  // namespace asa::baselines
