#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asa/models.hpp"

// Two-level aggregation: sample-weighted averaging inside a cluster at the
// cluster's nominal rung, then a coordinate-wise hierarchical merge of
// cluster models into the global vector.

namespace asa::aggregation {

struct Update {
  int device_id = -1;
  models::ParamVector params;
  std::int64_t n_samples = 0;
  double loss = 0.0;
};

struct GlobalModel {
  models::ParamVector params;  // always the top rung
  int round = 0;
  std::vector<double> loss_history;
};

// Sample-size-weighted coordinate mean. All updates must share a rung and
// carry positive weights; accumulation runs in update order in double
// precision. A single update is returned as an exact copy, so one-member
// aggregation never perturbs bits.
models::ParamVector fedavg(const std::vector<Update>& updates);

// Projects member updates to the cluster's nominal rung (new coordinates
// fill from the global vector) and fedavgs them. Returns nullopt when the
// cluster contributed nothing this round. The result's n_samples is the
// member total and its loss the weighted mean member loss.
std::optional<Update> intra_cluster_aggregate(
    const models::NestedModelFamily& family, const std::vector<Update>& updates,
    int cluster_rung, const models::ParamVector& global);

// Coordinate-wise weighted mean over the cluster models that cover each
// global coordinate, clusters visited in the given order. Uncovered
// coordinates keep their previous global value; single-contributor
// coordinates are exact copies.
models::ParamVector hierarchical_merge(const models::NestedModelFamily& family,
                                       const std::vector<Update>& cluster_models,
                                       const models::ParamVector& previous_global);

struct ConvergenceCheck {
  double rate = 0.0;
  bool converged = false;
};

// Splits the trailing `window` losses into two halves and compares their
// means: rate = |mean(recent) - mean(prior)| / max(|mean(prior)|, 1e-12).
// Converged when the history covers the window and rate <= threshold.
ConvergenceCheck check_convergence(const std::vector<double>& loss_history,
                                   int window, double threshold);

}  // namespace asa::aggregation
