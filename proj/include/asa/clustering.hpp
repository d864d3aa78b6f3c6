#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Capability clustering (seeded k-means over device feature vectors), tier
// mapping, the C1-C4 feasibility checks, and the greedy task-allocation
// heuristic they gate.

namespace asa::clustering {

struct Repair {
  int device = 0;
  int from_cluster = 0;
  int to_cluster = 0;
};

struct ClusterAssignment {
  int k = 0;
  std::vector<int> labels;                     // one per device
  std::vector<std::vector<double>> centroids;  // k rows
  double objective = 0.0;  // sum of squared distances to assigned centroid
  int iterations_used = 0;
  // Objective after each assignment step; Lloyd's iteration keeps this
  // non-increasing.
  std::vector<double> objective_history;
  // Point-centroid distance evaluations in assignment steps (n*k per
  // iteration). Seeding draws are excluded so the counter matches the
  // N*K*iterations cost model exactly.
  std::uint64_t assign_distance_evals = 0;
  std::vector<Repair> repairs;
};

// Lloyd's iteration with k-means++ seeding from a dedicated stream. Distance
// ties resolve to the lowest cluster id. Stops when assignments are stable or
// every centroid moves less than tol (Euclidean); always stops by max_iter.
// Empty clusters keep their previous centroid. Throws on k < 1, k > n, or
// ragged points.
ClusterAssignment kmeans(const std::vector<std::vector<double>>& points, int k,
                         std::uint64_t seed, int max_iter = 50,
                         double tol = 1e-7);

// Moves devices into clusters below n_min until all clusters reach it.
// Donors are the largest clusters (ties: lowest id) and are never drained
// below n_min themselves; the moved device is the donor member closest to the
// receiving centroid. Centroids and objective are recomputed afterwards.
// Throws when k * n_min exceeds the device count.
void repair_min_size(ClusterAssignment& a,
                     const std::vector<std::vector<double>>& points,
                     int n_min);

enum class Tier { High = 0, Mid = 1, Low = 2 };

const char* tier_name(Tier t);

// Ranks the k=3 clusters by mean member score, descending; ties go to the
// lower cluster id. Result maps cluster id -> tier.
std::array<Tier, 3> map_tiers(const ClusterAssignment& a,
                              const std::vector<double>& scores);

// One offloadable task with its resource demand C_j.
struct Task {
  double demand = 0.0;
};

struct ConstraintParams {
  int n_min = 2;
  double tau_max = 60.0;
  double sigma2_max = 1e18;
};

struct ConstraintReport {
  bool c1_capacity = false;
  bool c2_min_size = false;
  bool c3_delay = false;
  bool c4_load_variance = false;
  // Smallest slack per constraint family (negative = violated amount).
  double c1_margin = 0.0;
  double c2_margin = 0.0;
  double c3_margin = 0.0;
  double c4_margin = 0.0;
  std::vector<int> c1_violators;  // device ids
  std::vector<int> c2_violators;  // cluster ids
  std::vector<int> c3_violators;  // device ids
  std::vector<int> c4_violators;  // cluster ids
  std::vector<double> device_load;   // sum_j C_j * u_ij * x_ij
  std::vector<double> cluster_load_variance;

  bool all_ok() const {
    return c1_capacity && c2_min_size && c3_delay && c4_load_variance;
  }
};

// Evaluates the four feasibility constraints:
//   C1: per-device allocated load <= capacity
//   C2: every cluster holds at least n_min devices
//   C3: per-device expected delay <= tau_max
//   C4: per-cluster population variance of device load <= sigma2_max
// x is the 0/1 assignment matrix (device x task), u the utilization rates.
ConstraintReport check_constraints(
    const std::vector<std::vector<int>>& x,
    const std::vector<std::vector<double>>& u, const std::vector<Task>& tasks,
    const std::vector<double>& caps, const std::vector<int>& labels, int k,
    const std::vector<double>& delays, const ConstraintParams& params);

struct Allocation {
  std::vector<std::vector<int>> x;     // device x task, 0/1
  std::vector<std::vector<double>> u;  // 1.0 where assigned
  std::vector<int> unassigned;         // task ids with no feasible device
  std::vector<double> residual;        // remaining capacity per device
};

// Greedy heuristic: tasks in descending demand (ties: lower task id), each
// placed on the C1-feasible device with the highest residual-capacity-times-
// score product (ties: lower device id). Output always satisfies C1. The
// served-demand objective is submodular, so the greedy value is within
// (1 - 1/e) of the optimum.
Allocation greedy_allocate(const std::vector<Task>& tasks,
                           const std::vector<double>& caps,
                           const std::vector<double>& scores);

// CSV with header device_id,cluster_id,tier,score.
std::string assignment_to_csv(const ClusterAssignment& a,
                              const std::array<Tier, 3>& tiers,
                              const std::vector<double>& scores);

}  // namespace asa::clustering
