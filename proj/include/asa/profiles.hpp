#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// Device resource profiling: the R_i = [C_i, M_i, N_i] resource tensor, the
// simulated micro-benchmark, min-max feature normalization, and the weighted
// capability score S(d_i) = sum_j w_j * phi_j used for tiering.

namespace asa::profiles {

struct ResourceProfile {
  // Compute vector C_i.
  double cpu_cores = 0.0;
  double cpu_speed_ghz = 0.0;
  double gpu_flag = 0.0;  // 0 or 1
  // Memory vector M_i.
  double ram_gb = 0.0;
  double storage_gb = 0.0;
  // Network vector N_i.
  double bandwidth_mbit = 0.0;
  double latency_ms = 0.0;
  double reliability = 0.0;  // in [0, 1]

  // Throws std::invalid_argument when any entry is non-finite or negative,
  // gpu_flag is not 0/1, or reliability leaves [0, 1].
  void validate() const;
};

struct BenchmarkWorkload {
  int matmul_dim = 64;
  double memory_bytes = 1 << 20;
  double probe_bytes = 4096.0;
};

struct BenchmarkResult {
  double matmul_time_s = 0.0;
  double memory_pass_time_s = 0.0;
  double roundtrip_time_s = 0.0;
};

// Flat feature layout used by normalization and scoring:
//   [cores, ghz, gpu, ram, storage, bandwidth, latency, reliability,
//    matmul_time, memory_pass_time, roundtrip_time]
// Benchmark times extend the raw profile, so measured capability feeds the
// score alongside declared capability.
inline constexpr int kFeatureDims = 11;

// Dimensions where smaller raw values mean a stronger device.
inline constexpr std::array<bool, kFeatureDims> kLowerIsBetter = {
    false, false, false, false, false, false, true, false, true, true, true};

extern const std::array<const char*, kFeatureDims> kFeatureNames;

struct ScoringWeights {
  std::array<double, kFeatureDims> w{};

  // Splits three category weights evenly across the features in each
  // category. Benchmark times count toward the category they probe:
  // matmul -> compute, memory pass -> memory, roundtrip -> network.
  static ScoringWeights from_categories(double compute, double memory,
                                        double network);

  // Throws when weights are negative or do not sum to 1 (1e-9 tolerance).
  void validate() const;
};

struct DeviceRecord {
  int id = 0;
  ResourceProfile profile;
  BenchmarkResult benchmark;
  std::array<double, kFeatureDims> normalized{};
  double score = 0.0;
};

// Aggregate compute throughput proxy in FLOP/s:
//   cores * ghz * 1e9 * (gpu ? kGpuSpeedup : 1).
inline constexpr double kGpuSpeedup = 8.0;
double effective_flops(const ResourceProfile& p);

// Simulated micro-benchmark. Deterministic closed forms, strictly decreasing
// in the capability that backs each probe:
//   matmul:      2 * dim^3 / effective_flops
//   memory pass: bytes / (ram_gb * 1e9)        (1 GB/s per GB of RAM)
//   roundtrip:   latency/1000 + probe_bytes / (bandwidth * 125000)
BenchmarkResult run_benchmark(const ResourceProfile& p,
                              const BenchmarkWorkload& w);

std::array<double, kFeatureDims> raw_features(const ResourceProfile& p,
                                              const BenchmarkResult& b);

// Per-dimension min-max over the fleet, after negating lower-is-better
// dimensions. Constant dimensions map to 0.5. Output is in [0, 1].
void normalize_features(std::vector<DeviceRecord>& fleet);

// S = sum_j w_j * phi_j over normalized features. Weights must validate;
// result lies in [0, 1].
double compute_score(const std::array<double, kFeatureDims>& normalized,
                     const ScoringWeights& weights);

// Synthesizes a heterogeneous fleet from three archetypes (high / mid / low)
// with truncated-Gaussian parameter draws. Tier counts follow the mix by
// largest-remainder quota, high rows first, so (1000, {.2,.5,.3}) yields
// exactly 200/500/300. Each device draws from its own derived stream, making
// the fleet independent of generation order.
std::vector<ResourceProfile> generate_fleet(int n,
                                            const std::array<double, 3>& mix,
                                            std::uint64_t seed);

// Quota counts used by generate_fleet, exposed for tests.
std::array<int, 3> tier_quota(int n, const std::array<double, 3>& mix);

// Benchmark + normalize + score an entire fleet. Per-device benchmark runs
// are independent and parallelized; normalization and scoring are serial.
std::vector<DeviceRecord> profile_fleet(
    const std::vector<ResourceProfile>& fleet, const BenchmarkWorkload& w,
    const ScoringWeights& weights);

// CSV with header id,cores,ghz,gpu,ram,storage,bw,lat,rel.
std::string fleet_to_csv(const std::vector<ResourceProfile>& fleet);
std::vector<ResourceProfile> fleet_from_csv(const std::string& text);

}  // namespace asa::profiles
