#include "asa/profiles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "asa/rng.hpp"

namespace asa::profiles {

const std::array<const char*, kFeatureDims> kFeatureNames = {
    "cores",   "ghz", "gpu",         "ram",         "storage", "bandwidth",
    "latency", "rel", "matmul_time", "mempass_time", "roundtrip_time"};

void ResourceProfile::validate() const {
  const double vals[] = {cpu_cores,  cpu_speed_ghz,  gpu_flag,   ram_gb,
                         storage_gb, bandwidth_mbit, latency_ms, reliability};
  for (double v : vals) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("profile entries must be finite and >= 0");
  }
  if (gpu_flag != 0.0 && gpu_flag != 1.0)
    throw std::invalid_argument("gpu_flag must be 0 or 1");
  if (reliability > 1.0)
    throw std::invalid_argument("reliability must lie in [0, 1]");
}

ScoringWeights ScoringWeights::from_categories(double compute, double memory,
                                               double network) {
  if (compute < 0 || memory < 0 || network < 0)
    throw std::invalid_argument("category weights must be >= 0");
  const double sum = compute + memory + network;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("category weights must sum to 1");
  ScoringWeights sw;
  // compute: cores, ghz, gpu, matmul_time; memory: ram, storage, mempass;
  // network: bandwidth, latency, reliability, roundtrip.
  const double c = compute / 4.0, m = memory / 3.0, n = network / 4.0;
  sw.w = {c, c, c, m, m, n, n, n, c, m, n};
  return sw;
}

void ScoringWeights::validate() const {
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("scoring weights must be finite and >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("scoring weights must sum to 1");
}

double effective_flops(const ResourceProfile& p) {
  const double base = p.cpu_cores * p.cpu_speed_ghz * 1e9;
  return p.gpu_flag != 0.0 ? base * kGpuSpeedup : base;
}

BenchmarkResult run_benchmark(const ResourceProfile& p,
                              const BenchmarkWorkload& w) {
  p.validate();
  if (w.matmul_dim <= 0 || w.memory_bytes <= 0 || w.probe_bytes <= 0)
    throw std::invalid_argument("benchmark workload sizes must be positive");
  const double flops = effective_flops(p);
  if (flops <= 0.0)
    throw std::invalid_argument("profile has zero compute throughput");
  if (p.ram_gb <= 0.0 || p.bandwidth_mbit <= 0.0)
    throw std::invalid_argument("profile has zero memory or bandwidth");
  BenchmarkResult r;
  const double d = static_cast<double>(w.matmul_dim);
  r.matmul_time_s = 2.0 * d * d * d / flops;
  r.memory_pass_time_s = w.memory_bytes / (p.ram_gb * 1e9);
  r.roundtrip_time_s =
      p.latency_ms / 1000.0 + w.probe_bytes / (p.bandwidth_mbit * 125000.0);
  return r;
}

std::array<double, kFeatureDims> raw_features(const ResourceProfile& p,
                                              const BenchmarkResult& b) {
  return {p.cpu_cores,      p.cpu_speed_ghz, p.gpu_flag,
          p.ram_gb,         p.storage_gb,    p.bandwidth_mbit,
          p.latency_ms,     p.reliability,   b.matmul_time_s,
          b.memory_pass_time_s, b.roundtrip_time_s};
}

void normalize_features(std::vector<DeviceRecord>& fleet) {
  if (fleet.empty()) return;
  for (int j = 0; j < kFeatureDims; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& d : fleet) {
      const auto f = raw_features(d.profile, d.benchmark);
      const double v = kLowerIsBetter[j] ? -f[j] : f[j];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (auto& d : fleet) {
      const auto f = raw_features(d.profile, d.benchmark);
      const double v = kLowerIsBetter[j] ? -f[j] : f[j];
      d.normalized[j] = (hi > lo) ? (v - lo) / (hi - lo) : 0.5;
    }
  }
}

double compute_score(const std::array<double, kFeatureDims>& normalized,
                     const ScoringWeights& weights) {
  weights.validate();
  double s = 0.0;
  for (int j = 0; j < kFeatureDims; ++j) {
    const double phi = normalized[j];
    if (!std::isfinite(phi) || phi < -1e-12 || phi > 1.0 + 1e-12)
      throw std::invalid_argument("normalized features must lie in [0, 1]");
    s += weights.w[j] * phi;
  }
  return std::clamp(s, 0.0, 1.0);
}

std::array<int, 3> tier_quota(int n, const std::array<double, 3>& mix) {
  if (n < 0) throw std::invalid_argument("fleet size must be >= 0");
  double sum = 0.0;
  for (double f : mix) {
    if (f < 0.0) throw std::invalid_argument("tier mix must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("tier mix must sum to 1");
  std::array<int, 3> counts{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int t = 0; t < 3; ++t) {
    const double exact = n * mix[t];
    counts[t] = static_cast<int>(std::floor(exact + 1e-9));
    frac[t] = exact - counts[t];
    assigned += counts[t];
  }
  // Largest remainder, ties to the lower tier index.
  for (int left = n - assigned; left > 0; --left) {
    int best = 0;
    for (int t = 1; t < 3; ++t)
      if (frac[t] > frac[best] + 1e-12) best = t;
    ++counts[best];
    frac[best] = -1.0;
  }
  return counts;
}

namespace {

struct Archetype {
  // mean, sd, lo, hi per field.
  double cores[4], ghz[4], ram[4], storage[4], bw[4], lat[4], rel[4];
  double gpu_prob;
};

// High / mid / low device archetypes; mid follows the 2-4 GB mobile band.
const Archetype kArchetypes[3] = {
    {{8, 2, 4, 16},
     {3.0, 0.4, 2.0, 4.5},
     {16, 4, 8, 32},
     {512, 128, 128, 1024},
     {500, 100, 100, 1000},
     {10, 3, 1, 30},
     {0.99, 0.005, 0.95, 1.0},
     1.0},
    {{4, 1, 2, 8},
     {2.0, 0.3, 1.0, 3.0},
     {3, 0.5, 2, 4},
     {64, 16, 16, 128},
     {100, 25, 20, 300},
     {30, 8, 5, 80},
     {0.95, 0.02, 0.85, 1.0},
     0.0},
    {{1.5, 0.5, 1, 2},
     {1.0, 0.2, 0.5, 1.5},
     {1, 0.3, 0.25, 1.9},
     {8, 4, 2, 16},
     {10, 5, 1, 50},
     {80, 20, 20, 200},
     {0.9, 0.05, 0.7, 1.0},
     0.0},
};

double draw(Rng& rng, const double spec[4]) {
  return rng.truncated_normal(spec[0], spec[1], spec[2], spec[3]);
}

}  // namespace

std::vector<ResourceProfile> generate_fleet(int n,
                                            const std::array<double, 3>& mix,
                                            std::uint64_t seed) {
  const auto counts = tier_quota(n, mix);
  std::vector<ResourceProfile> fleet(static_cast<std::size_t>(n));
  std::vector<int> tier_of(static_cast<std::size_t>(n));
  int next = 0;
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < counts[t]; ++i) tier_of[static_cast<std::size_t>(next++)] = t;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const Archetype& a = kArchetypes[tier_of[static_cast<std::size_t>(i)]];
    Rng rng(derive_seed(seed, StreamTag::FleetGen, static_cast<std::uint64_t>(i)));
    ResourceProfile p;
    p.cpu_cores = std::max(1.0, std::round(draw(rng, a.cores)));
    p.cpu_speed_ghz = draw(rng, a.ghz);
    p.gpu_flag = rng.uniform() < a.gpu_prob ? 1.0 : 0.0;
    p.ram_gb = draw(rng, a.ram);
    p.storage_gb = std::round(draw(rng, a.storage));
    p.bandwidth_mbit = draw(rng, a.bw);
    p.latency_ms = draw(rng, a.lat);
    p.reliability = draw(rng, a.rel);
    p.validate();
    fleet[static_cast<std::size_t>(i)] = p;
  }
  return fleet;
}

std::vector<DeviceRecord> profile_fleet(
    const std::vector<ResourceProfile>& fleet, const BenchmarkWorkload& w,
    const ScoringWeights& weights) {
  weights.validate();
  std::vector<DeviceRecord> records(fleet.size());
  const int n = static_cast<int>(fleet.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    auto& r = records[static_cast<std::size_t>(i)];
    r.id = i;
    r.profile = fleet[static_cast<std::size_t>(i)];
    r.benchmark = run_benchmark(r.profile, w);
  }
  normalize_features(records);
  for (auto& r : records) r.score = compute_score(r.normalized, weights);
  return records;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string fleet_to_csv(const std::vector<ResourceProfile>& fleet) {
  std::ostringstream out;
  out << "id,cores,ghz,gpu,ram,storage,bw,lat,rel\n";
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const auto& p = fleet[i];
    out << i << ',' << fmt(p.cpu_cores) << ',' << fmt(p.cpu_speed_ghz) << ','
        << fmt(p.gpu_flag) << ',' << fmt(p.ram_gb) << ',' << fmt(p.storage_gb)
        << ',' << fmt(p.bandwidth_mbit) << ',' << fmt(p.latency_ms) << ','
        << fmt(p.reliability) << '\n';
  }
  return out.str();
}

std::vector<ResourceProfile> fleet_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "id,cores,ghz,gpu,ram,storage,bw,lat,rel")
    throw std::invalid_argument("fleet csv: bad header");
  std::vector<ResourceProfile> fleet;
  std::size_t expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 9> f{};
    std::size_t pos = 0;
    for (int col = 0; col < 9; ++col) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell = line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        f[static_cast<std::size_t>(col)] = std::stod(cell);
      } catch (const std::exception&) {
        throw std::invalid_argument("fleet csv: bad number: " + cell);
      }
      if (comma == std::string::npos) {
        if (col != 8) throw std::invalid_argument("fleet csv: short row");
        break;
      }
      pos = comma + 1;
    }
    if (static_cast<std::size_t>(f[0]) != expect)
      throw std::invalid_argument("fleet csv: ids must be dense from 0");
    ++expect;
    ResourceProfile p;
    p.cpu_cores = f[1];
    p.cpu_speed_ghz = f[2];
    p.gpu_flag = f[3];
    p.ram_gb = f[4];
    p.storage_gb = f[5];
    p.bandwidth_mbit = f[6];
    p.latency_ms = f[7];
    p.reliability = f[8];
    p.validate();
    fleet.push_back(p);
  }
  return fleet;
}

}  // namespace asa::profiles
