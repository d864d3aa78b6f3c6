#pragma once

// Shared test utilities: scratch directories, partition agreement scoring,
// finite-difference gradient checks, and small data generators.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asa/models.hpp"
#include "asa/rng.hpp"

namespace asa_test {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int i = 0; i < 64; ++i) {
      std::ostringstream name;
      name << "asa_test_" << std::hex << rd() << rd();
      auto candidate = base / name.str();
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path);
}

// Adjusted Rand index between two labelings of the same points. 1.0 means
// identical partitions up to label renaming.
inline double adjusted_rand_index(const std::vector<int>& a,
                                  const std::vector<int>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("ari: size mismatch");
  const auto n = static_cast<std::int64_t>(a.size());
  int ka = 0, kb = 0;
  for (int v : a) ka = std::max(ka, v + 1);
  for (int v : b) kb = std::max(kb, v + 1);
  std::vector<std::int64_t> table(static_cast<std::size_t>(ka) * kb, 0);
  std::vector<std::int64_t> ra(ka, 0), rb(kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table[static_cast<std::size_t>(a[i]) * kb + b[i]];
    ++ra[static_cast<std::size_t>(a[i])];
    ++rb[static_cast<std::size_t>(b[i])];
  }
  auto choose2 = [](std::int64_t m) { return m * (m - 1) / 2; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (auto v : table) sum_ij += static_cast<double>(choose2(v));
  for (auto v : ra) sum_a += static_cast<double>(choose2(v));
  for (auto v : rb) sum_b += static_cast<double>(choose2(v));
  const double total = static_cast<double>(choose2(n));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (sum_ij - expected) / denom;
}

// One-dimensional score blobs around the given centers with labels by blob.
inline void make_blobs(const std::vector<double>& centers, double sigma,
                       int per_center, std::uint64_t seed,
                       std::vector<std::vector<double>>& points,
                       std::vector<int>& truth) {
  asa::Rng rng(seed);
  points.clear();
  truth.clear();
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (int i = 0; i < per_center; ++i) {
      points.push_back({centers[c] + sigma * rng.normal()});
      truth.push_back(static_cast<int>(c));
    }
}

// Central finite-difference check of backward() on `checks` random
// coordinates. Perturbations land on float storage, so the divisor uses the
// steps that were actually realized. Returns the worst relative error.
inline double fd_check(const asa::models::NestedModelFamily& family,
                       const asa::models::ParamVector& params,
                       const std::vector<double>& X,
                       const std::vector<int>& y, int checks,
                       std::uint64_t seed, double h = 1e-5) {
  const auto grad = asa::models::backward(family, params, X, y).grad;
  asa::Rng rng(seed);
  double worst = 0.0;
  for (int c = 0; c < checks; ++c) {
    const auto i = static_cast<std::size_t>(
        rng.bounded(static_cast<std::uint64_t>(params.values.size())));
    const double w0 = static_cast<double>(params.values[i]);
    auto plus = params;
    auto minus = params;
    plus.values[i] = static_cast<float>(w0 + h);
    minus.values[i] = static_cast<float>(w0 - h);
    const double step = static_cast<double>(plus.values[i]) -
                        static_cast<double>(minus.values[i]);
    const double fd =
        (asa::models::forward(family, plus, X, y).loss -
         asa::models::forward(family, minus, X, y).loss) /
        step;
    const double g = grad[i];
    const double rel =
        std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace asa_test
