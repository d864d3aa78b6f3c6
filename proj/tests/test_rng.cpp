#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "asa/rng.hpp"

using namespace asa;

TEST_CASE("same seed reproduces every draw kind") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next() == b.next());
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.bounded(17) == b.bounded(17));
  }
}

TEST_CASE("different seeds differ") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next() == b.next()) ++same;
  CHECK(same == 0);
}

TEST_CASE("seed 0 is usable") {
  Rng r(0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 100; ++i) seen.insert(r.next());
  CHECK(seen.size() == 100);
}

TEST_CASE("uniform stays in the half-open unit interval") {
  Rng r(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform range endpoints") {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("bounded covers all residues without bias artifacts") {
  Rng r(11);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i)
    ++counts[static_cast<std::size_t>(r.bounded(7))];
  for (int c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
}

TEST_CASE("normal moments") {
  Rng r(13);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("normal mean and sd scaling") {
  Rng a(21), b(21);
  for (int i = 0; i < 100; ++i)
    CHECK(b.normal(3.0, 2.0) == doctest::Approx(3.0 + 2.0 * a.normal()).epsilon(1e-15));
}

TEST_CASE("truncated normal respects bounds") {
  Rng r(17);
  for (int i = 0; i < 10000; ++i) {
    const double x = r.truncated_normal(0.0, 5.0, 1.0, 4.0);
    CHECK(x >= 1.0);
    CHECK(x <= 4.0);
  }
}

TEST_CASE("gamma draws are positive and roughly have mean alpha") {
  Rng r(19);
  for (double alpha : {0.1, 1.0, 7.5}) {
    double sum = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
      const double g = r.gamma(alpha);
      CHECK(g >= 0.0);
      sum += g;
    }
    CHECK(sum / n == doctest::Approx(alpha).epsilon(0.05));
  }
}

TEST_CASE("dirichlet sums to one") {
  Rng r(23);
  for (double alpha : {0.1, 0.5, 10.0}) {
    for (int rep = 0; rep < 100; ++rep) {
      const auto p = r.dirichlet(alpha, 6);
      REQUIRE(p.size() == 6);
      double s = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("dirichlet with one component is a point mass") {
  Rng r(29);
  const auto p = r.dirichlet(1.0, 1);
  REQUIRE(p.size() == 1);
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("shuffle permutes and is deterministic") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  auto w = v;
  Rng a(31), b(31);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  // A 50-element shuffle leaving everything in place would be broken.
  int moved = 0;
  for (int i = 0; i < 50; ++i)
    if (v[static_cast<std::size_t>(i)] != i) ++moved;
  CHECK(moved > 10);
}

TEST_CASE("state round-trips through the snapshot constructor") {
  Rng r(37);
  for (int i = 0; i < 5; ++i) r.next();
  Rng resumed(r.state());
  CHECK(resumed.state() == r.state());
  for (int i = 0; i < 100; ++i) CHECK(resumed.next() == r.next());
}

TEST_CASE("state changes with every draw") {
  Rng r(41);
  auto s0 = r.state();
  r.next();
  CHECK(r.state() != s0);
}

TEST_CASE("mix64 is not identity and spreads single bits") {
  std::set<std::uint64_t> outs;
  for (std::uint64_t b = 0; b < 64; ++b) outs.insert(mix64(1ull << b));
  CHECK(outs.size() == 64);
  // Zero is the finalizer's fixed point; any nonzero input must move.
  CHECK(mix64(1) != 1);
  CHECK(mix64(1) != 0);
}

TEST_CASE("mix_seed is order sensitive") {
  CHECK(mix_seed({1, 2}) != mix_seed({2, 1}));
  CHECK(mix_seed({1}) != mix_seed({1, 0}));
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  const std::uint64_t base = 42;
  for (auto tag : {StreamTag::FleetGen, StreamTag::ParamInit, StreamTag::Dropout,
                   StreamTag::LocalTrain, StreamTag::Cluster, StreamTag::Shuffle,
                   StreamTag::Usage, StreamTag::Synthetic, StreamTag::Partition,
                   StreamTag::Oracle})
    seen.insert(derive_seed(base, tag));
  CHECK(seen.size() == 10);
  CHECK(derive_seed(base, StreamTag::Usage, 1, 2) !=
        derive_seed(base, StreamTag::Usage, 2, 1));
  CHECK(derive_seed(base, StreamTag::Usage, 1) !=
        derive_seed(base + 1, StreamTag::Usage, 1));
}

TEST_CASE("derived streams are deterministic") {
  Rng a(derive_seed(7, StreamTag::LocalTrain, 3));
  Rng b(derive_seed(7, StreamTag::LocalTrain, 3));
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}
