#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "asa/aggregation.hpp"
#include "asa/models.hpp"
#include "asa/rng.hpp"

using namespace asa;
using namespace asa::aggregation;

namespace {

models::NestedModelFamily tiny_family() {
  return models::build_family(2, 2, {{{1}, {2}, {3}}});
}

Update make_update(int rung, const std::vector<float>& values,
                   std::int64_t n_samples, double loss = 0.5,
                   int device = 0) {
  Update u;
  u.device_id = device;
  u.params.rung = rung;
  u.params.values = values;
  u.n_samples = n_samples;
  u.loss = loss;
  return u;
}

models::ParamVector random_rung(const models::NestedModelFamily& fam, int rung,
                                std::uint64_t seed) {
  Rng rng(seed);
  models::ParamVector p;
  p.rung = rung;
  p.values.resize(fam.coord_maps[static_cast<std::size_t>(rung)].size());
  for (auto& v : p.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return p;
}

}  // namespace

TEST_CASE("equal weights average coordinate-wise") {
  std::vector<Update> ups{make_update(0, {1.0f, 3.0f}, 10),
                          make_update(0, {3.0f, 5.0f}, 10)};
  const auto avg = fedavg(ups);
  CHECK(avg.rung == 0);
  REQUIRE(avg.values.size() == 2);
  CHECK(avg.values[0] == 2.0f);
  CHECK(avg.values[1] == 4.0f);
}

TEST_CASE("sample counts weight the average") {
  std::vector<Update> ups{make_update(0, {0.0f, 0.0f}, 1),
                          make_update(0, {4.0f, 8.0f}, 3)};
  const auto avg = fedavg(ups);
  CHECK(avg.values[0] == 3.0f);
  CHECK(avg.values[1] == 6.0f);
}

TEST_CASE("a single update is copied bit for bit") {
  const auto fam = tiny_family();
  const auto p = random_rung(fam, 1, 3);
  std::vector<Update> ups{make_update(1, p.values, 17)};
  const auto avg = fedavg(ups);
  CHECK(avg.values == p.values);
}

TEST_CASE("fedavg validates its inputs") {
  CHECK_THROWS_AS(fedavg({}), std::invalid_argument);
  std::vector<Update> mixed{make_update(0, {1.0f}, 1),
                            make_update(1, {1.0f, 2.0f}, 1)};
  CHECK_THROWS_AS(fedavg(mixed), std::invalid_argument);
  std::vector<Update> nonpos{make_update(0, {1.0f}, 0)};
  CHECK_THROWS_AS(fedavg(nonpos), std::invalid_argument);
  std::vector<Update> ragged{make_update(0, {1.0f}, 1),
                             make_update(0, {1.0f, 2.0f}, 1)};
  CHECK_THROWS_AS(fedavg(ragged), std::invalid_argument);
}

TEST_CASE("averages stay within the coordinate-wise hull") {
  const auto fam = tiny_family();
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Update> ups;
    const int m = 2 + static_cast<int>(rng.bounded(5));
    for (int i = 0; i < m; ++i) {
      auto u = make_update(2, random_rung(fam, 2, rng.next()).values,
                           1 + static_cast<std::int64_t>(rng.bounded(20)));
      ups.push_back(std::move(u));
    }
    const auto avg = fedavg(ups);
    for (std::size_t p = 0; p < avg.values.size(); ++p) {
      float lo = ups[0].params.values[p], hi = lo;
      for (const auto& u : ups) {
        lo = std::min(lo, u.params.values[p]);
        hi = std::max(hi, u.params.values[p]);
      }
      CHECK(avg.values[p] >= std::nextafter(lo, -1e30f));
      CHECK(avg.values[p] <= std::nextafter(hi, 1e30f));
    }
  }
}

TEST_CASE("intra-cluster aggregation at a uniform rung is plain fedavg") {
  const auto fam = tiny_family();
  std::vector<Update> ups;
  for (int i = 0; i < 4; ++i) {
    auto u = make_update(1, random_rung(fam, 1, 10 + static_cast<std::uint64_t>(i)).values,
                         i + 1, 0.1 * i, i);
    ups.push_back(std::move(u));
  }
  const auto global = random_rung(fam, 2, 99);
  const auto agg = intra_cluster_aggregate(fam, ups, 1, global);
  REQUIRE(agg.has_value());
  CHECK(agg->params.values == fedavg(ups).values);
  CHECK(agg->n_samples == 1 + 2 + 3 + 4);
  // Weighted mean loss: (1*0 + 2*.1 + 3*.2 + 4*.3) / 10.
  CHECK(agg->loss == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("a lone cluster member is copied, loss included") {
  const auto fam = tiny_family();
  const auto p = random_rung(fam, 2, 21);
  std::vector<Update> ups{make_update(2, p.values, 5, 0.77)};
  const auto agg = intra_cluster_aggregate(fam, ups, 2, random_rung(fam, 2, 22));
  REQUIRE(agg.has_value());
  CHECK(agg->params.values == p.values);
  CHECK(agg->loss == 0.77);
}

TEST_CASE("an empty cluster aggregates to nothing") {
  const auto fam = tiny_family();
  CHECK(!intra_cluster_aggregate(fam, {}, 1, random_rung(fam, 2, 1)));
}

TEST_CASE("members below the cluster rung grow with global fill-in") {
  const auto fam = tiny_family();
  // One member trained at rung 0, one at rung 1; cluster nominal rung 1.
  const auto lo = random_rung(fam, 0, 31);
  const auto hi = random_rung(fam, 1, 32);
  const auto global = random_rung(fam, 2, 33);
  std::vector<Update> ups{make_update(0, lo.values, 2, 0.3, 0),
                          make_update(1, hi.values, 2, 0.5, 1)};
  const auto agg = intra_cluster_aggregate(fam, ups, 1, global);
  REQUIRE(agg.has_value());
  REQUIRE(agg->params.values.size() == fam.coord_maps[1].size());

  // Hand recomputation: the rung-0 member contributes its own value on
  // rung-0 coordinates and the global's value elsewhere.
  for (std::size_t local1 = 0; local1 < fam.coord_maps[1].size(); ++local1) {
    const auto g = fam.coord_maps[1][local1];
    const auto pos0 = fam.pos_of[0][g];
    const double member0 =
        pos0 >= 0 ? static_cast<double>(lo.values[static_cast<std::size_t>(pos0)])
                  : static_cast<double>(global.values[g]);
    const double member1 = static_cast<double>(hi.values[local1]);
    const float want = static_cast<float>((2.0 * member0 + 2.0 * member1) / 4.0);
    CHECK(agg->params.values[local1] == want);
  }
}

TEST_CASE("merging all-covering clusters equals fedavg over cluster models") {
  const auto fam = tiny_family();
  std::vector<Update> clusters;
  for (int c = 0; c < 3; ++c)
    clusters.push_back(make_update(
        2, random_rung(fam, 2, 40 + static_cast<std::uint64_t>(c)).values,
        5 * (c + 1)));
  const auto prev = random_rung(fam, 2, 50);
  const auto merged = hierarchical_merge(fam, clusters, prev);
  CHECK(merged.values == fedavg(clusters).values);
}

TEST_CASE("merge mixes rungs on shared coordinates and copies exclusives") {
  const auto fam = tiny_family();
  const auto small = random_rung(fam, 0, 61);
  const auto big = random_rung(fam, 2, 62);
  const auto prev = random_rung(fam, 2, 63);
  std::vector<Update> clusters{make_update(0, small.values, 3),
                               make_update(2, big.values, 3)};
  const auto merged = hierarchical_merge(fam, clusters, prev);
  REQUIRE(merged.values.size() == fam.total_params);
  std::set<std::uint32_t> rung0(fam.coord_maps[0].begin(),
                                fam.coord_maps[0].end());
  for (std::size_t g = 0; g < fam.total_params; ++g) {
    if (rung0.count(static_cast<std::uint32_t>(g))) {
      const auto p0 = static_cast<std::size_t>(fam.pos_of[0][g]);
      const float want = static_cast<float>(
          (static_cast<double>(small.values[p0]) +
           static_cast<double>(big.values[g])) /
          2.0);
      CHECK(merged.values[g] == want);
    } else {
      // Only the top-rung cluster covers this coordinate: exact copy.
      CHECK(merged.values[g] == big.values[g]);
    }
  }
}

TEST_CASE("with no cluster models the previous global carries over") {
  const auto fam = tiny_family();
  const auto prev = random_rung(fam, 2, 71);
  const auto merged = hierarchical_merge(fam, {}, prev);
  CHECK(merged.values == prev.values);
}

TEST_CASE("a single low-rung cluster updates only its own coordinates") {
  const auto fam = tiny_family();
  const auto small = random_rung(fam, 0, 73);
  const auto prev = random_rung(fam, 2, 74);
  std::vector<Update> clusters{make_update(0, small.values, 4)};
  const auto merged = hierarchical_merge(fam, clusters, prev);
  for (std::size_t g = 0; g < fam.total_params; ++g) {
    const auto p0 = fam.pos_of[0][g];
    if (p0 >= 0)
      CHECK(merged.values[g] == small.values[static_cast<std::size_t>(p0)]);
    else
      CHECK(merged.values[g] == prev.values[g]);
  }
}

TEST_CASE("merging identical models is idempotent") {
  const auto fam = tiny_family();
  const auto p = random_rung(fam, 2, 81);
  std::vector<Update> clusters{make_update(2, p.values, 1),
                               make_update(2, p.values, 3),
                               make_update(2, p.values, 11)};
  const auto merged = hierarchical_merge(fam, clusters, p);
  CHECK(merged.values == p.values);
}

TEST_CASE("merge validates the previous global and the weights") {
  const auto fam = tiny_family();
  const auto prev_low = random_rung(fam, 0, 91);
  CHECK_THROWS_AS(hierarchical_merge(fam, {}, prev_low), std::invalid_argument);
  const auto prev = random_rung(fam, 2, 92);
  std::vector<Update> bad{make_update(2, prev.values, 0)};
  CHECK_THROWS_AS(hierarchical_merge(fam, bad, prev), std::invalid_argument);
}

TEST_CASE("convergence rate on a hand-computed history") {
  const std::vector<double> history{1.0, 0.9, 0.81, 0.80, 0.80, 0.80};
  const auto c = check_convergence(history, 4, 0.01);
  // Window 4: prior half mean 0.805, recent half mean 0.80.
  CHECK(c.rate == doctest::Approx(0.005 / 0.805).epsilon(1e-9));
  CHECK(c.converged);
}

TEST_CASE("constant history converges with rate zero") {
  const std::vector<double> history(8, 0.42);
  const auto c = check_convergence(history, 4, 0.0);
  CHECK(c.rate == doctest::Approx(0.0));
  CHECK(c.converged);
}

TEST_CASE("growing loss does not converge") {
  std::vector<double> history;
  for (int i = 0; i < 10; ++i) history.push_back(1.0 + 0.5 * i);
  const auto c = check_convergence(history, 4, 0.01);
  CHECK(!c.converged);
  CHECK(c.rate > 0.01);
}

TEST_CASE("short history never converges") {
  const std::vector<double> history{1.0, 1.0, 1.0};
  const auto c = check_convergence(history, 4, 1e9);
  CHECK(!c.converged);
  CHECK(c.rate == doctest::Approx(0.0));
}

TEST_CASE("convergence check validates the window and threshold") {
  const std::vector<double> history{1.0, 1.0};
  CHECK_THROWS_AS(check_convergence(history, 1, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(check_convergence(history, 4, -1.0), std::invalid_argument);
}
