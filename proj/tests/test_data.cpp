#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "asa/data.hpp"
#include "helpers.hpp"

using namespace asa::data;
using asa_test::TempDir;

namespace {

// Per-class empirical means.
std::vector<std::vector<double>> class_means(const Dataset& ds) {
  std::vector<std::vector<double>> mean(
      static_cast<std::size_t>(ds.classes),
      std::vector<double>(static_cast<std::size_t>(ds.dim), 0.0));
  std::vector<int> count(static_cast<std::size_t>(ds.classes), 0);
  for (int i = 0; i < ds.n; ++i) {
    const auto c = static_cast<std::size_t>(ds.y[static_cast<std::size_t>(i)]);
    ++count[c];
    for (int d = 0; d < ds.dim; ++d)
      mean[c][static_cast<std::size_t>(d)] +=
          ds.X[static_cast<std::size_t>(i * ds.dim + d)];
  }
  for (std::size_t c = 0; c < mean.size(); ++c)
    for (auto& v : mean[c]) v /= std::max(count[c], 1);
  return mean;
}

void check_partition(const ShardPlan& plan, int n, int n_clients) {
  REQUIRE(static_cast<int>(plan.shards.size()) == n_clients);
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& shard : plan.shards) {
    CHECK(std::is_sorted(shard.begin(), shard.end()));
    for (int idx : shard) {
      REQUIRE(idx >= 0);
      REQUIRE(idx < n);
      ++seen[static_cast<std::size_t>(idx)];
    }
  }
  for (int hits : seen) CHECK(hits == 1);
}

// Writes a two-image 2x2 idx pair byte by byte.
void write_tiny_fixture(const std::string& images, const std::string& labels,
                        std::uint32_t image_magic = 0x803,
                        std::uint32_t label_magic = 0x801,
                        std::uint32_t label_count = 2) {
  auto be32 = [](std::ofstream& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
      out.put(static_cast<char>((v >> shift) & 0xff));
  };
  std::ofstream img(images, std::ios::binary);
  be32(img, image_magic);
  be32(img, 2);  // images
  be32(img, 2);  // rows
  be32(img, 2);  // cols
  const unsigned char px[8] = {0, 255, 0, 255, 255, 0, 255, 0};
  for (unsigned char p : px) img.put(static_cast<char>(p));
  img.close();
  std::ofstream lab(labels, std::ios::binary);
  be32(lab, label_magic);
  be32(lab, label_count);
  lab.put(static_cast<char>(3));
  lab.put(static_cast<char>(1));
  if (label_count > 2)
    for (std::uint32_t i = 2; i < label_count; ++i) lab.put(static_cast<char>(0));
  lab.close();
}

}  // namespace

TEST_CASE("synthetic generation is deterministic") {
  const auto a = gen_synthetic(200, 4, 6, 2.0, 9);
  const auto b = gen_synthetic(200, 4, 6, 2.0, 9);
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);
  CHECK(a.n == 200);
  CHECK(a.dim == 6);
  CHECK(a.classes == 4);
  const auto c = gen_synthetic(200, 4, 6, 2.0, 10);
  CHECK(a.X != c.X);
}

TEST_CASE("labels cycle round-robin") {
  const auto ds = gen_synthetic(10, 4, 4, 1.0, 3);
  std::vector<int> count(4, 0);
  for (int y : ds.y) ++count[static_cast<std::size_t>(y)];
  std::sort(count.begin(), count.end());
  CHECK(count == std::vector<int>{2, 2, 3, 3});
}

TEST_CASE("class mean separation matches the requested distance") {
  const auto ds = gen_synthetic(4000, 3, 5, 50.0, 21);
  const auto means = class_means(ds);
  for (std::size_t a = 0; a < means.size(); ++a)
    for (std::size_t b = a + 1; b < means.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < means[a].size(); ++j) {
        const double diff = means[a][j] - means[b][j];
        d2 += diff * diff;
      }
      CHECK(std::sqrt(d2) == doctest::Approx(50.0).epsilon(0.01));
    }
}

TEST_CASE("wide separation makes nearest-centroid classification perfect") {
  const auto ds = gen_synthetic(1000, 4, 6, 50.0, 33);
  const auto means = class_means(ds);
  int correct = 0;
  for (int i = 0; i < ds.n; ++i) {
    int best = -1;
    double best_d = 1e300;
    for (int c = 0; c < ds.classes; ++c) {
      double d2 = 0.0;
      for (int j = 0; j < ds.dim; ++j) {
        const double diff = ds.X[static_cast<std::size_t>(i * ds.dim + j)] -
                            means[static_cast<std::size_t>(c)]
                                 [static_cast<std::size_t>(j)];
        d2 += diff * diff;
      }
      if (d2 < best_d) {
        best_d = d2;
        best = c;
      }
    }
    if (best == ds.y[static_cast<std::size_t>(i)]) ++correct;
  }
  CHECK(correct == ds.n);
}

TEST_CASE("zero separation collapses the class means") {
  const auto ds = gen_synthetic(4000, 4, 4, 0.0, 5);
  const auto means = class_means(ds);
  for (const auto& m : means)
    for (double v : m) CHECK(std::abs(v) < 0.15);
}

TEST_CASE("synthetic generation validates its shape") {
  CHECK_THROWS_AS(gen_synthetic(3, 4, 6, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(10, 4, 3, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(10, 1, 3, 1.0, 1), std::invalid_argument);
}

TEST_CASE("dirichlet partition covers every sample exactly once") {
  const auto ds = gen_synthetic(500, 5, 5, 2.0, 7);
  for (double alpha : {0.1, 0.5, 100.0}) {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const auto plan = partition_noniid(ds.y, 7, alpha, seed);
      check_partition(plan, ds.n, 7);
      for (const auto& shard : plan.shards) CHECK(!shard.empty());
    }
  }
}

TEST_CASE("single client gets the whole dataset") {
  const auto ds = gen_synthetic(40, 4, 4, 2.0, 11);
  const auto plan = partition_noniid(ds.y, 1, 0.5, 1);
  REQUIRE(plan.shards.size() == 1);
  CHECK(static_cast<int>(plan.shards[0].size()) == ds.n);
}

TEST_CASE("partition is deterministic in the seed") {
  const auto ds = gen_synthetic(300, 4, 4, 2.0, 13);
  const auto a = partition_noniid(ds.y, 6, 0.5, 42);
  const auto b = partition_noniid(ds.y, 6, 0.5, 42);
  const auto c = partition_noniid(ds.y, 6, 0.5, 43);
  CHECK(a.shards == b.shards);
  CHECK(a.shards != c.shards);
}

TEST_CASE("huge alpha approaches the global label mix") {
  const auto ds = gen_synthetic(4000, 5, 5, 2.0, 17);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto plan = partition_noniid(ds.y, 5, 1e6, seed);
    for (const auto& shard : plan.shards) {
      std::vector<double> hist(5, 0.0);
      for (int idx : shard)
        hist[static_cast<std::size_t>(ds.y[static_cast<std::size_t>(idx)])] +=
            1.0;
      for (auto& h : hist) h /= static_cast<double>(shard.size());
      for (double h : hist) CHECK(std::abs(h - 0.2) < 0.05);
    }
  }
}

TEST_CASE("small alpha concentrates labels on few clients") {
  const auto ds = gen_synthetic(2000, 10, 10, 2.0, 19);
  int concentrated = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto plan = partition_noniid(ds.y, 10, 0.1, seed);
    for (const auto& shard : plan.shards) {
      ++total;
      std::vector<double> hist(10, 0.0);
      for (int idx : shard)
        hist[static_cast<std::size_t>(ds.y[static_cast<std::size_t>(idx)])] +=
            1.0;
      std::sort(hist.begin(), hist.end(), std::greater<>());
      const double top2 = (hist[0] + hist[1]) / static_cast<double>(shard.size());
      if (top2 >= 0.8) ++concentrated;
    }
  }
  // At least half of all client shards are dominated by two labels.
  CHECK(concentrated * 2 >= total);
}

TEST_CASE("partition rejects more clients than samples") {
  const auto ds = gen_synthetic(5, 2, 2, 1.0, 1);
  CHECK_THROWS_AS(partition_noniid(ds.y, 6, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(partition_noniid(ds.y, 0, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(partition_noniid(ds.y, 2, 0.0, 1), std::invalid_argument);
}

TEST_CASE("label shards deal contiguous label runs") {
  const auto ds = gen_synthetic(2000, 10, 10, 2.0, 23);
  const auto plan = partition_label_shards(ds.y, 10, 2, 5);
  check_partition(plan, ds.n, 10);
  const auto again = partition_label_shards(ds.y, 10, 2, 5);
  CHECK(plan.shards == again.shards);
  // Two runs of 100 sorted samples cross at most one class boundary each,
  // so a client sees at most four distinct labels.
  for (const auto& shard : plan.shards) {
    CHECK(shard.size() == 200);
    std::set<int> distinct;
    for (int idx : shard)
      distinct.insert(ds.y[static_cast<std::size_t>(idx)]);
    CHECK(distinct.size() <= 4);
  }
}

TEST_CASE("label shards validate the geometry") {
  const auto ds = gen_synthetic(20, 4, 4, 1.0, 2);
  CHECK_THROWS_AS(partition_label_shards(ds.y, 30, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(partition_label_shards(ds.y, 2, 0, 1),
                  std::invalid_argument);
}

TEST_CASE("split respects the test fraction") {
  const auto ds = gen_synthetic(100, 4, 4, 2.0, 29);
  Dataset train, test;
  split_dataset(ds, 0.25, 3, train, test);
  CHECK(test.n == 25);
  CHECK(train.n == 75);
  CHECK(train.dim == ds.dim);
  CHECK(test.classes == ds.classes);
  // Tiny positive fractions still produce at least one test sample.
  split_dataset(ds, 0.001, 3, train, test);
  CHECK(test.n == 1);
  CHECK(train.n == 99);
}

TEST_CASE("split is a seeded permutation of the dataset") {
  const auto ds = gen_synthetic(60, 3, 3, 2.0, 31);
  Dataset train_a, test_a, train_b, test_b;
  split_dataset(ds, 0.3, 7, train_a, test_a);
  split_dataset(ds, 0.3, 7, train_b, test_b);
  CHECK(train_a.X == train_b.X);
  CHECK(test_a.y == test_b.y);
  split_dataset(ds, 0.3, 8, train_b, test_b);
  CHECK(train_a.X != train_b.X);

  // Row multiset is preserved: every original row appears exactly once.
  std::multiset<std::vector<double>> original, recombined;
  for (int i = 0; i < ds.n; ++i)
    original.insert(std::vector<double>(
        ds.X.begin() + static_cast<std::ptrdiff_t>(i) * ds.dim,
        ds.X.begin() + static_cast<std::ptrdiff_t>(i + 1) * ds.dim));
  for (const Dataset* part : {&train_a, &test_a})
    for (int i = 0; i < part->n; ++i)
      recombined.insert(std::vector<double>(
          part->X.begin() + static_cast<std::ptrdiff_t>(i) * part->dim,
          part->X.begin() + static_cast<std::ptrdiff_t>(i + 1) * part->dim));
  CHECK(original == recombined);
}

TEST_CASE("idx loader reads a hand-written fixture byte for byte") {
  TempDir tmp;
  const auto images = tmp.file("img.idx");
  const auto labels = tmp.file("lab.idx");
  write_tiny_fixture(images, labels);
  const auto ds = load_idx(images, labels);
  CHECK(ds.n == 2);
  CHECK(ds.dim == 4);
  CHECK(ds.classes == 4);  // max label 3 plus one
  REQUIRE(ds.X.size() == 8);
  CHECK(ds.X[0] == doctest::Approx(0.0));
  CHECK(ds.X[1] == doctest::Approx(1.0));
  CHECK(ds.X[2] == doctest::Approx(0.0));
  CHECK(ds.X[3] == doctest::Approx(1.0));
  CHECK(ds.X[4] == doctest::Approx(1.0));
  CHECK(ds.X[7] == doctest::Approx(0.0));
  CHECK(ds.y == std::vector<int>{3, 1});
}

TEST_CASE("idx limit semantics") {
  TempDir tmp;
  const auto images = tmp.file("img.idx");
  const auto labels = tmp.file("lab.idx");
  write_tiny_fixture(images, labels);
  CHECK(load_idx(images, labels, -1).n == 2);
  CHECK(load_idx(images, labels, 5).n == 2);
  CHECK(load_idx(images, labels, 1).n == 1);
  // An explicit zero limit is a valid, empty dataset.
  const auto empty = load_idx(images, labels, 0);
  CHECK(empty.n == 0);
  CHECK(empty.X.empty());
  CHECK(empty.dim == 4);
}

TEST_CASE("idx round-trips through write and load") {
  // Pixel grid values k/255 survive the byte quantization exactly.
  Dataset ds;
  ds.n = 3;
  ds.dim = 4;
  ds.classes = 3;
  for (int i = 0; i < 12; ++i)
    ds.X.push_back(static_cast<double>((i * 21) % 256) / 255.0);
  ds.y = {0, 2, 1};
  TempDir tmp;
  const auto images = tmp.file("img.idx");
  const auto labels = tmp.file("lab.idx");
  write_idx(ds, 2, 2, images, labels);
  const auto back = load_idx(images, labels);
  CHECK(back.n == ds.n);
  CHECK(back.dim == ds.dim);
  CHECK(back.y == ds.y);
  REQUIRE(back.X.size() == ds.X.size());
  for (std::size_t i = 0; i < ds.X.size(); ++i)
    CHECK(back.X[i] == doctest::Approx(ds.X[i]).epsilon(1e-12));
}

TEST_CASE("idx error taxonomy") {
  TempDir tmp;
  const auto images = tmp.file("img.idx");
  const auto labels = tmp.file("lab.idx");

  // Label magic in the image file.
  write_tiny_fixture(images, labels, 0x801, 0x801);
  CHECK_THROWS_AS(load_idx(images, labels), IdxBadMagic);

  // Image magic in the label file.
  write_tiny_fixture(images, labels, 0x803, 0x803);
  CHECK_THROWS_AS(load_idx(images, labels), IdxBadMagic);

  // Count mismatch between the two files.
  write_tiny_fixture(images, labels, 0x803, 0x801, 3);
  CHECK_THROWS_AS(load_idx(images, labels), IdxCountMismatch);

  // Truncated pixel payload.
  write_tiny_fixture(images, labels);
  {
    std::ifstream in(images, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(images, std::ios::binary | std::ios::trunc);
    out.write(all.data(), static_cast<std::streamsize>(all.size() - 3));
  }
  CHECK_THROWS_AS(load_idx(images, labels), IdxTruncated);

  // Missing file.
  CHECK_THROWS_AS(load_idx(tmp.file("absent.idx"), labels), IdxTruncated);
}

TEST_CASE("dataset csv lists features then the label") {
  Dataset ds;
  ds.n = 2;
  ds.dim = 2;
  ds.classes = 2;
  ds.X = {0.5, 1.0, 0.25, 0.75};
  ds.y = {1, 0};
  const auto csv = dataset_to_csv(ds);
  CHECK(csv ==
        "f0,f1,label\n"
        "0.5,1,1\n"
        "0.25,0.75,0\n");
}
