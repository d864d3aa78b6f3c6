#include "asa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asa/rng.hpp"

namespace asa::data {

Dataset gen_synthetic(int n, int classes, int dim, double separation,
                      std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("gen_synthetic: classes >= 2");
  if (n < classes) throw std::invalid_argument("gen_synthetic: n must be >= classes");
  if (dim < classes)
    throw std::invalid_argument("gen_synthetic: needs dim >= classes");
  if (!(separation >= 0.0))
    throw std::invalid_argument("gen_synthetic: separation must be >= 0");

  Dataset ds;
  ds.n = n;
  ds.dim = dim;
  ds.classes = classes;
  ds.X.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(dim), 0.0);
  ds.y.resize(static_cast<std::size_t>(n));
  const double offset = separation / std::sqrt(2.0);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    ds.y[static_cast<std::size_t>(i)] = c;
    Rng rng(derive_seed(seed, StreamTag::Synthetic, static_cast<std::uint64_t>(i)));
    double* row = &ds.X[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim)];
    for (int j = 0; j < dim; ++j) row[j] = rng.normal();
    row[c] += offset;
  }
  return ds;
}

namespace {

// Largest-remainder integer split of `total` by `weights` (>= 0, sum > 0).
// Ties go to the lower index.
std::vector<int> quota_split(int total, const std::vector<double>& weights) {
  const std::size_t k = weights.size();
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::vector<int> counts(k, 0);
  std::vector<double> frac(k, 0.0);
  int assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = total * (weights[i] / wsum);
    counts[i] = static_cast<int>(std::floor(exact + 1e-9));
    frac[i] = exact - counts[i];
    assigned += counts[i];
  }
  for (int left = total - assigned; left > 0; --left) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i)
      if (frac[i] > frac[best] + 1e-12) best = i;
    ++counts[best];
    frac[best] = -1.0;
  }
  return counts;
}

void check_partition_args(const std::vector<int>& labels, int n_clients) {
  if (labels.empty()) throw std::invalid_argument("partition: empty dataset");
  if (n_clients < 1) throw std::invalid_argument("partition: n_clients >= 1");
  if (static_cast<std::size_t>(n_clients) > labels.size())
    throw std::invalid_argument("partition: more clients than samples");
}

// Move single samples from the largest shard into empty ones.
void repair_empty(std::vector<std::vector<int>>& shards) {
  for (auto& shard : shards) {
    while (shard.empty()) {
      std::size_t donor = 0;
      for (std::size_t i = 1; i < shards.size(); ++i)
        if (shards[i].size() > shards[donor].size()) donor = i;
      if (shards[donor].size() <= 1)
        throw std::runtime_error("partition: cannot repair empty shard");
      shard.push_back(shards[donor].back());
      shards[donor].pop_back();
    }
  }
}

}  // namespace

ShardPlan partition_noniid(const std::vector<int>& labels, int n_clients,
                           double alpha, std::uint64_t seed) {
  check_partition_args(labels, n_clients);
  if (!(alpha > 0.0)) throw std::invalid_argument("partition: alpha must be > 0");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;

  ShardPlan plan;
  plan.shards.assign(static_cast<std::size_t>(n_clients), {});
  for (int c = 0; c < classes; ++c) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) idx.push_back(static_cast<int>(i));
    if (idx.empty()) continue;
    Rng rng(derive_seed(seed, StreamTag::Partition, static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    const auto props = rng.dirichlet(alpha, static_cast<std::size_t>(n_clients));
    const auto counts = quota_split(static_cast<int>(idx.size()), props);
    std::size_t pos = 0;
    for (int cl = 0; cl < n_clients; ++cl)
      for (int t = 0; t < counts[static_cast<std::size_t>(cl)]; ++t)
        plan.shards[static_cast<std::size_t>(cl)].push_back(idx[pos++]);
  }
  repair_empty(plan.shards);
  for (auto& shard : plan.shards) std::sort(shard.begin(), shard.end());
  return plan;
}

ShardPlan partition_label_shards(const std::vector<int>& labels, int n_clients,
                                 int shards_per_client, std::uint64_t seed) {
  check_partition_args(labels, n_clients);
  if (shards_per_client < 1)
    throw std::invalid_argument("partition: shards_per_client >= 1");
  const int n_shards = n_clients * shards_per_client;
  if (static_cast<std::size_t>(n_shards) > labels.size())
    throw std::invalid_argument("partition: more shards than samples");

  std::vector<int> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return labels[static_cast<std::size_t>(a)] <
                                              labels[static_cast<std::size_t>(b)]; });

  const auto counts =
      quota_split(static_cast<int>(labels.size()),
                  std::vector<double>(static_cast<std::size_t>(n_shards), 1.0));
  std::vector<int> shard_of_deal(static_cast<std::size_t>(n_shards));
  std::iota(shard_of_deal.begin(), shard_of_deal.end(), 0);
  Rng rng(derive_seed(seed, StreamTag::Partition));
  rng.shuffle(shard_of_deal);

  ShardPlan plan;
  plan.shards.assign(static_cast<std::size_t>(n_clients), {});
  std::vector<std::size_t> starts(static_cast<std::size_t>(n_shards) + 1, 0);
  for (int s = 0; s < n_shards; ++s)
    starts[static_cast<std::size_t>(s) + 1] =
        starts[static_cast<std::size_t>(s)] +
        static_cast<std::size_t>(counts[static_cast<std::size_t>(s)]);
  for (int d = 0; d < n_shards; ++d) {
    const int shard_id = shard_of_deal[static_cast<std::size_t>(d)];
    const int client = d / shards_per_client;
    for (std::size_t p = starts[static_cast<std::size_t>(shard_id)];
         p < starts[static_cast<std::size_t>(shard_id) + 1]; ++p)
      plan.shards[static_cast<std::size_t>(client)].push_back(idx[p]);
  }
  repair_empty(plan.shards);
  for (auto& shard : plan.shards) std::sort(shard.begin(), shard.end());
  return plan;
}

void split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed,
                   Dataset& train, Dataset& test) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: test_fraction must lie in [0, 1)");
  std::vector<int> idx(static_cast<std::size_t>(ds.n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, StreamTag::Shuffle));
  rng.shuffle(idx);
  int n_test = static_cast<int>(std::floor(ds.n * test_fraction));
  if (test_fraction > 0.0 && n_test == 0) n_test = 1;

  auto take = [&](Dataset& out, std::size_t from, std::size_t to) {
    out.n = static_cast<int>(to - from);
    out.dim = ds.dim;
    out.classes = ds.classes;
    out.X.resize(static_cast<std::size_t>(out.n) * static_cast<std::size_t>(ds.dim));
    out.y.resize(static_cast<std::size_t>(out.n));
    for (std::size_t r = from; r < to; ++r) {
      const auto src = static_cast<std::size_t>(idx[r]);
      std::copy_n(&ds.X[src * static_cast<std::size_t>(ds.dim)],
                  static_cast<std::size_t>(ds.dim),
                  &out.X[(r - from) * static_cast<std::size_t>(ds.dim)]);
      out.y[r - from] = ds.y[src];
    }
  };
  take(test, 0, static_cast<std::size_t>(n_test));
  take(train, static_cast<std::size_t>(n_test), static_cast<std::size_t>(ds.n));
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  std::uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw IdxTruncated("idx: truncated header in " + what);
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>((v >> 24) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>(v & 0xff)};
  out.write(b, 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int limit) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IdxTruncated("idx: cannot open " + images_path);
  if (read_be32(img, images_path) != 0x00000803u)
    throw IdxBadMagic("idx: bad image magic in " + images_path);
  const std::uint32_t n_img = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IdxTruncated("idx: cannot open " + labels_path);
  if (read_be32(lab, labels_path) != 0x00000801u)
    throw IdxBadMagic("idx: bad label magic in " + labels_path);
  const std::uint32_t n_lab = read_be32(lab, labels_path);
  if (n_img != n_lab)
    throw IdxCountMismatch("idx: image/label count mismatch");

  std::uint32_t n = n_img;
  if (limit >= 0 && static_cast<std::uint32_t>(limit) < n)
    n = static_cast<std::uint32_t>(limit);

  Dataset ds;
  ds.n = static_cast<int>(n);
  ds.dim = static_cast<int>(rows * cols);
  ds.X.resize(static_cast<std::size_t>(n) * rows * cols);
  ds.y.resize(n);

  std::vector<std::uint8_t> buf(static_cast<std::size_t>(n) * rows * cols);
  if (!img.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size())))
    throw IdxTruncated("idx: truncated pixel data in " + images_path);
  for (std::size_t i = 0; i < buf.size(); ++i)
    ds.X[i] = static_cast<double>(buf[i]) / 255.0;

  std::vector<std::uint8_t> lbuf(n);
  if (!lab.read(reinterpret_cast<char*>(lbuf.data()),
                static_cast<std::streamsize>(lbuf.size())))
    throw IdxTruncated("idx: truncated label data in " + labels_path);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.y[i] = lbuf[i];
    max_label = std::max(max_label, ds.y[i]);
  }
  ds.classes = max_label + 1;
  return ds;
}

void write_idx(const Dataset& ds, int rows, int cols,
               const std::string& images_path, const std::string& labels_path) {
  if (rows * cols != ds.dim)
    throw std::invalid_argument("write_idx: rows * cols must equal dim");
  if (ds.y.size() != static_cast<std::size_t>(ds.n) ||
      ds.X.size() != static_cast<std::size_t>(ds.n) *
                         static_cast<std::size_t>(ds.dim))
    throw std::invalid_argument("write_idx: dataset n/X/y sizes disagree");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("write_idx: cannot open " + images_path);
  write_be32(img, 0x00000803u);
  write_be32(img, static_cast<std::uint32_t>(ds.n));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  std::vector<std::uint8_t> buf(ds.X.size());
  for (std::size_t i = 0; i < ds.X.size(); ++i) {
    const double v = std::round(ds.X[i] * 255.0);
    buf[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  img.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("write_idx: cannot open " + labels_path);
  write_be32(lab, 0x00000801u);
  write_be32(lab, static_cast<std::uint32_t>(ds.n));
  std::vector<std::uint8_t> lbuf(static_cast<std::size_t>(ds.n));
  for (std::size_t i = 0; i < lbuf.size(); ++i)
    lbuf[i] = static_cast<std::uint8_t>(ds.y[i]);
  lab.write(reinterpret_cast<const char*>(lbuf.data()),
            static_cast<std::streamsize>(lbuf.size()));
}

std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream out;
  for (int j = 0; j < ds.dim; ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[64];
  for (int i = 0; i < ds.n; ++i) {
    for (int j = 0; j < ds.dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    ds.X[static_cast<std::size_t>(i) * static_cast<std::size_t>(ds.dim) +
                         static_cast<std::size_t>(j)]);
      out << buf << ',';
    }
    out << ds.y[static_cast<std::size_t>(i)] << '\n';
  }
  return out.str();
}

}  // namespace asa::data
