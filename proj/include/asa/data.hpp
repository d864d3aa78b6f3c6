#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Dataset synthesis, non-IID partitioning across clients, and the IDX image
// file loader.

namespace asa::data {

struct Dataset {
  int n = 0;
  int dim = 0;
  int classes = 0;
  std::vector<double> X;  // row-major n x dim
  std::vector<int> y;
};

// Gaussian blobs with unit per-dimension noise. Class means sit at
// separation/sqrt(2) along distinct axes, so every pair of means is exactly
// `separation` apart; requires classes <= dim. Labels cycle round-robin so
// counts differ by at most one. Throws on n < classes.
Dataset gen_synthetic(int n, int classes, int dim, double separation,
                      std::uint64_t seed);

struct ShardPlan {
  std::vector<std::vector<int>> shards;  // per client, sorted sample indices
};

// Dirichlet(alpha) label-skew partition: each class's samples are split
// across clients by a Dirichlet draw (largest-remainder rounding). Clients
// left empty are repaired by moving one sample from the largest shard until
// none are empty. Shards partition [0, n) exactly.
ShardPlan partition_noniid(const std::vector<int>& labels, int n_clients,
                           double alpha, std::uint64_t seed);

// Sort-and-deal alternative: samples sorted by label are cut into
// n_clients * shards_per_client contiguous runs, which are dealt to clients
// in a seeded shuffle.
ShardPlan partition_label_shards(const std::vector<int>& labels, int n_clients,
                                 int shards_per_client, std::uint64_t seed);

// Seeded split into train/test; test_fraction of samples (rounded down, at
// least 1 when the fraction is positive) go to the test set.
void split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed,
                   Dataset& train, Dataset& test);

struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxBadMagic : IdxError {
  using IdxError::IdxError;
};
struct IdxTruncated : IdxError {
  using IdxError::IdxError;
};
struct IdxCountMismatch : IdxError {
  using IdxError::IdxError;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801),
// big-endian headers, pixels scaled to [0, 1] by /255. limit >= 0 keeps only
// the first `limit` samples (0 gives an empty dataset); negative means no
// cap. Throws IdxBadMagic / IdxTruncated /
// IdxCountMismatch respectively for wrong magic, short files, and
// image/label count disagreement.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int limit = -1);

// Inverse of load_idx for fixture generation and round-trips: pixels are
// written as round(x * 255) clamped to [0, 255]. rows * cols must equal dim.
void write_idx(const Dataset& ds, int rows, int cols,
               const std::string& images_path, const std::string& labels_path);

// CSV with header f0,...,f{dim-1},label.
std::string dataset_to_csv(const Dataset& ds);

}  // namespace asa::data
