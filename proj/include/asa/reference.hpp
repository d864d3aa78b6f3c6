#pragma once

#include <cstdint>
#include <vector>

#include "asa/clustering.hpp"
#include "asa/models.hpp"

// Straight-line serial implementations of the kernels that the main library
// parallelizes with OpenMP. Loop nests and accumulation orders mirror the
// parallel versions exactly, so results must match bit for bit at any thread
// count; tests assert that and the kernel benchmark compares their speed.

namespace asa::reference {

models::ForwardResult forward(const models::NestedModelFamily& family,
                              const models::ParamVector& params,
                              const std::vector<double>& X,
                              const std::vector<int>& y);

models::BackwardResult backward(const models::NestedModelFamily& family,
                                const models::ParamVector& params,
                                const std::vector<double>& X,
                                const std::vector<int>& y);

// Nearest-centroid labels (ties: lowest centroid id), one pass.
std::vector<int> nearest_centroid(const std::vector<std::vector<double>>& points,
                                  const std::vector<std::vector<double>>& centroids);

clustering::ClusterAssignment kmeans(
    const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
    int max_iter = 50, double tol = 1e-7);

}  // namespace asa::reference
