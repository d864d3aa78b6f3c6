// Timing harness for the OpenMP kernels against their serial references.
// Each kernel runs on the same inputs both ways; the table reports wall
// time per call and the speedup. Results are checked for bit equality
// while timing, so a divergence shows up here before it shows up in tests.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "asa/clustering.hpp"
#include "asa/data.hpp"
#include "asa/models.hpp"
#include "asa/reference.hpp"
#include "asa/rng.hpp"

namespace {

double time_call(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const std::chrono::duration<double> dt =
      std::chrono::steady_clock::now() - start;
  return dt.count() / reps;
}

void row(const char* name, double serial_s, double parallel_s, bool equal) {
  std::printf("%-10s %12.3f ms %12.3f ms %8.2fx   %s\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              equal ? "bit-equal" : "MISMATCH");
}

}  // namespace

int main() {
  using namespace asa;

#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; both columns run serially\n");
#endif
  std::printf("%-10s %15s %15s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  const auto family = models::build_family(
      64, 10, {std::vector<int>{32}, std::vector<int>{64},
               std::vector<int>{128}});
  const auto ds = data::gen_synthetic(2048, 10, 64, 3.0, 11);
  auto params = models::init_params(family, 11);

  {
    models::ForwardResult par, ser;
    const double tp = time_call(
        [&] { par = models::forward(family, params, ds.X, ds.y); }, 5);
    const double ts = time_call(
        [&] { ser = reference::forward(family, params, ds.X, ds.y); }, 5);
    row("forward", ts, tp,
        par.loss == ser.loss && par.probs == ser.probs);
  }
  {
    models::BackwardResult par, ser;
    const double tp = time_call(
        [&] { par = models::backward(family, params, ds.X, ds.y); }, 5);
    const double ts = time_call(
        [&] { ser = reference::backward(family, params, ds.X, ds.y); }, 5);
    row("backward", ts, tp,
        par.loss == ser.loss && par.grad == ser.grad);
  }
  {
    Rng rng(derive_seed(11, StreamTag::Synthetic, 1));
    std::vector<std::vector<double>> points(4096, std::vector<double>(8));
    for (auto& p : points)
      for (auto& x : p) x = rng.uniform();
    clustering::ClusterAssignment par, ser;
    const double tp = time_call(
        [&] { par = clustering::kmeans(points, 8, 13); }, 3);
    const double ts = time_call(
        [&] { ser = reference::kmeans(points, 8, 13); }, 3);
    row("kmeans", ts, tp,
        par.labels == ser.labels && par.centroids == ser.centroids &&
            par.objective_history == ser.objective_history);
  }
  return 0;
}
