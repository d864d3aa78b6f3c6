#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// The nested model family: three MLP rungs (Simple = 0, Medium = 1,
// Complex = 2) whose weight matrices are leading sub-blocks of the next
// rung's, so any sub-model's parameters embed into one shared coordinate
// space (the Complex layout). Devices move between rungs by projecting
// through that space.

namespace asa::models {

inline constexpr int kRungs = 3;

struct ModelArch {
  int rung = 0;
  // input, hidden..., output.
  std::vector<int> layer_widths;
};

// Canonical coordinate space: the Complex rung's parameters laid out layer by
// layer, weights row-major (out x in) then biases. Every rung's coord map is
// sorted ascending in that space and is a strict subset of the next rung's.
struct NestedModelFamily {
  int input_dim = 0;
  int output_dim = 0;
  std::array<ModelArch, kRungs> archs;
  std::array<std::vector<std::uint32_t>, kRungs> coord_maps;
  // pos_of[r][g] = local index of global coordinate g in rung r, or -1.
  std::array<std::vector<std::int32_t>, kRungs> pos_of;
  std::size_t total_params = 0;
};

// Parameters of one rung, in that rung's own dense layout. 32-bit storage is
// the wire format; arithmetic promotes to double.
struct ParamVector {
  int rung = 0;
  std::vector<float> values;
};

std::size_t param_count(const ModelArch& arch);

// hidden[r] holds rung r's hidden-layer widths. All rungs need the same
// depth, and widths must be layer-wise non-decreasing across rungs; equal
// widths give identical (degenerate) coordinate maps. Throws
// std::invalid_argument on a decrease or a depth mismatch.
NestedModelFamily build_family(int input_dim, int output_dim,
                               const std::array<std::vector<int>, kRungs>& hidden);

struct ForwardResult {
  double loss = 0.0;
  // Row-major n x output_dim class probabilities.
  std::vector<double> probs;
};

// Mean cross-entropy of softmax outputs; hidden layers use ReLU. X is
// row-major n x input_dim, y holds class ids. Batch rows are evaluated in
// parallel, each sample into its own slot.
ForwardResult forward(const NestedModelFamily& family, const ParamVector& params,
                      const std::vector<double>& X, const std::vector<int>& y);

struct BackwardResult {
  double loss = 0.0;
  // Same layout and length as params.values.
  std::vector<double> grad;
};

// Reverse-mode gradient of the forward loss. Weight-gradient rows are
// computed in parallel with a fixed-order inner sample loop, so results are
// identical for any thread count.
BackwardResult backward(const NestedModelFamily& family, const ParamVector& params,
                        const std::vector<double>& X, const std::vector<int>& y);

// U = alpha * acc_estimate + beta * min(1, capability / demand) where demand
// is the rung's parameter count normalized by the Complex rung's.
double utility(const NestedModelFamily& family, int rung, double capability_score,
               double acc_estimate, double alpha, double beta);

enum class Direction { Up, Down, Hold };

// One rung at a time, clamped to [0, kRungs-1].
int adjust_complexity(int rung, Direction dir);

// Re-expresses local parameters at rung `to`. Shared coordinates copy from
// `local`; coordinates new at `to` fill from `global` (the rung-2 vector) or
// zero when `global` is empty. Shrinking simply drops coordinates, so
// grow-then-shrink returns the original values.
ParamVector project_params(const NestedModelFamily& family, const ParamVector& local,
                           int to, const ParamVector& global);

// Glorot-uniform weights, zero biases, drawn layer by layer from a derived
// stream; returns the rung-2 vector.
ParamVector init_params(const NestedModelFamily& family, std::uint64_t seed);

// Wire format: rung byte, little-endian u32 count, count little-endian f32.
std::vector<std::uint8_t> serialize_params(const ParamVector& p);
ParamVector parse_params(const std::uint8_t* data, std::size_t size);

// Offsets of each layer's weight block and bias block inside a rung-local
// vector; exposed for the serial reference implementation and tests.
struct LayerSpan {
  int in = 0;
  int out = 0;
  std::size_t w_off = 0;
  std::size_t b_off = 0;
};
std::vector<LayerSpan> layer_spans(const ModelArch& arch);

}  // namespace asa::models
