#include "asa/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "asa/rng.hpp"

namespace asa::models {

std::size_t param_count(const ModelArch& arch) {
  if (arch.layer_widths.size() < 2)
    throw std::invalid_argument("arch needs at least input and output widths");
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_widths.size(); ++l) {
    const auto in = static_cast<std::size_t>(arch.layer_widths[l]);
    const auto out = static_cast<std::size_t>(arch.layer_widths[l + 1]);
    n += out * in + out;
  }
  return n;
}

std::vector<LayerSpan> layer_spans(const ModelArch& arch) {
  std::vector<LayerSpan> spans;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_widths.size(); ++l) {
    LayerSpan s;
    s.in = arch.layer_widths[l];
    s.out = arch.layer_widths[l + 1];
    s.w_off = off;
    s.b_off = off + static_cast<std::size_t>(s.out) * static_cast<std::size_t>(s.in);
    off = s.b_off + static_cast<std::size_t>(s.out);
    spans.push_back(s);
  }
  return spans;
}

NestedModelFamily build_family(int input_dim, int output_dim,
                               const std::array<std::vector<int>, kRungs>& hidden) {
  if (input_dim < 1 || output_dim < 2)
    throw std::invalid_argument("family needs input_dim >= 1, output_dim >= 2");
  const std::size_t depth = hidden[0].size();
  if (depth == 0)
    throw std::invalid_argument("family needs at least one hidden layer");
  for (int r = 0; r < kRungs; ++r) {
    if (hidden[static_cast<std::size_t>(r)].size() != depth)
      throw std::invalid_argument("all rungs need the same hidden depth");
    for (int w : hidden[static_cast<std::size_t>(r)])
      if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  }
  for (int r = 0; r + 1 < kRungs; ++r)
    for (std::size_t l = 0; l < depth; ++l)
      if (hidden[static_cast<std::size_t>(r)][l] >
          hidden[static_cast<std::size_t>(r) + 1][l])
        throw std::invalid_argument(
            "hidden widths must not decrease across rungs");

  NestedModelFamily f;
  f.input_dim = input_dim;
  f.output_dim = output_dim;
  for (int r = 0; r < kRungs; ++r) {
    ModelArch a;
    a.rung = r;
    a.layer_widths.push_back(input_dim);
    for (int w : hidden[static_cast<std::size_t>(r)]) a.layer_widths.push_back(w);
    a.layer_widths.push_back(output_dim);
    f.archs[static_cast<std::size_t>(r)] = std::move(a);
  }
  f.total_params = param_count(f.archs[kRungs - 1]);

  const auto full = layer_spans(f.archs[kRungs - 1]);
  for (int r = 0; r < kRungs; ++r) {
    const auto spans = layer_spans(f.archs[static_cast<std::size_t>(r)]);
    auto& map = f.coord_maps[static_cast<std::size_t>(r)];
    map.reserve(param_count(f.archs[static_cast<std::size_t>(r)]));
    for (std::size_t l = 0; l < spans.size(); ++l) {
      for (int i = 0; i < spans[l].out; ++i)
        for (int j = 0; j < spans[l].in; ++j)
          map.push_back(static_cast<std::uint32_t>(
              full[l].w_off + static_cast<std::size_t>(i) *
                                  static_cast<std::size_t>(full[l].in) +
              static_cast<std::size_t>(j)));
      for (int i = 0; i < spans[l].out; ++i)
        map.push_back(static_cast<std::uint32_t>(full[l].b_off +
                                                 static_cast<std::size_t>(i)));
    }
    auto& pos = f.pos_of[static_cast<std::size_t>(r)];
    pos.assign(f.total_params, -1);
    for (std::size_t p = 0; p < map.size(); ++p)
      pos[map[p]] = static_cast<std::int32_t>(p);
  }
  return f;
}

namespace {

const ModelArch& arch_of(const NestedModelFamily& f, int rung) {
  if (rung < 0 || rung >= kRungs)
    throw std::invalid_argument("rung out of range");
  return f.archs[static_cast<std::size_t>(rung)];
}

void check_params(const NestedModelFamily& f, const ParamVector& p) {
  if (p.values.size() != param_count(arch_of(f, p.rung)))
    throw std::invalid_argument("parameter vector length does not match rung");
}

void check_batch(const NestedModelFamily& f, const std::vector<double>& X,
                 const std::vector<int>& y) {
  if (y.empty()) throw std::invalid_argument("empty batch");
  if (X.size() != y.size() * static_cast<std::size_t>(f.input_dim))
    throw std::invalid_argument("batch size does not match input_dim");
  for (int c : y)
    if (c < 0 || c >= f.output_dim)
      throw std::invalid_argument("label out of range");
}

// Shared forward pass: fills per-layer pre-activations z and activations a
// (row-major n x width). a[0] aliases X.
struct Activations {
  std::vector<std::vector<double>> z;  // per layer, n x out
  std::vector<std::vector<double>> a;  // per layer, n x out (post-ReLU)
};

void run_forward(const std::vector<LayerSpan>& spans, const ParamVector& params,
                 const std::vector<double>& X, int n, Activations& act) {
  const int layers = static_cast<int>(spans.size());
  act.z.resize(static_cast<std::size_t>(layers));
  act.a.resize(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    act.z[static_cast<std::size_t>(l)].assign(
        static_cast<std::size_t>(n) * static_cast<std::size_t>(spans[static_cast<std::size_t>(l)].out), 0.0);
    act.a[static_cast<std::size_t>(l)].assign(act.z[static_cast<std::size_t>(l)].size(), 0.0);
  }
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    for (int l = 0; l < layers; ++l) {
      const LayerSpan& sp = spans[static_cast<std::size_t>(l)];
      const double* in = (l == 0)
                             ? &X[static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.in)]
                             : &act.a[static_cast<std::size_t>(l - 1)]
                                     [static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.in)];
      double* z = &act.z[static_cast<std::size_t>(l)]
                        [static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.out)];
      double* a = &act.a[static_cast<std::size_t>(l)]
                        [static_cast<std::size_t>(s) * static_cast<std::size_t>(sp.out)];
      for (int i = 0; i < sp.out; ++i) {
        double acc = static_cast<double>(
            params.values[sp.b_off + static_cast<std::size_t>(i)]);
        const float* w = &params.values[sp.w_off + static_cast<std::size_t>(i) *
                                                       static_cast<std::size_t>(sp.in)];
        for (int j = 0; j < sp.in; ++j)
          acc += static_cast<double>(w[j]) * in[j];
        z[i] = acc;
        a[i] = (l == layers - 1) ? acc : (acc > 0.0 ? acc : 0.0);
      }
    }
  }
}

// Softmax rows in place over the final layer's z; returns mean cross-entropy.
// Per-sample losses land in slots and are summed serially so the result does
// not depend on the thread count.
double softmax_loss(std::vector<double>& logits, const std::vector<int>& y,
                    int classes) {
  const int n = static_cast<int>(y.size());
  std::vector<double> per_sample(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    double* row = &logits[static_cast<std::size_t>(s) * static_cast<std::size_t>(classes)];
    double mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (int c = 0; c < classes; ++c) row[c] /= sum;
    per_sample[static_cast<std::size_t>(s)] =
        -std::log(std::max(row[y[static_cast<std::size_t>(s)]],
                           std::numeric_limits<double>::min()));
  }
  double loss = 0.0;
  for (double v : per_sample) loss += v;
  return loss / n;
}

}  // namespace

ForwardResult forward(const NestedModelFamily& family, const ParamVector& params,
                      const std::vector<double>& X, const std::vector<int>& y) {
  check_params(family, params);
  check_batch(family, X, y);
  const auto spans = layer_spans(arch_of(family, params.rung));
  const int n = static_cast<int>(y.size());
  Activations act;
  run_forward(spans, params, X, n, act);
  ForwardResult r;
  r.probs = std::move(act.z.back());
  r.loss = softmax_loss(r.probs, y, family.output_dim);
  return r;
}

BackwardResult backward(const NestedModelFamily& family, const ParamVector& params,
                        const std::vector<double>& X, const std::vector<int>& y) {
  check_params(family, params);
  check_batch(family, X, y);
  const auto spans = layer_spans(arch_of(family, params.rung));
  const int layers = static_cast<int>(spans.size());
  const int n = static_cast<int>(y.size());
  Activations act;
  run_forward(spans, params, X, n, act);

  std::vector<double> probs = act.z.back();
  BackwardResult r;
  r.loss = softmax_loss(probs, y, family.output_dim);
  r.grad.assign(params.values.size(), 0.0);

  // delta over the output layer: (p - onehot) / n.
  std::vector<double> delta = std::move(probs);
  const int classes = family.output_dim;
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n; ++s) {
    double* row = &delta[static_cast<std::size_t>(s) * static_cast<std::size_t>(classes)];
    for (int c = 0; c < classes; ++c) row[c] /= n;
    row[y[static_cast<std::size_t>(s)]] -= 1.0 / n;
  }

  for (int l = layers - 1; l >= 0; --l) {
    const LayerSpan& sp = spans[static_cast<std::size_t>(l)];
    const std::vector<double>& in_act =
        (l == 0) ? X : act.a[static_cast<std::size_t>(l - 1)];
    // Weight and bias gradients: one parallel unit per output row, inner
    // sample loop in fixed order.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < sp.out; ++i) {
      double* gw = &r.grad[sp.w_off + static_cast<std::size_t>(i) *
                                          static_cast<std::size_t>(sp.in)];
      double gb = 0.0;
      for (int s = 0; s < n; ++s) {
        const double d = delta[static_cast<std::size_t>(s) *
                                   static_cast<std::size_t>(sp.out) +
                               static_cast<std::size_t>(i)];
        gb += d;
        const double* a = &in_act[static_cast<std::size_t>(s) *
                                  static_cast<std::size_t>(sp.in)];
        for (int j = 0; j < sp.in; ++j) gw[j] += d * a[j];
      }
      r.grad[sp.b_off + static_cast<std::size_t>(i)] = gb;
    }
    if (l == 0) break;
    // delta for the previous layer, masked by its ReLU.
    std::vector<double> prev(static_cast<std::size_t>(n) *
                                 static_cast<std::size_t>(sp.in),
                             0.0);
    const std::vector<double>& z_prev = act.z[static_cast<std::size_t>(l - 1)];
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
      const double* d = &delta[static_cast<std::size_t>(s) *
                               static_cast<std::size_t>(sp.out)];
      double* p = &prev[static_cast<std::size_t>(s) *
                        static_cast<std::size_t>(sp.in)];
      const double* z = &z_prev[static_cast<std::size_t>(s) *
                                static_cast<std::size_t>(sp.in)];
      for (int j = 0; j < sp.in; ++j) {
        if (z[j] <= 0.0) continue;
        double acc = 0.0;
        for (int i = 0; i < sp.out; ++i)
          acc += static_cast<double>(
                     params.values[sp.w_off +
                                   static_cast<std::size_t>(i) *
                                       static_cast<std::size_t>(sp.in) +
                                   static_cast<std::size_t>(j)]) *
                 d[i];
        p[j] = acc;
      }
    }
    delta = std::move(prev);
  }
  return r;
}

double utility(const NestedModelFamily& family, int rung, double capability_score,
               double acc_estimate, double alpha, double beta) {
  const double demand =
      static_cast<double>(param_count(arch_of(family, rung))) /
      static_cast<double>(family.total_params);
  const double efficiency = std::min(1.0, capability_score / demand);
  return alpha * acc_estimate + beta * efficiency;
}

int adjust_complexity(int rung, Direction dir) {
  if (rung < 0 || rung >= kRungs)
    throw std::invalid_argument("rung out of range");
  int next = rung;
  if (dir == Direction::Up) ++next;
  if (dir == Direction::Down) --next;
  return std::clamp(next, 0, kRungs - 1);
}

ParamVector project_params(const NestedModelFamily& family, const ParamVector& local,
                           int to, const ParamVector& global) {
  check_params(family, local);
  if (to < 0 || to >= kRungs) throw std::invalid_argument("rung out of range");
  if (!global.values.empty()) {
    if (global.rung != kRungs - 1)
      throw std::invalid_argument("global vector must be the top rung");
    check_params(family, global);
  }
  ParamVector out;
  out.rung = to;
  const auto& map_to = family.coord_maps[static_cast<std::size_t>(to)];
  const auto& pos_from = family.pos_of[static_cast<std::size_t>(local.rung)];
  out.values.resize(map_to.size());
  for (std::size_t p = 0; p < map_to.size(); ++p) {
    const std::uint32_t g = map_to[p];
    const std::int32_t q = pos_from[g];
    if (q >= 0)
      out.values[p] = local.values[static_cast<std::size_t>(q)];
    else if (!global.values.empty())
      out.values[p] = global.values[g];
    else
      out.values[p] = 0.0f;
  }
  return out;
}

ParamVector init_params(const NestedModelFamily& family, std::uint64_t seed) {
  Rng rng(derive_seed(seed, StreamTag::ParamInit));
  ParamVector p;
  p.rung = kRungs - 1;
  p.values.assign(family.total_params, 0.0f);
  const auto spans = layer_spans(family.archs[kRungs - 1]);
  for (const auto& sp : spans) {
    const double s = std::sqrt(6.0 / (sp.in + sp.out));
    const std::size_t nw =
        static_cast<std::size_t>(sp.out) * static_cast<std::size_t>(sp.in);
    for (std::size_t i = 0; i < nw; ++i)
      p.values[sp.w_off + i] = static_cast<float>(rng.uniform(-s, s));
    // biases stay zero
  }
  return p;
}

std::vector<std::uint8_t> serialize_params(const ParamVector& p) {
  if (p.rung < 0 || p.rung >= kRungs)
    throw std::invalid_argument("rung out of range");
  std::vector<std::uint8_t> out;
  out.reserve(5 + 4 * p.values.size());
  out.push_back(static_cast<std::uint8_t>(p.rung));
  const auto n = static_cast<std::uint32_t>(p.values.size());
  for (int b = 0; b < 4; ++b)
    out.push_back(static_cast<std::uint8_t>((n >> (8 * b)) & 0xff));
  for (float v : p.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int b = 0; b < 4; ++b)
      out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff));
  }
  return out;
}

ParamVector parse_params(const std::uint8_t* data, std::size_t size) {
  if (size < 5) throw std::invalid_argument("parameter blob truncated");
  ParamVector p;
  p.rung = data[0];
  if (p.rung >= kRungs) throw std::invalid_argument("bad rung tag");
  std::uint32_t n = 0;
  for (int b = 0; b < 4; ++b)
    n |= static_cast<std::uint32_t>(data[1 + b]) << (8 * b);
  if (size != 5 + 4 * static_cast<std::size_t>(n))
    throw std::invalid_argument("parameter blob length mismatch");
  p.values.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(data[5 + 4 * i + static_cast<std::uint32_t>(b)])
              << (8 * b);
    float v;
    std::memcpy(&v, &bits, 4);
    p.values[i] = v;
  }
  return p;
}

}  // namespace asa::models
