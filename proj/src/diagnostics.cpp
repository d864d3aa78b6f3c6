#include "asa/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "asa/rng.hpp"

namespace asa::diag {

// ---------------------------------------------------------------------------

CommReport comm_cost(const std::vector<sim::RoundLog>& logs,
                     const models::NestedModelFamily& family) {
  if (logs.empty()) throw std::invalid_argument("comm_cost: no logs");
  CommReport r;
  r.per_round.reserve(logs.size());
  std::int64_t full = 0;
  const auto top_params = static_cast<std::int64_t>(family.total_params);
  for (const auto& log : logs) {
    std::int64_t round_bytes = 0;
    for (const auto& d : log.devices) {
      if (d.rung < 0 || d.rung >= models::kRungs)
        throw std::invalid_argument("comm_cost: rung out of range in log");
      const auto p = static_cast<std::int64_t>(
          family.coord_maps[static_cast<std::size_t>(d.rung)].size());
      round_bytes += (d.straggler ? 4 : 8) * p;
      full += 8 * top_params;
    }
    r.per_round.push_back(round_bytes);
    r.total += round_bytes;
  }
  r.reduction =
      full > 0 ? 1.0 - static_cast<double>(r.total) / static_cast<double>(full)
               : 0.0;
  return r;
}

// ---------------------------------------------------------------------------

ComplexityEstimate complexity_estimates(double n_devices, double k, double iters,
                                        double epochs, double samples,
                                        double params, double bandwidth,
                                        const std::vector<double>& bench_sizes) {
  if (!(n_devices > 0 && k > 0 && iters > 0 && epochs > 0 && samples > 0 &&
        params > 0 && bandwidth > 0))
    throw std::invalid_argument("complexity_estimates: inputs must be positive");
  ComplexityEstimate e;
  e.t_bench = n_devices * std::log(n_devices);
  for (double s : bench_sizes) {
    if (!(s > 0))
      throw std::invalid_argument("complexity_estimates: inputs must be positive");
    e.t_bench += s * s * s;
  }
  e.t_clust = n_devices * k * iters;
  e.t_train = n_devices * epochs * samples * params +
              n_devices * std::log(n_devices);
  e.s_device = params + std::sqrt(params);
  e.s_global = n_devices * params + k * std::sqrt(params);
  e.comm = n_devices * epochs * params / bandwidth;
  return e;
}

// ---------------------------------------------------------------------------

namespace {

double fit_sse(const std::vector<double>& y, double c, double d) {
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i + 1);
    const double r = y[i] - (c / t + d / std::sqrt(t));
    sse += r * r;
  }
  return sse;
}

}  // namespace

ConvergenceFit fit_convergence(const std::vector<double>& grad_sq_history) {
  const std::size_t n = grad_sq_history.size();
  if (n < 4)
    throw std::invalid_argument("fit_convergence: need at least 4 points");

  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i + 1);
    const double f1 = 1.0 / t;
    const double f2 = 1.0 / std::sqrt(t);
    a11 += f1 * f1;
    a12 += f1 * f2;
    a22 += f2 * f2;
    b1 += f1 * grad_sq_history[i];
    b2 += f2 * grad_sq_history[i];
  }

  double c = 0, d = 0;
  const double det = a11 * a22 - a12 * a12;
  if (det > 1e-12 * a11 * a22) {
    c = (b1 * a22 - b2 * a12) / det;
    d = (a11 * b2 - a12 * b1) / det;
  } else {
    c = -1;  // force the boundary search
  }
  if (c < 0 || d < 0) {
    const double c_only = std::max(0.0, b1 / a11);
    const double d_only = std::max(0.0, b2 / a22);
    if (fit_sse(grad_sq_history, c_only, 0.0) <=
        fit_sse(grad_sq_history, 0.0, d_only)) {
      c = c_only;
      d = 0.0;
    } else {
      c = 0.0;
      d = d_only;
    }
  }

  ConvergenceFit fit;
  fit.c_hat = c;
  fit.d_hat = d;
  fit.residual = std::sqrt(fit_sse(grad_sq_history, c, d) / static_cast<double>(n));

  double mean = 0.0;
  for (double v : grad_sq_history) mean += v;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (double v : grad_sq_history) spread += (v - mean) * (v - mean);
  spread = std::sqrt(spread / static_cast<double>(n));
  // The decay model must explain at least half the sequence's spread;
  // constant histories have zero spread and are flagged non-convergent.
  fit.converged = fit.residual <= 0.5 * spread;
  return fit;
}

double fit_value(const ConvergenceFit& fit, int t) {
  if (t < 1) throw std::invalid_argument("fit_value: t must be >= 1");
  const double td = static_cast<double>(t);
  return fit.c_hat / td + fit.d_hat / std::sqrt(td);
}

double fit_envelope_scale(const ConvergenceFit& fit,
                          const std::vector<double>& y, int t_min) {
  if (t_min < 1)
    throw std::invalid_argument("fit_envelope_scale: t_min must be >= 1");
  double s = 1.0;
  for (std::size_t i = static_cast<std::size_t>(t_min - 1); i < y.size(); ++i) {
    const double f = fit_value(fit, static_cast<int>(i + 1));
    if (y[i] <= 0.0) continue;
    if (f <= 0.0)
      throw std::invalid_argument(
          "fit_envelope_scale: zero fit cannot dominate positive data");
    s = std::max(s, y[i] / f);
  }
  return s;
}

// ---------------------------------------------------------------------------

void OracleConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("oracle: dim must be >= 1");
  if (!(mu > 0)) throw std::invalid_argument("oracle: mu must be > 0");
  if (!(l_smooth >= mu))
    throw std::invalid_argument("oracle: l_smooth must be >= mu");
  if (!(sigma2 >= 0)) throw std::invalid_argument("oracle: sigma2 must be >= 0");
  if (steps < 1) throw std::invalid_argument("oracle: steps must be >= 1");
  if (n_seeds < 1) throw std::invalid_argument("oracle: n_seeds must be >= 1");
  if (!(eta0 > 0)) throw std::invalid_argument("oracle: eta0 must be > 0");
  if (!(radius >= 0)) throw std::invalid_argument("oracle: radius must be >= 0");
}

std::vector<double> OracleConfig::eta() const {
  validate();
  training::TrainConfig tc;
  tc.lr0 = eta0;
  tc.schedule = schedule;
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t)
    out[static_cast<std::size_t>(t - 1)] = training::lr_schedule(t, tc);
  return out;
}

namespace {

std::vector<double> spectrum_of(const OracleConfig& cfg) {
  std::vector<double> lambda(static_cast<std::size_t>(cfg.dim));
  if (cfg.dim == 1) {
    lambda[0] = cfg.l_smooth;
  } else {
    for (int i = 0; i < cfg.dim; ++i)
      lambda[static_cast<std::size_t>(i)] =
          cfg.mu + (cfg.l_smooth - cfg.mu) * static_cast<double>(i) /
                       static_cast<double>(cfg.dim - 1);
  }
  return lambda;
}

double column_mean(const std::vector<double>& m, int rows, int cols, int col) {
  double s = 0.0;
  for (int r = 0; r < rows; ++r)
    s += m[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(col)];
  return s / rows;
}

}  // namespace

QuadraticTraj quadratic_sgd(const OracleConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto lambda = spectrum_of(cfg);
  const auto eta = cfg.eta();
  const int T = cfg.steps;
  const int S = cfg.n_seeds;
  const int dim = cfg.dim;
  const double w0 = cfg.radius / std::sqrt(static_cast<double>(dim));
  const double noise_sd =
      cfg.sigma2 > 0 ? std::sqrt(cfg.sigma2 / static_cast<double>(dim)) : 0.0;

  QuadraticTraj traj;
  traj.steps = T;
  traj.n_seeds = S;
  traj.v.assign(static_cast<std::size_t>(S) * static_cast<std::size_t>(T + 1), 0.0);
  traj.f_gap.assign(traj.v.size(), 0.0);
  traj.true_grad_sq.assign(
      static_cast<std::size_t>(S) * static_cast<std::size_t>(T), 0.0);
  traj.stoch_grad_sq.assign(traj.true_grad_sq.size(), 0.0);

  // Seeds are independent streams writing disjoint rows.
#pragma omp parallel for schedule(static)
  for (int s = 0; s < S; ++s) {
    Rng rng(derive_seed(seed, StreamTag::Oracle, static_cast<std::uint64_t>(s)));
    std::vector<double> x(static_cast<std::size_t>(dim), w0);
    const std::size_t vrow = static_cast<std::size_t>(s) *
                             static_cast<std::size_t>(T + 1);
    const std::size_t grow =
        static_cast<std::size_t>(s) * static_cast<std::size_t>(T);
    double v = 0.0, f = 0.0;
    for (int i = 0; i < dim; ++i) {
      v += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      f += lambda[static_cast<std::size_t>(i)] *
           x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    }
    traj.v[vrow] = v;
    traj.f_gap[vrow] = 0.5 * f;

    for (int t = 0; t < T; ++t) {
      double tg = 0.0, sg = 0.0;
      const double e = eta[static_cast<std::size_t>(t)];
      for (int i = 0; i < dim; ++i) {
        const double gi =
            lambda[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        tg += gi * gi;
        const double noisy =
            noise_sd > 0 ? gi + rng.normal(0.0, noise_sd) : gi;
        sg += noisy * noisy;
        x[static_cast<std::size_t>(i)] -= e * noisy;
      }
      traj.true_grad_sq[grow + static_cast<std::size_t>(t)] = tg;
      traj.stoch_grad_sq[grow + static_cast<std::size_t>(t)] = sg;
      v = 0.0;
      f = 0.0;
      for (int i = 0; i < dim; ++i) {
        v += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        f += lambda[static_cast<std::size_t>(i)] *
             x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      }
      traj.v[vrow + static_cast<std::size_t>(t) + 1] = v;
      traj.f_gap[vrow + static_cast<std::size_t>(t) + 1] = 0.5 * f;
    }
  }

  double mx = 0.0;
  for (int t = 0; t < T; ++t)
    mx = std::max(mx, column_mean(traj.stoch_grad_sq, S, T, t));
  traj.sigma2_hat = mx;
  return traj;
}

std::vector<double> QuadraticTraj::mean_v() const {
  std::vector<double> out(static_cast<std::size_t>(steps + 1));
  for (int t = 0; t <= steps; ++t)
    out[static_cast<std::size_t>(t)] = column_mean(v, n_seeds, steps + 1, t);
  return out;
}

std::vector<double> QuadraticTraj::mean_f_gap() const {
  std::vector<double> out(static_cast<std::size_t>(steps + 1));
  for (int t = 0; t <= steps; ++t)
    out[static_cast<std::size_t>(t)] = column_mean(f_gap, n_seeds, steps + 1, t);
  return out;
}

std::vector<double> QuadraticTraj::mean_true_grad_sq() const {
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t)
    out[static_cast<std::size_t>(t)] = column_mean(true_grad_sq, n_seeds, steps, t);
  return out;
}

// ---------------------------------------------------------------------------

LyapunovReport lyapunov_check(const QuadraticTraj& traj,
                              const OracleConfig& cfg) {
  const int T = traj.steps;
  const int S = traj.n_seeds;
  if (T < 1 || S < 1) throw std::invalid_argument("lyapunov_check: empty oracle");
  const auto eta = cfg.eta();
  if (static_cast<int>(eta.size()) != T)
    throw std::invalid_argument("lyapunov_check: schedule length mismatch");

  LyapunovReport rep;
  rep.sigma2_used = traj.sigma2_hat;
  rep.violation.resize(static_cast<std::size_t>(T));
  rep.violation_se.resize(static_cast<std::size_t>(T));

  // Floating-point guard well below any real violation's magnitude.
  const double abs_tol =
      1e-9 * std::max({1.0, cfg.radius * cfg.radius, traj.sigma2_hat});

  for (int t = 0; t < T; ++t) {
    const double e = eta[static_cast<std::size_t>(t)];
    const double factor = 1.0 - 2.0 * cfg.mu * e;
    const double noise_term = e * e * traj.sigma2_hat;
    double mean = 0.0, m2 = 0.0;
    for (int s = 0; s < S; ++s) {
      const std::size_t row = static_cast<std::size_t>(s) *
                              static_cast<std::size_t>(T + 1);
      const double d = traj.v[row + static_cast<std::size_t>(t) + 1] -
                       factor * traj.v[row + static_cast<std::size_t>(t)] -
                       noise_term;
      const double delta = d - mean;
      mean += delta / (s + 1);
      m2 += delta * (d - mean);
    }
    const double se =
        S > 1 ? std::sqrt(m2 / (S - 1)) / std::sqrt(static_cast<double>(S)) : 0.0;
    rep.violation[static_cast<std::size_t>(t)] = mean;
    rep.violation_se[static_cast<std::size_t>(t)] = se;
    if (mean > 3.0 * se + abs_tol) ++rep.violations;
  }
  rep.recursion_ok = rep.violations == 0;

  double fg = 0.0;
  for (int s = 0; s < S; ++s)
    fg += traj.f_gap[static_cast<std::size_t>(s) *
                         static_cast<std::size_t>(T + 1) +
                     static_cast<std::size_t>(T)];
  rep.final_gap = fg / S;
  const double Td = static_cast<double>(T);
  rep.final_bound =
      cfg.l_smooth * cfg.radius * cfg.radius * std::log(Td) / (2.0 * Td) +
      cfg.sigma2 / (2.0 * std::sqrt(Td));
  rep.final_ok = rep.final_gap <= rep.final_bound;
  return rep;
}

TelescopingReport telescoping_check(const QuadraticTraj& traj,
                                    const OracleConfig& cfg) {
  if (cfg.schedule != training::Schedule::Constant)
    throw std::invalid_argument("telescoping_check: needs a constant step");
  const int T = traj.steps;
  const int S = traj.n_seeds;
  const double e = cfg.eta0;

  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < S; ++s) {
    double lhs = 0.0;
    for (int t = 0; t < T; ++t)
      lhs += traj.true_grad_sq[static_cast<std::size_t>(s) *
                                   static_cast<std::size_t>(T) +
                               static_cast<std::size_t>(t)];
    lhs /= T;
    const double delta = lhs - mean;
    mean += delta / (s + 1);
    m2 += delta * (lhs - mean);
  }
  TelescopingReport rep;
  rep.lhs_mean = mean;
  rep.lhs_se =
      S > 1 ? std::sqrt(m2 / (S - 1)) / std::sqrt(static_cast<double>(S)) : 0.0;
  const double f0 = traj.f_gap.empty() ? 0.0 : traj.f_gap[0];
  rep.rhs = 2.0 * f0 / (e * static_cast<double>(T)) +
            cfg.l_smooth * e * cfg.sigma2 / 2.0;
  rep.ok = rep.lhs_mean <= rep.rhs + 3.0 * rep.lhs_se;
  return rep;
}

StabilityReport stability_report(const QuadraticTraj& traj, double epsilon,
                                 double delta, int t0) {
  if (!(epsilon > 0)) throw std::invalid_argument("stability: epsilon must be > 0");
  if (!(delta >= 0 && delta <= 1))
    throw std::invalid_argument("stability: delta must lie in [0,1]");
  if (t0 < 0 || t0 > traj.steps)
    throw std::invalid_argument("stability: t0 out of range");
  StabilityReport rep;
  rep.epsilon = epsilon;
  rep.delta = delta;
  rep.t0 = t0;
  const double eps2 = epsilon * epsilon;
  int ok = 0;
  for (int s = 0; s < traj.n_seeds; ++s) {
    const std::size_t row = static_cast<std::size_t>(s) *
                            static_cast<std::size_t>(traj.steps + 1);
    bool inside = true;
    for (int t = t0; t <= traj.steps; ++t)
      if (traj.v[row + static_cast<std::size_t>(t)] > eps2) {
        inside = false;
        break;
      }
    if (inside) ++ok;
  }
  rep.empirical_prob = static_cast<double>(ok) / traj.n_seeds;
  rep.meets_target = rep.empirical_prob >= 1.0 - delta;
  return rep;
}

// ---------------------------------------------------------------------------

double variance_estimate(const std::vector<std::vector<double>>& device_grads,
                         const std::vector<double>& global_grad) {
  if (device_grads.size() < 2)
    throw std::invalid_argument("variance_estimate: need at least 2 devices");
  for (const auto& g : device_grads)
    if (g.size() != global_grad.size())
      throw std::invalid_argument("variance_estimate: gradient size mismatch");
  double acc = 0.0;
  for (const auto& g : device_grads) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double d = g[j] - global_grad[j];
      d2 += d * d;
    }
    acc += d2;
  }
  return acc / static_cast<double>(device_grads.size());
}

// ---------------------------------------------------------------------------

EfficiencyReport efficiency_metrics(const std::vector<sim::RoundLog>& logs,
                                    double mean_fleet_score) {
  if (logs.empty()) throw std::invalid_argument("efficiency_metrics: no logs");
  EfficiencyReport rep;
  double usage = 0.0;
  std::int64_t rows = 0;
  double ceff = 0.0;
  std::int64_t included = 0;
  for (const auto& log : logs) {
    for (const auto& d : log.devices) {
      usage += d.usage.cpu;
      ++rows;
      if (d.straggler) continue;
      const double busy = d.times.comm;
      const double total = d.times.comm + d.times.sync;
      if (total > 0) {
        ceff += busy / total;
        ++included;
      }
    }
  }
  rep.eta_resource = rows > 0 ? usage / static_cast<double>(rows) : 0.0;
  rep.c_efficiency = included > 0 ? ceff / static_cast<double>(included) : 1.0;
  rep.utilization_bound = 1.0 - std::exp(-mean_fleet_score);
  rep.bound_satisfied = rep.eta_resource >= rep.utilization_bound;
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

// Mann-Whitney AUC with mid-ranks for ties; one class versus the rest.
double rank_sum_auc(const std::vector<double>& scores,
                    const std::vector<std::uint8_t>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double rank_pos = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t q = i; q < j; ++q)
      if (positive[order[q]]) {
        rank_pos += mid_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double u = rank_pos - 0.5 * static_cast<double>(n_pos) *
                                  static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

EvalReport eval_from_scores(const std::vector<int>& y_true,
                            const std::vector<double>& probs, int classes) {
  const std::size_t n = y_true.size();
  if (n == 0) throw std::invalid_argument("eval: empty test set");
  if (classes < 2) throw std::invalid_argument("eval: need at least 2 classes");
  if (probs.size() != n * static_cast<std::size_t>(classes))
    throw std::invalid_argument("eval: probability matrix size mismatch");
  for (int y : y_true)
    if (y < 0 || y >= classes)
      throw std::invalid_argument("eval: label out of range");

  EvalReport rep;
  std::vector<std::int64_t> tp(static_cast<std::size_t>(classes), 0);
  std::vector<std::int64_t> fp(static_cast<std::size_t>(classes), 0);
  std::vector<std::int64_t> fn(static_cast<std::size_t>(classes), 0);
  std::int64_t correct = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = &probs[s * static_cast<std::size_t>(classes)];
    int pred = 0;
    for (int c = 1; c < classes; ++c)
      if (row[c] > row[pred]) pred = c;
    const int truth = y_true[s];
    if (pred == truth) {
      ++correct;
      ++tp[static_cast<std::size_t>(pred)];
    } else {
      ++fp[static_cast<std::size_t>(pred)];
      ++fn[static_cast<std::size_t>(truth)];
    }
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(n);

  rep.f1.resize(static_cast<std::size_t>(classes), 0.0);
  for (int c = 0; c < classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const double denom = static_cast<double>(2 * tp[i] + fp[i] + fn[i]);
    rep.f1[i] = denom > 0 ? 2.0 * static_cast<double>(tp[i]) / denom : 0.0;
    rep.macro_f1 += rep.f1[i];
  }
  rep.macro_f1 /= classes;

  rep.auc.resize(static_cast<std::size_t>(classes), 0.5);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> pos(n);
  int valid = 0;
  double auc_sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t s = 0; s < n; ++s) {
      scores[s] = probs[s * static_cast<std::size_t>(classes) +
                        static_cast<std::size_t>(c)];
      pos[s] = y_true[s] == c ? 1 : 0;
      n_pos += pos[s];
    }
    if (n_pos == 0 || n_pos == n) continue;  // stays at the 0.5 placeholder
    const double a = rank_sum_auc(scores, pos);
    rep.auc[static_cast<std::size_t>(c)] = a;
    auc_sum += a;
    ++valid;
  }
  rep.macro_auc = valid > 0 ? auc_sum / valid : 0.5;
  return rep;
}

EvalReport eval_metrics(const models::NestedModelFamily& family,
                        const models::ParamVector& params,
                        const data::Dataset& test) {
  const auto fwd = models::forward(family, params, test.X, test.y);
  return eval_from_scores(test.y, fwd.probs, test.classes);
}

// ---------------------------------------------------------------------------

AccuracyBoundReport accuracy_bound_check(const std::vector<double>& local_accs,
                                         double global_acc,
                                         const std::vector<double>& score_variance,
                                         double constant) {
  if (local_accs.size() != score_variance.size())
    throw std::invalid_argument("accuracy_bound_check: list length mismatch");
  if (!(constant >= 0))
    throw std::invalid_argument("accuracy_bound_check: constant must be >= 0");
  AccuracyBoundReport rep;
  rep.epsilon.reserve(local_accs.size());
  rep.satisfied.reserve(local_accs.size());
  std::size_t ok = 0;
  for (std::size_t i = 0; i < local_accs.size(); ++i) {
    if (!(score_variance[i] >= 0))
      throw std::invalid_argument("accuracy_bound_check: negative variance");
    const double eps = constant * std::sqrt(score_variance[i]);
    const bool sat = local_accs[i] >= global_acc - eps - 1e-12;
    rep.epsilon.push_back(eps);
    rep.satisfied.push_back(sat ? 1 : 0);
    if (sat) ++ok;
  }
  rep.fraction_satisfied =
      local_accs.empty() ? 1.0
                         : static_cast<double>(ok) /
                               static_cast<double>(local_accs.size());
  return rep;
}

// ---------------------------------------------------------------------------

StepStabilityReport model_convergence_check(
    const std::vector<std::vector<double>>& param_history, double delta,
    double epsilon) {
  if (param_history.size() < 3)
    throw std::invalid_argument("model_convergence_check: need >= 3 iterates");
  if (!(delta >= 0) || !(epsilon >= 0))
    throw std::invalid_argument(
        "model_convergence_check: delta and epsilon must be >= 0");
  const std::size_t dim = param_history[0].size();
  for (const auto& w : param_history)
    if (w.size() != dim)
      throw std::invalid_argument("model_convergence_check: ragged iterates");

  StepStabilityReport rep;
  rep.step_norms.reserve(param_history.size() - 1);
  for (std::size_t t = 1; t < param_history.size(); ++t) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = param_history[t][j] - param_history[t - 1][j];
      d2 += d * d;
    }
    rep.step_norms.push_back(std::sqrt(d2));
  }
  rep.steps_checked = static_cast<int>(rep.step_norms.size()) - 1;
  for (std::size_t t = 1; t < rep.step_norms.size(); ++t) {
    if (rep.step_norms[t] > delta * rep.step_norms[t - 1] + epsilon) {
      rep.first_violation = static_cast<int>(t + 1);  // 1-based step index
      break;
    }
  }
  return rep;
}

}  // namespace asa::diag
