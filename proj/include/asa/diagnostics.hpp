#pragma once

#include <cstdint>
#include <vector>

#include "asa/data.hpp"
#include "asa/models.hpp"
#include "asa/simulator.hpp"
#include "asa/training.hpp"

// Analysis toolkit over simulator outputs and a self-contained quadratic
// SGD oracle: communication accounting, cost-model estimates, convergence
// fits, Lyapunov recursion checks, variance and efficiency measures, and
// classifier metrics.

namespace asa::diag {

// ---------------------------------------------------------------------------
// Communication accounting.

struct CommReport {
  std::int64_t total = 0;               // bytes, recomputed from rung history
  std::vector<std::int64_t> per_round;  // one entry per log row
  // 1 - total / total_full, where total_full exchanges the largest model
  // with every active device (stragglers included), same participation.
  double reduction = 0.0;
};

// Recomputes bytes from each device row's rung and straggler flag: a full
// exchange is 2 * 4 * params(rung) bytes, a straggler only downloads. The
// recomputed total must match the simulator's logged byte counters exactly.
CommReport comm_cost(const std::vector<sim::RoundLog>& logs,
                     const models::NestedModelFamily& family);

// ---------------------------------------------------------------------------
// Operation-count cost model, unit constants. Shapes only; compared against
// measured counters as ratios, never absolutes.

struct ComplexityEstimate {
  double t_bench = 0;   // N log N + sum s_i^3
  double t_clust = 0;   // N K t
  double t_train = 0;   // N E m p + N log N
  double s_device = 0;  // p + sqrt(p)
  double s_global = 0;  // N p + K sqrt(p)
  double comm = 0;      // N E p / B
};

ComplexityEstimate complexity_estimates(double n_devices, double k, double iters,
                                        double epochs, double samples,
                                        double params, double bandwidth,
                                        const std::vector<double>& bench_sizes);

// ---------------------------------------------------------------------------
// Convergence-rate fit: least squares of y_T against c/T + d/sqrt(T) with
// both coefficients constrained non-negative (closed form over the three
// boundary cases).

struct ConvergenceFit {
  double c_hat = 0.0;
  double d_hat = 0.0;
  double residual = 0.0;  // root mean squared
  // False when the fit explains almost nothing of the sequence (residual
  // close to the sequence's own spread), e.g. constant histories.
  bool converged = false;
};

ConvergenceFit fit_convergence(const std::vector<double>& grad_sq_history);

double fit_value(const ConvergenceFit& fit, int t);

// Minimal scale s >= 1 such that s * fit(T) >= y_T for every T >= t_min
// (1-based). The scaled fit is then a measured upper envelope.
double fit_envelope_scale(const ConvergenceFit& fit,
                          const std::vector<double>& y, int t_min);

// ---------------------------------------------------------------------------
// Quadratic SGD oracle: f(w) = 1/2 w^T diag(lambda) w with spectrum spread
// evenly over [mu, l_smooth], optimum at 0, gradient noise N(0, sigma2/dim I)
// per coordinate. Seeds run independently on derived streams.

struct OracleConfig {
  int dim = 8;
  double mu = 1.0;
  double l_smooth = 2.0;
  double sigma2 = 0.01;  // injected noise variance E||xi||^2
  int steps = 500;
  int n_seeds = 1000;
  training::Schedule schedule = training::Schedule::InvT;
  double eta0 = 1.0;    // step t uses eta0 scaled by the schedule
  double radius = 1.0;  // ||w_0 - w*||, w_0 spread evenly over coordinates

  void validate() const;
  std::vector<double> eta() const;  // eta_t for t = 1..steps
};

struct QuadraticTraj {
  int steps = 0;
  int n_seeds = 0;
  // Row-major n_seeds x (steps + 1): squared distance to the optimum.
  std::vector<double> v;
  // Row-major n_seeds x (steps + 1): objective gap f(w_t) - f*.
  std::vector<double> f_gap;
  // Row-major n_seeds x steps: ||grad f(w_t)||^2 and ||g_t||^2 (noisy).
  std::vector<double> true_grad_sq;
  std::vector<double> stoch_grad_sq;
  // max over t of the seed-mean of ||g_t||^2: the measured uniform bound on
  // the stochastic gradient's second moment along the trajectory.
  double sigma2_hat = 0.0;

  std::vector<double> mean_v() const;      // steps + 1
  std::vector<double> mean_f_gap() const;  // steps + 1
  std::vector<double> mean_true_grad_sq() const;
};

QuadraticTraj quadratic_sgd(const OracleConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Distance-recursion check on the oracle trajectories:
//   E V_{t+1} <= (1 - 2 mu eta_t) E V_t + eta_t^2 sigma2
// The sigma2 here must bound the stochastic gradient's second moment (the
// recursion is provably violated under a noise-variance-only reading when
// eta_1 = 1/mu and w_0 != w*), so the measured sigma2_hat is used. Each step
// is checked as a paired per-seed statistic against 3 standard errors. The
// final-gap bound (l D^2 log T)/(2T) + sigma2_noise/(2 sqrt T) uses the
// injected noise variance.

struct LyapunovReport {
  std::vector<double> violation;     // per step, mean_s of the paired excess
  std::vector<double> violation_se;  // per step
  double sigma2_used = 0.0;
  int violations = 0;  // steps where the mean exceeds 3 standard errors
  bool recursion_ok = false;
  double final_gap = 0.0;    // mean f(w_{T+1}) - f*
  double final_bound = 0.0;
  bool final_ok = false;
};

LyapunovReport lyapunov_check(const QuadraticTraj& traj, const OracleConfig& cfg);

// Telescoped stationarity bound under a constant step:
//   (1/T) sum_t E||grad f(w_t)||^2 <= 2 (f(w_0) - f*) / (eta T)
//                                     + l eta sigma2_noise / 2
// checked against 3 standard errors of the left side.
struct TelescopingReport {
  double lhs_mean = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

TelescopingReport telescoping_check(const QuadraticTraj& traj,
                                    const OracleConfig& cfg);

// Fraction of seeds whose iterates stay within epsilon of the optimum from
// step t0 on, reported against the 1 - delta target.
struct StabilityReport {
  double epsilon = 0.0;
  double delta = 0.0;
  int t0 = 0;
  double empirical_prob = 0.0;
  bool meets_target = false;
};

StabilityReport stability_report(const QuadraticTraj& traj, double epsilon,
                                 double delta, int t0);

// ---------------------------------------------------------------------------
// Gradient dispersion across devices at a common parameter vector: mean
// squared deviation from the given global gradient.
double variance_estimate(const std::vector<std::vector<double>>& device_grads,
                         const std::vector<double>& global_grad);

// ---------------------------------------------------------------------------
// Efficiency measures over round logs.

struct EfficiencyReport {
  // Mean served-demand / capacity over all logged device rounds.
  double eta_resource = 0.0;
  // Achieved transfer rate over configured bandwidth: transfer time divided
  // by transfer-plus-stall time, averaged over included device rounds.
  double c_efficiency = 0.0;
  double utilization_bound = 0.0;  // 1 - exp(-mean fleet score)
  bool bound_satisfied = false;    // descriptive, not asserted
};

EfficiencyReport efficiency_metrics(const std::vector<sim::RoundLog>& logs,
                                    double mean_fleet_score);

// ---------------------------------------------------------------------------
// Classifier metrics: accuracy, per-class F1 (empty denominators score 0),
// and one-vs-rest AUC by rank sum with mid-ranks for ties, macro-averaged
// over classes present with both positives and negatives.

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> f1;
  double macro_f1 = 0.0;
  std::vector<double> auc;  // NaN-free: degenerate classes report 0.5
  double macro_auc = 0.0;
};

EvalReport eval_from_scores(const std::vector<int>& y_true,
                            const std::vector<double>& probs, int classes);

EvalReport eval_metrics(const models::NestedModelFamily& family,
                        const models::ParamVector& params,
                        const data::Dataset& test);

// ---------------------------------------------------------------------------
// Per-device accuracy-closeness report: local >= global - c * sqrt(var).
struct AccuracyBoundReport {
  std::vector<double> epsilon;  // c * sqrt(score variance), per device
  std::vector<std::uint8_t> satisfied;
  double fraction_satisfied = 0.0;
};

AccuracyBoundReport accuracy_bound_check(const std::vector<double>& local_accs,
                                         double global_acc,
                                         const std::vector<double>& score_variance,
                                         double constant);

// ---------------------------------------------------------------------------
// Parameter-step contraction report: ||w_{t+1} - w_t|| <= delta ||w_t -
// w_{t-1}|| + epsilon, first violating step (1-based index of the later
// iterate) or -1.
struct StepStabilityReport {
  int first_violation = -1;
  int steps_checked = 0;
  std::vector<double> step_norms;
};

StepStabilityReport model_convergence_check(
    const std::vector<std::vector<double>>& param_history, double delta,
    double epsilon);

}  // namespace asa::diag
