// asa: run device-aware federated learning experiments from a JSON config.
//
// Subcommands: bench (profile the fleet and export capability scores),
// train (full adaptive run with logs, checkpoints and the final model),
// compare (same data and fleet across methods, summary CSV), diagnose
// (quadratic-oracle convergence reports and optional round-log fits).
//
// Every output file starts with a header carrying the config hash and tool
// version, so artifacts can always be traced back to the exact run. Exit
// codes: 0 success, 2 configuration error, 3 runtime error (checkpoints
// written so far are kept).

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "asa/baselines.hpp"
#include "asa/config.hpp"
#include "asa/diagnostics.hpp"
#include "asa/models.hpp"
#include "asa/profiles.hpp"
#include "asa/simulator.hpp"
#include "asa/version.hpp"

namespace {

namespace fs = std::filesystem;
using asa::config::ExperimentConfig;

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel g_log = LogLevel::Info;

LogLevel log_level_from_env() {
  const char* v = std::getenv("ASA_LOG");
  if (!v) return LogLevel::Info;
  const std::string s(v);
  if (s == "quiet") return LogLevel::Quiet;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  throw std::invalid_argument("ASA_LOG must be quiet, info, or debug");
}

void log_info(const std::string& msg) {
  if (g_log >= LogLevel::Info) std::cerr << "[asa] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (g_log >= LogLevel::Debug) std::cerr << "[asa] " << msg << "\n";
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string file_header(std::uint64_t config_hash) {
  return "# config=" + hex16(config_hash) + " version=" + asa::kVersion + "\n";
}

// Shortest round-trip decimal form, shared with the JSON log writer.
std::string num(double v) { return nlohmann::json(v).dump(); }

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int rounds = -1;  // <0: use the config
};

ExperimentConfig load(const CommonArgs& a) {
  auto cfg = asa::config::load_config(a.config_path, a.seed);
  fs::create_directories(a.out_dir);
  log_debug("config hash " + hex16(cfg.config_hash));
  return cfg;
}

std::string scores_csv(const std::vector<asa::profiles::DeviceRecord>& records,
                       std::uint64_t hash) {
  std::ostringstream out;
  out << file_header(hash);
  out << "device,score";
  for (const char* name : asa::profiles::kFeatureNames) out << ',' << name;
  out << '\n';
  for (const auto& r : records) {
    out << r.id << ',' << num(r.score);
    for (double f : r.normalized) out << ',' << num(f);
    out << '\n';
  }
  return out.str();
}

void write_fleet_csv(const fs::path& path,
                     const std::vector<asa::profiles::ResourceProfile>& fleet,
                     std::uint64_t hash) {
  write_text(path, file_header(hash) + asa::profiles::fleet_to_csv(fleet));
}

void write_assignment_csv(const fs::path& path, const asa::sim::SimState& state,
                          std::uint64_t hash) {
  std::ostringstream out;
  out << file_header(hash) << "device,cluster,rung\n";
  if (state.clustered) {
    for (std::size_t i = 0; i < state.labels.size(); ++i)
      out << i << ',' << state.labels[i] << ',' << state.device_rung[i] << '\n';
  }
  write_text(path, out.str());
}

void write_model_file(const fs::path& path, const asa::models::ParamVector& p,
                      std::uint64_t hash) {
  const auto blob = asa::models::serialize_params(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << file_header(hash);
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

int cmd_bench(const CommonArgs& a) {
  const auto cfg = load(a);
  const auto fleet = asa::config::prepare_fleet(cfg);
  const auto weights = asa::profiles::ScoringWeights::from_categories(
      cfg.sim.weight_compute, cfg.sim.weight_memory, cfg.sim.weight_network);
  const auto records =
      asa::profiles::profile_fleet(fleet, cfg.sim.workload, weights);

  const fs::path out(a.out_dir);
  write_fleet_csv(out / cfg.output.fleet_csv, fleet, cfg.config_hash);
  write_text(out / cfg.output.scores_csv, scores_csv(records, cfg.config_hash));
  log_info("profiled " + std::to_string(records.size()) + " devices -> " +
           (out / cfg.output.scores_csv).string());
  return 0;
}

int cmd_train(const CommonArgs& a, const std::string& resume_path) {
  const auto cfg = load(a);
  const auto fleet = asa::config::prepare_fleet(cfg);
  const auto dat = asa::config::prepare_data(cfg);
  const fs::path out(a.out_dir);

  asa::sim::SimState resumed;
  const bool resuming = !resume_path.empty();
  if (resuming) {
    resumed = asa::sim::load_checkpoint(resume_path, cfg.config_hash);
    log_info("resuming from round " + std::to_string(resumed.next_round));
  }

  const fs::path log_path = out / cfg.output.round_log;
  const bool append = resuming && fs::exists(log_path) &&
                      fs::file_size(log_path) > 0;
  std::ofstream round_log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!round_log)
    throw std::runtime_error("cannot write " + log_path.string());
  // Resumed runs append below the original header; a resume into an empty
  // file still gets one.
  if (resuming && !append)
    asa::sim::write_log_header(round_log, cfg.config_hash);

  asa::sim::RunIo io;
  io.round_log = &round_log;
  io.checkpoint_path = (out / cfg.output.checkpoint).string();
  io.config_hash = cfg.config_hash;

  const auto res = asa::sim::run_experiment(cfg.sim, fleet, dat.train, dat.test,
                                            dat.shards, io,
                                            resuming ? &resumed : nullptr,
                                            a.rounds);
  round_log.flush();

  write_model_file(out / cfg.output.model, res.model.params, cfg.config_hash);
  write_fleet_csv(out / cfg.output.fleet_csv, fleet, cfg.config_hash);
  write_text(out / cfg.output.scores_csv,
             scores_csv(res.records, cfg.config_hash));
  write_assignment_csv(out / cfg.output.assignment_csv, res.state,
                       cfg.config_hash);

  if (!res.logs.empty()) {
    const auto& last = res.logs.back();
    log_info("round " + std::to_string(last.round) + ": eval accuracy " +
             num(last.eval_accuracy) + ", loss " + num(last.global_loss));
  }
  log_info("model -> " + (out / cfg.output.model).string());
  return 0;
}

struct SummaryRow {
  std::string method;
  int rounds = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  std::int64_t total_bytes = 0;
  double reduction = 0.0;
  asa::sim::TimeBreakdown time;  // cumulative mean-device seconds
  int rounds_to_target = -1;
};

SummaryRow summarize(const std::string& method,
                     const std::vector<asa::sim::RoundLog>& logs,
                     const asa::models::NestedModelFamily& family,
                     double target_accuracy) {
  SummaryRow row;
  row.method = method;
  row.rounds = static_cast<int>(logs.size());
  for (const auto& log : logs) {
    row.total_bytes += log.bytes_total;
    if (row.rounds_to_target < 0 && log.eval_accuracy >= target_accuracy)
      row.rounds_to_target = log.round;
    if (log.devices.empty()) continue;
    asa::sim::TimeBreakdown mean;
    for (const auto& d : log.devices) {
      mean.compute += d.times.compute;
      mean.comm += d.times.comm;
      mean.sync += d.times.sync;
      mean.overhead += d.times.overhead;
    }
    const double n = static_cast<double>(log.devices.size());
    row.time.compute += mean.compute / n;
    row.time.comm += mean.comm / n;
    row.time.sync += mean.sync / n;
    row.time.overhead += mean.overhead / n;
  }
  if (!logs.empty()) {
    row.final_loss = logs.back().global_loss;
    row.final_accuracy = logs.back().eval_accuracy;
    row.reduction = asa::diag::comm_cost(logs, family).reduction;
  }
  return row;
}

int cmd_compare(const CommonArgs& a, const std::vector<std::string>& methods) {
  const auto cfg = load(a);
  if (methods.empty())
    throw std::invalid_argument("compare needs at least one method");
  for (const auto& m : methods)
    if (m != "asa") asa::baselines::method_from_name(m);  // validates

  const auto fleet = asa::config::prepare_fleet(cfg);
  const auto dat = asa::config::prepare_data(cfg);
  const auto family = asa::models::build_family(cfg.sim.input_dim,
                                                cfg.sim.output_dim,
                                                cfg.sim.hidden);
  const fs::path out(a.out_dir);

  std::vector<SummaryRow> rows;
  for (const auto& m : methods) {
    const fs::path log_path = out / (m + "_" + cfg.output.round_log);
    std::ofstream round_log(log_path, std::ios::trunc);
    if (!round_log)
      throw std::runtime_error("cannot write " + log_path.string());
    asa::sim::RunIo io;
    io.round_log = &round_log;
    io.config_hash = cfg.config_hash;

    log_info("running " + m);
    std::vector<asa::sim::RoundLog> logs;
    if (m == "asa") {
      auto res = asa::sim::run_experiment(cfg.sim, fleet, dat.train, dat.test,
                                          dat.shards, io, nullptr, a.rounds);
      logs = std::move(res.logs);
    } else {
      auto sim_cfg = cfg.sim;
      if (a.rounds >= 0) sim_cfg.rounds = a.rounds;
      const auto method = asa::baselines::method_from_name(m);
      // FedProx reads training.prox_mu; a config that leaves it at zero
      // still gets a proximal baseline, at the customary coefficient.
      if (method == asa::baselines::Method::FedProx &&
          !(sim_cfg.train.prox_mu > 0.0))
        sim_cfg.train.prox_mu = 0.01;
      auto res = asa::baselines::run_baseline(method, sim_cfg, fleet,
                                              dat.train, dat.test, dat.shards,
                                              io);
      logs = std::move(res.logs);
    }
    rows.push_back(summarize(m, logs, family, cfg.output.target_accuracy));
  }

  std::ostringstream csv;
  csv << file_header(cfg.config_hash);
  csv << "method,rounds,final_loss,final_accuracy,total_bytes,reduction,"
         "t_compute,t_comm,t_sync,t_overhead,rounds_to_target\n";
  for (const auto& r : rows) {
    csv << r.method << ',' << r.rounds << ',' << num(r.final_loss) << ','
        << num(r.final_accuracy) << ',' << r.total_bytes << ','
        << num(r.reduction) << ',' << num(r.time.compute) << ','
        << num(r.time.comm) << ',' << num(r.time.sync) << ','
        << num(r.time.overhead) << ',' << r.rounds_to_target << '\n';
  }
  write_text(out / cfg.output.summary_csv, csv.str());
  log_info("summary -> " + (out / cfg.output.summary_csv).string());
  return 0;
}

// Loss history from an existing round log (JSONL, header line first).
std::vector<double> read_loss_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read round log: " + path);
  std::vector<double> losses;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (first) {
      first = false;
      if (j.contains("format")) continue;  // header
    }
    losses.push_back(j.at("global_loss").get<double>());
  }
  return losses;
}

nlohmann::json fit_to_json(const asa::diag::ConvergenceFit& fit) {
  return {{"c_hat", fit.c_hat},
          {"d_hat", fit.d_hat},
          {"residual", fit.residual},
          {"converged", fit.converged}};
}

int cmd_diagnose(const CommonArgs& a) {
  const auto cfg = load(a);
  if (!cfg.diagnostics.has_oracle)
    throw std::invalid_argument(
        "config: diagnose requires the diagnostics.oracle section");
  const auto& d = cfg.diagnostics;
  const fs::path out(a.out_dir);

  log_info("simulating " + std::to_string(d.oracle.n_seeds) + " seeds x " +
           std::to_string(d.oracle.steps) + " steps");
  const auto traj = asa::diag::quadratic_sgd(d.oracle, cfg.sim.seed);
  const auto lyap = asa::diag::lyapunov_check(traj, d.oracle);
  // The default onset suits the default 500-step horizon; shorter oracle
  // runs measure stability over whatever tail they have.
  const auto stab = asa::diag::stability_report(
      traj, d.stability_epsilon, d.stability_delta,
      std::min(d.stability_t0, d.oracle.steps));

  nlohmann::json report;
  report["lyapunov"] = {{"violations", lyap.violations},
                        {"recursion_ok", lyap.recursion_ok},
                        {"sigma2_used", lyap.sigma2_used},
                        {"final_gap", lyap.final_gap},
                        {"final_bound", lyap.final_bound},
                        {"final_ok", lyap.final_ok}};
  report["stability"] = {{"epsilon", stab.epsilon},
                         {"delta", stab.delta},
                         {"t0", stab.t0},
                         {"empirical_prob", stab.empirical_prob},
                         {"meets_target", stab.meets_target}};
  if (d.oracle.schedule == asa::training::Schedule::Constant) {
    const auto tel = asa::diag::telescoping_check(traj, d.oracle);
    report["telescoping"] = {{"lhs_mean", tel.lhs_mean},
                             {"lhs_se", tel.lhs_se},
                             {"rhs", tel.rhs},
                             {"ok", tel.ok}};
  }

  const auto grad_sq = traj.mean_true_grad_sq();
  const auto fit = asa::diag::fit_convergence(grad_sq);
  report["oracle_fit"] = fit_to_json(fit);
  report["oracle_fit"]["envelope_scale"] =
      asa::diag::fit_envelope_scale(fit, grad_sq, d.fit_t_min);

  if (!d.round_log.empty()) {
    const auto losses = read_loss_history(d.round_log);
    const auto lfit = asa::diag::fit_convergence(losses);
    report["round_log_fit"] = fit_to_json(lfit);
    report["round_log_fit"]["rounds"] = losses.size();
  }

  {
    std::ostringstream text;
    asa::sim::write_log_header(text, cfg.config_hash);
    text << report.dump() << '\n';
    write_text(out / "diagnose.jsonl", text.str());
  }
  {
    const auto mean_v = traj.mean_v();
    std::ostringstream csv;
    csv << file_header(cfg.config_hash);
    csv << "step,mean_v,violation,violation_se\n";
    for (std::size_t t = 0; t < lyap.violation.size(); ++t)
      csv << (t + 1) << ',' << num(mean_v[t + 1]) << ','
          << num(lyap.violation[t]) << ',' << num(lyap.violation_se[t]) << '\n';
    write_text(out / "lyapunov.csv", csv.str());
  }

  log_info(std::string("distance recursion ") +
           (lyap.recursion_ok ? "holds" : "violated") + " (" +
           std::to_string(lyap.violations) + " flagged steps), final gap " +
           num(lyap.final_gap) + " vs bound " + num(lyap.final_bound));
  log_info("reports -> " + (out / "diagnose.jsonl").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Device-aware federated learning simulator"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string resume_path;
  std::vector<std::string> methods = {"asa", "fedavg", "fedprox", "hierfl"};

  auto add_common = [&](CLI::App* sub, bool with_rounds) {
    sub->add_option("--config", args.config_path, "experiment config (JSON)")
        ->required();
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--seed", args.seed, "override simulation.seed");
    if (with_rounds)
      sub->add_option("--rounds", args.rounds,
                      "override simulation.rounds (0 runs none)");
  };

  auto* bench = app.add_subcommand("bench", "profile and score the fleet");
  add_common(bench, false);
  auto* train = app.add_subcommand("train", "run the adaptive experiment");
  add_common(train, true);
  train->add_option("--resume", resume_path, "continue from a checkpoint");
  auto* compare = app.add_subcommand("compare", "run methods side by side");
  add_common(compare, true);
  compare->add_option("--methods", methods, "subset of asa,fedavg,fedprox,hierfl")
      ->delimiter(',');
  auto* diagnose = app.add_subcommand("diagnose", "convergence reports");
  add_common(diagnose, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    g_log = log_level_from_env();
    if (bench->parsed()) return cmd_bench(args);
    if (train->parsed()) return cmd_train(args, resume_path);
    if (compare->parsed()) return cmd_compare(args, methods);
    if (diagnose->parsed()) return cmd_diagnose(args);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
