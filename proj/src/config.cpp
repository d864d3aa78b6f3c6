#include "asa/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

#include "asa/hash.hpp"
#include "json.hpp"

namespace asa::config {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

std::string join_path(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

const json* section(const json& root, const char* name) {
  if (!root.contains(name)) return nullptr;
  const json& s = root.at(name);
  if (!s.is_object()) bad(std::string(name) + " must be an object");
  return &s;
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) bad("unknown key: " + join_path(path, item.key()));
  }
}

double get_num(const json& obj, const std::string& path, const char* key,
               double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) bad(join_path(path, key) + " must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& path, const char* key,
            int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(join_path(path, key) + " must be an integer");
  return v.get<int>();
}

std::uint64_t get_u64(const json& obj, const std::string& path, const char* key,
                      std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !v.is_number_integer())
    bad(join_path(path, key) + " must be a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    bad(join_path(path, key) + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key,
              bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) bad(join_path(path, key) + " must be a boolean");
  return v.get<bool>();
}

std::string get_str(const json& obj, const std::string& path, const char* key,
                    const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) bad(join_path(path, key) + " must be a string");
  return v.get<std::string>();
}

std::array<double, 3> get_triple(const json& obj, const std::string& path,
                                 const char* key,
                                 const std::array<double, 3>& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3)
    bad(join_path(path, key) + " must be an array of 3 numbers");
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number())
      bad(join_path(path, key) + " must be an array of 3 numbers");
    out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

training::Schedule parse_schedule(const std::string& s, const std::string& where) {
  if (s == "constant") return training::Schedule::Constant;
  if (s == "invsqrt") return training::Schedule::InvSqrt;
  if (s == "invt") return training::Schedule::InvT;
  bad(where + " must be one of constant, invsqrt, invt");
}

void parse_fleet(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "fleet");
  if (!s) return;
  expect_keys(*s, "fleet",
              {"n_devices", "tier_mix", "seed", "matmul_dim", "memory_bytes",
               "probe_bytes", "csv"});
  cfg.sim.n_devices = get_int(*s, "fleet", "n_devices", cfg.sim.n_devices);
  cfg.sim.tier_mix = get_triple(*s, "fleet", "tier_mix", cfg.sim.tier_mix);
  cfg.sim.fleet_seed = get_u64(*s, "fleet", "seed", cfg.sim.fleet_seed);
  cfg.sim.workload.matmul_dim =
      get_int(*s, "fleet", "matmul_dim", cfg.sim.workload.matmul_dim);
  cfg.sim.workload.memory_bytes =
      get_num(*s, "fleet", "memory_bytes", cfg.sim.workload.memory_bytes);
  cfg.sim.workload.probe_bytes =
      get_num(*s, "fleet", "probe_bytes", cfg.sim.workload.probe_bytes);
  cfg.fleet_csv_in = get_str(*s, "fleet", "csv", cfg.fleet_csv_in);
}

void parse_weights(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "weights");
  if (!s) return;
  expect_keys(*s, "weights", {"compute", "memory", "network"});
  cfg.sim.weight_compute = get_num(*s, "weights", "compute", cfg.sim.weight_compute);
  cfg.sim.weight_memory = get_num(*s, "weights", "memory", cfg.sim.weight_memory);
  cfg.sim.weight_network =
      get_num(*s, "weights", "network", cfg.sim.weight_network);
}

void parse_clustering(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "clustering");
  if (!s) return;
  expect_keys(*s, "clustering",
              {"k", "max_iter", "tol", "n_min", "recluster_every", "on_profile",
               "uniform_rung"});
  cfg.sim.k = get_int(*s, "clustering", "k", cfg.sim.k);
  cfg.sim.kmeans_max_iter =
      get_int(*s, "clustering", "max_iter", cfg.sim.kmeans_max_iter);
  cfg.sim.kmeans_tol = get_num(*s, "clustering", "tol", cfg.sim.kmeans_tol);
  cfg.sim.n_min = get_int(*s, "clustering", "n_min", cfg.sim.n_min);
  cfg.sim.recluster_every =
      get_int(*s, "clustering", "recluster_every", cfg.sim.recluster_every);
  cfg.sim.cluster_on_profile =
      get_bool(*s, "clustering", "on_profile", cfg.sim.cluster_on_profile);
  cfg.sim.uniform_rung =
      get_int(*s, "clustering", "uniform_rung", cfg.sim.uniform_rung);
}

void parse_model(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "model");
  if (!s) return;
  expect_keys(*s, "model", {"input_dim", "output_dim", "hidden"});
  cfg.sim.input_dim = get_int(*s, "model", "input_dim", cfg.sim.input_dim);
  cfg.sim.output_dim = get_int(*s, "model", "output_dim", cfg.sim.output_dim);
  if (s->contains("hidden")) {
    const json& h = s->at("hidden");
    if (!h.is_array() || h.size() != static_cast<std::size_t>(models::kRungs))
      bad("model.hidden must be an array of 3 width lists");
    for (std::size_t r = 0; r < static_cast<std::size_t>(models::kRungs); ++r) {
      const json& widths = h[r];
      if (!widths.is_array() || widths.empty())
        bad("model.hidden must be an array of 3 width lists");
      std::vector<int> w;
      for (const auto& v : widths) {
        if (!v.is_number_integer())
          bad("model.hidden widths must be integers");
        w.push_back(v.get<int>());
      }
      cfg.sim.hidden[r] = std::move(w);
    }
  }
}

void parse_data(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "data");
  if (!s) return;
  expect_keys(*s, "data",
              {"source", "n", "classes", "dim", "separation", "seed",
               "test_fraction", "partition", "alpha", "shards_per_client",
               "images", "labels", "test_images", "test_labels", "limit"});
  auto& d = cfg.data;
  d.source = get_str(*s, "data", "source", d.source);
  if (d.source != "synthetic" && d.source != "idx")
    bad("data.source must be synthetic or idx");
  d.n = get_int(*s, "data", "n", d.n);
  d.classes = get_int(*s, "data", "classes", d.classes);
  d.dim = get_int(*s, "data", "dim", d.dim);
  d.separation = get_num(*s, "data", "separation", d.separation);
  d.seed = get_u64(*s, "data", "seed", d.seed);
  d.test_fraction = get_num(*s, "data", "test_fraction", d.test_fraction);
  d.partition = get_str(*s, "data", "partition", d.partition);
  if (d.partition != "dirichlet" && d.partition != "shards")
    bad("data.partition must be dirichlet or shards");
  d.alpha = get_num(*s, "data", "alpha", d.alpha);
  d.shards_per_client =
      get_int(*s, "data", "shards_per_client", d.shards_per_client);
  d.images = get_str(*s, "data", "images", d.images);
  d.labels = get_str(*s, "data", "labels", d.labels);
  d.test_images = get_str(*s, "data", "test_images", d.test_images);
  d.test_labels = get_str(*s, "data", "test_labels", d.test_labels);
  d.limit = get_int(*s, "data", "limit", d.limit);
}

void parse_training(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "training");
  if (!s) return;
  expect_keys(*s, "training",
              {"lr", "schedule", "batch_size", "local_epochs", "prox_mu"});
  cfg.sim.train.lr0 = get_num(*s, "training", "lr", cfg.sim.train.lr0);
  if (s->contains("schedule"))
    cfg.sim.train.schedule = parse_schedule(
        get_str(*s, "training", "schedule", "constant"), "training.schedule");
  cfg.sim.train.batch_size =
      get_int(*s, "training", "batch_size", cfg.sim.train.batch_size);
  cfg.sim.train.local_epochs =
      get_int(*s, "training", "local_epochs", cfg.sim.train.local_epochs);
  cfg.sim.train.prox_mu = get_num(*s, "training", "prox_mu", cfg.sim.train.prox_mu);
}

void parse_simulation(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "simulation");
  if (!s) return;
  expect_keys(*s, "simulation",
              {"rounds", "dropout", "tau_max", "seed", "adaptation",
               "checkpoint_every", "overhead_s", "flops_per_param_sample",
               "thresholds", "demands", "objective", "convergence"});
  cfg.sim.rounds = get_int(*s, "simulation", "rounds", cfg.sim.rounds);
  cfg.sim.dropout_p = get_num(*s, "simulation", "dropout", cfg.sim.dropout_p);
  cfg.sim.tau_max = get_num(*s, "simulation", "tau_max", cfg.sim.tau_max);
  cfg.sim.seed = get_u64(*s, "simulation", "seed", cfg.sim.seed);
  cfg.sim.adaptation = get_bool(*s, "simulation", "adaptation", cfg.sim.adaptation);
  cfg.sim.checkpoint_every =
      get_int(*s, "simulation", "checkpoint_every", cfg.sim.checkpoint_every);
  cfg.sim.overhead_s = get_num(*s, "simulation", "overhead_s", cfg.sim.overhead_s);
  cfg.sim.flops_per_param_sample = get_num(
      *s, "simulation", "flops_per_param_sample", cfg.sim.flops_per_param_sample);

  if (const json* t = s->contains("thresholds") ? &s->at("thresholds") : nullptr) {
    if (!t->is_object()) bad("simulation.thresholds must be an object");
    expect_keys(*t, "simulation.thresholds", {"cpu", "memory", "network"});
    cfg.sim.thresholds.cpu =
        get_num(*t, "simulation.thresholds", "cpu", cfg.sim.thresholds.cpu);
    cfg.sim.thresholds.memory =
        get_num(*t, "simulation.thresholds", "memory", cfg.sim.thresholds.memory);
    cfg.sim.thresholds.network =
        get_num(*t, "simulation.thresholds", "network", cfg.sim.thresholds.network);
  }
  if (const json* d = s->contains("demands") ? &s->at("demands") : nullptr) {
    if (!d->is_object()) bad("simulation.demands must be an object");
    expect_keys(*d, "simulation.demands", {"cpu", "memory", "noise_sd"});
    cfg.sim.demands.cpu = get_triple(*d, "simulation.demands", "cpu",
                                     cfg.sim.demands.cpu);
    cfg.sim.demands.memory =
        get_triple(*d, "simulation.demands", "memory", cfg.sim.demands.memory);
    cfg.sim.demands.noise_sd =
        get_num(*d, "simulation.demands", "noise_sd", cfg.sim.demands.noise_sd);
  }
  if (const json* o = s->contains("objective") ? &s->at("objective") : nullptr) {
    if (!o->is_object()) bad("simulation.objective must be an object");
    expect_keys(*o, "simulation.objective", {"task", "balance", "comm"});
    cfg.sim.objective.task =
        get_num(*o, "simulation.objective", "task", cfg.sim.objective.task);
    cfg.sim.objective.balance =
        get_num(*o, "simulation.objective", "balance", cfg.sim.objective.balance);
    cfg.sim.objective.comm =
        get_num(*o, "simulation.objective", "comm", cfg.sim.objective.comm);
  }
  if (const json* c = s->contains("convergence") ? &s->at("convergence") : nullptr) {
    if (!c->is_object()) bad("simulation.convergence must be an object");
    expect_keys(*c, "simulation.convergence", {"window", "threshold"});
    cfg.sim.convergence.window = get_int(*c, "simulation.convergence", "window",
                                         cfg.sim.convergence.window);
    cfg.sim.convergence.threshold = get_num(
        *c, "simulation.convergence", "threshold", cfg.sim.convergence.threshold);
  }
}

void parse_diagnostics(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "diagnostics");
  if (!s) return;
  expect_keys(*s, "diagnostics",
              {"oracle", "fit_t_min", "accuracy_bound_constant", "stability",
               "step_stability", "round_log"});
  auto& d = cfg.diagnostics;
  if (const json* o = s->contains("oracle") ? &s->at("oracle") : nullptr) {
    if (!o->is_object()) bad("diagnostics.oracle must be an object");
    expect_keys(*o, "diagnostics.oracle",
                {"dim", "mu", "l_smooth", "sigma2", "steps", "seeds", "schedule",
                 "eta0", "radius"});
    d.has_oracle = true;
    d.oracle.dim = get_int(*o, "diagnostics.oracle", "dim", d.oracle.dim);
    d.oracle.mu = get_num(*o, "diagnostics.oracle", "mu", d.oracle.mu);
    d.oracle.l_smooth =
        get_num(*o, "diagnostics.oracle", "l_smooth", d.oracle.l_smooth);
    d.oracle.sigma2 = get_num(*o, "diagnostics.oracle", "sigma2", d.oracle.sigma2);
    d.oracle.steps = get_int(*o, "diagnostics.oracle", "steps", d.oracle.steps);
    d.oracle.n_seeds = get_int(*o, "diagnostics.oracle", "seeds", d.oracle.n_seeds);
    if (o->contains("schedule"))
      d.oracle.schedule =
          parse_schedule(get_str(*o, "diagnostics.oracle", "schedule", "invt"),
                         "diagnostics.oracle.schedule");
    d.oracle.eta0 = get_num(*o, "diagnostics.oracle", "eta0", d.oracle.eta0);
    d.oracle.radius = get_num(*o, "diagnostics.oracle", "radius", d.oracle.radius);
  }
  d.fit_t_min = get_int(*s, "diagnostics", "fit_t_min", d.fit_t_min);
  d.accuracy_bound_constant = get_num(*s, "diagnostics", "accuracy_bound_constant",
                                      d.accuracy_bound_constant);
  if (const json* st = s->contains("stability") ? &s->at("stability") : nullptr) {
    if (!st->is_object()) bad("diagnostics.stability must be an object");
    expect_keys(*st, "diagnostics.stability", {"epsilon", "delta", "t0"});
    d.stability_epsilon =
        get_num(*st, "diagnostics.stability", "epsilon", d.stability_epsilon);
    d.stability_delta =
        get_num(*st, "diagnostics.stability", "delta", d.stability_delta);
    d.stability_t0 = get_int(*st, "diagnostics.stability", "t0", d.stability_t0);
  }
  if (const json* ss =
          s->contains("step_stability") ? &s->at("step_stability") : nullptr) {
    if (!ss->is_object()) bad("diagnostics.step_stability must be an object");
    expect_keys(*ss, "diagnostics.step_stability", {"delta", "epsilon"});
    d.step_delta = get_num(*ss, "diagnostics.step_stability", "delta", d.step_delta);
    d.step_epsilon =
        get_num(*ss, "diagnostics.step_stability", "epsilon", d.step_epsilon);
  }
  d.round_log = get_str(*s, "diagnostics", "round_log", d.round_log);
}

void parse_output(const json& root, ExperimentConfig& cfg) {
  const json* s = section(root, "output");
  if (!s) return;
  expect_keys(*s, "output",
              {"round_log", "checkpoint", "model", "fleet_csv", "scores_csv",
               "assignment_csv", "summary_csv", "target_accuracy"});
  auto& o = cfg.output;
  o.round_log = get_str(*s, "output", "round_log", o.round_log);
  o.checkpoint = get_str(*s, "output", "checkpoint", o.checkpoint);
  o.model = get_str(*s, "output", "model", o.model);
  o.fleet_csv = get_str(*s, "output", "fleet_csv", o.fleet_csv);
  o.scores_csv = get_str(*s, "output", "scores_csv", o.scores_csv);
  o.assignment_csv = get_str(*s, "output", "assignment_csv", o.assignment_csv);
  o.summary_csv = get_str(*s, "output", "summary_csv", o.summary_csv);
  o.target_accuracy = get_num(*s, "output", "target_accuracy", o.target_accuracy);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text,
                              std::optional<std::uint64_t> seed_override) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) bad("top level must be an object");
  expect_keys(root, "",
              {"fleet", "weights", "clustering", "model", "data", "training",
               "simulation", "diagnostics", "output"});

  ExperimentConfig cfg;
  parse_fleet(root, cfg);
  parse_weights(root, cfg);
  parse_clustering(root, cfg);
  parse_model(root, cfg);
  parse_data(root, cfg);
  parse_training(root, cfg);
  parse_simulation(root, cfg);
  parse_diagnostics(root, cfg);
  parse_output(root, cfg);

  if (seed_override) {
    cfg.sim.seed = *seed_override;
    root["simulation"]["seed"] = *seed_override;
  }
  cfg.sim.validate();
  if (cfg.diagnostics.has_oracle) cfg.diagnostics.oracle.validate();
  if (!(cfg.data.test_fraction > 0.0 && cfg.data.test_fraction < 1.0) &&
      cfg.data.source == "synthetic")
    bad("data.test_fraction must lie in (0, 1)");
  if (cfg.data.source == "idx" &&
      (cfg.data.images.empty() || cfg.data.labels.empty() ||
       cfg.data.test_images.empty() || cfg.data.test_labels.empty()))
    bad("data.source idx requires images, labels, test_images, test_labels");

  cfg.config_hash = fnv1a64(root.dump());
  return cfg;
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) bad("cannot read config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), seed_override);
}

std::vector<profiles::ResourceProfile> prepare_fleet(const ExperimentConfig& cfg) {
  if (!cfg.fleet_csv_in.empty()) {
    std::ifstream in(cfg.fleet_csv_in);
    if (!in) bad("cannot read fleet csv: " + cfg.fleet_csv_in);
    std::stringstream buf;
    buf << in.rdbuf();
    auto fleet = profiles::fleet_from_csv(buf.str());
    if (static_cast<int>(fleet.size()) != cfg.sim.n_devices)
      bad("fleet csv row count must match fleet.n_devices");
    return fleet;
  }
  return profiles::generate_fleet(cfg.sim.n_devices, cfg.sim.tier_mix,
                                  cfg.sim.fleet_seed);
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  ExperimentData out;
  const std::uint64_t dseed = cfg.data.seed != 0 ? cfg.data.seed : cfg.sim.seed;

  if (cfg.data.source == "synthetic") {
    const int classes =
        cfg.data.classes > 0 ? cfg.data.classes : cfg.sim.output_dim;
    const int dim = cfg.data.dim > 0 ? cfg.data.dim : cfg.sim.input_dim;
    if (dim != cfg.sim.input_dim)
      bad("data.dim must match model.input_dim");
    if (classes != cfg.sim.output_dim)
      bad("data.classes must match model.output_dim");
    const auto full = data::gen_synthetic(cfg.data.n, classes, dim,
                                          cfg.data.separation, dseed);
    data::split_dataset(full, cfg.data.test_fraction, dseed, out.train, out.test);
  } else {
    out.train = data::load_idx(cfg.data.images, cfg.data.labels, cfg.data.limit);
    out.test = data::load_idx(cfg.data.test_images, cfg.data.test_labels, -1);
    const int classes = std::max(out.train.classes, out.test.classes);
    out.train.classes = classes;
    out.test.classes = classes;
    if (out.train.dim != cfg.sim.input_dim)
      bad("idx image size must match model.input_dim");
    if (classes != cfg.sim.output_dim)
      bad("idx class count must match model.output_dim");
    if (out.test.dim != out.train.dim)
      bad("idx train and test image sizes differ");
  }

  if (cfg.data.partition == "dirichlet") {
    out.shards = data::partition_noniid(out.train.y, cfg.sim.n_devices,
                                        cfg.data.alpha, dseed);
  } else {
    out.shards = data::partition_label_shards(
        out.train.y, cfg.sim.n_devices, cfg.data.shards_per_client, dseed);
  }
  return out;
}

}  // namespace asa::config
