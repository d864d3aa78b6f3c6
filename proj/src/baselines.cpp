#include "asa/baselines.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>

#include "asa/rng.hpp"

namespace asa::baselines {

const char* method_name(Method m) {
  switch (m) {
    case Method::FedAvg: return "fedavg";
    case Method::FedProx: return "fedprox";
    case Method::HierFL: return "hierfl";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "fedavg") return Method::FedAvg;
  if (name == "fedprox") return Method::FedProx;
  if (name == "hierfl") return Method::HierFL;
  throw std::invalid_argument("unknown method: " + name);
}

BaselineOutputs run_baseline(Method method, const sim::SimConfig& cfg,
                             const std::vector<profiles::ResourceProfile>& fleet,
                             const data::Dataset& train,
                             const data::Dataset& test,
                             const data::ShardPlan& shards,
                             const sim::RunIo& io) {
  cfg.validate();
  if (static_cast<int>(fleet.size()) != cfg.n_devices)
    throw std::invalid_argument("fleet size does not match n_devices");
  if (static_cast<int>(shards.shards.size()) != cfg.n_devices)
    throw std::invalid_argument("shard count does not match n_devices");
  for (const auto& shard : shards.shards)
    if (shard.empty())
      throw std::invalid_argument("every device needs a non-empty shard");

  training::TrainConfig tcfg = cfg.train;
  if (method == Method::FedAvg) {
    tcfg.prox_mu = 0.0;
  } else if (method == Method::FedProx && !(tcfg.prox_mu > 0.0)) {
    throw std::invalid_argument(
        "fedprox requires a positive proximal coefficient");
  }

  const auto family =
      models::build_family(cfg.input_dim, cfg.output_dim, cfg.hidden);
  const int top = models::kRungs - 1;
  const std::size_t pcount = family.total_params;

  // HierFL needs a static device-to-cluster map; the others use one cluster.
  std::vector<int> labels(static_cast<std::size_t>(cfg.n_devices), 0);
  int n_clusters = 1;
  if (method == Method::HierFL) {
    const auto weights = profiles::ScoringWeights::from_categories(
        cfg.weight_compute, cfg.weight_memory, cfg.weight_network);
    const auto records = profiles::profile_fleet(fleet, cfg.workload, weights);
    std::vector<std::vector<double>> points;
    points.reserve(records.size());
    for (const auto& r : records)
      points.push_back(std::vector<double>{r.score});
    auto assignment =
        clustering::kmeans(points, cfg.k, derive_seed(cfg.seed, StreamTag::Cluster, 1),
                           cfg.kmeans_max_iter, cfg.kmeans_tol);
    clustering::repair_min_size(assignment, points, cfg.n_min);
    labels = assignment.labels;
    n_clusters = cfg.k;
  }

  BaselineOutputs out;
  models::ParamVector global = models::init_params(family, cfg.seed);
  std::vector<double> loss_history;

  if (io.round_log) sim::write_log_header(*io.round_log, io.config_hash);

  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto active =
        sim::apply_dropout(cfg.n_devices, cfg.dropout_p, cfg.seed, round);
    const int n_active = static_cast<int>(active.size());

    std::vector<sim::DeviceRound> rows(static_cast<std::size_t>(n_active));
    std::vector<std::optional<aggregation::Update>> updates(
        static_cast<std::size_t>(n_active));

    std::exception_ptr device_err = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (int a = 0; a < n_active; ++a) {
      try {
        const int dev = active[static_cast<std::size_t>(a)];
        const auto& shard = shards.shards[static_cast<std::size_t>(dev)];

        sim::DeviceRound row;
        row.device_id = dev;
        row.rung = top;
        row.bytes_down = static_cast<std::int64_t>(4 * pcount);

        const auto res = training::local_train(
            family, global, train, shard, tcfg, global, round,
            mix_seed({cfg.seed, static_cast<std::uint64_t>(dev)}));
        row.loss = res.mean_loss;
        row.grad_sq = res.grad_sq_norm;
        row.usage = training::simulate_usage(
            fleet[static_cast<std::size_t>(dev)], top, cfg.demands,
            derive_seed(cfg.seed, StreamTag::Usage,
                        static_cast<std::uint64_t>(dev),
                        static_cast<std::uint64_t>(round)));
        row.times = sim::simulate_times(fleet[static_cast<std::size_t>(dev)],
                                        pcount, shard.size(), cfg);
        row.straggler = row.times.compute + row.times.comm > cfg.tau_max;
        row.bytes_up = row.straggler ? 0 : static_cast<std::int64_t>(4 * pcount);
        if (!row.straggler) {
          aggregation::Update u;
          u.device_id = dev;
          u.params = res.params;
          u.n_samples = static_cast<std::int64_t>(shard.size());
          u.loss = res.mean_loss;
          updates[static_cast<std::size_t>(a)] = std::move(u);
        }
        rows[static_cast<std::size_t>(a)] = std::move(row);
      } catch (...) {
#pragma omp critical
        if (!device_err) device_err = std::current_exception();
      }
    }
    if (device_err) std::rethrow_exception(device_err);

    for (int a = 0; a < n_active; ++a) {
      const int dev = active[static_cast<std::size_t>(a)];
      out.total_train_ops +=
          static_cast<std::uint64_t>(tcfg.local_epochs) *
          shards.shards[static_cast<std::size_t>(dev)].size() * pcount;
    }

    // Included members wait for the slowest included member of their cluster.
    std::vector<double> cluster_max(static_cast<std::size_t>(n_clusters), 0.0);
    for (const auto& row : rows) {
      if (row.straggler) continue;
      const int c = labels[static_cast<std::size_t>(row.device_id)];
      cluster_max[static_cast<std::size_t>(c)] =
          std::max(cluster_max[static_cast<std::size_t>(c)],
                   row.times.compute + row.times.comm);
    }
    for (auto& row : rows) {
      if (row.straggler) continue;
      const int c = labels[static_cast<std::size_t>(row.device_id)];
      row.times.sync = cluster_max[static_cast<std::size_t>(c)] -
                       (row.times.compute + row.times.comm);
    }

    sim::RoundLog log;
    double global_loss;
    if (method == Method::HierFL) {
      std::vector<aggregation::Update> cluster_models;
      for (int c = 0; c < n_clusters; ++c) {
        std::vector<aggregation::Update> members;
        for (const auto& u : updates)
          if (u && labels[static_cast<std::size_t>(u->device_id)] == c)
            members.push_back(*u);
        auto agg = aggregation::intra_cluster_aggregate(family, members, top, global);
        if (agg) {
          log.clusters.push_back({c, agg->loss, agg->n_samples});
          cluster_models.push_back(std::move(*agg));
        }
      }
      global = aggregation::hierarchical_merge(family, cluster_models, global);
      if (cluster_models.size() == 1) {
        global_loss = cluster_models[0].loss;
      } else if (!cluster_models.empty()) {
        double acc = 0.0;
        std::int64_t n = 0;
        for (const auto& cm : cluster_models) {
          acc += cm.loss * static_cast<double>(cm.n_samples);
          n += cm.n_samples;
        }
        global_loss = acc / static_cast<double>(n);
      } else {
        global_loss = models::forward(family, global, train.X, train.y).loss;
      }
    } else {
      std::vector<aggregation::Update> flat;
      for (const auto& u : updates)
        if (u) flat.push_back(*u);
      if (!flat.empty()) {
        global = aggregation::fedavg(flat);
        double acc = 0.0;
        std::int64_t n = 0;
        for (const auto& u : flat) {
          acc += u.loss * static_cast<double>(u.n_samples);
          n += u.n_samples;
        }
        global_loss =
            flat.size() == 1 ? flat[0].loss : acc / static_cast<double>(n);
        log.clusters.push_back({0, global_loss, n});
      } else {
        global_loss = models::forward(family, global, train.X, train.y).loss;
      }
    }
    loss_history.push_back(global_loss);

    double usage_var = 0.0;
    if (n_active > 0) {
      double mean = 0.0;
      for (const auto& row : rows) mean += row.usage.cpu;
      mean /= n_active;
      for (const auto& row : rows) {
        const double d = row.usage.cpu - mean;
        usage_var += d * d;
      }
      usage_var /= n_active;
    }
    std::int64_t bytes = 0;
    for (const auto& row : rows) bytes += row.bytes_up + row.bytes_down;
    out.total_bytes += bytes;
    const double fedavg_bytes = static_cast<double>(n_active) * 2.0 * 4.0 *
                                static_cast<double>(pcount);
    const double comm_ratio =
        fedavg_bytes > 0.0 ? static_cast<double>(bytes) / fedavg_bytes : 0.0;

    log.round = round;
    log.active = active;
    log.devices = std::move(rows);
    log.global_loss = global_loss;
    log.objective =
        sim::objective_scalar(global_loss, usage_var, comm_ratio, cfg.objective);
    log.eval_accuracy = sim::eval_model(family, global, test, &log.eval_loss);
    log.bytes_total = bytes;

    const auto conv = aggregation::check_convergence(
        loss_history, cfg.convergence.window, cfg.convergence.threshold);
    log.convergence_rate = conv.rate;

    if (io.round_log) sim::write_round_log(*io.round_log, log);
    out.logs.push_back(std::move(log));
    if (conv.converged) break;
  }

  out.model.params = std::move(global);
  out.model.round = static_cast<int>(out.logs.size());
  out.model.loss_history = std::move(loss_history);
  return out;
}

}  // namespace asa::baselines
