#include "asa/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "asa/hash.hpp"
#include "asa/rng.hpp"
#include "asa/version.hpp"
#include "json.hpp"

namespace asa::sim {

void ObjectiveWeights::validate() const {
  if (task < 0 || balance < 0 || comm < 0)
    throw std::invalid_argument(
        "objective weights must be a convex combination: each >= 0");
  if (std::abs(task + balance + comm - 1.0) > 1e-9)
    throw std::invalid_argument(
        "objective weights must be a convex combination: sum to 1");
}

void SimConfig::validate() const {
  if (n_devices < 1) throw std::invalid_argument("n_devices must be >= 1");
  if (k < 1 || k > n_devices)
    throw std::invalid_argument("k must lie in [1, n_devices]");
  if (n_min < 1 || k * n_min > n_devices)
    throw std::invalid_argument("k * n_min must not exceed n_devices");
  if (uniform_rung < -1 || uniform_rung >= models::kRungs)
    throw std::invalid_argument("uniform_rung out of range");
  if (uniform_rung == -1 && k != 3)
    throw std::invalid_argument("tier-based rung assignment requires k == 3");
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw std::invalid_argument("dropout_p must lie in [0, 1)");
  if (!(tau_max > 0.0)) throw std::invalid_argument("tau_max must be > 0");
  if (recluster_every < 0 || checkpoint_every < 0)
    throw std::invalid_argument("periods must be >= 0");
  if (!(overhead_s >= 0.0)) throw std::invalid_argument("overhead_s must be >= 0");
  if (!(flops_per_param_sample > 0.0))
    throw std::invalid_argument("flops_per_param_sample must be > 0");
  if (convergence.window < 2)
    throw std::invalid_argument("convergence window must be >= 2");
  if (!(convergence.threshold >= 0.0))
    throw std::invalid_argument("convergence threshold must be >= 0");
  if (train.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (train.local_epochs < 0)
    throw std::invalid_argument("local_epochs must be >= 0");
  if (!(train.lr0 > 0.0)) throw std::invalid_argument("lr0 must be > 0");
  if (train.prox_mu < 0.0) throw std::invalid_argument("prox_mu must be >= 0");
  objective.validate();
  // Throws when category weights or the family are malformed.
  profiles::ScoringWeights::from_categories(weight_compute, weight_memory,
                                            weight_network);
  models::build_family(input_dim, output_dim, hidden);
}

std::vector<int> apply_dropout(int n_devices, double dropout_p,
                               std::uint64_t seed, int round) {
  Rng rng(derive_seed(seed, StreamTag::Dropout, static_cast<std::uint64_t>(round)));
  std::vector<int> active;
  active.reserve(static_cast<std::size_t>(n_devices));
  for (int i = 0; i < n_devices; ++i) {
    const double u = rng.uniform();
    if (u >= dropout_p) active.push_back(i);
  }
  return active;
}

TimeBreakdown simulate_times(const profiles::ResourceProfile& device,
                             std::size_t params, std::size_t shard_size,
                             const SimConfig& cfg) {
  TimeBreakdown t;
  const double flops = profiles::effective_flops(device);
  t.compute = cfg.flops_per_param_sample * cfg.train.local_epochs *
              static_cast<double>(shard_size) * static_cast<double>(params) /
              flops;
  t.comm = 2.0 * 4.0 * static_cast<double>(params) /
           (device.bandwidth_mbit * 125000.0);
  t.overhead = cfg.overhead_s;
  return t;
}

double objective_scalar(double global_loss, double usage_variance,
                        double comm_ratio, const ObjectiveWeights& w) {
  w.validate();
  return w.task * global_loss + w.balance * usage_variance + w.comm * comm_ratio;
}

int rung_of_tier(clustering::Tier t) {
  switch (t) {
    case clustering::Tier::High: return 2;
    case clustering::Tier::Mid: return 1;
    case clustering::Tier::Low: return 0;
  }
  return 0;
}

double eval_model(const models::NestedModelFamily& family,
                  const models::ParamVector& params, const data::Dataset& test,
                  double* loss_out) {
  const auto fwd = models::forward(family, params, test.X, test.y);
  if (loss_out) *loss_out = fwd.loss;
  int correct = 0;
  for (int s = 0; s < test.n; ++s) {
    const double* row = &fwd.probs[static_cast<std::size_t>(s) *
                                   static_cast<std::size_t>(test.classes)];
    int best = 0;
    for (int c = 1; c < test.classes; ++c)
      if (row[c] > row[best]) best = c;
    if (best == test.y[static_cast<std::size_t>(s)]) ++correct;
  }
  return static_cast<double>(correct) / test.n;
}

namespace {

struct RoundScratch {
  std::vector<DeviceRound> device_rows;
  std::vector<std::optional<aggregation::Update>> updates;
};

}  // namespace

RunOutputs run_experiment(const SimConfig& cfg,
                          const std::vector<profiles::ResourceProfile>& fleet,
                          const data::Dataset& train, const data::Dataset& test,
                          const data::ShardPlan& shards, const RunIo& io,
                          const SimState* resume, int rounds_override) {
  cfg.validate();
  if (static_cast<int>(fleet.size()) != cfg.n_devices)
    throw std::invalid_argument("fleet size does not match n_devices");
  if (static_cast<int>(shards.shards.size()) != cfg.n_devices)
    throw std::invalid_argument("shard count does not match n_devices");
  if (train.dim != cfg.input_dim || test.dim != cfg.input_dim)
    throw std::invalid_argument("dataset dim does not match input_dim");
  for (const auto& shard : shards.shards)
    if (shard.empty())
      throw std::invalid_argument("every device needs a non-empty shard");

  const auto family = models::build_family(cfg.input_dim, cfg.output_dim, cfg.hidden);
  const auto weights = profiles::ScoringWeights::from_categories(
      cfg.weight_compute, cfg.weight_memory, cfg.weight_network);
  auto records = profiles::profile_fleet(fleet, cfg.workload, weights);

  std::vector<std::vector<double>> points;
  points.reserve(records.size());
  for (const auto& r : records) {
    if (cfg.cluster_on_profile)
      points.emplace_back(r.normalized.begin(), r.normalized.end());
    else
      points.emplace_back(std::vector<double>{r.score});
  }
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) scores.push_back(r.score);

  SimState state;
  if (resume) {
    state = *resume;
    if (state.global.values.size() != family.total_params)
      throw std::invalid_argument("resume state does not match model family");
    if (static_cast<int>(state.device_rung.size()) != cfg.n_devices)
      throw std::invalid_argument("resume state does not match fleet size");
  } else {
    state.global = models::init_params(family, cfg.seed);
    state.device_rung.assign(static_cast<std::size_t>(cfg.n_devices), 0);
    state.monitor.assign(static_cast<std::size_t>(cfg.n_devices), {});
  }

  const int until = rounds_override >= 0 ? rounds_override : cfg.rounds;
  if (state.next_round > until + 1)
    throw std::invalid_argument("resume state is past the requested rounds");

  RunOutputs out;
  if (io.round_log && !resume) write_log_header(*io.round_log, io.config_hash);

  auto recluster = [&](int round) {
    auto assignment = clustering::kmeans(
        points, cfg.k, derive_seed(cfg.seed, StreamTag::Cluster,
                                   static_cast<std::uint64_t>(round)),
        cfg.kmeans_max_iter, cfg.kmeans_tol);
    clustering::repair_min_size(assignment, points, cfg.n_min);
    state.total_distance_evals += assignment.assign_distance_evals;
    state.labels = assignment.labels;
    state.cluster_rung.assign(static_cast<std::size_t>(cfg.k), 0);
    if (cfg.uniform_rung >= 0) {
      for (auto& r : state.cluster_rung) r = cfg.uniform_rung;
    } else {
      const auto tiers = clustering::map_tiers(assignment, scores);
      for (int c = 0; c < cfg.k; ++c)
        state.cluster_rung[static_cast<std::size_t>(c)] =
            rung_of_tier(tiers[static_cast<std::size_t>(c)]);
    }
    for (int i = 0; i < cfg.n_devices; ++i)
      state.device_rung[static_cast<std::size_t>(i)] =
          state.cluster_rung[static_cast<std::size_t>(
              state.labels[static_cast<std::size_t>(i)])];
    state.monitor.assign(static_cast<std::size_t>(cfg.n_devices), {});
    state.clustered = true;
  };

  const auto total_pcount = family.total_params;

  bool early_stop = false;
  for (int round = state.next_round; round <= until; ++round) {
    const SimState snapshot = state;
    for (int attempt = 1;; ++attempt) {
      try {
        if (io.fault_hook) io.fault_hook(round, attempt);
        if (!state.clustered ||
            (cfg.recluster_every > 0 && round > 1 &&
             (round - 1) % cfg.recluster_every == 0))
          recluster(round);

        // Per-rung view of the current global model, shared by all devices.
        std::array<models::ParamVector, models::kRungs> global_at{};
        for (int r = 0; r < models::kRungs; ++r)
          global_at[static_cast<std::size_t>(r)] =
              models::project_params(family, state.global, r, state.global);

        const auto active =
            apply_dropout(cfg.n_devices, cfg.dropout_p, cfg.seed, round);

        RoundScratch scratch;
        const int n_active = static_cast<int>(active.size());
        scratch.device_rows.assign(static_cast<std::size_t>(n_active), {});
        scratch.updates.assign(static_cast<std::size_t>(n_active), std::nullopt);

        // Each active device trains independently and writes only its own
        // slot, so this loop parallelizes without changing results. Exceptions
        // must not unwind out of the parallel region; the first one is kept
        // and rethrown so the retry path still works.
        std::exception_ptr device_err = nullptr;
#pragma omp parallel for schedule(dynamic)
        for (int a = 0; a < n_active; ++a) {
          try {
          const int dev = active[static_cast<std::size_t>(a)];
          const int rung = state.device_rung[static_cast<std::size_t>(dev)];
          const auto& shard = shards.shards[static_cast<std::size_t>(dev)];
          const std::size_t pcount =
              family.coord_maps[static_cast<std::size_t>(rung)].size();

          DeviceRound row;
          row.device_id = dev;
          row.rung = rung;
          row.bytes_down = static_cast<std::int64_t>(4 * pcount);

          const auto res = training::local_train(
              family, global_at[static_cast<std::size_t>(rung)], train, shard,
              cfg.train, global_at[static_cast<std::size_t>(rung)], round,
              mix_seed({cfg.seed, static_cast<std::uint64_t>(dev)}));
          row.loss = res.mean_loss;
          row.grad_sq = res.grad_sq_norm;

          row.usage = training::simulate_usage(
              fleet[static_cast<std::size_t>(dev)], rung, cfg.demands,
              derive_seed(cfg.seed, StreamTag::Usage,
                          static_cast<std::uint64_t>(dev),
                          static_cast<std::uint64_t>(round)));
          models::Direction dir = models::Direction::Hold;
          if (cfg.adaptation)
            dir = training::monitor_and_adjust(
                row.usage, cfg.thresholds,
                state.monitor[static_cast<std::size_t>(dev)]);
          row.adjustment = dir == models::Direction::Up
                               ? 'U'
                               : dir == models::Direction::Down ? 'D' : 'H';

          row.times = simulate_times(fleet[static_cast<std::size_t>(dev)],
                                     pcount, shard.size(), cfg);
          row.straggler = row.times.compute + row.times.comm > cfg.tau_max;
          row.bytes_up =
              row.straggler ? 0 : static_cast<std::int64_t>(4 * pcount);

          if (!row.straggler) {
            aggregation::Update u;
            u.device_id = dev;
            u.params = res.params;
            u.n_samples = static_cast<std::int64_t>(shard.size());
            u.loss = res.mean_loss;
            scratch.updates[static_cast<std::size_t>(a)] = std::move(u);
          }
          // Rung change applies from the next round; this round's update is
          // at the rung that trained.
          state.device_rung[static_cast<std::size_t>(dev)] =
              models::adjust_complexity(rung, dir);
          scratch.device_rows[static_cast<std::size_t>(a)] = std::move(row);
          } catch (...) {
#pragma omp critical
            if (!device_err) device_err = std::current_exception();
          }
        }
        if (device_err) std::rethrow_exception(device_err);

        std::uint64_t ops = 0;
        for (int a = 0; a < n_active; ++a) {
          const int dev = active[static_cast<std::size_t>(a)];
          const auto& shard = shards.shards[static_cast<std::size_t>(dev)];
          const int rung = scratch.device_rows[static_cast<std::size_t>(a)].rung;
          ops += static_cast<std::uint64_t>(cfg.train.local_epochs) *
                 shard.size() *
                 family.coord_maps[static_cast<std::size_t>(rung)].size();
        }
        state.total_train_ops += ops;

        // Synchronization: included members wait for the slowest included
        // member of their cluster.
        std::vector<double> cluster_max(static_cast<std::size_t>(cfg.k), 0.0);
        for (int a = 0; a < n_active; ++a) {
          const auto& row = scratch.device_rows[static_cast<std::size_t>(a)];
          if (row.straggler) continue;
          const int c = state.labels[static_cast<std::size_t>(row.device_id)];
          cluster_max[static_cast<std::size_t>(c)] =
              std::max(cluster_max[static_cast<std::size_t>(c)],
                       row.times.compute + row.times.comm);
        }
        for (int a = 0; a < n_active; ++a) {
          auto& row = scratch.device_rows[static_cast<std::size_t>(a)];
          if (row.straggler) continue;
          const int c = state.labels[static_cast<std::size_t>(row.device_id)];
          row.times.sync = cluster_max[static_cast<std::size_t>(c)] -
                           (row.times.compute + row.times.comm);
        }

        // Two-level aggregation, clusters ascending, members ascending.
        std::vector<aggregation::Update> cluster_models;
        RoundLog log;
        for (int c = 0; c < cfg.k; ++c) {
          std::vector<aggregation::Update> members;
          for (int a = 0; a < n_active; ++a) {
            const auto& u = scratch.updates[static_cast<std::size_t>(a)];
            if (!u) continue;
            if (state.labels[static_cast<std::size_t>(u->device_id)] == c)
              members.push_back(*u);
          }
          auto agg = aggregation::intra_cluster_aggregate(
              family, members, state.cluster_rung[static_cast<std::size_t>(c)],
              state.global);
          if (agg) {
            log.clusters.push_back({c, agg->loss, agg->n_samples});
            cluster_models.push_back(std::move(*agg));
          }
        }
        state.global =
            aggregation::hierarchical_merge(family, cluster_models, state.global);

        // Weighted mean training loss over cluster models (one model: exact
        // copy, mirroring the aggregation copy rule); falls back to a full
        // evaluation when nobody contributed.
        double global_loss;
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
          global_loss =
              models::forward(family, state.global, train.X, train.y).loss;
        }
        state.loss_history.push_back(global_loss);

        // Objective components.
        double usage_var = 0.0;
        if (n_active > 0) {
          double mean = 0.0;
          for (const auto& row : scratch.device_rows) mean += row.usage.cpu;
          mean /= n_active;
          for (const auto& row : scratch.device_rows) {
            const double d = row.usage.cpu - mean;
            usage_var += d * d;
          }
          usage_var /= n_active;
        }
        std::int64_t bytes = 0;
        for (const auto& row : scratch.device_rows)
          bytes += row.bytes_up + row.bytes_down;
        state.total_bytes += bytes;
        const double fedavg_bytes =
            static_cast<double>(n_active) * 2.0 * 4.0 *
            static_cast<double>(total_pcount);
        const double comm_ratio =
            fedavg_bytes > 0.0 ? static_cast<double>(bytes) / fedavg_bytes : 0.0;

        log.round = round;
        log.active = active;
        log.devices = std::move(scratch.device_rows);
        log.global_loss = global_loss;
        log.objective =
            objective_scalar(global_loss, usage_var, comm_ratio, cfg.objective);
        log.eval_accuracy = eval_model(family, state.global, test, &log.eval_loss);
        log.bytes_total = bytes;

        const auto conv = aggregation::check_convergence(
            state.loss_history, cfg.convergence.window, cfg.convergence.threshold);
        log.convergence_rate = conv.rate;

        state.next_round = round + 1;
        if (!io.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            round % cfg.checkpoint_every == 0)
          save_checkpoint(io.checkpoint_path, state, io.config_hash);

        if (io.round_log) write_round_log(*io.round_log, log);
        out.logs.push_back(std::move(log));
        early_stop = conv.converged;
        break;
      } catch (const std::exception& e) {
        state = snapshot;
        if (attempt >= 2)
          throw std::runtime_error("round " + std::to_string(round) +
                                   " failed twice: " + e.what());
      }
    }
    if (early_stop) break;
  }

  if (!io.checkpoint_path.empty())
    save_checkpoint(io.checkpoint_path, state, io.config_hash);

  out.model.params = state.global;
  out.model.round = state.next_round - 1;
  out.model.loss_history = state.loss_history;
  out.state = std::move(state);
  out.records = std::move(records);
  return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& b, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(b, bits);
}

struct Reader {
  const std::vector<std::uint8_t>& b;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > b.size()) throw std::runtime_error("checkpoint truncated");
    return b[pos++];
  }
  std::uint32_t u32() {
    if (pos + 4 > b.size()) throw std::runtime_error("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(b[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    if (pos + 8 > b.size()) throw std::runtime_error("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(b[pos++]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_state(const SimState& s,
                                          std::uint64_t config_hash) {
  std::vector<std::uint8_t> b;
  b.push_back('A');
  b.push_back('S');
  b.push_back('A');
  b.push_back('1');
  put_u32(b, kFormatVersion);
  put_u64(b, config_hash);

  put_u32(b, static_cast<std::uint32_t>(s.next_round));
  const auto blob = models::serialize_params(s.global);
  put_u32(b, static_cast<std::uint32_t>(blob.size()));
  b.insert(b.end(), blob.begin(), blob.end());

  put_u32(b, static_cast<std::uint32_t>(s.device_rung.size()));
  for (std::size_t i = 0; i < s.device_rung.size(); ++i) {
    b.push_back(static_cast<std::uint8_t>(s.device_rung[i]));
    put_u32(b, static_cast<std::uint32_t>(s.monitor[i].stable_epochs));
    b.push_back(static_cast<std::uint8_t>(s.monitor[i].last));
  }
  put_u32(b, static_cast<std::uint32_t>(s.loss_history.size()));
  for (double v : s.loss_history) put_f64(b, v);

  b.push_back(s.clustered ? 1 : 0);
  put_u32(b, static_cast<std::uint32_t>(s.labels.size()));
  for (int l : s.labels) put_u32(b, static_cast<std::uint32_t>(l));
  put_u32(b, static_cast<std::uint32_t>(s.cluster_rung.size()));
  for (int r : s.cluster_rung) put_u32(b, static_cast<std::uint32_t>(r));

  put_u64(b, static_cast<std::uint64_t>(s.total_bytes));
  put_u64(b, s.total_train_ops);
  put_u64(b, s.total_distance_evals);

  put_u64(b, fnv1a64(b.data(), b.size()));
  return b;
}

SimState parse_state(const std::vector<std::uint8_t>& bytes,
                     std::uint64_t expected_config_hash) {
  if (bytes.size() < 24) throw std::runtime_error("checkpoint truncated");
  if (std::memcmp(bytes.data(), "ASA1", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const std::uint64_t stored_sum =
      [&] {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
          v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 +
                                                static_cast<std::size_t>(i)])
               << (8 * i);
        return v;
      }();
  if (fnv1a64(bytes.data(), bytes.size() - 8) != stored_sum)
    throw std::runtime_error("checkpoint: checksum mismatch");

  Reader r{bytes, 4};
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version");
  const std::uint64_t hash = r.u64();
  if (hash != expected_config_hash)
    throw std::runtime_error(
        "checkpoint: config hash mismatch (refusing to resume under a "
        "different configuration)");

  SimState s;
  s.next_round = static_cast<int>(r.u32());
  const std::uint32_t blob_len = r.u32();
  if (r.pos + blob_len > bytes.size())
    throw std::runtime_error("checkpoint truncated");
  s.global = models::parse_params(bytes.data() + r.pos, blob_len);
  r.pos += blob_len;

  const std::uint32_t n_dev = r.u32();
  s.device_rung.resize(n_dev);
  s.monitor.resize(n_dev);
  for (std::uint32_t i = 0; i < n_dev; ++i) {
    s.device_rung[i] = r.u8();
    s.monitor[i].stable_epochs = static_cast<int>(r.u32());
    s.monitor[i].last = static_cast<models::Direction>(r.u8());
  }
  const std::uint32_t n_hist = r.u32();
  s.loss_history.resize(n_hist);
  for (auto& v : s.loss_history) v = r.f64();

  s.clustered = r.u8() != 0;
  const std::uint32_t n_labels = r.u32();
  s.labels.resize(n_labels);
  for (auto& l : s.labels) l = static_cast<int>(r.u32());
  const std::uint32_t n_k = r.u32();
  s.cluster_rung.resize(n_k);
  for (auto& c : s.cluster_rung) c = static_cast<int>(r.u32());

  s.total_bytes = static_cast<std::int64_t>(r.u64());
  s.total_train_ops = r.u64();
  s.total_distance_evals = r.u64();
  return s;
}

void save_checkpoint(const std::string& path, const SimState& s,
                     std::uint64_t config_hash) {
  const auto bytes = serialize_state(s, config_hash);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

SimState load_checkpoint(const std::string& path,
                         std::uint64_t expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_state(bytes, expected_config_hash);
}

void write_log_header(std::ostream& out, std::uint64_t config_hash) {
  nlohmann::json h;
  h["config"] = to_hex16(config_hash);
  h["format"] = kFormatVersion;
  h["version"] = kVersion;
  out << h.dump() << '\n';
}

void write_round_log(std::ostream& out, const RoundLog& log) {
  nlohmann::json j;
  j["round"] = log.round;
  j["active"] = log.active;
  auto devs = nlohmann::json::array();
  for (const auto& d : log.devices) {
    nlohmann::json e;
    e["id"] = d.device_id;
    e["rung"] = d.rung;
    e["loss"] = d.loss;
    e["grad_sq"] = d.grad_sq;
    e["cpu"] = d.usage.cpu;
    e["mem"] = d.usage.memory;
    e["adj"] = std::string(1, d.adjustment);
    e["up"] = d.bytes_up;
    e["down"] = d.bytes_down;
    e["t_compute"] = d.times.compute;
    e["t_comm"] = d.times.comm;
    e["t_sync"] = d.times.sync;
    e["t_overhead"] = d.times.overhead;
    e["straggler"] = d.straggler;
    devs.push_back(std::move(e));
  }
  j["devices"] = std::move(devs);
  auto cls = nlohmann::json::array();
  for (const auto& c : log.clusters) {
    nlohmann::json e;
    e["cluster"] = c.cluster;
    e["loss"] = c.loss;
    e["n"] = c.n_samples;
    cls.push_back(std::move(e));
  }
  j["clusters"] = std::move(cls);
  j["global_loss"] = log.global_loss;
  j["objective"] = log.objective;
  j["eval_loss"] = log.eval_loss;
  j["eval_acc"] = log.eval_accuracy;
  j["conv_rate"] = log.convergence_rate;
  j["bytes"] = log.bytes_total;
  out << j.dump() << '\n';
}

}  // namespace asa::sim
