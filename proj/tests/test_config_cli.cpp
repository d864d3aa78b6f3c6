#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

#include "asa/config.hpp"
#include "asa/data.hpp"
#include "asa/models.hpp"
#include "asa/profiles.hpp"
#include "helpers.hpp"

using namespace asa;
using asa_test::read_file;
using asa_test::TempDir;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI binary through the shell, capturing exit code and streams.
CliResult run_cli(const TempDir& tmp, const std::string& args,
                  const std::string& env = "") {
  static int counter = 0;
  const std::string tag = std::to_string(counter++);
  const std::string out_f = tmp.file("cli_out_" + tag);
  const std::string err_f = tmp.file("cli_err_" + tag);
  std::string cmd = env.empty() ? std::string() : env + " ";
  cmd += std::string(ASA_BIN) + " " + args + " >" + out_f + " 2>" + err_f;
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = read_file(out_f);
  r.err = read_file(err_f);
  return r;
}

// Compact experiment that trains in well under a second.
json small_config() {
  return json{
      {"fleet", {{"n_devices", 6}, {"seed", 7}}},
      {"clustering", {{"k", 3}, {"n_min", 1}}},
      {"model",
       {{"input_dim", 4},
        {"output_dim", 3},
        {"hidden", json::array({json::array({2}), json::array({3}),
                                json::array({4})})}}},
      {"data",
       {{"n", 240}, {"separation", 4.0}, {"test_fraction", 0.25},
        {"alpha", 100.0}}},
      {"training", {{"lr", 0.05}, {"batch_size", 16}}},
      {"simulation",
       {{"rounds", 6},
        {"seed", 42},
        {"tau_max", 1e9},
        {"convergence", {{"window", 50}, {"threshold", 1e-4}}}}}};
}

std::string write_config(const TempDir& tmp, const json& j,
                         const std::string& name = "config.json") {
  const auto path = tmp.file(name);
  asa_test::write_file(path, j.dump(2));
  return path;
}

bool starts_with_header(const std::string& text) {
  return text.rfind("# config=", 0) == 0 &&
         text.find(" version=") != std::string::npos;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing.

TEST_CASE("an empty document parses to the documented defaults") {
  auto cfg = config::parse_config("{}");
  CHECK(cfg.sim.n_devices == 10);
  CHECK(cfg.sim.k == 3);
  CHECK(cfg.sim.rounds == 250);
  CHECK(cfg.sim.seed == 42);
  CHECK(cfg.sim.train.lr0 == 0.01);
  CHECK(cfg.sim.train.batch_size == 128);
  CHECK(cfg.sim.train.schedule == training::Schedule::Constant);
  CHECK(cfg.sim.uniform_rung == -1);
  CHECK(cfg.data.source == "synthetic");
  CHECK(cfg.data.partition == "dirichlet");
  CHECK(cfg.data.limit == -1);
  CHECK(!cfg.diagnostics.has_oracle);
  CHECK(cfg.output.round_log == "rounds.jsonl");
  CHECK(cfg.output.target_accuracy == 0.9);
  CHECK(cfg.config_hash != 0);
}

TEST_CASE("the shipped example config carries its literal values") {
  auto cfg = config::load_config(EXAMPLE_CONFIG);
  CHECK(cfg.sim.n_devices == 10);
  CHECK(cfg.sim.fleet_seed == 7);
  CHECK(cfg.sim.k == 3);
  CHECK(cfg.sim.n_min == 2);
  CHECK(cfg.sim.input_dim == 8);
  CHECK(cfg.sim.output_dim == 4);
  CHECK(cfg.sim.hidden[2] == std::vector<int>{64});
  CHECK(cfg.sim.train.lr0 == 0.01);
  CHECK(cfg.sim.train.batch_size == 128);
  CHECK(cfg.sim.rounds == 250);
  CHECK(cfg.sim.checkpoint_every == 10);
  CHECK(cfg.sim.objective.task == 0.5);
  CHECK(cfg.data.n == 2000);
  CHECK(cfg.data.alpha == 0.5);
  REQUIRE(cfg.diagnostics.has_oracle);
  CHECK(cfg.diagnostics.oracle.steps == 500);
  CHECK(cfg.diagnostics.oracle.n_seeds == 1000);
  CHECK(cfg.diagnostics.oracle.schedule == training::Schedule::InvT);
}

TEST_CASE("unknown keys are rejected with their full path") {
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"fleet": {"n_device": 5}})"),
      doctest::Contains("unknown key: fleet.n_device"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(
          R"({"simulation": {"objective": {"tsak": 1.0}}})"),
      doctest::Contains("unknown key: simulation.objective.tsak"),
      std::invalid_argument);
  CHECK_THROWS_WITH_AS(config::parse_config(R"({"fleeet": {}})"),
                       doctest::Contains("unknown key: fleeet"),
                       std::invalid_argument);
}

TEST_CASE("value constraints are reported by name") {
  CHECK_THROWS_WITH_AS(
      config::parse_config(
          R"({"simulation": {"objective":
              {"task": 0.5, "balance": 0.3, "comm": 0.25}}})"),
      doctest::Contains("sum to 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"training": {"schedule": "linear"}})"),
      doctest::Contains("must be one of constant, invsqrt, invt"),
      std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"data": {"source": "csv"}})"),
      doctest::Contains("data.source must be synthetic or idx"),
      std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"data": {"partition": "random"}})"),
      doctest::Contains("data.partition must be dirichlet or shards"),
      std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"data": {"test_fraction": 0.0}})"),
      doctest::Contains("test_fraction"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"data": {"source": "idx"}})"),
      doctest::Contains("requires images, labels"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"clustering": {"k": 0}})"),
      doctest::Contains("k must lie in"), std::invalid_argument);
}

TEST_CASE("type errors name the offending key") {
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"fleet": {"n_devices": "ten"}})"),
      doctest::Contains("fleet.n_devices must be an integer"),
      std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"fleet": {"tier_mix": [0.5, 0.5]}})"),
      doctest::Contains("array of 3 numbers"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"simulation": {"adaptation": 1}})"),
      doctest::Contains("must be a boolean"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"simulation": {"seed": -1}})"),
      doctest::Contains("non-negative integer"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"model": {"hidden": [[16], [32]]}})"),
      doctest::Contains("array of 3 width lists"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      config::parse_config(R"({"model": {"hidden": [[16], [32], [6.5]]}})"),
      doctest::Contains("widths must be integers"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(config::parse_config("not json"),
                       doctest::Contains("invalid JSON"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(config::parse_config("[1, 2]"),
                       doctest::Contains("top level must be an object"),
                       std::invalid_argument);
}

TEST_CASE("the config hash tracks values, not formatting") {
  const std::string compact =
      R"({"simulation":{"rounds":10,"seed":42},"fleet":{"n_devices":8}})";
  const std::string spaced = R"({
    "fleet":      {"n_devices": 8},
    "simulation": {"seed": 42, "rounds": 10}
  })";
  auto a = config::parse_config(compact);
  auto b = config::parse_config(spaced);
  CHECK(a.config_hash == b.config_hash);

  auto c = config::parse_config(
      R"({"simulation":{"rounds":11,"seed":42},"fleet":{"n_devices":8}})");
  CHECK(c.config_hash != a.config_hash);
}

TEST_CASE("the seed override replaces the seed before hashing") {
  const std::string text = R"({"simulation": {"seed": 42}})";
  auto plain = config::parse_config(text);
  auto overridden = config::parse_config(text, 7);
  CHECK(overridden.sim.seed == 7);
  CHECK(overridden.config_hash != plain.config_hash);

  // Overriding with the value already present is a no-op for the hash.
  auto same = config::parse_config(text, 42);
  CHECK(same.config_hash == plain.config_hash);

  // A document that never mentioned the seed hashes as if it had it.
  auto added = config::parse_config("{}", 7);
  CHECK(added.sim.seed == 7);
  CHECK(added.config_hash != config::parse_config("{}").config_hash);
}

// ---------------------------------------------------------------------------
// Fleet and data preparation.

TEST_CASE("prepare_fleet generates from the tier mix or loads a CSV") {
  auto cfg = config::load_config(EXAMPLE_CONFIG);
  auto fleet = config::prepare_fleet(cfg);
  REQUIRE(fleet.size() == 10);
  CHECK(profiles::fleet_to_csv(fleet) ==
        profiles::fleet_to_csv(profiles::generate_fleet(
            cfg.sim.n_devices, cfg.sim.tier_mix, cfg.sim.fleet_seed)));

  TempDir tmp;
  auto three = profiles::generate_fleet(3, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 5);
  asa_test::write_file(tmp.file("fleet.csv"), profiles::fleet_to_csv(three));

  auto loaded_cfg = config::parse_config(
      R"({"fleet": {"n_devices": 3},
          "clustering": {"k": 1, "n_min": 1, "uniform_rung": 2}})");
  loaded_cfg.fleet_csv_in = tmp.file("fleet.csv");
  auto loaded = config::prepare_fleet(loaded_cfg);
  CHECK(profiles::fleet_to_csv(loaded) == profiles::fleet_to_csv(three));

  loaded_cfg.sim.n_devices = 4;
  CHECK_THROWS_WITH_AS(config::prepare_fleet(loaded_cfg),
                       doctest::Contains("row count must match"),
                       std::invalid_argument);
}

TEST_CASE("prepare_data splits synthetic data and shards every device") {
  auto cfg = config::parse_config(small_config().dump());
  auto dat = config::prepare_data(cfg);
  CHECK(dat.test.y.size() == 60);    // floor(240 * 0.25)
  CHECK(dat.train.y.size() == 180);
  CHECK(dat.train.dim == 4);
  CHECK(dat.train.classes == 3);
  REQUIRE(dat.shards.shards.size() == 6);
  std::size_t covered = 0;
  for (const auto& s : dat.shards.shards) {
    CHECK(!s.empty());
    covered += s.size();
  }
  CHECK(covered == dat.train.y.size());

  auto again = config::prepare_data(cfg);
  CHECK(again.train.X == dat.train.X);
  CHECK(again.shards.shards == dat.shards.shards);
}

TEST_CASE("prepare_data enforces dimension agreement") {
  auto j = small_config();
  j["data"]["dim"] = 5;
  CHECK_THROWS_WITH_AS(config::prepare_data(config::parse_config(j.dump())),
                       doctest::Contains("data.dim must match"),
                       std::invalid_argument);
  j = small_config();
  j["data"]["classes"] = 7;
  CHECK_THROWS_WITH_AS(config::prepare_data(config::parse_config(j.dump())),
                       doctest::Contains("data.classes must match"),
                       std::invalid_argument);
}

TEST_CASE("prepare_data loads IDX pairs and checks their shape") {
  TempDir tmp;
  data::Dataset train, test;
  train.n = 40;
  train.dim = 4;
  train.classes = 3;
  for (int i = 0; i < 40; ++i) {
    for (int d = 0; d < 4; ++d)
      train.X.push_back(static_cast<double>((i + d) % 256) / 255.0);
    train.y.push_back(i % 3);
  }
  test.n = 12;
  test.dim = 4;
  test.classes = 3;
  for (int i = 0; i < 12; ++i) {
    test.X.insert(test.X.end(), 4, 0.5);
    test.y.push_back(i % 3);
  }
  data::write_idx(train, 2, 2, tmp.file("tr-img"), tmp.file("tr-lbl"));
  data::write_idx(test, 2, 2, tmp.file("te-img"), tmp.file("te-lbl"));

  auto j = small_config();
  j["data"] = {{"source", "idx"},       {"images", tmp.file("tr-img")},
               {"labels", tmp.file("tr-lbl")}, {"test_images", tmp.file("te-img")},
               {"test_labels", tmp.file("te-lbl")}, {"alpha", 100.0}};
  auto dat = config::prepare_data(config::parse_config(j.dump()));
  CHECK(dat.train.y.size() == 40);
  CHECK(dat.test.y.size() == 12);
  CHECK(dat.train.dim == 4);
  REQUIRE(dat.shards.shards.size() == 6);

  j["model"]["input_dim"] = 8;
  j["model"]["hidden"] = json::array(
      {json::array({2}), json::array({3}), json::array({4})});
  CHECK_THROWS_WITH_AS(config::prepare_data(config::parse_config(j.dump())),
                       doctest::Contains("idx image size must match"),
                       std::invalid_argument);
}

// ---------------------------------------------------------------------------
// CLI end to end.

TEST_CASE("bench writes headered CSVs and reruns byte-identically") {
  TempDir tmp;
  const auto cfg = write_config(tmp, small_config());
  auto r = run_cli(tmp, "bench --config " + cfg + " --out " + tmp.file("a"));
  REQUIRE(r.code == 0);

  const auto scores = read_file(tmp.file("a") + "/scores.csv");
  const auto fleet = read_file(tmp.file("a") + "/fleet.csv");
  CHECK(starts_with_header(scores));
  CHECK(starts_with_header(fleet));
  CHECK(lines_of(scores).size() == 2 + 6);  // header, columns, one per device

  auto r2 = run_cli(tmp, "bench --config " + cfg + " --out " + tmp.file("b"));
  REQUIRE(r2.code == 0);
  CHECK(read_file(tmp.file("b") + "/scores.csv") == scores);
  CHECK(read_file(tmp.file("b") + "/fleet.csv") == fleet);
}

TEST_CASE("train with zero rounds emits a header-only log and a model") {
  TempDir tmp;
  const auto cfg = write_config(tmp, small_config());
  auto r = run_cli(tmp, "train --config " + cfg + " --rounds 0 --out " +
                            tmp.file("out"));
  REQUIRE(r.code == 0);

  auto log_lines = lines_of(read_file(tmp.file("out") + "/rounds.jsonl"));
  REQUIRE(log_lines.size() == 1);
  CHECK(json::parse(log_lines[0]).contains("config"));

  // model.bin: one header line, then the serialized top-rung parameters.
  const auto blob = read_file(tmp.file("out") + "/model.bin");
  const auto nl = blob.find('\n');
  REQUIRE(nl != std::string::npos);
  CHECK(starts_with_header(blob));
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(blob.data()) + nl + 1;
  auto params = models::parse_params(bytes, blob.size() - nl - 1);
  CHECK(params.rung == 2);
  auto family = models::build_family(
      4, 3, {std::vector<int>{2}, std::vector<int>{3}, std::vector<int>{4}});
  CHECK(params.values.size() == family.total_params);
  CHECK(params.values == models::init_params(family, 42).values);

  // Nothing ran, so the assignment table is just its header.
  auto assign = lines_of(read_file(tmp.file("out") + "/assignment.csv"));
  REQUIRE(assign.size() == 2);
  CHECK(assign[1] == "device,cluster,rung");
}

TEST_CASE("train runs are deterministic across invocations") {
  TempDir tmp;
  const auto cfg = write_config(tmp, small_config());
  REQUIRE(run_cli(tmp, "train --config " + cfg + " --out " + tmp.file("a"))
              .code == 0);
  REQUIRE(run_cli(tmp, "train --config " + cfg + " --out " + tmp.file("b"))
              .code == 0);
  const auto log = read_file(tmp.file("a") + "/rounds.jsonl");
  CHECK(log == read_file(tmp.file("b") + "/rounds.jsonl"));
  CHECK(lines_of(log).size() == 1 + 6);
  CHECK(read_file(tmp.file("a") + "/model.bin") ==
        read_file(tmp.file("b") + "/model.bin"));
  CHECK(read_file(tmp.file("a") + "/assignment.csv") ==
        read_file(tmp.file("b") + "/assignment.csv"));
}

TEST_CASE("an interrupted run resumed from its checkpoint matches a straight run") {
  TempDir tmp;
  const auto cfg = write_config(tmp, small_config());

  REQUIRE(run_cli(tmp, "train --config " + cfg + " --rounds 6 --out " +
                           tmp.file("straight"))
              .code == 0);

  REQUIRE(run_cli(tmp, "train --config " + cfg + " --rounds 3 --out " +
                           tmp.file("steps"))
              .code == 0);
  REQUIRE(run_cli(tmp, "train --config " + cfg + " --rounds 6 --out " +
                           tmp.file("steps") + " --resume " +
                           tmp.file("steps") + "/checkpoint.bin")
              .code == 0);

  CHECK(read_file(tmp.file("steps") + "/rounds.jsonl") ==
        read_file(tmp.file("straight") + "/rounds.jsonl"));
  CHECK(read_file(tmp.file("steps") + "/model.bin") ==
        read_file(tmp.file("straight") + "/model.bin"));
}

TEST_CASE("exit codes separate configuration errors from success") {
  TempDir tmp;
  const auto good = write_config(tmp, small_config());

  auto bad_cfg = small_config();
  bad_cfg["fleet"]["n_device"] = 5;  // unknown key
  const auto bad = write_config(tmp, bad_cfg, "bad.json");

  CHECK(run_cli(tmp, "bench --config " + good + " --out " + tmp.file("ok"))
            .code == 0);

  auto r = run_cli(tmp, "bench --config " + bad + " --out " + tmp.file("x"));
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown key: fleet.n_device") != std::string::npos);

  CHECK(run_cli(tmp, "train --config " + tmp.file("missing.json")).code == 2);
  CHECK(run_cli(tmp, "bench --bogus-flag").code == 2);
  CHECK(run_cli(tmp, "bench").code == 2);  // --config is required

  auto m = run_cli(tmp, "compare --config " + good + " --methods sgd --out " +
                            tmp.file("y"));
  CHECK(m.code == 2);
  CHECK(m.err.find("unknown method") != std::string::npos);

  auto d = run_cli(tmp, "diagnose --config " + good + " --out " + tmp.file("z"));
  CHECK(d.code == 2);
  CHECK(d.err.find("diagnostics.oracle") != std::string::npos);
}

TEST_CASE("ASA_LOG controls stderr verbosity") {
  TempDir tmp;
  const auto cfg = write_config(tmp, small_config());

  auto quiet = run_cli(tmp, "bench --config " + cfg + " --out " + tmp.file("q"),
                       "ASA_LOG=quiet");
  CHECK(quiet.code == 0);
  CHECK(quiet.err.empty());

  auto debug = run_cli(tmp, "bench --config " + cfg + " --out " + tmp.file("d"),
                       "ASA_LOG=debug");
  CHECK(debug.code == 0);
  CHECK(debug.err.find("config hash") != std::string::npos);

  auto bad = run_cli(tmp, "bench --config " + cfg + " --out " + tmp.file("e"),
                     "ASA_LOG=loud");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("ASA_LOG must be quiet, info, or debug") !=
        std::string::npos);
}

TEST_CASE("compare writes one summary row per method") {
  TempDir tmp;
  const auto cfg = write_config(tmp, small_config());
  auto r = run_cli(tmp, "compare --config " + cfg +
                            " --methods fedavg --rounds 2 --out " +
                            tmp.file("cmp"));
  REQUIRE(r.code == 0);

  auto rows = lines_of(read_file(tmp.file("cmp") + "/summary.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] ==
        "method,rounds,final_loss,final_accuracy,total_bytes,reduction,"
        "t_compute,t_comm,t_sync,t_overhead,rounds_to_target");
  CHECK(rows[2].rfind("fedavg,2,", 0) == 0);
  // FedAvg always trades the full model: zero communication reduction.
  CHECK(rows[2].find(",0.0,") != std::string::npos);

  auto log_lines = lines_of(read_file(tmp.file("cmp") + "/fedavg_rounds.jsonl"));
  CHECK(log_lines.size() == 1 + 2);
}

TEST_CASE("a pinned single-cluster configuration makes asa and fedavg agree") {
  auto j = small_config();
  j["clustering"] = {{"k", 1}, {"n_min", 1}, {"uniform_rung", 2}};
  j["simulation"]["adaptation"] = false;

  TempDir tmp;
  const auto cfg = write_config(tmp, j);
  auto r = run_cli(tmp, "compare --config " + cfg +
                            " --methods asa,fedavg --rounds 3 --out " +
                            tmp.file("cmp"));
  REQUIRE(r.code == 0);

  CHECK(read_file(tmp.file("cmp") + "/asa_rounds.jsonl") ==
        read_file(tmp.file("cmp") + "/fedavg_rounds.jsonl"));

  auto rows = lines_of(read_file(tmp.file("cmp") + "/summary.csv"));
  REQUIRE(rows.size() == 4);
  const auto tail = [](const std::string& s) {
    return s.substr(s.find(','));
  };
  CHECK(rows[2].rfind("asa,", 0) == 0);
  CHECK(rows[3].rfind("fedavg,", 0) == 0);
  CHECK(tail(rows[2]) == tail(rows[3]));
}

TEST_CASE("diagnose writes the report pair") {
  auto j = small_config();
  j["diagnostics"] = {{"oracle", {{"steps", 50}, {"seeds", 20}}}};

  TempDir tmp;
  const auto cfg = write_config(tmp, j);
  auto r = run_cli(tmp, "diagnose --config " + cfg + " --out " + tmp.file("d"));
  REQUIRE(r.code == 0);

  auto report_lines = lines_of(read_file(tmp.file("d") + "/diagnose.jsonl"));
  REQUIRE(report_lines.size() == 2);
  auto report = json::parse(report_lines[1]);
  CHECK(report.at("lyapunov").contains("violations"));
  CHECK(report.at("stability").contains("empirical_prob"));
  CHECK(report.contains("oracle_fit"));
  CHECK(!report.contains("telescoping"));  // only under a constant schedule

  auto lyap = lines_of(read_file(tmp.file("d") + "/lyapunov.csv"));
  REQUIRE(lyap.size() == 2 + 50);
  CHECK(lyap[1] == "step,mean_v,violation,violation_se");

  j["diagnostics"]["oracle"]["schedule"] = "constant";
  j["diagnostics"]["oracle"]["eta0"] = 0.1;
  const auto cfg2 = write_config(tmp, j, "const.json");
  auto r2 = run_cli(tmp, "diagnose --config " + cfg2 + " --out " + tmp.file("e"));
  REQUIRE(r2.code == 0);
  auto rep2 = json::parse(lines_of(read_file(tmp.file("e") + "/diagnose.jsonl"))[1]);
  CHECK(rep2.contains("telescoping"));
}
