#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "dvfsflow/cli.hpp"
#include "dvfsflow/config.hpp"
#include "dvfsflow/errors.hpp"
#include "dvfsflow/io.hpp"

using namespace dvfsflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dvfsflow_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Short horizon and light generators so CLI runs stay quick.
const char* kFastConfig = R"({
  "env": {"horizon": 120},
  "flow": {"epochs": 20},
  "predictor": {"epochs": 20},
  "forest": {"n_trees": 8}
})";

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
  const ExperimentConfig c = parse_config("{}");
  CHECK(c.setup.env.horizon == 200);
  CHECK(c.setup.env.target_fps == 60.0);
  CHECK(c.setup.env.target_temp == 50.0);
  CHECK(c.setup.env.reward_scale == 2.0);
  CHECK(c.setup.agent.learning_rate == 0.05);
  CHECK(c.setup.agent.discount == 0.99);
  CHECK(c.setup.agent.epsilon_decay == 0.99);
  CHECK(c.setup.agent.batch_size == 32);
  CHECK(c.setup.flow.epochs == 400);
  CHECK(c.setup.schedule.model_period == 50);
  CHECK(c.setup.schedule.exploit_threshold == 100);
  CHECK(c.setup.schedule.planning_breadth == 1000);
  CHECK(c == ExperimentConfig{});
}

TEST_CASE("config errors name the field") {
  auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"agent": {"discount": 1.5}})") == "discount");
  CHECK(field_of(R"({"agent": {"discout": 0.5}})") == "agent.discout");
  CHECK(field_of(R"({"colour": 1})") == "colour");
  CHECK(field_of(R"({"env": {"horizon": "long"}})") == "env.horizon");
  CHECK(field_of(R"({"methods": []})") == "methods");
  try {
    parse_config("{\n  \"env\": {\n    \"horizon\": ,\n  }\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("print then load is the identity") {
  ExperimentConfig c;
  c.setup.env.target_fps = 45.5;
  c.setup.agent.hidden = {8, 4};
  c.setup.flow.learning_rate = 1.0 / 3.0;
  c.methods = {Method::random, Method::dfm};
  c.seeds = {3, 9};
  c.output_dir = "elsewhere";
  CHECK(parse_config(print_config(c)) == c);
  CHECK(parse_config(print_config(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("seed and method lists") {
  CHECK(parse_seed_list("0..4") == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK(parse_seed_list("7,2") == std::vector<std::uint64_t>{7, 2});
  CHECK_THROWS_AS(parse_seed_list("4..1"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("x"), ConfigError);
  CHECK(parse_method_list("dfm,model_free") == std::vector<Method>{Method::dfm, Method::model_free});
  CHECK_THROWS_AS(parse_method_list("dfm,nope"), ConfigError);
}

TEST_CASE("usage errors exit with 2") {
  const Result r = cli({"frobnicate"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("run") != std::string::npos);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"run", "--no-such-flag"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("config and data errors are categorized") {
  const fs::path dir = scratch("errors");
  io::write_file((dir / "bad.json").string(), R"({"agent": {"discount": 1.5}})");
  const Result bad = cli({"run", "--config", (dir / "bad.json").string()});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("discount") != std::string::npos);
  CHECK(cli({"run", "--config", (dir / "missing.json").string()}).code == kExitData);
  CHECK(cli({"eval", "--real", (dir / "none.csv").string(), "--synth", (dir / "none.csv").string()})
            .code == kExitData);
}

TEST_CASE("print-config echoes the effective config") {
  const Result r = cli({"run", "--print-config", "--seeds", "1,2", "--methods", "dfm"});
  CHECK(r.code == kExitOk);
  const ExperimentConfig c = parse_config(r.out);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.methods == std::vector<Method>{Method::dfm});
}

TEST_CASE("run, eval, gen and report wiring") {
  const fs::path dir = scratch("run");
  io::write_file((dir / "c.json").string(), kFastConfig);
  const fs::path out = dir / "out";
  const Result r = cli({"run", "--config", (dir / "c.json").string(), "--methods", "dfm,model_free",
                        "--seeds", "0..1", "--out", out.string(), "--jobs", "2"});
  REQUIRE(r.code == kExitOk);
  int logs = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    const std::string name = e.path().filename().string();
    if (name.find("_seed") != std::string::npos && name.size() > 4 &&
        name.substr(name.size() - 4) == ".csv" && name.find("_real") == std::string::npos &&
        name.find("_synth") == std::string::npos)
      ++logs;
  }
  CHECK(logs == 4);
  const json manifest = json::parse(io::read_file((out / "manifest.json").string()));
  CHECK(manifest["runs"].size() == 4);
  const std::string header = io::read_file((out / "dfm_seed0.csv").string()).substr(0, 80);
  CHECK(header.rfind("t,fps,freq,power,temp,action,reward,epsilon,max_q,agent_loss,fm_loss\n", 0) == 0);

  // the stored config reproduces the run byte for byte
  const fs::path again = dir / "again";
  REQUIRE(cli({"run", "--config", (out / "config.json").string(), "--out", again.string()}).code ==
          kExitOk);
  for (const char* f : {"dfm_seed0.csv", "dfm_seed1_synth.csv", "model_free_seed1.csv"})
    CHECK(io::read_file((out / f).string()) == io::read_file((again / f).string()));

  const Result e = cli({"eval", "--real", (out / "dfm_seed0_real.csv").string(), "--synth",
                        (out / "dfm_seed0_synth.csv").string(), "--log-a",
                        (out / "dfm_seed0.csv").string(), "--log-b",
                        (out / "model_free_seed0.csv").string()});
  REQUIRE(e.code == kExitOk);
  const json ej = json::parse(e.out);
  CHECK(ej.contains("corr_gap"));
  CHECK(ej["wasserstein"].size() == 11);
  CHECK(ej["wasserstein"].contains("next_temp"));
  CHECK(ej.contains("early_fps_gain"));

  const fs::path ckpt = dir / "model.json";
  const Result g = cli({"gen", "--memory", (out / "dfm_seed0_real.csv").string(), "--n", "25", "--out",
                        (dir / "gen.csv").string(), "--checkpoint", ckpt.string(), "--config",
                        (dir / "c.json").string()});
  REQUIRE(g.code == kExitOk);
  const Result g2 = cli({"gen", "--load-checkpoint", ckpt.string(), "--n", "25", "--out",
                         (dir / "gen2.csv").string()});
  REQUIRE(g2.code == kExitOk);
  CHECK(io::read_file((dir / "gen2.csv").string()).size() > 100);
  std::istringstream gen_csv(io::read_file((dir / "gen.csv").string()));
  CHECK(io::read_transitions_csv(gen_csv, Origin::synthetic).size() == 25);

  const Result rep = cli({"report", "--dir", out.string()});
  REQUIRE(rep.code == kExitOk);
  const json rj = json::parse(io::read_file((out / "report.json").string()));
  CHECK(rj["methods"].contains("dfm"));
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "fps.svg"));
  CHECK(fs::exists(out / "corr_dfm.svg"));
  CHECK(io::read_file((out / "regret.svg").string()).rfind("<svg", 0) == 0);
}

TEST_CASE("checkpoint round trip") {
  const auto net = nn::init_mlp({3, 5, 2}, nn::Activation::relu, 4);
  CHECK(io::mlp_from_json(io::mlp_to_json(net)) == net);
  json broken = io::mlp_to_json(net);
  broken["weights"][0].erase(0);
  CHECK_THROWS_AS(io::mlp_from_json(broken), IoError);
}

TEST_CASE("run log csv round trip") {
  RunLog log;
  StepRecord r;
  r.t = 1;
  r.state = {61.25, 0.5, 2.0 / 3.0, 33.1};
  r.action = 4;
  r.reward = 1.1;
  r.epsilon = 0.99;
  r.max_q = -0.25;
  log.steps.push_back(r);
  std::ostringstream os;
  io::write_runlog_csv(os, log);
  std::istringstream is(os.str());
  const RunLog back = io::read_runlog_csv(is);
  REQUIRE(back.steps.size() == 1);
  CHECK(back.steps[0].state == r.state);
  CHECK(std::isnan(back.steps[0].agent_loss));
  CHECK(back.steps[0].max_q == r.max_q);
}

TEST_CASE("selftest passes") {
  const Result r = cli({"selftest"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
