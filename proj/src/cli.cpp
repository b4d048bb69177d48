#include "dvfsflow/cli.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dvfsflow/checks.hpp"
#include "dvfsflow/config.hpp"
#include "dvfsflow/errors.hpp"
#include "dvfsflow/evalkit.hpp"
#include "dvfsflow/flowgen.hpp"
#include "dvfsflow/forest.hpp"
#include "dvfsflow/io.hpp"
#include "dvfsflow/orchestrator.hpp"
#include "dvfsflow/svg.hpp"

namespace dvfsflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string run_stem(Method m, std::uint64_t seed) {
  return to_string(m) + "_seed" + std::to_string(seed);
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream os;
  fn(os);
  io::write_file(path.string(), os.str());
}

std::vector<Transition> load_transitions(const std::string& path, Origin origin) {
  std::istringstream is(io::read_file(path));
  return io::read_transitions_csv(is, origin);
}

RunLog load_runlog(const std::string& path) {
  std::istringstream is(io::read_file(path));
  return io::read_runlog_csv(is);
}

json named(const std::vector<std::string>& labels, const Vector& v) {
  json out = json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double x = v(Eigen::Index(i));
    out[labels[i]] = std::isfinite(x) ? json(x) : json(nullptr);
  }
  return out;
}

std::vector<std::string> column_labels() {
  return {transition_columns().begin(), transition_columns().end()};
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string config_path;
  std::string methods;
  std::string seeds;
  std::string out_dir;
  bool print_config = false;
  int jobs = 1;
};

ExperimentConfig effective_config(const RunOptions& o) {
  ExperimentConfig cfg = o.config_path.empty() ? parse_config("{}") : load_config(o.config_path);
  if (!o.methods.empty()) cfg.methods = parse_method_list(o.methods);
  if (!o.seeds.empty()) cfg.seeds = parse_seed_list(o.seeds);
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  return cfg;
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = effective_config(o);
  if (o.print_config) {
    out << print_config(cfg);
    return kExitOk;
  }
  if (o.jobs < 1) throw ConfigError("jobs", "must be at least 1");

  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  io::write_file((dir / "config.json").string(), print_config(cfg));

  struct Job {
    Method method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Method m : cfg.methods)
    for (std::uint64_t s : cfg.seeds) jobs.push_back({m, s});

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        const RunLog log = run_experiment(job.method, cfg.setup, job.seed);
        const std::string stem = run_stem(job.method, job.seed);
        write_stream(dir / (stem + ".csv"), [&](std::ostream& os) { io::write_runlog_csv(os, log); });
        write_stream(dir / (stem + "_real.csv"),
                     [&](std::ostream& os) { io::write_transitions_csv(os, log.real); });
        if (!log.last_synthetic.empty())
          write_stream(dir / (stem + "_synth.csv"),
                       [&](std::ostream& os) { io::write_transitions_csv(os, log.last_synthetic); });
        json summary = io::run_summary(log);
        summary["regret"] = empirical_regret(log, cfg.setup.env);
        io::write_file((dir / (stem + "_summary.json")).string(), summary.dump(2) + "\n");
        std::lock_guard<std::mutex> lock(mu);
        err << "finished " << stem << "\n";
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const int workers = std::min<int>(o.jobs, int(jobs.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  // Manifest lists only files that exist, in job order.
  json runs = json::array();
  for (const Job& job : jobs) {
    const std::string stem = run_stem(job.method, job.seed);
    json files = {{"log", stem + ".csv"}, {"real", stem + "_real.csv"}, {"summary", stem + "_summary.json"}};
    if (fs::exists(dir / (stem + "_synth.csv"))) files["synthetic"] = stem + "_synth.csv";
    runs.push_back({{"method", to_string(job.method)}, {"seed", job.seed}, {"files", files}});
  }
  std::vector<std::string> methods;
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  const json manifest = {{"config", "config.json"},
                         {"methods", methods},
                         {"seeds", cfg.seeds},
                         {"runs", runs}};
  io::write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
  out << "wrote " << jobs.size() << " run logs to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::string memory;
  std::string out;
  std::string config_path;
  std::string method = "dfm";
  std::string checkpoint;
  std::string load_checkpoint;
  int n = 1000;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenOptions& o, std::ostream& out, std::ostream& err) {
  if (o.n < 0) throw ConfigError("n", "must be non-negative");
  const ExperimentConfig cfg =
      o.config_path.empty() ? parse_config("{}") : load_config(o.config_path);
  const Method method = method_from_string(o.method);
  if (method != Method::dfm && method != Method::pure_fm)
    throw ConfigError("method", "gen supports dfm or pure_fm");
  Rng rng(o.seed);

  FlowModel model;
  if (!o.load_checkpoint.empty()) {
    try {
      model = io::flow_model_from_json(json::parse(io::read_file(o.load_checkpoint)));
    } catch (const json::parse_error& e) {
      throw IoError("checkpoint '" + o.load_checkpoint + "' is not valid JSON: " + e.what());
    }
  } else {
    if (o.memory.empty()) throw ConfigError("memory", "required unless --load-checkpoint is given");
    const auto ts = load_transitions(o.memory, Origin::real);
    ReplayMemory memory(std::max<std::size_t>(ts.size(), 1), Origin::real);
    for (const auto& t : ts) memory.push(t);

    FlowConfig fc = cfg.setup.flow;
    Vector lambda = Vector::Constant(kTransitionDim, 1.0 / kTransitionDim);
    if (method == Method::pure_fm) {
      fc.bootstrap = 1;
    } else if (memory.size() >= kMinForestTransitions) {
      lambda = transition_feature_weights(memory, cfg.setup.forest, rng);
    } else {
      err << "memory has fewer than " << kMinForestTransitions
          << " transitions; using uniform feature weights\n";
    }
    const TransitionLayout layout{cfg.setup.env.num_actions, cfg.setup.env.ambient};
    model = train_flow_model(memory, lambda, fc, layout, rng);
  }
  if (!o.checkpoint.empty())
    io::write_file(o.checkpoint, io::flow_model_to_json(model).dump(2) + "\n");

  const auto synth = generate_transitions(model, o.n, rng);
  if (o.out.empty()) {
    io::write_transitions_csv(out, synth);
  } else {
    write_stream(o.out, [&](std::ostream& os) { io::write_transitions_csv(os, synth); });
    out << "wrote " << synth.size() << " transitions to " << o.out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string real;
  std::string synth;
  std::string log_a;
  std::string log_b;
  std::string out;
  int window = 50;
};

json eval_batches(const std::vector<Transition>& real, const std::vector<Transition>& synth,
                  int num_actions) {
  const auto labels = column_labels();
  const Matrix r = transitions_to_matrix(real, num_actions);
  const Matrix s = transitions_to_matrix(synth, num_actions);
  const auto cr = pearson_matrix(r, labels);
  const auto cs = pearson_matrix(s, labels);
  const CorrGap gap = corr_gap(cr, cs);
  const auto cmp = compare_distributions(r, s, labels);
  return {{"corr_gap", gap.value},
          {"pairs_used", gap.pairs_used},
          {"pairs_excluded", gap.pairs_excluded},
          {"wasserstein", named(labels, cmp.wasserstein)},
          {"std_ratio", named(labels, cmp.std_ratio)},
          {"real_corr", io::correlation_to_json(cr)},
          {"synth_corr", io::correlation_to_json(cs)}};
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream&) {
  const bool batches = !o.real.empty() || !o.synth.empty();
  const bool logs = !o.log_a.empty() || !o.log_b.empty();
  if (!batches && !logs) throw ConfigError("eval", "give --real/--synth and/or --log-a/--log-b");
  if (batches && (o.real.empty() || o.synth.empty()))
    throw ConfigError("eval", "--real and --synth must be given together");
  if (logs && (o.log_a.empty() || o.log_b.empty()))
    throw ConfigError("eval", "--log-a and --log-b must be given together");

  json result = json::object();
  if (batches) {
    const auto real = load_transitions(o.real, Origin::real);
    const auto synth = load_transitions(o.synth, Origin::synthetic);
    result.update(eval_batches(real, synth, EnvConfig{}.num_actions));
  }
  if (logs) {
    const RunLog a = load_runlog(o.log_a);
    const RunLog b = load_runlog(o.log_b);
    result["early_fps_gain"] = early_fps_gain(a, b, o.window);
    result["window"] = o.window;
    result["qvalue_stability_a"] = qvalue_stability(a);
    result["qvalue_stability_b"] = qvalue_stability(b);
  }
  const std::string text = result.dump(2) + "\n";
  if (o.out.empty())
    out << text;
  else
    io::write_file(o.out, text);
  return kExitOk;
}

// ---------------------------------------------------------------- report

std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves) {
  std::size_t n = 0;
  for (const auto& c : curves) n = std::max(n, c.size());
  std::vector<double> out(n, 0.0);
  std::vector<int> count(n, 0);
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.size(); ++i) {
      out[i] += c[i];
      ++count[i];
    }
  for (std::size_t i = 0; i < n; ++i) out[i] = count[i] ? out[i] / count[i] : NAN;
  return out;
}

int cmd_report(const std::string& dir_name, std::ostream& out, std::ostream& err) {
  const fs::path dir(dir_name);
  json manifest;
  try {
    manifest = json::parse(io::read_file((dir / "manifest.json").string()));
  } catch (const json::parse_error& e) {
    throw IoError(std::string("manifest.json is not valid JSON: ") + e.what());
  }
  const ExperimentConfig cfg = load_config((dir / "config.json").string());
  const EnvConfig& env = cfg.setup.env;
  const auto labels = column_labels();

  struct MethodData {
    std::vector<std::vector<double>> fps, max_q, regret;
    std::vector<double> gap, stability, final_regret, early_fps;
    std::optional<CorrelationMatrix> synth_corr;
  };
  std::map<std::string, MethodData> by_method;
  std::vector<std::string> order;
  std::optional<CorrelationMatrix> real_corr;

  std::ostringstream metrics;
  metrics << "method,seed,mean_reward,early_fps,qvalue_stability,final_regret,corr_gap\n";

  try {
    for (const auto& run : manifest.at("runs")) {
      const std::string method = run.at("method").get<std::string>();
      const auto seed = run.at("seed").get<std::uint64_t>();
      const auto& files = run.at("files");
      RunLog log = load_runlog((dir / files.at("log").get<std::string>()).string());
      log.setup = cfg.setup;
      if (!by_method.count(method)) order.push_back(method);
      MethodData& md = by_method[method];

      std::vector<double> fps, q;
      double reward = 0.0;
      for (const auto& s : log.steps) {
        fps.push_back(s.state.fps);
        q.push_back(s.max_q);
        reward += s.reward;
      }
      const auto regret = empirical_regret(log, env);
      const int window = std::min<int>(50, int(fps.size()));
      double early = 0.0;
      for (int i = 0; i < window; ++i) early += fps[std::size_t(i)];
      early = window ? early / window : NAN;
      double stability = NAN;
      try {
        stability = qvalue_stability(log);
      } catch (const Error&) {
      }

      double gap = NAN;
      if (files.contains("synthetic")) {
        const auto real = load_transitions((dir / files.at("real").get<std::string>()).string(), Origin::real);
        const auto synth = load_transitions(
            (dir / files.at("synthetic").get<std::string>()).string(), Origin::synthetic);
        const auto cr = pearson_matrix(transitions_to_matrix(real, env.num_actions), labels);
        const auto cs = pearson_matrix(transitions_to_matrix(synth, env.num_actions), labels);
        gap = corr_gap(cr, cs).value;
        md.gap.push_back(gap);
        if (!real_corr) real_corr = cr;
        if (!md.synth_corr) md.synth_corr = cs;
      }

      md.fps.push_back(fps);
      md.max_q.push_back(q);
      md.regret.push_back(regret);
      md.stability.push_back(stability);
      md.final_regret.push_back(regret.empty() ? NAN : regret.back());
      md.early_fps.push_back(early);

      metrics << method << ',' << seed << ',' << io::format_double(log.steps.empty() ? NAN : reward / double(log.steps.size()))
              << ',' << io::format_double(early) << ',' << io::format_double(stability) << ','
              << io::format_double(md.final_regret.back()) << ',' << io::format_double(gap) << '\n';
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("manifest.json is malformed: ") + e.what());
  }

  auto finite_median = [](const std::vector<double>& v) {
    std::vector<double> f;
    for (double x : v)
      if (std::isfinite(x)) f.push_back(x);
    return f.empty() ? json(nullptr) : json(median(f));
  };
  json methods = json::object();
  for (const auto& name : order) {
    const MethodData& md = by_method[name];
    methods[name] = {{"runs", md.fps.size()},
                     {"median_early_fps", finite_median(md.early_fps)},
                     {"median_qvalue_stability", finite_median(md.stability)},
                     {"median_final_regret", finite_median(md.final_regret)},
                     {"median_corr_gap", finite_median(md.gap)}};
  }
  json report = {{"methods", methods}, {"figures", json::array()}};
  if (by_method.count("dfm") && by_method.count("model_free")) {
    std::vector<double> gains;
    const auto& a = by_method["dfm"].early_fps;
    const auto& b = by_method["model_free"].early_fps;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) gains.push_back(a[i] / b[i]);
    report["median_early_fps_gain_dfm_vs_model_free"] = finite_median(gains);
  }

  auto figure = [&](const std::string& name, const std::string& svg_text) {
    io::write_file((dir / name).string(), svg_text);
    report["figures"].push_back(name);
  };
  if (real_corr) {
    figure("corr_real.svg", svg::heatmap(*real_corr, "real transitions"));
    report["zero_variance_columns"] = io::correlation_to_json(*real_corr)["zero_variance_columns"];
  }
  for (const auto& name : order)
    if (by_method[name].synth_corr)
      figure("corr_" + name + ".svg", svg::heatmap(*by_method[name].synth_corr, name + " synthetic"));

  auto chart = [&](const std::string& file, const std::string& title, const std::string& y,
                   auto member) {
    std::vector<svg::Series> series;
    for (const auto& name : order) series.push_back({name, mean_curve(by_method[name].*member)});
    figure(file, svg::line_chart(series, title, y));
  };
  chart("fps.svg", "fps per step (mean over seeds)", "fps", &MethodData::fps);
  chart("max_q.svg", "max Q per step (mean over seeds)", "max Q", &MethodData::max_q);
  chart("regret.svg", "cumulative regret (mean over seeds)", "regret", &MethodData::regret);

  io::write_file((dir / "metrics.csv").string(), metrics.str());
  io::write_file((dir / "report.json").string(), report.dump(2) + "\n");
  out << "wrote report for " << manifest.at("runs").size() << " runs to " << dir.string() << "\n";
  (void)err;
  return kExitOk;
}

// ---------------------------------------------------------------- selftest

int cmd_selftest(std::uint64_t seed, std::ostream& out) {
  bool all = true;
  for (const auto& r : checks::run_all(seed)) {
    all = all && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.value << " (bound " << r.threshold
        << ")";
    if (!r.detail.empty()) out << " " << r.detail;
    out << "\n";
  }
  return all ? kExitOk : kExitCheckFailed;
}

int error_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::io:
    case ErrorKind::insufficient_data: return kExitData;
    default: return kExitOther;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DVFS workbench: flow-matching data augmentation for few-shot DQN", "dvfsflow"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "execute methods x seeds and write run logs");
  run->add_option("--config", run_opts.config_path, "JSON experiment config");
  run->add_option("--methods", run_opts.methods, "comma list: dfm,pure_fm,model_based,model_free,random");
  run->add_option("--seeds", run_opts.seeds, "range 0..4 or list 0,3");
  run->add_option("--out", run_opts.out_dir, "output directory");
  run->add_flag("--print-config", run_opts.print_config, "echo the effective config and exit");
  run->add_option("--jobs", run_opts.jobs, "parallel workers");

  GenOptions gen_opts;
  auto* gen = app.add_subcommand("gen", "train a flow model on a memory dump and sample from it");
  gen->add_option("--memory", gen_opts.memory, "transition CSV of real data");
  gen->add_option("--n", gen_opts.n, "number of synthetic transitions");
  gen->add_option("--out", gen_opts.out, "output CSV (stdout if omitted)");
  gen->add_option("--config", gen_opts.config_path, "JSON experiment config");
  gen->add_option("--method", gen_opts.method, "dfm or pure_fm");
  gen->add_option("--seed", gen_opts.seed, "RNG seed");
  gen->add_option("--checkpoint", gen_opts.checkpoint, "save the trained model here");
  gen->add_option("--load-checkpoint", gen_opts.load_checkpoint, "skip training and load a model");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "fidelity and learning metrics from stored files");
  eval->add_option("--real", eval_opts.real, "real transition CSV");
  eval->add_option("--synth", eval_opts.synth, "synthetic transition CSV");
  eval->add_option("--log-a", eval_opts.log_a, "run log CSV (numerator of the fps gain)");
  eval->add_option("--log-b", eval_opts.log_b, "run log CSV (denominator of the fps gain)");
  eval->add_option("--window", eval_opts.window, "early window in steps");
  eval->add_option("--out", eval_opts.out, "output JSON (stdout if omitted)");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize a run directory as JSON, CSV and SVG");
  report->add_option("--dir", report_dir, "directory written by run")->required();

  std::uint64_t selftest_seed = 0;
  auto* selftest = app.add_subcommand("selftest", "gradient checks and oracle suites");
  selftest->add_option("--seed", selftest_seed, "RNG seed");

  std::vector<std::string> argv_store{"dvfsflow"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_opts, out, err);
    if (gen->parsed()) return cmd_gen(gen_opts, out, err);
    if (eval->parsed()) return cmd_eval(eval_opts, out, err);
    if (report->parsed()) return cmd_report(report_dir, out, err);
    if (selftest->parsed()) return cmd_selftest(selftest_seed, out);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return error_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
  err << app.help();
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace dvfsflow
