#include "dvfsflow/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dvfsflow/errors.hpp"
#include "dvfsflow/io.hpp"

namespace dvfsflow {

using nlohmann::json;

namespace {

// Reads fields out of one JSON object, tracking which keys were consumed so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      target = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(qualified(key), "has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(qualified(it.key()), "is not a known key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read(const json& j, EnvConfig& c) {
  Section s(j, "env");
  s.get("num_actions", c.num_actions);
  s.get("eta", c.eta);
  s.get("dyn_coeff", c.dyn_coeff);
  s.get("static_coeff", c.static_coeff);
  s.get("thermal_capacitance", c.thermal_capacitance);
  s.get("thermal_resistance", c.thermal_resistance);
  s.get("ambient", c.ambient);
  s.get("min_freq", c.min_freq);
  s.get("fps_slope", c.fps_slope);
  s.get("fps_cap", c.fps_cap);
  s.get("target_fps", c.target_fps);
  s.get("target_temp", c.target_temp);
  s.get("reward_scale", c.reward_scale);
  s.get("noise_std_fps", c.noise_std_fps);
  s.get("noise_std_temp", c.noise_std_temp);
  s.get("horizon", c.horizon);
  s.get("seed", c.seed);
  s.finish();
}

void read(const json& j, AgentConfig& c) {
  Section s(j, "agent");
  s.get("discount", c.discount);
  s.get("epsilon_initial", c.epsilon_initial);
  s.get("epsilon_decay", c.epsilon_decay);
  s.get("epsilon_floor", c.epsilon_floor);
  s.get("learning_rate", c.learning_rate);
  s.get("batch_size", c.batch_size);
  s.get("target_sync_period", c.target_sync_period);
  s.get("hidden", c.hidden);
  s.finish();
}

void read(const json& j, ScheduleConfig& c) {
  Section s(j, "schedule");
  s.get("exploit_threshold", c.exploit_threshold);
  s.get("model_period", c.model_period);
  s.get("planning_breadth", c.planning_breadth);
  s.get("real_capacity", c.real_capacity);
  s.get("synthetic_capacity", c.synthetic_capacity);
  s.get("real_fraction", c.real_fraction);
  s.get("lr_reset_period", c.lr_reset_period);
  s.finish();
}

void read(const json& j, FlowConfig& c) {
  Section s(j, "flow");
  s.get("hidden", c.hidden);
  s.get("epochs", c.epochs);
  s.get("batch_size", c.batch_size);
  s.get("learning_rate", c.learning_rate);
  s.get("sigma_min", c.sigma_min);
  s.get("bootstrap", c.bootstrap);
  s.get("ode_steps", c.ode_steps);
  s.get("train_start", c.train_start);
  s.finish();
}

void read(const json& j, ForestConfig& c) {
  Section s(j, "forest");
  s.get("n_trees", c.n_trees);
  s.get("max_depth", c.max_depth);
  s.get("min_leaf", c.min_leaf);
  s.get("max_features", c.max_features);
  s.finish();
}

void read(const json& j, PredictorConfig& c) {
  Section s(j, "predictor");
  s.get("hidden", c.hidden);
  s.get("epochs", c.epochs);
  s.get("batch_size", c.batch_size);
  s.get("learning_rate", c.learning_rate);
  s.finish();
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + std::size_t(std::count(text.begin(), text.begin() + std::ptrdiff_t(byte), '\n'));
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", "is not valid JSON (line " + std::to_string(line_of(text, e.byte)) +
                                    "): " + e.what());
  }

  ExperimentConfig c;
  Section root(j, "");
  if (auto* p = root.sub("env")) read(*p, c.setup.env);
  if (auto* p = root.sub("agent")) read(*p, c.setup.agent);
  if (auto* p = root.sub("schedule")) read(*p, c.setup.schedule);
  if (auto* p = root.sub("flow")) read(*p, c.setup.flow);
  if (auto* p = root.sub("forest")) read(*p, c.setup.forest);
  if (auto* p = root.sub("predictor")) read(*p, c.setup.predictor);
  if (root.sub("methods")) {
    std::vector<std::string> methods;
    root.get("methods", methods);
    c.methods.clear();
    for (const auto& m : methods) c.methods.push_back(method_from_string(m));
  }
  root.get("seeds", c.seeds);
  root.get("output_dir", c.output_dir);
  root.finish();

  if (c.methods.empty()) throw ConfigError("methods", "must not be empty");
  if (c.seeds.empty()) throw ConfigError("seeds", "must not be empty");
  validate(c.setup);
  return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(io::read_file(path)); }

json to_json(const ExperimentSetup& s) {
  const auto& e = s.env;
  const auto& a = s.agent;
  const auto& sc = s.schedule;
  const auto& f = s.flow;
  const auto& fo = s.forest;
  const auto& p = s.predictor;
  json j;
  j["env"] = {{"num_actions", e.num_actions},
              {"eta", e.eta},
              {"dyn_coeff", e.dyn_coeff},
              {"static_coeff", e.static_coeff},
              {"thermal_capacitance", e.thermal_capacitance},
              {"thermal_resistance", e.thermal_resistance},
              {"ambient", e.ambient},
              {"min_freq", e.min_freq},
              {"fps_slope", e.fps_slope},
              {"fps_cap", e.fps_cap},
              {"target_fps", e.target_fps},
              {"target_temp", e.target_temp},
              {"reward_scale", e.reward_scale},
              {"noise_std_fps", e.noise_std_fps},
              {"noise_std_temp", e.noise_std_temp},
              {"horizon", e.horizon},
              {"seed", e.seed}};
  j["agent"] = {{"discount", a.discount},
                {"epsilon_initial", a.epsilon_initial},
                {"epsilon_decay", a.epsilon_decay},
                {"epsilon_floor", a.epsilon_floor},
                {"learning_rate", a.learning_rate},
                {"batch_size", a.batch_size},
                {"target_sync_period", a.target_sync_period},
                {"hidden", a.hidden}};
  j["schedule"] = {{"exploit_threshold", sc.exploit_threshold},
                   {"model_period", sc.model_period},
                   {"planning_breadth", sc.planning_breadth},
                   {"real_capacity", sc.real_capacity},
                   {"synthetic_capacity", sc.synthetic_capacity},
                   {"real_fraction", sc.real_fraction},
                   {"lr_reset_period", sc.lr_reset_period}};
  j["flow"] = {{"hidden", f.hidden},         {"epochs", f.epochs},
               {"batch_size", f.batch_size}, {"learning_rate", f.learning_rate},
               {"sigma_min", f.sigma_min},   {"bootstrap", f.bootstrap},
               {"ode_steps", f.ode_steps},   {"train_start", f.train_start}};
  j["forest"] = {{"n_trees", fo.n_trees},
                 {"max_depth", fo.max_depth},
                 {"min_leaf", fo.min_leaf},
                 {"max_features", fo.max_features}};
  j["predictor"] = {{"hidden", p.hidden},
                    {"epochs", p.epochs},
                    {"batch_size", p.batch_size},
                    {"learning_rate", p.learning_rate}};
  return j;
}

json to_json(const ExperimentConfig& c) {
  json j = to_json(c.setup);
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

std::string print_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
  std::vector<std::uint64_t> out;
  try {
    const auto dots = spec.find("..");
    if (dots != std::string::npos) {
      const auto lo = std::stoull(spec.substr(0, dots));
      const auto hi = std::stoull(spec.substr(dots + 2));
      if (hi < lo) throw ConfigError("seeds", "range end precedes start");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
      return out;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(std::stoull(item));
    }
  } catch (const std::logic_error&) {
    throw ConfigError("seeds", "cannot parse '" + spec + "'");
  }
  if (out.empty()) throw ConfigError("seeds", "must not be empty");
  return out;
}

std::vector<Method> parse_method_list(const std::string& spec) {
  std::vector<Method> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(method_from_string(item));
  }
  if (out.empty()) throw ConfigError("methods", "must not be empty");
  return out;
}

}  // namespace dvfsflow
