#include "dvfsflow/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dvfsflow/config.hpp"
#include "dvfsflow/errors.hpp"

namespace dvfsflow::io {

std::string format_double(double x) {
  if (std::isnan(x)) return {};
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw IoError("line " + std::to_string(line) + ": cannot parse number '" + s + "'");
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

constexpr const char* kRunLogHeader =
    "t,fps,freq,power,temp,action,reward,epsilon,max_q,agent_loss,fm_loss";

}  // namespace

void write_runlog_csv(std::ostream& os, const RunLog& log) {
  os << kRunLogHeader << '\n';
  for (const StepRecord& r : log.steps) {
    os << r.t << ',' << format_double(r.state.fps) << ',' << format_double(r.state.freq) << ','
       << format_double(r.state.power) << ',' << format_double(r.state.temp) << ',' << r.action
       << ',' << format_double(r.reward) << ',' << format_double(r.epsilon) << ','
       << format_double(r.max_q) << ',' << format_double(r.agent_loss) << ','
       << format_double(r.model_loss) << '\n';
  }
}

RunLog read_runlog_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || strip_cr(line) != kRunLogHeader)
    throw IoError("run log is missing the expected header");
  RunLog log;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 11) throw IoError("line " + std::to_string(lineno) + ": expected 11 fields");
    StepRecord r;
    r.t = int(parse_double(f[0], lineno));
    r.state = {parse_double(f[1], lineno), parse_double(f[2], lineno), parse_double(f[3], lineno),
               parse_double(f[4], lineno)};
    r.action = int(parse_double(f[5], lineno));
    r.reward = parse_double(f[6], lineno);
    r.epsilon = parse_double(f[7], lineno);
    r.max_q = parse_double(f[8], lineno);
    r.agent_loss = parse_double(f[9], lineno);
    r.model_loss = parse_double(f[10], lineno);
    r.agent_trained = !std::isnan(r.agent_loss);
    r.model_trained = !std::isnan(r.model_loss);
    log.steps.push_back(r);
  }
  return log;
}

void write_transitions_csv(std::ostream& os, const std::vector<Transition>& ts) {
  const auto& cols = transition_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const Transition& t : ts) {
    os << format_double(t.state.fps) << ',' << format_double(t.state.freq) << ','
       << format_double(t.state.power) << ',' << format_double(t.state.temp) << ',' << t.action
       << ',' << format_double(t.next.fps) << ',' << format_double(t.next.freq) << ','
       << format_double(t.next.power) << ',' << format_double(t.next.temp) << ','
       << format_double(t.reward) << ',' << (t.done ? 1 : 0) << '\n';
  }
}

std::vector<Transition> read_transitions_csv(std::istream& is, Origin origin) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("transition file is empty");
  const auto header = split_csv(strip_cr(line));
  const auto& cols = transition_columns();
  if (header.size() != cols.size() || !std::equal(header.begin(), header.end(), cols.begin()))
    throw IoError("transition file header does not match the 11-column layout");
  std::vector<Transition> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != cols.size())
      throw IoError("line " + std::to_string(lineno) + ": expected 11 fields");
    double v[kTransitionDim];
    for (int i = 0; i < kTransitionDim; ++i) {
      v[i] = parse_double(f[std::size_t(i)], lineno);
      if (!std::isfinite(v[i]))
        throw IoError("line " + std::to_string(lineno) + ": non-finite value");
    }
    Transition t;
    t.state = {v[0], v[1], v[2], v[3]};
    t.action = int(std::lround(v[4]));
    t.next = {v[5], v[6], v[7], v[8]};
    t.reward = v[9];
    t.done = v[10] >= 0.5;
    t.origin = origin;
    out.push_back(t);
  }
  return out;
}

json mlp_to_json(const nn::MlpD& net) {
  json weights = json::array(), biases = json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weight(l);
    std::vector<double> row_major;
    row_major.reserve(std::size_t(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) row_major.push_back(w(i, j));
    weights.push_back(row_major);
    const auto b = net.bias(l);
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  return {{"version", kCheckpointVersion},
          {"layer_sizes", net.layer_sizes()},
          {"activation", nn::to_string(net.activation())},
          {"weights", weights},
          {"biases", biases}};
}

nn::MlpD mlp_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw IoError("unsupported checkpoint version");
    nn::MlpD net(j.at("layer_sizes").get<std::vector<int>>(),
                 nn::activation_from_string(j.at("activation").get<std::string>()));
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (int(weights.size()) != net.num_layers() || int(biases.size()) != net.num_layers())
      throw IoError("checkpoint layer count mismatch");
    for (int l = 0; l < net.num_layers(); ++l) {
      const auto w = weights[std::size_t(l)].get<std::vector<double>>();
      const auto b = biases[std::size_t(l)].get<std::vector<double>>();
      auto W = net.weight(l);
      auto B = net.bias(l);
      if (Eigen::Index(w.size()) != W.size() || Eigen::Index(b.size()) != B.size())
        throw IoError("checkpoint layer " + std::to_string(l) + " has the wrong shape");
      for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index k = 0; k < W.cols(); ++k) W(i, k) = w[std::size_t(i * W.cols() + k)];
      for (Eigen::Index i = 0; i < B.size(); ++i) B(i) = b[std::size_t(i)];
    }
    return net;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed network checkpoint: ") + e.what());
  }
}

namespace {

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), Eigen::Index(v.size()));
}

}  // namespace

json flow_model_to_json(const FlowModel& m) {
  std::vector<std::string> columns;
  if (m.dim() == kTransitionDim) columns.assign(transition_columns().begin(), transition_columns().end());
  return {{"version", kCheckpointVersion},
          {"field", mlp_to_json(m.field)},
          {"normalizer", {{"mean", to_vec(m.normalizer.mean)}, {"std", to_vec(m.normalizer.std)}}},
          {"lambda", to_vec(m.lambda)},
          {"sigma_min", m.sigma_min},
          {"bootstrap", m.bootstrap},
          {"ode_steps", m.ode_steps},
          {"layout",
           {{"columns", columns},
            {"num_actions", m.layout.num_actions},
            {"ambient", m.layout.ambient}}},
          {"trained", m.trained}};
}

FlowModel flow_model_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw IoError("unsupported checkpoint version");
    FlowModel m;
    m.field = mlp_from_json(j.at("field"));
    m.normalizer.mean = from_vec(j.at("normalizer").at("mean").get<std::vector<double>>());
    m.normalizer.std = from_vec(j.at("normalizer").at("std").get<std::vector<double>>());
    m.lambda = from_vec(j.at("lambda").get<std::vector<double>>());
    m.sigma_min = j.at("sigma_min").get<double>();
    m.bootstrap = j.at("bootstrap").get<int>();
    m.ode_steps = j.at("ode_steps").get<int>();
    m.layout.num_actions = j.at("layout").at("num_actions").get<int>();
    m.layout.ambient = j.at("layout").at("ambient").get<double>();
    m.trained = j.at("trained").get<bool>();
    const auto d = m.lambda.size();
    if (m.normalizer.mean.size() != d || m.normalizer.std.size() != d ||
        m.field.input_size() != d + 1 || m.field.output_size() != d)
      throw IoError("flow checkpoint dimensions are inconsistent");
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed flow checkpoint: ") + e.what());
  }
}

json correlation_to_json(const CorrelationMatrix& c) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < c.values.cols(); ++j) {
      const double v = c.values(i, j);
      row.push_back(std::isnan(v) ? json(nullptr) : json(v));
    }
    rows.push_back(row);
  }
  std::vector<std::string> zero_var;
  for (std::size_t i = 0; i < c.labels.size(); ++i)
    if (c.zero_variance[i]) zero_var.push_back(c.labels[i]);
  return {{"labels", c.labels}, {"values", rows}, {"zero_variance_columns", zero_var}};
}

json run_summary(const RunLog& log) {
  double reward = 0.0;
  std::vector<double> agent_losses;
  for (const auto& r : log.steps) {
    reward += r.reward;
    if (!std::isnan(r.agent_loss)) agent_losses.push_back(r.agent_loss);
  }
  json lambda = log.lambda.size() ? json(to_vec(log.lambda)) : json(nullptr);
  return {{"method", to_string(log.method)},
          {"seed", log.seed},
          {"steps", log.steps.size()},
          {"final_epsilon", log.final_epsilon},
          {"mean_reward", log.steps.empty() ? 0.0 : reward / double(log.steps.size())},
          {"agent_train_steps", log.agent_train_steps},
          {"target_syncs", log.target_syncs},
          {"optimizer_resets", log.optimizer_resets},
          {"model_train_steps", log.model_train_steps},
          {"model_loss_curves", log.model_loss_curves},
          {"agent_loss_curve", agent_losses},
          {"lambda", lambda},
          {"config", to_json(log.setup)}};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace dvfsflow::io
