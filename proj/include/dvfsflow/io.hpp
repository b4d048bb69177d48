#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvfsflow/evalkit.hpp"
#include "dvfsflow/flowgen.hpp"
#include "dvfsflow/orchestrator.hpp"

namespace dvfsflow::io {

using nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

// Shortest round-tripping decimal; NaN becomes an empty field.
std::string format_double(double x);

// RunLog CSV header:
// t,fps,freq,power,temp,action,reward,epsilon,max_q,agent_loss,fm_loss
void write_runlog_csv(std::ostream& os, const RunLog& log);
// Restores the per-step records only; method, seed and setup are left default.
RunLog read_runlog_csv(std::istream& is);

// 11-column flattened layout; the action column holds the integer level.
void write_transitions_csv(std::ostream& os, const std::vector<Transition>& ts);
std::vector<Transition> read_transitions_csv(std::istream& is, Origin origin);

json mlp_to_json(const nn::MlpD& net);
nn::MlpD mlp_from_json(const json& j);

json flow_model_to_json(const FlowModel& model);
FlowModel flow_model_from_json(const json& j);

json correlation_to_json(const CorrelationMatrix& c);
json run_summary(const RunLog& log);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace dvfsflow::io
