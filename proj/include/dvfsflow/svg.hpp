#pragma once

#include <string>
#include <vector>

#include "dvfsflow/evalkit.hpp"

namespace dvfsflow::svg {

struct Series {
  std::string name;
  std::vector<double> values;
};

// Diverging blue/white/red map over [-1, 1]; NaN cells are grey.
std::string heatmap(const CorrelationMatrix& corr, const std::string& title);

std::string line_chart(const std::vector<Series>& series, const std::string& title,
                       const std::string& y_label);

}  // namespace dvfsflow::svg
