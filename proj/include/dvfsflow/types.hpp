#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace dvfsflow {

using Rng = std::mt19937_64;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector4 = Eigen::Vector4d;

// Data sets are stored one sample per row; networks consume one sample per
// column. Keep the two straight at module boundaries.

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Derives an independent child seed so sub-components do not share a stream.
inline std::uint64_t split_seed(Rng& rng) { return rng(); }

}  // namespace dvfsflow
