#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mapnet/graph.hpp"

namespace mapnet {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // Coordinates checked per input; 0 checks every element. Sampled
  // coordinates are drawn from `seed`.
  std::size_t max_elements_per_input = 0;
  std::uint64_t seed = 0;
  // Coordinates (input index, element index) to leave out, e.g. points
  // where the op is not differentiable.
  std::function<bool(std::size_t, std::size_t)> exclude;
  // Skip coordinates whose one-sided differences disagree by more than
  // `tolerance`: a relu or max-pool kink lies within one step of the point.
  bool skip_kinks = false;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = true;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

// Closure that records a scalar-valued computation of its inputs.
template <typename T>
using GraphClosure = std::function<Var(Graph<T>&, std::span<const Var>)>;

// Central finite differences against reverse-mode gradients.
// rel_err = |analytic - numeric| / max(1, |analytic|, |numeric|).
// Only double precision is accepted.
template <typename T>
GradCheckReport finite_diff_check(const GraphClosure<T>& f, std::vector<Tensor<T>> inputs,
                                  const GradCheckOptions& options = {});

}  // namespace mapnet
