#include "mapnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <type_traits>

#include "mapnet/rng.hpp"

namespace mapnet {

namespace {

template <typename T>
double evaluate(const GraphClosure<T>& f, const std::vector<Tensor<T>>& inputs) {
  Graph<T> g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(g.input(t, false));
  const Var out = f(g, vars);
  const Tensor<T>& v = g.value(out);
  if (v.size() != 1) throw UsageError("finite_diff_check closure must return a scalar");
  return static_cast<double>(v[0]);
}

std::vector<std::size_t> coordinates(std::size_t size, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= size) return idx;
  for (std::size_t i = 0; i < limit; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(size - 1)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

template <typename T>
GradCheckReport finite_diff_check(const GraphClosure<T>& f, std::vector<Tensor<T>> inputs,
                                  const GradCheckOptions& options) {
  if constexpr (!std::is_same_v<T, double>) {
    throw UsageError("finite_diff_check requires double precision inputs");
  } else {
    if (!(options.step >= 1e-6 && options.step <= 1e-2)) {
      throw UsageError("finite_diff_check step must lie in [1e-6, 1e-2]");
    }
    std::vector<Tensor<T>> analytic;
    {
      Graph<T> g;
      std::vector<Var> vars;
      for (const auto& t : inputs) vars.push_back(g.input(t, true));
      const Var out = f(g, vars);
      g.backward(out);
      for (Var v : vars) analytic.push_back(g.gradient(v));
    }

    const double base = options.skip_kinks ? evaluate(f, inputs) : 0.0;
    GradCheckReport report;
    Rng rng(options.seed);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      for (std::size_t j : coordinates(inputs[i].size(), options.max_elements_per_input, rng)) {
        if (options.exclude && options.exclude(i, j)) continue;
        const T original = inputs[i][j];
        inputs[i][j] = original + options.step;
        const double up = evaluate(f, inputs);
        inputs[i][j] = original - options.step;
        const double down = evaluate(f, inputs);
        inputs[i][j] = original;
        const double numeric = (up - down) / (2.0 * options.step);
        if (options.skip_kinks) {
          const double fwd = (up - base) / options.step, bwd = (base - down) / options.step;
          if (std::abs(fwd - bwd) / std::max({1.0, std::abs(fwd), std::abs(bwd)}) > options.tolerance) {
            ++report.skipped_kinks;
            continue;
          }
        }
        const double a = analytic[i][j];
        const double err =
            std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        ++report.checked;
        if (err > report.max_rel_err || !std::isfinite(err)) {
          report.max_rel_err = std::isfinite(err) ? err : INFINITY;
          report.worst_input = i;
          report.worst_index = j;
        }
      }
    }
    report.pass = report.max_rel_err <= options.tolerance;
    return report;
  }
}

template GradCheckReport finite_diff_check(const GraphClosure<float>&, std::vector<Tensor<float>>,
                                           const GradCheckOptions&);
template GradCheckReport finite_diff_check(const GraphClosure<double>&,
                                           std::vector<Tensor<double>>, const GradCheckOptions&);

}  // namespace mapnet
