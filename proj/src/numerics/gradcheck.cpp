#include "byov/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace byov::num {

GradCheckResult finite_diff_check(const std::function<Tensor<double>()>& loss_fn,
                                  std::vector<Tensor<double>>& params, const GradCheckOptions& options) {
  if (options.h < 1e-6 || options.h > 1e-4) throw ContractError("finite_diff_check: step must lie in [1e-6, 1e-4]");
  for (auto& p : params) p.zero_grad();
  loss_fn().backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.numel(), 0.0);
    }
    p.zero_grad();
  }

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<std::size_t> coords(params[i].numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    auto theta = params[i].mutable_data();
    for (std::size_t j : coords) {
      const double saved = theta[j];
      theta[j] = saved + options.h;
      const double plus = loss_fn().item();
      theta[j] = saved - options.h;
      const double minus = loss_fn().item();
      theta[j] = saved;
      const double numeric = (plus - minus) / (2.0 * options.h);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.coords_checked;
    }
  }
  return result;
}

}  // namespace byov::num
