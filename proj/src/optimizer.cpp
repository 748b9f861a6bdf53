#include "crftk/optimizer.hpp"

#include <cmath>

namespace crftk {

FitResult fit(const Objective& objective, std::vector<double> theta0,
              const FitOptions& opts) {
  if (opts.max_epochs < 1) throw Error("max_epochs must be >= 1");

  auto [value, grad] = objective(theta0);
  if (!std::isfinite(value)) throw Error("objective is not finite at the starting point");

  FitResult res;
  res.theta = std::move(theta0);
  res.value = value;
  res.trace.push_back(value);
  const size_t dim = res.theta.size();

  std::vector<double> cand(dim);
  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    double step = opts.step0;
    bool accepted = false;
    double cand_value = 0;
    std::vector<double> cand_grad;

    while (step >= opts.min_step) {
      for (size_t j = 0; j < dim; ++j) cand[j] = res.theta[j] + step * grad[j];
      auto [v, g] = objective(cand);
      if (std::isfinite(v) && v > res.value) {
        accepted = true;
        cand_value = v;
        cand_grad = std::move(g);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no improving step left

    double improvement = (cand_value - res.value) / std::max(1.0, std::abs(res.value));
    res.theta.swap(cand);
    res.value = cand_value;
    grad = std::move(cand_grad);
    res.trace.push_back(res.value);
    res.epochs = epoch + 1;
    if (improvement < opts.tol) break;
  }
  return res;
}

}  // namespace crftk
