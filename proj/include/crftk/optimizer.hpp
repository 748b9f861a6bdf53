#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "crftk/types.hpp"

namespace crftk {

// Objective callable: returns the value and its ascent gradient at theta.
// Regularization lives inside the callable.
using Objective =
    std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>;

struct FitOptions {
  int max_epochs = 100;
  double tol = 1e-6;        // relative improvement threshold
  double step0 = 1.0;       // initial step per epoch
  double min_step = 1e-12;  // give up halving below this
};

struct FitResult {
  std::vector<double> theta;
  double value = 0;
  int epochs = 0;
  std::vector<double> trace;  // accepted objective values, monotone non-decreasing
};

// Maximizes the objective by gradient steps with backtracking line search:
// each epoch halves the step until the objective improves, then accepts.
// Stops at max_epochs, when no improving step of at least min_step exists, or
// when the relative improvement falls under tol.  Returns the best theta seen.
FitResult fit(const Objective& objective, std::vector<double> theta0,
              const FitOptions& opts = {});

}  // namespace crftk
