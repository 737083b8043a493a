#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace spikeforge {

// Returns f(x) and writes the gradient into `grad` (already sized like x).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int max_iters = 1000;
  double grad_tol = 1e-6;      // sup-norm of the gradient
  double rel_tol = 1e-10;      // relative decrease of f between iterations
  int memory = 10;
  double c1 = 1e-4;            // sufficient decrease
  double c2 = 0.9;             // curvature (strong Wolfe)
  int max_halvings = 30;       // for non-finite trial points
  int max_line_search_evals = 40;
};

enum class StopReason { GradientTolerance, RelativeDecrease, MaxIterations, LineSearchFailed };

std::string to_string(StopReason reason);

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  StopReason reason = StopReason::MaxIterations;
  // Objective after initialization and after each accepted iteration.
  std::vector<double> history;
};

// Limited-memory BFGS with a strong Wolfe line search. Throws NumericalError
// if the objective is non-finite at x0, or if a trial step stays non-finite
// after `max_halvings` halvings.
LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& options = {});

}  // namespace spikeforge
