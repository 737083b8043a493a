#include "spikeforge/lbfgs.hpp"

#include <cmath>
#include <deque>

#include "spikeforge/error.hpp"

namespace spikeforge {

namespace {

struct Trial {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  bool finite = true;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const LbfgsOptions& opt, const Eigen::VectorXd& x,
             const Eigen::VectorXd& dir, double f0, double slope0, int& evals)
      : f_(f), opt_(opt), x_(x), dir_(dir), f0_(f0), slope0_(slope0), evals_(evals) {}

  // Returns false when no acceptable step could be found.
  bool run(double alpha0, Trial& out) {
    Trial prev;
    prev.alpha = 0.0;
    prev.value = f0_;
    prev.slope = slope0_;
    double alpha = alpha0;
    for (int i = 0; i < opt_.max_line_search_evals; ++i) {
      Trial cur = evaluate_finite(alpha, prev.alpha);
      if (cur.value > f0_ + opt_.c1 * cur.alpha * slope0_ || (i > 0 && cur.value >= prev.value)) {
        return zoom(prev, cur, out);
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      prev = std::move(cur);
      alpha = 2.0 * prev.alpha;
    }
    out = std::move(prev);
    return out.alpha > 0.0;
  }

 private:
  Trial evaluate(double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x = x_ + alpha * dir_;
    t.grad.resize(t.x.size());
    t.value = f_(t.x, t.grad);
    ++evals_;
    t.finite = std::isfinite(t.value) && t.grad.allFinite();
    t.slope = t.finite ? t.grad.dot(dir_) : 0.0;
    return t;
  }

  // Halves the step toward `anchor` until the objective is finite.
  Trial evaluate_finite(double alpha, double anchor) {
    Trial t = evaluate(alpha);
    for (int h = 0; !t.finite; ++h) {
      if (h >= opt_.max_halvings) {
        throw NumericalError("lbfgs: objective or gradient non-finite after " +
                             std::to_string(opt_.max_halvings) + " step halvings");
      }
      alpha = anchor + 0.5 * (alpha - anchor);
      t = evaluate(alpha);
    }
    return t;
  }

  static double cubic_min(const Trial& a, const Trial& b) {
    const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    if (disc < 0.0) return 0.5 * (a.alpha + b.alpha);
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    return b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
  }

  bool zoom(Trial lo, Trial hi, Trial& out) {
    for (int i = 0; i < opt_.max_line_search_evals; ++i) {
      const double left = std::min(lo.alpha, hi.alpha);
      const double right = std::max(lo.alpha, hi.alpha);
      const double width = right - left;
      if (width <= 1e-16 * std::max(1.0, right)) break;
      double alpha = cubic_min(lo, hi);
      if (!std::isfinite(alpha) || alpha < left + 0.1 * width || alpha > right - 0.1 * width) {
        alpha = 0.5 * (lo.alpha + hi.alpha);
      }
      Trial cur = evaluate_finite(alpha, lo.alpha);
      if (cur.value > f0_ + opt_.c1 * cur.alpha * slope0_ || cur.value >= lo.value) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    // lo always satisfies sufficient decrease; accept it if it moved.
    if (lo.alpha > 0.0 && lo.value < f0_) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

  const Objective& f_;
  const LbfgsOptions& opt_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& dir_;
  double f0_;
  double slope0_;
  int& evals_;
};

}  // namespace

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::RelativeDecrease: return "relative_decrease";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::LineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& options) {
  LbfgsResult result;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd grad(x.size());
  double value = objective(x, grad);
  result.evaluations = 1;
  if (!std::isfinite(value) || !grad.allFinite()) {
    throw NumericalError("lbfgs: objective not finite at the initial point");
  }
  result.history.push_back(value);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  result.reason = StopReason::MaxIterations;

  for (int iter = 0; iter < options.max_iters; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
      result.reason = StopReason::GradientTolerance;
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd dir = -grad;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (m > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -grad;
      slope = -grad.squaredNorm();
    }

    const double step0 = m == 0 ? std::min(1.0, 1.0 / grad.norm()) : 1.0;
    Trial accepted;
    LineSearch search(objective, options, x, dir, value, slope, result.evaluations);
    if (!search.run(step0, accepted)) {
      result.reason = StopReason::LineSearchFailed;
      break;
    }

    Eigen::VectorXd s = accepted.x - x;
    Eigen::VectorXd y = accepted.grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double previous = value;
    x = std::move(accepted.x);
    grad = std::move(accepted.grad);
    value = accepted.value;
    result.iterations = iter + 1;
    result.history.push_back(value);

    if (previous - value <= options.rel_tol * std::max(std::abs(previous), std::abs(value))) {
      result.reason = StopReason::RelativeDecrease;
      break;
    }
  }
  result.x = std::move(x);
  result.value = value;
  result.grad_norm = grad.lpNorm<Eigen::Infinity>();
  if (result.reason == StopReason::MaxIterations && result.grad_norm < options.grad_tol) {
    result.reason = StopReason::GradientTolerance;
  }
  return result;
}

}  // namespace spikeforge
