#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Dense>

#include "spikeforge/error.hpp"
#include "spikeforge/metrics.hpp"

namespace spikeforge {

namespace {

constexpr int kMaxIterations = 500;
constexpr int kMemory = 10;

std::vector<double> rank_quantile_knots(const std::vector<std::vector<double>>& preds, int n_knots) {
  if (n_knots < 2) throw UsageError("calibration: need at least 2 knots");
  std::vector<double> pooled;
  for (const auto& p : preds) pooled.insert(pooled.end(), p.begin(), p.end());
  if (pooled.empty()) throw DataError("calibration: no predictions");
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> knots;
  const double last = static_cast<double>(pooled.size() - 1);
  for (int j = 0; j < n_knots; ++j) {
    const double pos = last * j / (n_knots - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, pooled.size() - 1);
    const double x = pooled[lo] + (pos - static_cast<double>(lo)) * (pooled[hi] - pooled[lo]);
    if (knots.empty() || x > knots.back()) knots.push_back(x);
  }
  return knots;
}

// Negative summed information gain (nats) over cells, as a function of
// theta = (base, increments...) with knot values y_j = base + sum_{i<=j} inc_i.
class CalibrationObjective {
 public:
  CalibrationObjective(const std::vector<double>& knots, const std::vector<std::vector<double>>& preds,
                       const std::vector<std::vector<int>>& counts)
      : n_knots_(knots.size()) {
    for (std::size_t c = 0; c < preds.size(); ++c) {
      const auto& p = preds[c];
      const auto& k = counts[c];
      if (p.size() != k.size()) throw DataError("calibration: predictions and counts differ in length");
      double total = 0.0;
      for (int v : k) total += v;
      if (p.empty() || total <= 0.0) continue;  // information gain undefined
      const double inv_t = 1.0 / static_cast<double>(p.size());
      const double lambda = total * inv_t;
      lambda_sum_ += lambda;
      for (std::size_t t = 0; t < p.size(); ++t) {
        Sample s;
        s.count = k[t];
        s.weight = inv_t;
        s.log_ratio_base = std::log(lambda);
        if (p[t] <= knots.front()) {
          s.segment = 0;
        } else if (p[t] >= knots.back()) {
          s.segment = n_knots_ - 1;
        } else {
          const auto it = std::upper_bound(knots.begin(), knots.end(), p[t]);
          s.segment = static_cast<std::size_t>(it - knots.begin()) - 1;
          s.alpha = (p[t] - knots[s.segment]) / (knots[s.segment + 1] - knots[s.segment]);
        }
        samples_.push_back(s);
      }
    }
    if (samples_.empty()) throw DataError("calibration: no cell with spikes");
  }

  Eigen::VectorXd knot_values(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd y(n_knots_);
    double acc = theta[0];
    y[0] = acc;
    for (std::size_t j = 1; j < n_knots_; ++j) {
      acc += theta[j];
      y[j] = acc;
    }
    return y;
  }

  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const Eigen::VectorXd y = knot_values(theta);
    Eigen::VectorXd gy = Eigen::VectorXd::Zero(n_knots_);
    double total = lambda_sum_;
    for (const Sample& s : samples_) {
      double mu = (1.0 - s.alpha) * y[s.segment];
      if (s.alpha > 0.0) mu += s.alpha * y[s.segment + 1];
      const bool floored = !(mu > kRateFloor);
      if (floored) mu = kRateFloor;
      total += s.weight * (s.count * (std::log(mu) - s.log_ratio_base) - mu);
      if (!floored) {
        const double coef = s.weight * (s.count / mu - 1.0);
        gy[s.segment] += coef * (1.0 - s.alpha);
        if (s.alpha > 0.0) gy[s.segment + 1] += coef * s.alpha;
      }
    }
    // Chain rule through the cumulative sum: suffix sums of gy.
    grad.resize(n_knots_);
    double suffix = 0.0;
    for (std::size_t j = n_knots_; j-- > 0;) {
      suffix += gy[j];
      grad[j] = -suffix;
    }
    return -total;
  }

 private:
  struct Sample {
    std::size_t segment = 0;
    double alpha = 0.0;
    int count = 0;
    double weight = 0.0;
    double log_ratio_base = 0.0;
  };
  std::size_t n_knots_;
  std::vector<Sample> samples_;
  double lambda_sum_ = 0.0;
};

Eigen::VectorXd theta_from_knots(const std::vector<double>& y) {
  Eigen::VectorXd theta(y.size());
  theta[0] = std::max(y[0], 0.0);
  for (std::size_t j = 1; j < y.size(); ++j) theta[j] = std::max(y[j] - y[j - 1], 0.0);
  return theta;
}

// Projected L-BFGS on theta >= 0: variables held at the bound by the gradient
// are frozen for the step, and trial points are clipped back onto the bound.
Eigen::VectorXd projected_quasi_newton(const CalibrationObjective& f, Eigen::VectorXd theta) {
  const Eigen::Index n = theta.size();
  Eigen::VectorXd grad(n);
  double value = f(theta, grad);
  std::deque<Eigen::VectorXd> s_hist, y_hist;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (theta[i] <= 0.0 && grad[i] > 0.0) free[i] = 0.0;
    }
    const Eigen::VectorXd pg = grad.cwiseProduct(free);
    if (pg.lpNorm<Eigen::Infinity>() < 1e-10) break;

    Eigen::VectorXd dir = -pg;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
      rho[i] = 1.0 / s_hist[i].dot(y_hist[i]);
      alpha[i] = rho[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (m > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }
    dir = dir.cwiseProduct(free);
    if (!(dir.dot(pg) < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      dir = -pg;
    }

    double step = m == 0 ? 1.0 / std::max(1.0, pg.norm()) : 1.0;
    Eigen::VectorXd next, next_grad(n);
    double next_value = value;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      next = (theta + step * dir).cwiseMax(0.0);
      next_value = f(next, next_grad);
      if (std::isfinite(next_value) && next_value <= value + 1e-4 * grad.dot(next - theta)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s = next - theta;
    Eigen::VectorXd y = next_grad - grad;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (static_cast<int>(s_hist.size()) > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double previous = value;
    theta = std::move(next);
    grad = next_grad;
    value = next_value;
    if (previous - value <= 1e-13 * std::max(1.0, std::abs(value))) break;
  }
  return theta;
}

}  // namespace

MonotoneCalibration identity_calibration(const std::vector<std::vector<double>>& preds, int n_knots) {
  MonotoneCalibration calib;
  calib.knots_x = rank_quantile_knots(preds, n_knots);
  for (double x : calib.knots_x) calib.knots_y.push_back(std::max(x, 0.0));
  return calib;
}

MonotoneCalibration fit_calibration(const std::vector<std::vector<double>>& preds,
                                    const std::vector<std::vector<int>>& counts, int n_knots) {
  if (preds.empty() || preds.size() != counts.size()) {
    throw DataError("calibration: need matching per-cell predictions and counts");
  }
  const MonotoneCalibration identity = identity_calibration(preds, n_knots);
  const std::size_t n = identity.knots_x.size();
  CalibrationObjective objective(identity.knots_x, preds, counts);

  Eigen::VectorXd grad;
  Eigen::VectorXd start = theta_from_knots(identity.knots_y);
  if (n == 1) {
    // Constant pooled predictions: the best constant is the mean cell rate.
    start[0] = 1.0;
  }
  const double identity_value = objective(theta_from_knots(identity.knots_y), grad);
  const Eigen::VectorXd theta = projected_quasi_newton(objective, start);
  const double fitted_value = objective(theta, grad);

  if (n > 1 && !(fitted_value <= identity_value)) return identity;
  MonotoneCalibration calib;
  calib.knots_x = identity.knots_x;
  const Eigen::VectorXd y = objective.knot_values(theta);
  calib.knots_y.assign(y.data(), y.data() + y.size());
  return calib;
}

}  // namespace spikeforge
