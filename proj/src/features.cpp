#include "spikeforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spikeforge/error.hpp"

namespace spikeforge {

int window_bins(double window_ms, double bin_rate_hz) {
  const auto bins = static_cast<int>(std::lround(window_ms * bin_rate_hz / 1000.0));
  if (bins < 1) throw UsageError("window must span at least one bin");
  return bins;
}

Eigen::MatrixXd extract_windows(std::span<const double> fluor, double window_ms,
                                double bin_rate_hz) {
  if (fluor.empty()) throw DataError("extract_windows: empty trace");
  const int len = window_bins(window_ms, bin_rate_hz);
  const auto n = static_cast<Eigen::Index>(fluor.size());
  const Eigen::Index offset = len / 2;
  Eigen::MatrixXd out(n, len);
  for (Eigen::Index j = 0; j < len; ++j) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t - offset + j, 0, n - 1);
      out(t, j) = fluor[src];
    }
  }
  return out;
}

WindowMoments::WindowMoments(Eigen::Index dim)
    : mean_(Eigen::VectorXd::Zero(dim)), scatter_(Eigen::MatrixXd::Zero(dim, dim)) {}

void WindowMoments::add(const Eigen::MatrixXd& windows) {
  if (windows.rows() == 0) return;
  WindowMoments chunk;
  chunk.count_ = static_cast<double>(windows.rows());
  chunk.mean_ = windows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = windows.rowwise() - chunk.mean_.transpose();
  chunk.scatter_ = centered.transpose() * centered;
  *this += chunk;
}

WindowMoments& WindowMoments::operator+=(const WindowMoments& other) {
  if (other.count_ == 0.0) return *this;
  if (count_ == 0.0) {
    *this = other;
    return *this;
  }
  if (other.dim() != dim()) throw DataError("WindowMoments: dimension mismatch");
  const double total = count_ + other.count_;
  const Eigen::VectorXd delta = other.mean_ - mean_;
  scatter_ += other.scatter_ + (count_ * other.count_ / total) * delta * delta.transpose();
  mean_ += (other.count_ / total) * delta;
  count_ = total;
  return *this;
}

namespace {

PcaBasis basis_from_scatter(const Eigen::VectorXd& mean, const Eigen::MatrixXd& scatter,
                            double count, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw UsageError("fit_pca: variance threshold must lie in (0, 1]");
  }
  if (count < 2.0) throw DataError("fit_pca: need at least 2 windows");
  const Eigen::MatrixXd cov = scatter / (count - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("fit_pca: eigendecomposition failed");

  // Eigen returns ascending order.
  const Eigen::VectorXd values = solver.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double total = values.sum();
  if (!(total > 0.0)) throw DataError("fit_pca: zero total variance");

  Eigen::Index kept = 0;
  double mass = 0.0;
  while (kept < values.size()) {
    mass += values[kept++];
    if (mass >= threshold * total * (1.0 - 1e-12)) break;
  }

  PcaBasis basis;
  basis.mean = mean;
  basis.components = vectors.leftCols(kept).transpose();
  for (Eigen::Index r = 0; r < kept; ++r) {
    Eigen::Index arg = 0;
    basis.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (basis.components(r, arg) < 0.0) basis.components.row(r) *= -1.0;
  }
  basis.explained_variance = values.head(kept);
  basis.variance_fraction_kept = std::min(1.0, mass / total);
  return basis;
}

}  // namespace

PcaBasis fit_pca(const Eigen::MatrixXd& windows, double variance_threshold) {
  if (windows.rows() < 2) throw DataError("fit_pca: need at least 2 windows");
  const Eigen::VectorXd mean = windows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = windows.rowwise() - mean.transpose();
  return basis_from_scatter(mean, centered.transpose() * centered,
                            static_cast<double>(windows.rows()), variance_threshold);
}

PcaBasis fit_pca(const WindowMoments& moments, double variance_threshold) {
  return basis_from_scatter(moments.mean(), moments.scatter(), moments.count(),
                            variance_threshold);
}

FeatureMatrix project(const PcaBasis& basis, const Eigen::MatrixXd& windows, double bin_rate_hz,
                      double window_ms) {
  if (windows.cols() != basis.window_length()) {
    throw DataError("project: window length " + std::to_string(windows.cols()) +
                    " does not match basis length " + std::to_string(basis.window_length()));
  }
  FeatureMatrix out;
  out.values = (windows.rowwise() - basis.mean.transpose()) * basis.components.transpose();
  out.bin_rate_hz = bin_rate_hz;
  out.window_ms = window_ms;
  return out;
}

Eigen::MatrixXd reconstruct(const PcaBasis& basis, const Eigen::MatrixXd& features) {
  if (features.cols() != basis.n_kept()) throw DataError("reconstruct: dimension mismatch");
  return (features * basis.components).rowwise() + basis.mean.transpose();
}

}  // namespace spikeforge
