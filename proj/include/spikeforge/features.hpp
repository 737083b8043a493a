#pragma once

#include <Eigen/Dense>
#include <span>

namespace spikeforge {

struct PcaBasis {
  Eigen::VectorXd mean;
  // n_kept x window length, orthonormal rows.
  Eigen::MatrixXd components;
  Eigen::VectorXd explained_variance;
  double variance_fraction_kept = 0.0;

  Eigen::Index n_kept() const { return components.rows(); }
  Eigen::Index window_length() const { return mean.size(); }
};

// One projected window per time bin.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  double bin_rate_hz = 100.0;
  double window_ms = 1000.0;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index dims() const { return values.cols(); }
};

// Window length in bins for a window of `window_ms` at `bin_rate_hz`.
int window_bins(double window_ms, double bin_rate_hz = 100.0);

// Row t holds fluor[t - L/2, t - L/2 + L) with edge replication.
Eigen::MatrixXd extract_windows(std::span<const double> fluor, double window_ms = 1000.0,
                                double bin_rate_hz = 100.0);

// Streaming mean/scatter of window rows, merged with Chan's update so that
// many cells can be pooled without materializing all windows at once.
class WindowMoments {
 public:
  explicit WindowMoments(Eigen::Index dim = 0);

  void add(const Eigen::MatrixXd& windows);
  WindowMoments& operator+=(const WindowMoments& other);

  Eigen::Index dim() const { return mean_.size(); }
  double count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  // Sum of outer products of centered rows.
  const Eigen::MatrixXd& scatter() const { return scatter_; }

 private:
  double count_ = 0.0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scatter_;
};

PcaBasis fit_pca(const Eigen::MatrixXd& windows, double variance_threshold = 0.95);
PcaBasis fit_pca(const WindowMoments& moments, double variance_threshold = 0.95);

FeatureMatrix project(const PcaBasis& basis, const Eigen::MatrixXd& windows,
                      double bin_rate_hz = 100.0, double window_ms = 1000.0);

Eigen::MatrixXd reconstruct(const PcaBasis& basis, const Eigen::MatrixXd& features);

}  // namespace spikeforge
