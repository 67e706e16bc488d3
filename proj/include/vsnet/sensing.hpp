#ifndef VSNET_SENSING_HPP
#define VSNET_SENSING_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace vsnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// y = H theta + noise for one virtual sensor.
struct MeasurementModel {
  int sensor = 0;
  Mat h;
  Vec y;
  double sigma = 0.0;
};

struct EstimationTask {
  Vec theta_true;
  std::vector<MeasurementModel> models;

  Eigen::Index dim() const { return theta_true.size(); }
};

/// theta first, then every H_i, then every noise vector. Entries are standard normal.
inline EstimationTask generate_estimation_task(long long n, long long m, long long v_count, double sigma,
                                               std::uint64_t seed) {
  if (n < 1 || m < 1 || v_count < 1)
    throw std::invalid_argument("task dimensions must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("sigma must be finite and >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  EstimationTask t;
  t.theta_true.resize(n);
  for (Eigen::Index k = 0; k < n; ++k)
    t.theta_true[k] = gauss(rng);
  t.models.resize(static_cast<std::size_t>(v_count));
  for (std::size_t i = 0; i < t.models.size(); ++i) {
    auto& mm = t.models[i];
    mm.sensor = static_cast<int>(i);
    mm.sigma = sigma;
    mm.h.resize(m, n);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < n; ++c)
        mm.h(r, c) = gauss(rng);
  }
  for (auto& mm : t.models) {
    mm.y = mm.h * t.theta_true;
    for (Eigen::Index r = 0; r < m; ++r)
      mm.y[r] += sigma * gauss(rng);
  }
  return t;
}

namespace detail {

// LDLT of a symmetric positive semidefinite system; rejects pivots below 1e-10 of the largest.
inline Vec solve_spd(const Mat& a, const Vec& b) {
  Eigen::LDLT<Mat> ldlt(a);
  if (ldlt.info() != Eigen::Success)
    throw singular_system("factorization failed");
  const Vec d = ldlt.vectorD().cwiseAbs();
  if (d.size() == 0 || d.maxCoeff() <= 0.0 || d.minCoeff() < 1e-10 * d.maxCoeff())
    throw singular_system("normal equations are rank deficient");
  return ldlt.solve(b);
}

} // namespace detail

/// Least-squares estimate of the stacked system via its normal equations.
inline Vec centralized_ls(const EstimationTask& task) {
  if (task.models.empty())
    throw std::invalid_argument("task has no measurement models");
  const Eigen::Index n = task.models.front().h.cols();
  Mat a = Mat::Zero(n, n);
  Vec b = Vec::Zero(n);
  for (const auto& mm : task.models) {
    if (mm.h.cols() != n || mm.h.rows() != mm.y.size())
      throw std::invalid_argument("inconsistent measurement model dimensions");
    a.noalias() += mm.h.transpose() * mm.h;
    b.noalias() += mm.h.transpose() * mm.y;
  }
  return detail::solve_spd(a, b);
}

inline double mse(const Vec& estimate, const Vec& truth) {
  if (estimate.size() != truth.size() || truth.size() == 0)
    throw std::invalid_argument("mse needs equal nonzero lengths");
  return (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

} // namespace vsnet

#endif // VSNET_SENSING_HPP
