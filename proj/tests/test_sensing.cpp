#include <gtest/gtest.h>

#include <vsnet/error.hpp>
#include <vsnet/sensing.hpp>

using namespace vsnet;

namespace {

Mat stacked_h(const EstimationTask& t) {
  Mat h(static_cast<Eigen::Index>(t.models.size()) * t.models[0].h.rows(), t.dim());
  for (std::size_t i = 0; i < t.models.size(); ++i)
    h.middleRows(static_cast<Eigen::Index>(i) * t.models[i].h.rows(), t.models[i].h.rows()) = t.models[i].h;
  return h;
}

Vec stacked_y(const EstimationTask& t) {
  Vec y(static_cast<Eigen::Index>(t.models.size()) * t.models[0].y.size());
  for (std::size_t i = 0; i < t.models.size(); ++i)
    y.segment(static_cast<Eigen::Index>(i) * t.models[i].y.size(), t.models[i].y.size()) = t.models[i].y;
  return y;
}

} // namespace

TEST(Task, NoiselessMeasurementsAreExact) {
  const auto t = generate_estimation_task(4, 7, 3, 0.0, 1);
  for (const auto& m : t.models)
    EXPECT_EQ((m.y - m.h * t.theta_true).norm(), 0.0);
}

TEST(Task, Deterministic) {
  const auto a = generate_estimation_task(3, 10, 4, 0.1, 9);
  const auto b = generate_estimation_task(3, 10, 4, 0.1, 9);
  EXPECT_EQ(a.theta_true, b.theta_true);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.models[i].h, b.models[i].h);
    EXPECT_EQ(a.models[i].y, b.models[i].y);
  }
}

TEST(Task, NoiseVariance) {
  const auto t = generate_estimation_task(3, 100, 5, 0.1, 17);
  const Vec r = stacked_y(t) - stacked_h(t) * t.theta_true;
  const double var = r.squaredNorm() / static_cast<double>(r.size());
  EXPECT_NEAR(var, 0.01, 0.2 * 0.01);
}

TEST(Task, InvalidDimensions) {
  EXPECT_THROW(generate_estimation_task(0, 5, 2, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(generate_estimation_task(3, 0, 2, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(generate_estimation_task(3, 5, 0, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(generate_estimation_task(3, 5, 2, -0.1, 1), std::invalid_argument);
}

TEST(CentralizedLs, IdentityBlocks) {
  EstimationTask t;
  t.theta_true = Vec::LinSpaced(4, -1.0, 2.0);
  for (int i = 0; i < 3; ++i)
    t.models.push_back({i, Mat::Identity(4, 4), t.theta_true, 0.0});
  EXPECT_LT((centralized_ls(t) - t.theta_true).norm(), 1e-14);
}

TEST(CentralizedLs, SquareInvertible) {
  auto t = generate_estimation_task(5, 5, 1, 0.0, 3);
  const Vec direct = t.models[0].h.partialPivLu().solve(t.models[0].y);
  EXPECT_LT((centralized_ls(t) - direct).norm(), 1e-9 * direct.norm());
}

TEST(CentralizedLs, NormalEquationResidual) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto t = generate_estimation_task(5, 20, 4, 0.5, seed);
    const Mat h = stacked_h(t);
    const Vec y = stacked_y(t);
    const Vec th = centralized_ls(t);
    EXPECT_LE((h.transpose() * (y - h * th)).norm(), 1e-8 * (h.transpose() * y).norm());
  }
}

// Any perturbation of the solution increases the stacked squared residual.
TEST(CentralizedLs, IsLocalMinimum) {
  const auto t = generate_estimation_task(4, 12, 3, 0.3, 21);
  const Mat h = stacked_h(t);
  const Vec y = stacked_y(t);
  const Vec th = centralized_ls(t);
  const double best = (y - h * th).squaredNorm();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1e-3);
  for (int k = 0; k < 50; ++k) {
    Vec d(4);
    for (int c = 0; c < 4; ++c)
      d[c] = g(rng);
    EXPECT_GT((y - h * (th + d)).squaredNorm(), best);
  }
}

TEST(CentralizedLs, RankDeficient) {
  EstimationTask t;
  t.theta_true = Vec::Zero(3);
  Mat h = Mat::Zero(4, 3);
  h.col(0).setOnes();
  h.col(1).setOnes();
  h(0, 2) = 1.0;
  t.models.push_back({0, h, Vec::Ones(4), 0.0});
  EXPECT_THROW(centralized_ls(t), singular_system);
}

TEST(Mse, Examples) {
  const Vec a = Vec::LinSpaced(3, 1.0, 3.0);
  EXPECT_EQ(mse(a, a), 0.0);
  Vec e(2), z = Vec::Zero(2);
  e << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(mse(e, z), 12.5);
  EXPECT_THROW(mse(e, a), std::invalid_argument);
}
