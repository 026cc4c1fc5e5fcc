#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "ardiff/gauss.hpp"
#include "ardiff/io.hpp"
#include "ardiff/quadrature.hpp"
#include "helpers.hpp"

using namespace ardiff;
using testutil::two_mixture_2d;

namespace {
Gaussian g1(double m, double v) { return Gaussian(Vector::Constant(1, m), Matrix::Constant(1, 1, v)); }
}  // namespace

TEST(Gaussian, RejectsBadCovariances) {
  EXPECT_THROW(g1(0.0, 0.0), ValidationError);
  EXPECT_THROW(g1(0.0, -1.0), ValidationError);
  Matrix asym(2, 2);
  asym << 1.0, 0.3, 0.2, 1.0;
  EXPECT_THROW(Gaussian(Vector::Zero(2), asym), ValidationError);
  EXPECT_THROW(Gaussian(Vector::Zero(3), Matrix::Identity(2, 2)), ValidationError);
}

TEST(Gaussian, LogdetMatchesCholesky) {
  NoiseStream rng(SeedPath(1));
  const Gaussian g(Vector::Zero(4), testutil::random_spd(4, rng));
  EXPECT_NEAR(g.logdet(), 2.0 * g.chol().diagonal().array().log().sum(), 1e-12);
  EXPECT_NEAR(g.logdet(), std::log(g.cov().determinant()), 1e-10);
}

TEST(Mixture, RejectsBadWeights) {
  Vector w(2);
  w << 0.6, 0.6;
  EXPECT_THROW(GaussianMixture(w, {g1(0, 1), g1(1, 1)}), ValidationError);
  w << 1.2, -0.2;
  EXPECT_THROW(GaussianMixture(w, {g1(0, 1), g1(1, 1)}), ValidationError);
}

TEST(LogDensity, Examples) {
  EXPECT_NEAR(log_density(GaussianMixture(Gaussian::standard(1)), Vector::Zero(1)),
              -0.5 * std::log(2 * std::numbers::pi), 1e-15);
  const double a = 1.7;
  const GaussianMixture sym(Vector::Constant(2, 0.5), {g1(-a, 1), g1(a, 1)});
  EXPECT_NEAR(log_density(sym, Vector::Zero(1)), g1(0, 1).log_density(Vector::Constant(1, a)), 1e-14);
}

TEST(LogDensity, IntegratesToOneOnGrid) {
  const auto gm = two_mixture_2d();
  const int n = 401;
  const double h = 16.0 / (n - 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      total += wi * wj * std::exp(log_density(gm, Eigen::Vector2d(-8 + i * h, -8 + j * h)));
    }
  EXPECT_NEAR(total * h * h, 1.0, 1e-6);
}

TEST(Sample, MomentsAndDeterminism) {
  const GaussianMixture g(g1(3.0, 4.0));
  const Matrix x = sample(g, 100000, SeedPath(9));
  const double mean = x.col(0).mean();
  const double var = (x.col(0).array() - mean).square().sum() / (x.rows() - 1);
  EXPECT_NEAR(mean, 3.0, 0.05);
  EXPECT_NEAR(var, 4.0, 0.15);
  const Matrix y = sample(g, 100000, SeedPath(9));
  EXPECT_EQ(std::memcmp(x.data(), y.data(), sizeof(double) * x.size()), 0);
}

TEST(Marginal, Examples) {
  const auto l5 = make_layout({2, 3});
  const auto m = marginal(GaussianMixture(Gaussian::standard(5)), l5, 2, 2);
  EXPECT_TRUE(m.component(0).cov().isApprox(Matrix::Identity(3, 3)));
  Matrix c(2, 2);
  c << 2, 1, 1, 2;
  const auto m1 = marginal(GaussianMixture(Gaussian(Eigen::Vector2d(1, 2), c)), make_layout({1, 1}), 1, 1);
  EXPECT_DOUBLE_EQ(m1.component(0).mean()[0], 1.0);
  EXPECT_DOUBLE_EQ(m1.component(0).cov()(0, 0), 2.0);
}

TEST(Marginal, MatchesGridIntegralOfJoint) {
  const auto gm = two_mixture_2d();
  const auto m = marginal(gm, make_layout({1, 1}), 1, 1);
  const int n = 2001;
  const double h = 24.0 / (n - 1);
  double worst = 0.0;
  for (double x : {-2.0, -0.3, 0.0, 1.1, 2.5}) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      s += w * std::exp(log_density(gm, Eigen::Vector2d(x, -12 + j * h)));
    }
    worst = std::max(worst, std::abs(s * h - std::exp(log_density(m, Vector::Constant(1, x)))));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Conditional, IndependentBlocks) {
  Matrix c = Matrix::Zero(3, 3);
  c(0, 0) = 2.0;
  c.bottomRightCorner(2, 2) << 1.0, 0.3, 0.3, 0.7;
  const Gaussian g(Eigen::Vector3d(1, 2, 3), c);
  const auto layout = make_layout({1, 2});
  for (double z : {-5.0, 0.0, 4.0}) {
    const auto cond = conditional(GaussianMixture(g), layout, 2, Condition(Vector::Constant(1, z)));
    EXPECT_TRUE(cond.component(0).mean().isApprox(Eigen::Vector2d(2, 3)));
    EXPECT_TRUE(cond.component(0).cov().isApprox(c.bottomRightCorner(2, 2)));
  }
}

TEST(Conditional, CausalPreset) {
  const double s2 = 0.49, c = 1.3;
  const auto cond = conditional(GaussianMixture(testutil::causal(s2)), make_layout({1, 1}), 2,
                                Condition(Vector::Constant(1, c)));
  EXPECT_NEAR(cond.component(0).mean()[0], c, 1e-14);
  EXPECT_NEAR(cond.component(0).cov()(0, 0), s2, 1e-14);
}

TEST(Conditional, BayesRulePointwise) {
  const auto gm = two_mixture_2d();
  const auto layout = make_layout({1, 1});
  const auto m = marginal(gm, layout, 1, 1);
  double worst = 0.0;
  for (double x : {-2.0, 0.0, 0.7, 2.0})
    for (double y : {-1.5, 0.0, 1.0, 2.5}) {
      const auto cond = conditional(gm, layout, 2, Condition(Vector::Constant(1, x)));
      const double direct = log_density(cond, Vector::Constant(1, y));
      const double bayes = log_density(gm, Eigen::Vector2d(x, y)) - log_density(m, Vector::Constant(1, x));
      worst = std::max(worst, std::abs(std::exp(direct - bayes) - 1.0));
    }
  EXPECT_LT(worst, 1e-8);
}

TEST(Kl, ClosedFormExamples) {
  EXPECT_NEAR(kl_gaussian(Gaussian::standard(3), Gaussian::standard(3)), 0.0, 1e-15);
  const Vector mu = Eigen::Vector3d(1.0, -2.0, 0.5);
  EXPECT_NEAR(kl_gaussian(Gaussian(mu, Matrix::Identity(3, 3)), Gaussian::standard(3)),
              mu.squaredNorm() / 2, 1e-14);
  EXPECT_NEAR(kl_gaussian(g1(0, 2), g1(0, 1)), 0.5 * (2 - 1 + std::log(0.5)), 1e-15);
  EXPECT_NEAR(kl_gaussian(g1(0, 2), g1(0, 1)), 0.153426, 1e-6);
}

TEST(Kl, MonteCarloCrossEntropy) {
  const Gaussian p = g1(0, 2), q = g1(0, 1);
  const Matrix x = sample(GaussianMixture(p), 1000000, SeedPath(4));
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s += p.log_density(x.row(i)) - q.log_density(x.row(i));
  EXPECT_NEAR(s / x.rows(), kl_gaussian(p, q), 1e-2);
}

TEST(KlMixtureMc, Examples) {
  const auto gm = two_mixture_2d();
  const auto same = kl_mixture_mc(gm, gm, 5000, SeedPath(1));
  EXPECT_LE(std::abs(same.estimate), 3 * same.std_error + 1e-12);

  Matrix c(2, 2);
  c << 1.0, 0.2, 0.2, 0.5;
  const Gaussian p(Eigen::Vector2d(0.5, 0.0), c), q(Eigen::Vector2d(0.0, 0.3), Matrix::Identity(2, 2));
  const auto mc = kl_mixture_mc(p, q, 20000, SeedPath(2));
  EXPECT_LE(std::abs(mc.estimate - kl_gaussian(p, q)), 3 * mc.std_error);

  Vector w(2);
  w << 0.6, 0.4;
  const GaussianMixture shifted(w, gm.components());
  const auto pos = kl_mixture_mc(gm, shifted, 20000, SeedPath(3));
  EXPECT_GT(pos.estimate, 3 * pos.std_error);
  EXPECT_THROW(kl_mixture_mc(gm, gm, 50, SeedPath(1)), ValidationError);
}

TEST(MomentReport, SingleGaussians) {
  const auto r = moment_report(GaussianMixture(Gaussian::standard(3)), 3.0);
  EXPECT_NEAR(r.second_moment, 3.0, 1e-14);
  EXPECT_NEAR(r.lipschitz_bound, 1.0, 1e-12);
  EXPECT_FALSE(r.lipschitz_is_estimate);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4.0, 1.0;
  const Vector mu = Eigen::Vector2d(1.0, 2.0);
  const auto r2 = moment_report(GaussianMixture(Gaussian(mu, d)), 3.0);
  EXPECT_NEAR(r2.lipschitz_bound, 1.0, 1e-12);
  EXPECT_NEAR(r2.second_moment, mu.squaredNorm() + 5.0, 1e-12);
}

TEST(MomentReport, MixtureSupNotExceededAtFreshPoints) {
  const auto gm = two_mixture_2d();
  const double radius = 4.0;
  const auto r = moment_report(gm, radius, 10000, SeedPath(5));
  EXPECT_TRUE(r.lipschitz_is_estimate);
  EXPECT_TRUE(std::isfinite(r.grad_bound) && r.grad_bound >= 0.0);
  NoiseStream rng(SeedPath(77));
  const double h = 1e-4;
  for (int i = 0; i < 1000; ++i) {
    const Vector y = (i % 2 == 0) ? sample_one(gm, rng)
                                  : Vector(radius * (2.0 * Eigen::Array2d(rng.uniform(), rng.uniform()) - 1.0));
    Matrix H(2, 2);
    for (int j = 0; j < 2; ++j) {
      Vector e = Vector::Zero(2);
      e[j] = h;
      H.col(j) = (grad_log_density(gm, y + e) - grad_log_density(gm, y - e)) / (2 * h);
    }
    ASSERT_LE(symmetric_norm(0.5 * (H + H.transpose())), r.lipschitz_bound * (1 + 1e-6)) << i;
  }
}

TEST(Properties, KlChainRule) {
  NoiseStream rng(SeedPath(12));
  const auto layout = make_layout({1, 2});
  for (int trial = 0; trial < 5; ++trial) {
    const Gaussian p(rng.normal_vector(3), testutil::random_spd(3, rng));
    const Gaussian q(rng.normal_vector(3), testutil::random_spd(3, rng));
    const Gaussian p1(p.mean().head(1), p.cov().topLeftCorner(1, 1));
    const Gaussian q1(q.mean().head(1), q.cov().topLeftCorner(1, 1));
    const ConditionalFamily fp(GaussianMixture(p), layout, 2), fq(GaussianMixture(q), layout, 2);
    const double cond = expect_gaussian(p1.mean(), p1.cov(), 20, [&](const Vector& x) {
      return kl_gaussian(Gaussian(fp.gain(0) * x + fp.offset(0), fp.cond_cov(0)),
                         Gaussian(fq.gain(0) * x + fq.offset(0), fq.cond_cov(0)));
    });
    EXPECT_NEAR(kl_gaussian(p, q), kl_gaussian(p1, q1) + cond, 1e-6);
  }
}

TEST(Properties, MarginalSmoothness) {
  NoiseStream rng(SeedPath(13));
  const auto layout = make_layout({1, 2, 1, 2});
  for (int trial = 0; trial < 20; ++trial) {
    const Gaussian g(Vector::Zero(6), testutil::random_spd(6, rng, 0.05));
    const double L = g.max_precision_eigenvalue();
    for (int k = 1; k <= 4; ++k) {
      const int n = layout.index_range(1, k).end;
      const Gaussian pre(Vector::Zero(n), g.cov().topLeftCorner(n, n));
      EXPECT_LE(pre.max_precision_eigenvalue(), 2.0 * L);
      EXPECT_LE(pre.max_precision_eigenvalue(), L * (1 + 1e-10));
    }
  }
}

TEST(Properties, ScoreNormBound) {
  NoiseStream rng(SeedPath(14));
  for (int trial = 0; trial < 10; ++trial) {
    const Gaussian g(rng.normal_vector(4), testutil::random_spd(4, rng));
    // E|grad log p|^2 = tr(Sigma^-1)
    EXPECT_LE(g.precision().trace(), g.max_precision_eigenvalue() * 4 * (1 + 1e-12));
  }
}

TEST(Json, MixtureRoundTripIsExact) {
  const auto gm = two_mixture_2d();
  const auto back = io::mixture_from_json(io::json::parse(io::to_json(gm).dump()));
  ASSERT_EQ(back.size(), gm.size());
  EXPECT_EQ(back.weights(), gm.weights());
  for (int i = 0; i < gm.size(); ++i) {
    EXPECT_EQ(back.component(i).mean(), gm.component(i).mean());
    EXPECT_EQ(back.component(i).cov(), gm.component(i).cov());
  }
}
