#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ardiff/scorelearn.hpp"
#include "ardiff/scorenet.hpp"
#include "helpers.hpp"

using namespace ardiff;

namespace {

Gaussian g1(double m, double v) { return Gaussian(Vector::Constant(1, m), Matrix::Constant(1, 1, v)); }

// scalar loss of the network output against a fixed target, for FD checks
double net_loss(const ScoreNet& net, const Vector& in, const Vector& target) {
  ScoreNet::Tape tape;
  return 0.5 * (net.forward(in, tape) - target).squaredNorm();
}

}  // namespace

TEST(ScoreNet, ParameterCount) {
  const ScoreNet net(2, 3, {8, 5}, SeedPath(1));
  // input = y(2) + time(3) + cond(3) + fill flag(1)
  ASSERT_EQ(net.input_dim(), 9);
  EXPECT_EQ(net.num_params(), (9 + 1) * 8 + (8 + 1) * 5 + (5 + 1) * 2);
  const ScoreNet plain(1, 0, {4}, SeedPath(1));
  EXPECT_EQ(plain.input_dim(), 4);
  EXPECT_EQ(plain.num_params(), 5 * 4 + 5 * 1);
}

TEST(ScoreNet, BackpropMatchesFiniteDifferences) {
  NoiseStream rng(SeedPath(2));
  const std::vector<std::pair<int, std::vector<int>>> shapes{{1, {8, 8}}, {2, {5}}, {3, {4, 6, 3}}};
  for (const auto& [dim, hidden] : shapes) {
    ScoreNet net(dim, 2, hidden, SeedPath(3 + static_cast<std::uint64_t>(dim)));
    const Vector in = rng.normal_vector(net.input_dim());
    const Vector target = rng.normal_vector(dim);
    ScoreNet::Tape tape;
    const Vector out = net.forward(in, tape);
    Vector grad = Vector::Zero(net.num_params());
    net.backward(tape, out - target, grad);
    const double h = 1e-6;
    double worst = 0.0;
    for (int p = 0; p < net.num_params(); ++p) {
      const double keep = net.params()[p];
      net.params()[p] = keep + h;
      const double up = net_loss(net, in, target);
      net.params()[p] = keep - h;
      const double dn = net_loss(net, in, target);
      net.params()[p] = keep;
      const double fd = (up - dn) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[p]) / std::max(std::abs(fd), 1e-3));
    }
    EXPECT_LT(worst, 1e-5) << "dim " << dim;
  }
}

TEST(ScoreNet, ScoreIsScaledNoise) {
  const ScoreNet net(2, 0, {6}, SeedPath(4));
  const Vector y = Eigen::Vector2d(0.3, -0.7);
  const double t = 0.4;
  EXPECT_LT((net.score(y, t, Condition::none()) +
             net.predict_noise(y, t, Condition::none()) / std::sqrt(1 - std::exp(-2 * t)))
                .norm(),
            1e-14);
}

TEST(ScoreNet, ConditionFillDistinguishesEmptyPrefix) {
  const ScoreNet net(1, 2, {4}, SeedPath(5));
  const Vector f0 = net.features(Vector::Zero(1), 0.5, Condition::none());
  const Vector f1 = net.features(Vector::Zero(1), 0.5, Condition(Vector::Zero(1)));
  EXPECT_NE(f0, f1);
  EXPECT_THROW(net.features(Vector::Zero(1), 0.5, Condition(Vector::Zero(3))), ValidationError);
}

TEST(TimeDistribution, Examples) {
  EXPECT_EQ(time_distribution(uniform_schedule(2.0, 1)), Vector::Ones(1));
  const auto s = build_schedule(2.0, 0.5, 0.25, 1.0);
  const Vector p = time_distribution(s);
  Vector want(s.R);
  for (int r = 0; r < s.R; ++r) want[r] = 1 - std::exp(-2 * (2.0 - s.t[static_cast<std::size_t>(r)]));
  want /= want.sum();
  EXPECT_LT((p - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  // distinct forward times give a non-uniform law
  EXPECT_GT(p.maxCoeff() - p.minCoeff(), 0.1);
  EXPECT_EQ(time_weights(s, TimeSampling::kUniform), Vector::Constant(s.R, 1.0 / s.R));
}

TEST(DsmLoss, ZeroNetworkGivesDimension) {
  ScoreNet net(2, 0, {4}, SeedPath(6));
  net.params().setZero();
  const auto target = testutil::two_mixture_2d();
  const auto sched = build_schedule(3.0, 0.1, 0.1, 2.0);
  const int batch = 4000;
  const auto lg = dsm_loss(net, mixture_sampler(target), make_layout({2}), sched, {batch, SeedPath(7)});
  // |xi|^2 ~ chi^2_2, variance 4
  EXPECT_NEAR(lg.loss, 2.0, 3 * std::sqrt(4.0 / batch));
}

TEST(DsmLoss, GradientMatchesFiniteDifferences) {
  ScoreNet net(1, 1, {5, 4}, SeedPath(8));
  const auto target = testutil::causal(0.5);
  const auto sched = build_schedule(2.0, 0.2, 0.05, 3.0);
  const DsmSettings st{16, SeedPath(9), TimeSampling::kReweighted};
  const auto data = mixture_sampler(GaussianMixture(target));
  const auto layout = make_layout({1, 1});
  const auto lg = dsm_loss(net, data, layout, sched, st);
  NoiseStream pick(SeedPath(10));
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int p = static_cast<int>(pick.next_u64() % static_cast<std::uint64_t>(net.num_params()));
    const double keep = net.params()[p];
    net.params()[p] = keep + h;
    const double up = dsm_loss(net, data, layout, sched, st).loss;
    net.params()[p] = keep - h;
    const double dn = dsm_loss(net, data, layout, sched, st).loss;
    net.params()[p] = keep;
    const double fd = (up - dn) / (2 * h);
    worst = std::max(worst, std::abs(fd - lg.grad[p]) / std::max(std::abs(fd), 1e-4));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(DsmLoss, OracleReachesIrreducibleConstant) {
  const Gaussian target = testutil::causal(0.5);
  const auto layout = make_layout({1, 1});
  const auto sched = build_schedule(3.0, 0.1, 0.05, 3.0);
  const auto oracle1 = conditional_oracle(GaussianMixture(target), layout, 1);
  const auto oracle2 = conditional_oracle(GaussianMixture(target), layout, 2);
  struct Stagewise final : ScoreSource {
    std::shared_ptr<OracleScore> a, b;
    int patch_dim() const override { return 1; }
    Vector score(const Vector& y, double t, const Condition& z, StepTag tag) const override {
      return tag.stage == 1 ? a->score(y, t, z, tag) : b->score(y, t, z, tag);
    }
  } src;
  src.a = oracle1;
  src.b = oracle2;
  const int batch = 40000;
  const double loss = dsm_loss_source(src, mixture_sampler(GaussianMixture(target)), layout, sched,
                                      {batch, SeedPath(11)});
  const double c = dsm_irreducible_constant(target, layout, sched);
  EXPECT_NEAR(loss, c, 3 * std::sqrt(2.0 / batch));

  const double sm = sm_loss(src, {oracle1, oracle2}, mixture_sampler(GaussianMixture(target)), layout, sched,
                            {64, SeedPath(12), true});
  EXPECT_LT(sm, 1e-20);
}

TEST(SmLoss, ConstantBiasValues) {
  const auto target = GaussianMixture(g1(0.5, 2.0));
  const auto layout = make_layout({1});
  const auto sched = build_schedule(3.0, 0.1, 0.1, 1.0);
  const auto oracle = conditional_oracle(target, layout, 1);
  const auto biased = perturb(oracle, 0.2, PerturbMode::kConstantBias, 4);
  const double plain = sm_loss(*biased, {oracle}, mixture_sampler(target), layout, sched, {32, SeedPath(1), false});
  EXPECT_NEAR(plain, 0.04, 1e-14);
  double mean_w = 0.0;
  for (int r = 0; r < sched.R; ++r) mean_w += 1 - std::exp(-2 * sched.forward_time(r));
  mean_w /= sched.R;
  const double weighted = sm_loss(*biased, {oracle}, mixture_sampler(target), layout, sched, {32, SeedPath(1), true});
  EXPECT_NEAR(weighted, 0.04 * mean_w, 1e-14);
}

TEST(LinearFamily, OracleIsStationaryAtSingleTime) {
  for (auto [mu, var, tau] : {std::tuple{0.0, 1.0, 0.5}, {1.5, 0.3, 0.2}, {-2.0, 4.0, 1.3}}) {
    const auto sched = uniform_schedule(tau, 1);
    const double vt = std::exp(-2 * tau) * var + 1 - std::exp(-2 * tau);
    LinearScoreProblem pb{mu, var, Eigen::Vector2d(-1 / vt, std::exp(-tau) * mu / vt)};
    const auto rep = grad_equivalence_check(pb, sched);
    EXPECT_LT(rep.losses.grad_dsm.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(rep.losses.grad_sm.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(rep.losses.sm, 1e-10);
    const Eigen::Vector2d arg = dsm_linear_argmin(mu, var, tau);
    EXPECT_NEAR(arg[0], pb.theta[0], 1e-6);
    EXPECT_NEAR(arg[1], pb.theta[1], 1e-6);
  }
}

TEST(LinearFamily, GradientsAgreeAtRandomTheta) {
  NoiseStream rng(SeedPath(13));
  const auto sched = build_schedule(3.0, 0.2, 0.1, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    LinearScoreProblem pb{rng.normal(), 0.2 + rng.uniform(), Eigen::Vector2d(rng.normal(), rng.normal())};
    worst = std::max(worst, grad_equivalence_check(pb, sched).max_abs_diff);
  }
  EXPECT_LT(worst, 1e-7);
}

TEST(LinearFamily, LossDifferenceIsThetaIndependent) {
  const auto sched = build_schedule(3.0, 0.2, 0.1, 1.0);
  const double h = 1e-4;
  NoiseStream rng(SeedPath(14));
  LinearScoreProblem pb{0.7, 1.4, Eigen::Vector2d(rng.normal(), rng.normal())};
  auto gap = [&](const Eigen::Vector2d& th) {
    auto q = pb;
    q.theta = th;
    const auto l = linear_family_losses(q, sched);
    return l.dsm - l.sm;
  };
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e[j] = h;
    EXPECT_LT(std::abs((gap(pb.theta + e) - gap(pb.theta - e)) / (2 * h)), 1e-8);
  }
}

TEST(LinearFamily, PerSliceRelation) {
  // DSM = (1 - e^{-2t}) (SM' + C') at a single time, with SM' the unweighted
  // residual and C' fixed by the target
  const double tau = 0.6, mu = 0.4, var = 1.7;
  const auto sched = uniform_schedule(tau, 1);
  const double w = 1 - std::exp(-2 * tau);
  double c_prime = 0.0;
  for (int i = 0; i < 3; ++i) {
    LinearScoreProblem pb{mu, var, Eigen::Vector2d(-0.5 + 0.3 * i, 0.1 * i)};
    const auto l = linear_family_losses(pb, sched);
    const double c = l.dsm / w - l.sm / w;
    if (i == 0) c_prime = c;
    EXPECT_NEAR(c, c_prime, 1e-8);
  }
}

TEST(Train, DeterministicAndDecreasing) {
  const auto target = GaussianMixture(g1(2.0, 0.5));
  const auto sched = uniform_schedule(1.0, 10);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.batch = 32;
  cfg.lr = 3e-3;
  cfg.seed = 15;
  ScoreNet a(1, 0, {8, 8}, SeedPath(16)), b(1, 0, {8, 8}, SeedPath(16));
  const auto ta = train(a, mixture_sampler(target), make_layout({1}), sched, cfg);
  const auto tb = train(b, mixture_sampler(target), make_layout({1}), sched, cfg);
  EXPECT_EQ(ta.losses, tb.losses);
  EXPECT_EQ(a.params(), b.params());
  ASSERT_EQ(ta.steps(), 300);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) {
    head += ta.losses[static_cast<std::size_t>(i)];
    tail += ta.losses[static_cast<std::size_t>(250 + i)];
  }
  EXPECT_LT(tail, head);
}

TEST(Train, DivergenceAbortsWithTrace) {
  const auto target = GaussianMixture(g1(0.0, 1.0));
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.divergence_threshold = 1e-3;  // every loss exceeds this
  ScoreNet net(1, 0, {4}, SeedPath(17));
  try {
    train(net, mixture_sampler(target), make_layout({1}), uniform_schedule(1.0, 4), cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.trace().steps(), 1);
  }
}

TEST(Train, ReweightedAndUniformReachSimilarScores) {
  const auto target = GaussianMixture(g1(1.0, 0.5));
  const auto layout = make_layout({1});
  const auto sched = uniform_schedule(1.0, 10);
  const auto oracle = conditional_oracle(target, layout, 1);
  std::vector<double> finals;
  for (auto sampling : {TimeSampling::kUniform, TimeSampling::kReweighted}) {
    TrainConfig cfg;
    cfg.steps = 1500;
    cfg.batch = 64;
    cfg.lr = 3e-3;
    cfg.seed = 18;
    cfg.sampling = sampling;
    auto net = std::make_shared<ScoreNet>(1, 0, std::vector<int>{8, 8}, SeedPath(19));
    train(*net, mixture_sampler(target), layout, sched, cfg);
    finals.push_back(sm_loss(LearnedScore(net), {oracle}, mixture_sampler(target), layout, sched,
                             {512, SeedPath(20), true}));
  }
  const double ratio = finals[0] / finals[1];
  EXPECT_GE(ratio, 0.5) << finals[0] << " " << finals[1];
  EXPECT_LE(ratio, 2.0) << finals[0] << " " << finals[1];
}

TEST(Train, DatasetSamplerDrawsRows) {
  auto data = std::make_shared<Matrix>(3, 1);
  *data << 1.0, 2.0, 3.0;
  const auto s = dataset_sampler(data);
  NoiseStream rng(SeedPath(21));
  for (int i = 0; i < 50; ++i) {
    const double v = s(rng)[0];
    EXPECT_TRUE(v == 1.0 || v == 2.0 || v == 3.0);
  }
  EXPECT_THROW(dataset_sampler(std::make_shared<Matrix>(0, 1)), ValidationError);
}
