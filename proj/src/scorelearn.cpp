#include "ardiff/scorelearn.hpp"

#include <cmath>
#include <string>

#include "ardiff/quadrature.hpp"

namespace ardiff {

Vector time_distribution(const TimeSchedule& schedule) {
  require(schedule.R >= 1, "time_distribution: schedule has no steps");
  Vector w(schedule.R);
  for (int r = 0; r < schedule.R; ++r) w[r] = -std::expm1(-2.0 * schedule.forward_time(r));
  return w / w.sum();
}

Vector time_weights(const TimeSchedule& schedule, TimeSampling sampling) {
  if (sampling == TimeSampling::kReweighted) return time_distribution(schedule);
  require(schedule.R >= 1, "time_weights: schedule has no steps");
  return Vector::Constant(schedule.R, 1.0 / schedule.R);
}

DataSampler mixture_sampler(const GaussianMixture& target) {
  return [target](NoiseStream& s) { return sample_one(target, s); };
}

DataSampler dataset_sampler(std::shared_ptr<const Matrix> data) {
  require(data && data->rows() >= 1, "dataset_sampler: empty dataset");
  return [data](NoiseStream& s) -> Vector {
    const auto n = static_cast<std::uint64_t>(data->rows());
    return data->row(static_cast<Eigen::Index>(s.next_u64() % n)).transpose();
  };
}

namespace {

struct DsmDraw {
  int k = 1;
  int r = 0;
  double tau = 0.0;
  double sigma = 0.0;
  Vector xi;
  Vector y;
  Condition z;
};

DsmDraw draw(const DataSampler& data, const PatchLayout& layout, const TimeSchedule& schedule,
             const Vector& weights, NoiseStream& stream) {
  const Vector x = data(stream);
  require(x.size() == layout.total_dim(), "training sample has wrong dimension");
  DsmDraw d;
  const int K = layout.num_patches();
  d.k = 1 + static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(K));
  d.r = stream.categorical(weights);
  d.tau = schedule.forward_time(d.r);
  d.sigma = std::sqrt(-std::expm1(-2.0 * d.tau));
  const auto range = layout.index_range(d.k, d.k);
  d.xi = stream.normal_vector(range.size());
  d.y = std::exp(-d.tau) * x.segment(range.begin, range.size()) + d.sigma * d.xi;
  d.z = d.k == 1 ? Condition::none() : Condition(x.head(layout.prefix(d.k).size()));
  return d;
}

void check_model(const ScoreNet& model, const PatchLayout& layout) {
  for (int k = 1; k <= layout.num_patches(); ++k) {
    require(layout.patch_dim(k) == model.y_dim(),
            "ScoreNet shares one network across stages; patch " + std::to_string(k) +
                " has dimension " + std::to_string(layout.patch_dim(k)) + ", network expects " +
                std::to_string(model.y_dim()));
  }
  require(model.cond_width() >= layout.prefix(layout.num_patches()).size(),
          "ScoreNet condition slot is narrower than the longest prefix");
}

}  // namespace

LossAndGrad dsm_loss(const ScoreNet& model, const DataSampler& data, const PatchLayout& layout,
                     const TimeSchedule& schedule, const DsmSettings& settings) {
  require(settings.batch >= 1, "dsm_loss: batch must be >= 1");
  check_model(model, layout);
  const Vector weights = time_weights(schedule, settings.sampling);
  LossAndGrad out{0.0, Vector::Zero(model.num_params())};
  ScoreNet::Tape tape;
  for (int b = 0; b < settings.batch; ++b) {
    NoiseStream stream(settings.seed.child(static_cast<std::uint64_t>(b)));
    const auto d = draw(data, layout, schedule, weights, stream);
    const Vector pred = model.forward(model.features(d.y, d.tau, d.z), tape);
    const Vector resid = pred - d.xi;
    out.loss += resid.squaredNorm();
    model.backward(tape, 2.0 * resid, out.grad);
  }
  out.loss /= settings.batch;
  out.grad /= settings.batch;
  if (!std::isfinite(out.loss)) throw NumericalError("dsm_loss: non-finite loss");
  return out;
}

double dsm_loss_source(const ScoreSource& source, const DataSampler& data,
                       const PatchLayout& layout, const TimeSchedule& schedule,
                       const DsmSettings& settings) {
  require(settings.batch >= 1, "dsm_loss_source: batch must be >= 1");
  const Vector weights = time_weights(schedule, settings.sampling);
  double total = 0.0;
  for (int b = 0; b < settings.batch; ++b) {
    NoiseStream stream(settings.seed.child(static_cast<std::uint64_t>(b)));
    const auto d = draw(data, layout, schedule, weights, stream);
    const Vector eps_hat = -d.sigma * source.score(d.y, d.tau, d.z, {d.k, d.r});
    total += (d.xi - eps_hat).squaredNorm();
  }
  const double loss = total / settings.batch;
  if (!std::isfinite(loss)) throw NumericalError("dsm_loss_source: non-finite loss");
  return loss;
}

double dsm_irreducible_constant(const Gaussian& target, const PatchLayout& layout,
                                const TimeSchedule& schedule, TimeSampling sampling) {
  const Vector w = time_weights(schedule, sampling);
  double total = 0.0;
  for (int k = 1; k <= layout.num_patches(); ++k) {
    const ConditionalFamily fam(GaussianMixture(target), layout, k);
    const Matrix& s = fam.cond_cov(0);
    const int dk = fam.patch_dim();
    for (int r = 0; r < schedule.R; ++r) {
      const double tau = schedule.forward_time(r);
      const double var = -std::expm1(-2.0 * tau);
      Matrix cov = std::exp(-2.0 * tau) * s;
      cov.diagonal().array() += var;
      const double tr_prec = cov.llt().solve(Matrix::Identity(dk, dk)).trace();
      total += w[r] * (dk - var * tr_prec);
    }
  }
  return total / layout.num_patches();
}

double sm_loss(const ScoreSource& model, const std::vector<std::shared_ptr<OracleScore>>& oracles,
               const DataSampler& data, const PatchLayout& layout, const TimeSchedule& schedule,
               const SmSettings& settings) {
  require(settings.batch >= 1, "sm_loss: batch must be >= 1");
  require(static_cast<int>(oracles.size()) == layout.num_patches(), "sm_loss: need one oracle per patch");
  const int K = layout.num_patches();
  // Average over all (k, r) slices, each estimated from `batch` draws.
  double total = 0.0;
  for (int k = 1; k <= K; ++k) {
    const auto range = layout.index_range(k, k);
    const int p = layout.prefix(k).size();
    for (int r = 0; r < schedule.R; ++r) {
      const double tau = schedule.forward_time(r);
      const double var = -std::expm1(-2.0 * tau);
      double slice = 0.0;
      for (int b = 0; b < settings.batch; ++b) {
        NoiseStream stream(settings.seed.child(
            {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(b)}));
        const Vector x = data(stream);
        const Vector xi = stream.normal_vector(range.size());
        const Vector y = std::exp(-tau) * x.segment(range.begin, range.size()) + std::sqrt(var) * xi;
        const Condition z = k == 1 ? Condition::none() : Condition(x.head(p));
        const StepTag tag{k, r};
        slice += (model.score(y, tau, z, tag) - oracles[k - 1]->score(y, tau, z, tag)).squaredNorm();
      }
      slice /= settings.batch;
      total += settings.weighted ? var * slice : slice;
    }
  }
  const double loss = total / (static_cast<double>(K) * schedule.R);
  if (!std::isfinite(loss)) throw NumericalError("sm_loss: non-finite loss");
  return loss;
}

QuadratureLosses linear_family_losses(const LinearScoreProblem& pb, const TimeSchedule& schedule,
                                      int nodes) {
  require(pb.var > 0.0, "linear family: target variance must be positive");
  require(schedule.R >= 1, "linear family: schedule has no steps");
  const auto rule = gauss_hermite(nodes);
  const double sd = std::sqrt(pb.var);
  QuadratureLosses out;
  for (int r = 0; r < schedule.R; ++r) {
    const double tau = schedule.forward_time(r);
    const double alpha = std::exp(-tau);
    const double var = -std::expm1(-2.0 * tau);
    const double sigma = std::sqrt(var);
    // DSM: E_{eta, xi} (xi + sigma s(y))^2 with y = alpha (mu + sd eta) + sigma xi
    for (int i = 0; i < nodes; ++i) {
      for (int j = 0; j < nodes; ++j) {
        const double w = rule.weights[i] * rule.weights[j];
        const double xi = rule.nodes[j];
        const double y = alpha * (pb.mean + sd * rule.nodes[i]) + sigma * xi;
        const double s = pb.theta[0] * y + pb.theta[1];
        const double e = xi + sigma * s;
        out.dsm += w * e * e;
        out.grad_dsm += w * 2.0 * e * sigma * Eigen::Vector2d(y, 1.0);
      }
    }
    // SM: sigma^2 E_y (s(y) - s*(y))^2 with y ~ N(alpha mu, v_tau)
    const double v_tau = alpha * alpha * pb.var + var;
    for (int i = 0; i < nodes; ++i) {
      const double y = alpha * pb.mean + std::sqrt(v_tau) * rule.nodes[i];
      const double e = pb.theta[0] * y + pb.theta[1] + (y - alpha * pb.mean) / v_tau;
      out.sm += rule.weights[i] * var * e * e;
      out.grad_sm += rule.weights[i] * 2.0 * var * e * Eigen::Vector2d(y, 1.0);
    }
  }
  const double inv = 1.0 / schedule.R;
  out.dsm *= inv;
  out.sm *= inv;
  out.grad_dsm *= inv;
  out.grad_sm *= inv;
  return out;
}

GradEquivalenceReport grad_equivalence_check(const LinearScoreProblem& problem,
                                             const TimeSchedule& schedule, int nodes) {
  GradEquivalenceReport rep;
  rep.losses = linear_family_losses(problem, schedule, nodes);
  rep.max_abs_diff = (rep.losses.grad_dsm - rep.losses.grad_sm).cwiseAbs().maxCoeff();
  return rep;
}

Eigen::Vector2d dsm_linear_argmin(double mean, double var, double tau, int nodes) {
  require(var > 0.0 && tau > 0.0, "dsm_linear_argmin: need var > 0 and tau > 0");
  const auto rule = gauss_hermite(nodes);
  const double alpha = std::exp(-tau);
  const double sigma = std::sqrt(-std::expm1(-2.0 * tau));
  Eigen::Matrix2d gram = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      const double w = rule.weights[i] * rule.weights[j];
      const double xi = rule.nodes[j];
      const double y = alpha * (mean + std::sqrt(var) * rule.nodes[i]) + sigma * xi;
      const Eigen::Vector2d f(y, 1.0);
      gram += w * sigma * sigma * f * f.transpose();
      rhs -= w * sigma * xi * f;
    }
  }
  return gram.ldlt().solve(rhs);
}

LossTrace train(ScoreNet& model, const DataSampler& data, const PatchLayout& layout,
                const TimeSchedule& schedule, const TrainConfig& config) {
  require(config.steps >= 1, "train: steps must be >= 1");
  require(config.lr > 0.0 && config.batch >= 1, "train: lr and batch must be positive");
  LossTrace trace;
  trace.K = layout.num_patches();
  trace.losses.reserve(static_cast<std::size_t>(config.steps));
  const int n = model.num_params();
  Vector m = Vector::Zero(n);
  Vector v = Vector::Zero(n);
  const SeedPath root(config.seed);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int step = 0; step < config.steps; ++step) {
    const auto lg = dsm_loss(model, data, layout, schedule,
                             {config.batch, root.child(static_cast<std::uint64_t>(step)), config.sampling});
    trace.losses.push_back(lg.loss);
    if (!(lg.loss <= config.divergence_threshold))
      throw DivergenceError("train: loss " + std::to_string(lg.loss) + " at step " +
                                std::to_string(step) + " exceeds divergence threshold",
                            trace);
    m = config.beta1 * m + (1.0 - config.beta1) * lg.grad;
    v = config.beta2 * v + (1.0 - config.beta2) * lg.grad.cwiseProduct(lg.grad);
    b1t *= config.beta1;
    b2t *= config.beta2;
    const Vector mhat = m / (1.0 - b1t);
    const Vector vhat = v / (1.0 - b2t);
    model.params().array() -= config.lr * mhat.array() / (vhat.array().sqrt() + config.adam_eps);
  }
  return trace;
}

}  // namespace ardiff
