#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "ardiff/gauss.hpp"

namespace ardiff {

// Law of y_t under the OU forward process dy = -y dt + sqrt(2) dB started
// from `base`: y_t = e^{-t} y_0 + sqrt(1 - e^{-2t}) xi.
struct DiffusedLaw {
  GaussianMixture base;
  double t = 0.0;
  GaussianMixture diffused;
};

DiffusedLaw diffuse(const GaussianMixture& gm, double t);

// grad_y log q_t(y).
Vector score(const DiffusedLaw& law, const Vector& y);
// Hessian of log q_t at y.
Matrix score_hessian(const DiffusedLaw& law, const Vector& y);

// Identifies the stage k (1-based patch index) and reverse step r of an
// evaluation. Sources that ignore it (the exact oracle) are free to.
struct StepTag {
  int stage = 1;
  int step = 0;
};

// Evaluable conditional score s(y | t, z).
class ScoreSource {
 public:
  virtual ~ScoreSource() = default;
  virtual int patch_dim() const = 0;
  virtual Vector score(const Vector& y, double t, const Condition& z, StepTag tag) const = 0;
};

using ScoreSourcePtr = std::shared_ptr<const ScoreSource>;

// Exact score of the diffused conditional law q_t(. | z) of patch k under a
// Gaussian-mixture joint. The conditioning map is the identity: z is the raw
// prefix x_[1:k-1].
class OracleScore final : public ScoreSource {
 public:
  OracleScore(const GaussianMixture& joint, const PatchLayout& layout, int k);

  int patch_dim() const override { return family_.patch_dim(); }
  Vector score(const Vector& y, double t, const Condition& z, StepTag tag) const override;

  const ConditionalFamily& family() const { return family_; }
  // Diffused conditional law at (t, z), for inspection and tests.
  DiffusedLaw law(double t, const Condition& z) const;

 private:
  struct ZEntry {
    Vector weights;
    std::vector<Vector> means;
  };
  struct TEntry {
    std::vector<Matrix> chol;  // of e^{-2t} S_i + (1 - e^{-2t}) I
    std::vector<double> logdet;
  };

  const ZEntry& z_entry(const Condition& z) const;
  const TEntry& t_entry(double t) const;

  ConditionalFamily family_;
  mutable std::shared_mutex z_mutex_;
  mutable std::unordered_map<std::string, ZEntry> z_memo_;
  mutable std::shared_mutex t_mutex_;
  mutable std::map<double, TEntry> t_memo_;
};

std::shared_ptr<OracleScore> conditional_oracle(const GaussianMixture& joint,
                                                const PatchLayout& layout, int k);

enum class PerturbMode { kConstantBias, kRotational };

// How constant-bias directions are assigned. kPerStage draws one unit vector
// per stage and reuses it for every step r of that stage; kPerStep draws an
// independent unit vector for each (k, r).
enum class BiasDirection { kPerStage, kPerStep };

// Prescribed score error: magnitude per stage and deterministic directions.
struct BiasSpec {
  double eps = 0.0;
  // Optional per-stage override; entry k-1 applies to stage k.
  std::vector<double> stage_eps;
  std::uint64_t seed = 0;
  BiasDirection direction = BiasDirection::kPerStage;
  // Optional explicit unit directions, entry k-1 for stage k.
  std::vector<Vector> fixed_directions;

  double eps_for(int stage) const;
  // Unit vector u_{k,r} in R^dim.
  Vector direction_for(int stage, int step, int dim) const;
  bool is_zero() const;
};

// Score source with an exactly prescribed pointwise error:
// constant-bias adds eps * u_{k,r}; rotational adds eps * (J s)/||J s|| with
// J skew-symmetric, so the error is orthogonal to s and of norm exactly eps.
class PerturbedScore final : public ScoreSource {
 public:
  PerturbedScore(ScoreSourcePtr base, BiasSpec spec, PerturbMode mode);

  int patch_dim() const override { return base_->patch_dim(); }
  Vector score(const Vector& y, double t, const Condition& z, StepTag tag) const override;

  const ScoreSource& base() const { return *base_; }
  const BiasSpec& spec() const { return spec_; }
  PerturbMode mode() const { return mode_; }

 private:
  ScoreSourcePtr base_;
  BiasSpec spec_;
  PerturbMode mode_;
};

std::shared_ptr<PerturbedScore> perturb(ScoreSourcePtr base, double eps, PerturbMode mode,
                                        std::uint64_t seed = 0,
                                        BiasDirection direction = BiasDirection::kPerStage);

}  // namespace ardiff
