#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ardiff/oracle.hpp"
#include "ardiff/rng.hpp"

namespace ardiff {

// Small tanh MLP predicting the noise eps_hat(y | t, z).
//
// Input features: y, the time features [t, e^{-t}, 1 - e^{-2t}], the
// condition z zero-padded to `cond_width`, and (when cond_width > 0) the
// fraction of the condition slot that is filled, so stage 1 (no condition)
// is distinguishable from a zero-valued prefix. One network serves all
// stages. The score is s = -eps_hat / sqrt(1 - e^{-2t}).
class ScoreNet {
 public:
  ScoreNet(int y_dim, int cond_width, std::vector<int> hidden, const SeedPath& init);
  ScoreNet(int y_dim, int cond_width, std::vector<int> hidden, Vector params);

  int y_dim() const { return y_dim_; }
  int cond_width() const { return cond_width_; }
  int input_dim() const { return widths_.front(); }
  const std::vector<int>& hidden() const { return hidden_; }
  // Layer sizes including input and output.
  const std::vector<int>& widths() const { return widths_; }
  int num_params() const { return static_cast<int>(params_.size()); }
  const Vector& params() const { return params_; }
  Vector& params() { return params_; }

  Vector features(const Vector& y, double t, const Condition& z) const;
  Vector predict_noise(const Vector& y, double t, const Condition& z) const;
  Vector score(const Vector& y, double t, const Condition& z) const;

  // Forward pass keeping activations, then accumulates d(loss)/d(params)
  // into grad given d(loss)/d(output).
  struct Tape {
    std::vector<Vector> activations;  // post-activation per layer, [0] = input
  };
  Vector forward(const Vector& input, Tape& tape) const;
  void backward(const Tape& tape, const Vector& grad_out, Vector& grad) const;

 private:
  void init_layout();

  int y_dim_;
  int cond_width_;
  std::vector<int> hidden_;
  std::vector<int> widths_;
  std::vector<int> offsets_;  // start of layer l's weight block in params_
  Vector params_;
};

// ScoreSource view of a trained network.
class LearnedScore final : public ScoreSource {
 public:
  explicit LearnedScore(std::shared_ptr<const ScoreNet> net) : net_(std::move(net)) {}
  int patch_dim() const override { return net_->y_dim(); }
  Vector score(const Vector& y, double t, const Condition& z, StepTag) const override {
    return net_->score(y, t, z);
  }

 private:
  std::shared_ptr<const ScoreNet> net_;
};

}  // namespace ardiff
