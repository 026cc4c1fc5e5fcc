#include "ardiff/scorenet.hpp"

#include <cmath>

namespace ardiff {

ScoreNet::ScoreNet(int y_dim, int cond_width, std::vector<int> hidden, const SeedPath& init)
    : y_dim_(y_dim), cond_width_(cond_width), hidden_(std::move(hidden)) {
  init_layout();
  NoiseStream stream(init);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_in * fan_out; ++i) params_[offsets_[l] + i] = scale * stream.normal();
  }
}

ScoreNet::ScoreNet(int y_dim, int cond_width, std::vector<int> hidden, Vector params)
    : y_dim_(y_dim), cond_width_(cond_width), hidden_(std::move(hidden)) {
  init_layout();
  require(params.size() == params_.size(), "ScoreNet: parameter vector has wrong length");
  params_ = std::move(params);
}

void ScoreNet::init_layout() {
  require(y_dim_ >= 1 && cond_width_ >= 0, "ScoreNet: invalid input sizes");
  for (int h : hidden_) require(h >= 1, "ScoreNet: hidden widths must be positive");
  widths_.clear();
  widths_.push_back(y_dim_ + 3 + cond_width_ + (cond_width_ > 0 ? 1 : 0));
  widths_.insert(widths_.end(), hidden_.begin(), hidden_.end());
  widths_.push_back(y_dim_);
  offsets_.clear();
  int total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(total);
    total += (widths_[l] + 1) * widths_[l + 1];
  }
  params_ = Vector::Zero(total);
}

Vector ScoreNet::features(const Vector& y, double t, const Condition& z) const {
  require(y.size() == y_dim_, "ScoreNet: wrong y dimension");
  Vector in = Vector::Zero(input_dim());
  in.head(y_dim_) = y;
  in[y_dim_] = t;
  in[y_dim_ + 1] = std::exp(-t);
  in[y_dim_ + 2] = -std::expm1(-2.0 * t);
  if (cond_width_ > 0) {
    const int n = z.size();
    require(n <= cond_width_, "ScoreNet: condition longer than the network's condition slot");
    if (n > 0) in.segment(y_dim_ + 3, n) = z.vector();
    in[input_dim() - 1] = static_cast<double>(n) / cond_width_;
  } else {
    require(z.size() == 0, "ScoreNet: network has no condition slot");
  }
  return in;
}

Vector ScoreNet::forward(const Vector& input, Tape& tape) const {
  const auto layers = widths_.size() - 1;
  tape.activations.resize(layers + 1);
  tape.activations[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        params_.data() + offsets_[l], fan_out, fan_in);
    const Eigen::Map<const Vector> b(params_.data() + offsets_[l] + fan_in * fan_out, fan_out);
    Vector z = w * tape.activations[l] + b;
    if (l + 1 < layers) z = z.array().tanh();
    tape.activations[l + 1] = std::move(z);
  }
  return tape.activations.back();
}

void ScoreNet::backward(const Tape& tape, const Vector& grad_out, Vector& grad) const {
  const auto layers = widths_.size() - 1;
  Vector delta = grad_out;
  for (std::size_t l = layers; l-- > 0;) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    if (l + 1 < layers)  // through tanh: d/dz tanh = 1 - a^2
      delta = delta.array() * (1.0 - tape.activations[l + 1].array().square());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
        grad.data() + offsets_[l], fan_out, fan_in);
    Eigen::Map<Vector> gb(grad.data() + offsets_[l] + fan_in * fan_out, fan_out);
    gw.noalias() += delta * tape.activations[l].transpose();
    gb += delta;
    if (l > 0) {
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          w(params_.data() + offsets_[l], fan_out, fan_in);
      delta = w.transpose() * delta;
    }
  }
}

Vector ScoreNet::predict_noise(const Vector& y, double t, const Condition& z) const {
  Tape tape;
  return forward(features(y, t, z), tape);
}

Vector ScoreNet::score(const Vector& y, double t, const Condition& z) const {
  require(t > 0.0, "ScoreNet::score needs t > 0");
  return -predict_noise(y, t, z) / std::sqrt(-std::expm1(-2.0 * t));
}

}  // namespace ardiff
