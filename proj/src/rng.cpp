#include "ardiff/rng.hpp"

#include <cmath>
#include <numbers>

namespace ardiff {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeedPath::SeedPath(std::uint64_t seed) : key_(mix64(seed ^ 0x243f6a8885a308d3ULL)) {}

SeedPath SeedPath::child(std::uint64_t index) const {
  SeedPath out;
  out.key_ = mix64(key_ ^ mix64(index + 0x13198a2e03707344ULL));
  return out;
}

SeedPath SeedPath::child(std::initializer_list<std::uint64_t> indices) const {
  SeedPath out = *this;
  for (auto i : indices) out = out.child(i);
  return out;
}

std::uint64_t NoiseStream::next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

double NoiseStream::uniform() {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Vector NoiseStream::normal_vector(int n) {
  Vector out(n);
  fill_normal(out);
  return out;
}

void NoiseStream::fill_normal(Eigen::Ref<Vector> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
}

int NoiseStream::categorical(const Vector& weights) {
  const double total = weights.sum();
  double u = uniform() * total;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  // Rounding left u marginally positive; take the last nonzero weight.
  for (Eigen::Index i = weights.size() - 1; i >= 0; --i)
    if (weights[i] > 0.0) return static_cast<int>(i);
  return 0;
}

}  // namespace ardiff
