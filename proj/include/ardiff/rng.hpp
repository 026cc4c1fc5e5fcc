#pragma once

#include <cstdint>
#include <initializer_list>

#include "ardiff/common.hpp"

namespace ardiff {

// Hierarchical seed address. A path such as (run seed, stage, sample, step)
// names an independent random stream; streams never depend on the order in
// which they are consumed, so batches can be split across workers freely.
class SeedPath {
 public:
  constexpr SeedPath() = default;
  explicit SeedPath(std::uint64_t seed);

  SeedPath child(std::uint64_t index) const;
  SeedPath child(std::initializer_list<std::uint64_t> indices) const;

  std::uint64_t key() const { return key_; }
  bool operator==(const SeedPath&) const = default;

 private:
  std::uint64_t key_ = 0x6a09e667f3bcc909ULL;
};

// Counter-based generator: the n-th output is a pure function of (key, n).
class NoiseStream {
 public:
  explicit NoiseStream(const SeedPath& path) : key_(path.key()) {}

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  Vector normal_vector(int n);
  void fill_normal(Eigen::Ref<Vector> out);
  // Index drawn from a discrete distribution given by nonnegative weights.
  int categorical(const Vector& weights);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace ardiff
