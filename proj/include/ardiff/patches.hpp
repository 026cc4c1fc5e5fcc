#pragma once

#include <optional>
#include <vector>

#include "ardiff/common.hpp"

namespace ardiff {

// Half-open coordinate interval [begin, end).
struct CoordRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool operator==(const CoordRange&) const = default;
};

// Partition of R^d into K consecutive patches x_1..x_K.
//
// Patch indices on the public surface are 1-based; index_range(l, r) covers
// patches l..r inclusive.
class PatchLayout {
 public:
  explicit PatchLayout(std::vector<int> dims);

  int num_patches() const { return static_cast<int>(dims_.size()); }
  int total_dim() const { return total_dim_; }
  int patch_dim(int k) const;
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<int>& offsets() const { return offsets_; }

  CoordRange index_range(int l, int r) const;
  // Coordinates of patches 1..k-1; empty range when k == 1.
  CoordRange prefix(int k) const;

  bool operator==(const PatchLayout& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
};

PatchLayout make_layout(std::vector<int> dims);

Vector slice(const Vector& x, const PatchLayout& layout, int l, int r);
Vector concat(const std::vector<Vector>& parts);
// Splits x into its K patches.
std::vector<Vector> split(const Vector& x, const PatchLayout& layout);

// Conditioning input for stage k: the generated prefix x_[1:k-1], or the
// explicit "none" marker for the first patch.
class Condition {
 public:
  Condition() = default;
  explicit Condition(Vector prefix) : value_(std::move(prefix)) {}
  static Condition none() { return {}; }

  bool is_none() const { return !value_.has_value(); }
  const Vector& vector() const;
  int size() const { return value_ ? static_cast<int>(value_->size()) : 0; }

 private:
  std::optional<Vector> value_;
};

}  // namespace ardiff
