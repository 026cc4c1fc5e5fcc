#include "ardiff/patches.hpp"

#include <numeric>
#include <string>

namespace ardiff {

PatchLayout::PatchLayout(std::vector<int> dims) : dims_(std::move(dims)) {
  require(!dims_.empty(), "patch layout needs at least one patch");
  offsets_.reserve(dims_.size());
  int offset = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    require(dims_[k] >= 1, "patch " + std::to_string(k + 1) + " has non-positive dimension " +
                               std::to_string(dims_[k]));
    offsets_.push_back(offset);
    offset += dims_[k];
  }
  total_dim_ = offset;
}

int PatchLayout::patch_dim(int k) const {
  require(k >= 1 && k <= num_patches(), "patch index " + std::to_string(k) + " out of range");
  return dims_[k - 1];
}

CoordRange PatchLayout::index_range(int l, int r) const {
  require(l >= 1 && r <= num_patches() && l <= r,
          "invalid patch range [" + std::to_string(l) + ":" + std::to_string(r) + "] for K=" +
              std::to_string(num_patches()));
  return {offsets_[l - 1], offsets_[r - 1] + dims_[r - 1]};
}

CoordRange PatchLayout::prefix(int k) const {
  require(k >= 1 && k <= num_patches(), "patch index " + std::to_string(k) + " out of range");
  if (k == 1) return {0, 0};
  return index_range(1, k - 1);
}

PatchLayout make_layout(std::vector<int> dims) { return PatchLayout(std::move(dims)); }

Vector slice(const Vector& x, const PatchLayout& layout, int l, int r) {
  require(x.size() == layout.total_dim(), "slice: vector length " + std::to_string(x.size()) +
                                              " != layout dimension " +
                                              std::to_string(layout.total_dim()));
  const auto range = layout.index_range(l, r);
  return x.segment(range.begin, range.size());
}

Vector concat(const std::vector<Vector>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vector out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

std::vector<Vector> split(const Vector& x, const PatchLayout& layout) {
  std::vector<Vector> parts;
  parts.reserve(layout.num_patches());
  for (int k = 1; k <= layout.num_patches(); ++k) parts.push_back(slice(x, layout, k, k));
  return parts;
}

const Vector& Condition::vector() const {
  if (!value_) throw ValidationError("condition is the empty marker x_[1:0]");
  return *value_;
}

}  // namespace ardiff
