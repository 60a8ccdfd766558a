#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ice_search {

// An immutable set of column indices into a dataset's feature universe.
// Members are kept sorted and unique, so equality and ordering are canonical:
// sets compare lexicographically on their sorted member lists.
class FeatureSet {
 public:
  FeatureSet() = default;

  FeatureSet(std::initializer_list<std::size_t> members)
      : FeatureSet(std::vector<std::size_t>(members)) {}

  explicit FeatureSet(std::vector<std::size_t> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  }

  // Bit i of mask selects feature i.
  static FeatureSet from_mask(std::uint64_t mask) {
    std::vector<std::size_t> m;
    for (std::size_t i = 0; mask != 0; ++i, mask >>= 1)
      if (mask & 1U) m.push_back(i);
    return FeatureSet(std::move(m));
  }

  std::uint64_t mask() const {
    std::uint64_t m = 0;
    for (std::size_t i : members_) {
      if (i >= 64) throw CapacityError("feature index " + std::to_string(i) + " does not fit a 64-bit mask");
      m |= std::uint64_t{1} << i;
    }
    return m;
  }

  std::span<const std::size_t> members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  auto begin() const noexcept { return members_.begin(); }
  auto end() const noexcept { return members_.end(); }

  bool contains(std::size_t i) const { return std::binary_search(members_.begin(), members_.end(), i); }

  bool is_subset_of(const FeatureSet& other) const {
    return std::includes(other.members_.begin(), other.members_.end(), members_.begin(), members_.end());
  }

  // True when every member is < universe_size.
  bool within(std::size_t universe_size) const {
    return members_.empty() || members_.back() < universe_size;
  }

  // Stable text key, e.g. "0,3,7".
  std::string key() const {
    std::string out;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(members_[i]);
    }
    return out;
  }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
  friend std::strong_ordering operator<=>(const FeatureSet& a, const FeatureSet& b) {
    return std::lexicographical_compare_three_way(a.members_.begin(), a.members_.end(),
                                                  b.members_.begin(), b.members_.end());
  }

 private:
  std::vector<std::size_t> members_;
};

struct FeatureSetHash {
  std::size_t operator()(const FeatureSet& s) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i : s) h = (h ^ (i + 1)) * 0x100000001b3ULL;
    return h;
  }
};

// Names of the members, in index order.
inline std::vector<std::string> feature_names_of(const FeatureSet& s, std::span<const std::string> universe) {
  std::vector<std::string> out;
  out.reserve(s.size());
  for (std::size_t i : s) out.push_back(universe[i]);
  return out;
}

inline std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace ice_search
