#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aha/types.hpp"

namespace aha {

/// Externally declared hot key ranges. Ranges are sorted, pairwise disjoint
/// and nonempty; version changes whenever the set is replaced.
struct HotspotSet {
  std::vector<KeyRange> ranges;
  std::uint64_t version = 0;

  /// Sorts and validates; throws InputError for empty or overlapping ranges.
  static HotspotSet make(std::vector<KeyRange> ranges, std::uint64_t version);

  bool empty() const { return ranges.empty(); }
  bool contains(std::string_view key) const;
  bool overlaps(const KeyRange& r) const;
  bool overlaps_closed(std::string_view min_key, std::string_view max_key) const;
  /// True if r lies entirely inside one hot range.
  bool covers(const KeyRange& r) const;
  /// Pieces of r that are hot, ascending.
  std::vector<KeyRange> hot_parts(const KeyRange& r) const;
  /// Pieces of r that are cold, ascending.
  std::vector<KeyRange> cold_parts(const KeyRange& r) const;
  /// Range endpoints usable as SSTable cut keys (sorted, unique).
  std::vector<std::string> bounds() const;
};

using HotspotSetPtr = std::shared_ptr<const HotspotSet>;

/// Sorted union of two sorted key lists.
std::vector<std::string> merge_cut_keys(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace aha
