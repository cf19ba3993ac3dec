#include "aha/hotspot.hpp"

#include <algorithm>

namespace aha {

HotspotSet HotspotSet::make(std::vector<KeyRange> ranges, std::uint64_t version) {
  std::sort(ranges.begin(), ranges.end(), [](const KeyRange& a, const KeyRange& b) { return a.lo < b.lo; });
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].empty()) throw InputError("empty hotspot range " + to_string(ranges[i]));
    if (i + 1 < ranges.size() && ranges[i].overlaps(ranges[i + 1])) {
      throw InputError("overlapping hotspot ranges " + to_string(ranges[i]) + " and " + to_string(ranges[i + 1]));
    }
  }
  HotspotSet hs;
  hs.ranges = std::move(ranges);
  hs.version = version;
  return hs;
}

bool HotspotSet::contains(std::string_view key) const {
  auto it = std::upper_bound(ranges.begin(), ranges.end(), key,
                             [](std::string_view k, const KeyRange& r) { return k < r.lo; });
  return it != ranges.begin() && std::prev(it)->contains(key);
}

bool HotspotSet::overlaps(const KeyRange& r) const {
  for (const auto& h : ranges) {
    if (h.overlaps(r)) return true;
  }
  return false;
}

bool HotspotSet::overlaps_closed(std::string_view min_key, std::string_view max_key) const {
  for (const auto& h : ranges) {
    if (h.overlaps_closed(min_key, max_key)) return true;
  }
  return false;
}

bool HotspotSet::covers(const KeyRange& r) const {
  for (const auto& h : ranges) {
    if (h.covers(r)) return true;
  }
  return false;
}

std::vector<KeyRange> HotspotSet::hot_parts(const KeyRange& r) const {
  std::vector<KeyRange> out;
  for (const auto& h : ranges) {
    if (!h.overlaps(r)) continue;
    auto x = h.intersect(r);
    if (!x.empty()) out.push_back(std::move(x));
  }
  return out;
}

std::vector<KeyRange> HotspotSet::cold_parts(const KeyRange& r) const {
  std::vector<KeyRange> out;
  KeyRange rest = r;
  for (const auto& h : hot_parts(r)) {
    if (h.lo > rest.lo) out.push_back(KeyRange{rest.lo, h.lo});
    if (!h.hi) return out;
    rest.lo = *h.hi;
  }
  if (!rest.empty()) out.push_back(std::move(rest));
  return out;
}

std::vector<std::string> HotspotSet::bounds() const {
  std::vector<std::string> out;
  for (const auto& h : ranges) {
    if (!h.lo.empty()) out.push_back(h.lo);
    if (h.hi) out.push_back(*h.hi);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> merge_cut_keys(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace aha
