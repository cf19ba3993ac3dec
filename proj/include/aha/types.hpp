#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aha {

using SeqNo = std::uint64_t;
using SSTableId = std::uint64_t;
using NodeId = std::uint64_t;
using PageId = std::uint64_t;

inline constexpr std::size_t kMaxKeyBytes = 1024;
inline constexpr std::size_t kMaxValueBytes = 64 * 1024;

// ---------------------------------------------------------------------------
// Errors. Every failure that crosses a module boundary is one of these.
// ---------------------------------------------------------------------------
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something outside the documented limits.
class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// On-disk bytes failed validation (bad magic, bad checksum, truncated file).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Every resident page is pinned and the pool is at capacity.
class PoolExhaustedError : public Error {
 public:
  using Error::Error;
};

enum class EntryKind : std::uint8_t { Put = 0, Tombstone = 1 };

struct Entry {
  std::string key;
  SeqNo seq = 0;
  EntryKind kind = EntryKind::Put;
  std::string value;

  bool is_tombstone() const { return kind == EntryKind::Tombstone; }

  /// Bytes this entry occupies in an SSTable body.
  std::size_t encoded_size() const { return 4 + key.size() + 8 + 1 + 4 + value.size(); }

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Sort order of SSTable bodies: key ascending, then newest first.
struct EntryOrder {
  bool operator()(const Entry& a, const Entry& b) const {
    if (a.key != b.key) return a.key < b.key;
    return a.seq > b.seq;
  }
};

void validate_key(std::string_view key);
void validate_value(std::string_view value);

// ---------------------------------------------------------------------------
// KeyRange: half-open [lo, hi). An absent hi means +infinity; lo == "" is
// -infinity since keys are never empty.
// ---------------------------------------------------------------------------
struct KeyRange {
  std::string lo;
  std::optional<std::string> hi;

  static KeyRange all() { return {}; }
  static KeyRange point(std::string_view key) {
    std::string next(key);
    next.push_back('\0');
    return {std::string(key), std::move(next)};
  }

  bool unbounded_above() const { return !hi.has_value(); }
  bool contains(std::string_view key) const { return key >= lo && (!hi || key < *hi); }
  bool empty() const { return hi && *hi <= lo; }

  /// True if [min_key, max_key] (closed) has a key inside this range.
  bool overlaps_closed(std::string_view min_key, std::string_view max_key) const {
    return max_key >= lo && (!hi || min_key < *hi);
  }
  bool overlaps(const KeyRange& o) const {
    bool below = hi && o.lo >= *hi;
    bool above = o.hi && lo >= *o.hi;
    return !below && !above;
  }
  /// True if [min_key, max_key] lies entirely inside this range.
  bool covers_closed(std::string_view min_key, std::string_view max_key) const {
    return min_key >= lo && (!hi || max_key < *hi);
  }
  bool covers(const KeyRange& o) const {
    if (o.lo < lo) return false;
    if (!hi) return true;
    return o.hi && *o.hi <= *hi;
  }
  KeyRange intersect(const KeyRange& o) const {
    KeyRange r;
    r.lo = std::max(lo, o.lo);
    if (hi && o.hi) r.hi = std::min(*hi, *o.hi);
    else if (hi) r.hi = hi;
    else r.hi = o.hi;
    return r;
  }

  friend bool operator==(const KeyRange&, const KeyRange&) = default;
};

std::string to_string(const KeyRange& r);

/// Drops superseded versions (keeps the newest per key) from entries already
/// sorted by EntryOrder.
std::vector<Entry> newest_per_key(std::vector<Entry> sorted);

}  // namespace aha
