#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "aha/io_stats.hpp"
#include "aha/sstable.hpp"
#include "aha/types.hpp"

namespace aha {

/// Engine-wide sequence numbers; first allocation returns 1.
class SeqAllocator {
 public:
  explicit SeqAllocator(SeqNo last = 0) : last_(last) {}
  SeqNo allocate() { return last_.fetch_add(1, std::memory_order_acq_rel) + 1; }
  SeqNo last() const { return last_.load(std::memory_order_acquire); }
  void advance_to(SeqNo s) {
    auto cur = last_.load();
    while (cur < s && !last_.compare_exchange_weak(cur, s)) {
    }
  }

 private:
  std::atomic<SeqNo> last_;
};

/// In-memory write buffer. Keeps the newest entry per key. Thread-safe:
/// writers serialize on an internal lock, readers take it shared.
class MemTable {
 public:
  enum class PutResult { Accepted, NeedsRotation };

  explicit MemTable(std::size_t byte_budget) : budget_(byte_budget) {}

  /// Records (key, kind, value) under a freshly allocated seq. Returns
  /// NeedsRotation, recording nothing, when the entry would push the table
  /// past its budget or the table is frozen; an empty table always accepts.
  PutResult put(SeqAllocator& seqs, std::string_view key, EntryKind kind, std::string_view value,
                SeqNo* assigned = nullptr);

  std::vector<Entry> range(const KeyRange& r) const;
  std::vector<Entry> entries() const { return range(KeyRange::all()); }
  bool intersects(const KeyRange& r) const;

  std::size_t bytes() const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::size_t budget() const { return budget_; }

  void freeze() { immutable_.store(true); }
  bool immutable() const { return immutable_.load(); }

 private:
  std::size_t budget_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Entry, std::less<>> map_;
  std::size_t bytes_ = 0;
  std::atomic<bool> immutable_{false};
};

using MemTablePtr = std::shared_ptr<MemTable>;

/// Writes an immutable MemTable to one SSTable. Returns nullopt for an empty
/// table.
std::optional<SSTablePtr> flush_memtable(const MemTable& imm, const std::filesystem::path& dir, SSTableId id,
                                         IoStats* stats);

}  // namespace aha
