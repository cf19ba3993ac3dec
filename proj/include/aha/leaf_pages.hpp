#pragma once

#include <atomic>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "aha/page_pool.hpp"
#include "aha/types.hpp"

namespace aha {

// Leaf page layout (page_size bytes, little-endian):
//   [u16 count][u16 used] then count u16 slot offsets in key order, then
//   entries [u16 key_len][key][u64 seq][u8 flags][u32 value_len][payload].
// flags bit 1 marks an out-of-line value whose payload is
//   [u32 page_count][u64 page_id]... holding value_len bytes.
// Pages never hold tombstones: a deleted key is simply absent.

struct PageEntry;

struct LeafPageRef {
  PageId id = 0;
  std::string low;  // smallest key this page is responsible for
  std::uint32_t count = 0;
  std::uint32_t used = 0;
};

/// Sorted pages that store one leaf node's data. The latch guards both the
/// directory and the page contents; retired chains were replaced by a
/// structural change and must be re-resolved through a fresh tree version.
class LeafChain {
 public:
  std::shared_mutex latch;
  std::vector<LeafPageRef> pages;  // pages[0].low is the node's lower bound
  bool retired = false;

  std::size_t entry_count() const;
};

using LeafChainPtr = std::shared_ptr<LeafChain>;

/// Page-level operations on leaf chains. Callers hold the chain latch:
/// shared for reads, exclusive for writes.
class LeafStore {
 public:
  LeafStore(PageBufferPool& pool, std::size_t max_pages_per_leaf);

  std::size_t page_size() const { return pool_.page_size(); }
  std::size_t max_pages_per_leaf() const { return max_pages_; }
  PageBufferPool& pool() { return pool_; }

  /// Chain of freshly written pages holding sorted (tombstone-free) entries.
  LeafChainPtr build(std::span<const Entry> sorted, const std::string& low);

  /// Entries with key in range, ascending. Returns the number of pages read.
  std::size_t read_range(const LeafChain& chain, const KeyRange& range, std::vector<Entry>& out);

  /// Puts replace older versions; tombstones erase the key.
  void upsert(LeafChain& chain, const Entry& e);

  /// Merges newest-wins sorted entries (tombstones erase). Entries older than
  /// the resident version of a key are ignored.
  void merge(LeafChain& chain, const std::vector<Entry>& sorted);

  std::vector<Entry> all(const LeafChain& chain) {
    std::vector<Entry> out;
    read_range(chain, KeyRange::all(), out);
    return out;
  }

  /// Entries whose encoding must go out of line.
  std::size_t inline_limit() const { return pool_.page_size() / 4; }

 private:
  void rewrite_at(LeafChain& chain, std::size_t i, std::vector<struct PageEntry> entries);
  std::size_t page_index(const LeafChain& chain, std::string_view key) const;
  std::string materialize(std::string_view payload, std::uint32_t len);
  struct PageEntry to_page_entry(const Entry& e);

  PageBufferPool& pool_;
  std::size_t max_pages_;
};

}  // namespace aha
