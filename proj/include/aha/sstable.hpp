#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aha/io_stats.hpp"
#include "aha/types.hpp"

namespace aha {

// SSTable file layout (little-endian):
//   header  "AHAT" u16 version
//   body    repeated [u32 key_len][key][u64 seq][u8 kind][u32 value_len][value]
//   footer  [u64 entry_count][u32 min_key_len][min_key][u32 max_key_len][max_key]
//           [u32 crc32(body)]
inline constexpr char kSSTableMagic[4] = {'A', 'H', 'A', 'T'};
inline constexpr std::uint16_t kSSTableVersion = 1;
inline constexpr std::size_t kSSTableHeaderBytes = 6;

struct SSTableMeta {
  SSTableId id = 0;
  std::string min_key;
  std::string max_key;
  std::uint64_t entry_count = 0;
  std::uint64_t byte_size = 0;
  std::string file_path;

  KeyRange closed_range() const;  // [min_key, max_key] as a half-open range
};

std::string sstable_file_name(SSTableId id);

/// Non-owning view of one encoded entry. Valid while the owning SSTable (or
/// buffer) is alive.
struct EntryView {
  std::string_view key;
  SeqNo seq = 0;
  EntryKind kind = EntryKind::Put;
  std::string_view value;

  bool is_tombstone() const { return kind == EntryKind::Tombstone; }
  Entry to_entry() const { return Entry{std::string(key), seq, kind, std::string(value)}; }
  std::size_t encoded_size() const { return 17 + key.size() + value.size(); }
};

inline EntryView view_of(const Entry& e) { return {e.key, e.seq, e.kind, e.value}; }

/// Appends the body encoding of one entry to out.
void encode_entry(std::string& out, const EntryView& e);

/// Decodes one entry at data[pos]; advances pos. Throws CorruptionError on
/// truncation.
EntryView decode_entry(std::string_view data, std::size_t& pos);

/// Immutable, memory-mapped sorted run. Instances are shared through
/// SSTablePtr; once marked obsolete the file is unlinked when the last
/// reference drops.
class SSTable {
 public:
  class Cursor;

  /// Maps and fully validates an existing file (magic, structure, CRC).
  static std::shared_ptr<const SSTable> open(const std::filesystem::path& path, SSTableId id,
                                             IoStats* stats);

  ~SSTable();
  SSTable(const SSTable&) = delete;
  SSTable& operator=(const SSTable&) = delete;

  const SSTableMeta& meta() const { return meta_; }
  SSTableId id() const { return meta_.id; }
  const std::string& min_key() const { return meta_.min_key; }
  const std::string& max_key() const { return meta_.max_key; }
  std::uint64_t byte_size() const { return meta_.byte_size; }

  /// Cursor positioned at the first entry with key >= range.lo; it stops
  /// before range.hi.
  Cursor seek(const KeyRange& range) const;

  /// All entries with key in range, ascending.
  std::vector<Entry> range(const KeyRange& range) const;
  std::vector<Entry> all() const { return range(KeyRange::all()); }

  void mark_obsolete() const { obsolete_.store(true); }
  bool obsolete() const { return obsolete_.load(); }

 private:
  friend class SSTableWriter;
  SSTable() = default;

  struct IndexPoint {
    std::string key;
    std::size_t offset;
  };

  SSTableMeta meta_;
  const char* base_ = nullptr;
  std::size_t mapped_len_ = 0;
  std::size_t body_begin_ = kSSTableHeaderBytes;
  std::size_t body_end_ = 0;
  std::vector<IndexPoint> index_;  // every kIndexInterval-th entry
  IoStats* stats_ = nullptr;
  mutable std::atomic<bool> obsolete_{false};

  static constexpr std::size_t kIndexInterval = 16;

  void map_file(const std::filesystem::path& path);
  std::size_t lower_bound_offset(std::string_view key) const;
};

using SSTablePtr = std::shared_ptr<const SSTable>;

class SSTable::Cursor {
 public:
  bool valid() const { return valid_; }
  const EntryView& entry() const { return cur_; }
  void next();

 private:
  friend class SSTable;
  std::string_view data_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::optional<std::string> hi_;
  EntryView cur_;
  bool valid_ = false;
  void load();
};

/// Streams strictly ascending entries into a new SSTable file.
class SSTableWriter {
 public:
  SSTableWriter(std::filesystem::path dir, SSTableId id, IoStats* stats);
  ~SSTableWriter();

  void add(const EntryView& e);
  std::size_t entry_count() const { return count_; }
  std::size_t estimated_bytes() const { return buf_.size(); }
  bool empty() const { return count_ == 0; }

  /// Writes the file and returns the opened table. Throws InputError if empty.
  SSTablePtr finish();

 private:
  std::filesystem::path dir_;
  SSTableId id_;
  IoStats* stats_;
  std::string buf_;
  std::string min_key_;
  std::string last_key_;
  std::size_t count_ = 0;
  std::vector<SSTable::IndexPoint> index_;
  bool finished_ = false;
};

/// Writes sorted entries to one file; convenience for tests and flushes.
SSTablePtr write_sstable(const std::filesystem::path& dir, SSTableId id, const std::vector<Entry>& sorted,
                         IoStats* stats);

}  // namespace aha
