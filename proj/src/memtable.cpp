#include "aha/memtable.hpp"

#include <mutex>

namespace aha {

MemTable::PutResult MemTable::put(SeqAllocator& seqs, std::string_view key, EntryKind kind, std::string_view value,
                                  SeqNo* assigned) {
  validate_key(key);
  validate_value(value);
  if (kind == EntryKind::Tombstone && !value.empty()) throw InputError("tombstone with a value");
  std::size_t add = 17 + key.size() + value.size();

  std::unique_lock lock(mu_);
  if (immutable()) return PutResult::NeedsRotation;
  auto it = map_.find(key);
  std::size_t replaced = it == map_.end() ? 0 : it->second.encoded_size();
  if (!map_.empty() && bytes_ - replaced + add > budget_) return PutResult::NeedsRotation;
  SeqNo seq = seqs.allocate();
  if (assigned != nullptr) *assigned = seq;
  if (it == map_.end()) {
    map_.emplace(std::string(key), Entry{std::string(key), seq, kind, std::string(value)});
  } else {
    it->second = Entry{std::string(key), seq, kind, std::string(value)};
  }
  bytes_ = bytes_ - replaced + add;
  return PutResult::Accepted;
}

std::vector<Entry> MemTable::range(const KeyRange& r) const {
  std::shared_lock lock(mu_);
  std::vector<Entry> out;
  auto it = map_.lower_bound(r.lo);
  for (; it != map_.end() && r.contains(it->first); ++it) out.push_back(it->second);
  return out;
}

bool MemTable::intersects(const KeyRange& r) const {
  std::shared_lock lock(mu_);
  auto it = map_.lower_bound(r.lo);
  return it != map_.end() && r.contains(it->first);
}

std::size_t MemTable::bytes() const {
  std::shared_lock lock(mu_);
  return bytes_;
}

std::size_t MemTable::size() const {
  std::shared_lock lock(mu_);
  return map_.size();
}

std::optional<SSTablePtr> flush_memtable(const MemTable& imm, const std::filesystem::path& dir, SSTableId id,
                                         IoStats* stats) {
  auto entries = imm.entries();
  if (entries.empty()) return std::nullopt;
  return write_sstable(dir, id, entries, stats);
}

}  // namespace aha
