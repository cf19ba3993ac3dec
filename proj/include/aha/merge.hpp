#pragma once

#include <memory>
#include <vector>

#include "aha/sstable.hpp"
#include "aha/types.hpp"

namespace aha {

/// A sorted stream of entries (key ascending, at most one entry per key).
class EntrySource {
 public:
  virtual ~EntrySource() = default;
  virtual bool valid() const = 0;
  virtual const EntryView& entry() const = 0;
  virtual void next() = 0;
};

class SSTableSource final : public EntrySource {
 public:
  SSTableSource(SSTablePtr table, const KeyRange& range) : table_(std::move(table)), cursor_(table_->seek(range)) {}
  bool valid() const override { return cursor_.valid(); }
  const EntryView& entry() const override { return cursor_.entry(); }
  void next() override { cursor_.next(); }

 private:
  SSTablePtr table_;
  SSTable::Cursor cursor_;
};

/// Walks a caller-owned sorted vector; the vector must outlive the source.
class VectorSource final : public EntrySource {
 public:
  explicit VectorSource(const std::vector<Entry>& v) : v_(v) { load(); }
  bool valid() const override { return i_ < v_.size(); }
  const EntryView& entry() const override { return cur_; }
  void next() override {
    ++i_;
    load();
  }

 private:
  void load() {
    if (i_ < v_.size()) cur_ = view_of(v_[i_]);
  }
  const std::vector<Entry>& v_;
  std::size_t i_ = 0;
  EntryView cur_;
};

/// K-way merge emitting, per key, only the entry with the highest seq.
/// Tombstones are emitted; callers decide whether to drop them.
class MergingIterator {
 public:
  explicit MergingIterator(std::vector<std::unique_ptr<EntrySource>> sources);

  bool valid() const { return !heap_.empty(); }
  const EntryView& entry() const { return heap_.front()->entry(); }
  void next();

 private:
  void push(EntrySource* s);
  EntrySource* pop();
  std::vector<std::unique_ptr<EntrySource>> owned_;
  std::vector<EntrySource*> heap_;
  std::string last_key_;
};

/// Materializes a merge; drop_tombstones removes deleted keys entirely.
std::vector<Entry> merge_newest(std::vector<std::unique_ptr<EntrySource>> sources, bool drop_tombstones);

/// Merges already-materialized sorted runs newest-wins.
std::vector<Entry> merge_runs(const std::vector<std::vector<Entry>>& runs, bool drop_tombstones);

}  // namespace aha
