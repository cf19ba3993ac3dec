#include "aha/merge.hpp"

#include <algorithm>

namespace aha {

namespace {

// Heap order: smallest key on top; for equal keys the highest seq.
struct HeapAfter {
  bool operator()(const EntrySource* a, const EntrySource* b) const {
    const auto& x = a->entry();
    const auto& y = b->entry();
    if (x.key != y.key) return x.key > y.key;
    return x.seq < y.seq;
  }
};

}  // namespace

MergingIterator::MergingIterator(std::vector<std::unique_ptr<EntrySource>> sources) : owned_(std::move(sources)) {
  for (auto& s : owned_) {
    if (s->valid()) heap_.push_back(s.get());
  }
  std::make_heap(heap_.begin(), heap_.end(), HeapAfter{});
}

void MergingIterator::push(EntrySource* s) {
  heap_.push_back(s);
  std::push_heap(heap_.begin(), heap_.end(), HeapAfter{});
}

EntrySource* MergingIterator::pop() {
  std::pop_heap(heap_.begin(), heap_.end(), HeapAfter{});
  EntrySource* s = heap_.back();
  heap_.pop_back();
  return s;
}

void MergingIterator::next() {
  // The key must be copied: advancing its source invalidates the view.
  last_key_.assign(entry().key);
  while (!heap_.empty() && heap_.front()->entry().key == last_key_) {
    EntrySource* s = pop();
    s->next();
    if (s->valid()) push(s);
  }
}

std::vector<Entry> merge_newest(std::vector<std::unique_ptr<EntrySource>> sources, bool drop_tombstones) {
  std::vector<Entry> out;
  for (MergingIterator it(std::move(sources)); it.valid(); it.next()) {
    if (drop_tombstones && it.entry().is_tombstone()) continue;
    out.push_back(it.entry().to_entry());
  }
  return out;
}

std::vector<Entry> merge_runs(const std::vector<std::vector<Entry>>& runs, bool drop_tombstones) {
  std::vector<std::unique_ptr<EntrySource>> sources;
  for (const auto& r : runs) sources.push_back(std::make_unique<VectorSource>(r));
  return merge_newest(std::move(sources), drop_tombstones);
}

}  // namespace aha
