#include "aha/node_lsm.hpp"

#include <algorithm>
#include <map>

namespace aha {

std::uint64_t LevelPolicy::capacity(std::size_t level) const {
  if (level < 2) return 0;
  long double cap = static_cast<long double>(base_level_bytes);
  for (std::size_t i = 2; i < level; ++i) cap *= static_cast<long double>(size_ratio);
  if (cap > 1.8e19L) return UINT64_MAX;
  return static_cast<std::uint64_t>(cap);
}

void LevelPolicy::validate() const {
  if (size_ratio < 2) throw InputError("size_ratio must be >= 2");
  if (l1_run_trigger < 2) throw InputError("l1_run_trigger must be >= 2");
  if (base_level_bytes == 0) throw InputError("base_level_bytes must be positive");
}

NodeLsm::NodeLsm(std::size_t max_levels_in, LevelPolicy policy_in, bool is_root_in)
    : max_levels(max_levels_in), is_root(is_root_in), policy(policy_in) {
  if (max_levels == 0) throw InputError("max_levels must be >= 1");
  policy.validate();
  levels.resize(max_levels);
  compact_pointer.resize(max_levels);
}

std::uint64_t NodeLsm::level_bytes(std::size_t level) const {
  std::uint64_t b = 0;
  for (const auto& t : levels.at(level - 1)) b += t->byte_size();
  return b;
}

std::size_t NodeLsm::table_count() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.size();
  return n;
}

std::uint64_t NodeLsm::total_bytes() const {
  std::uint64_t b = 0;
  for (std::size_t i = 1; i <= levels.size(); ++i) b += level_bytes(i);
  return b;
}

bool NodeLsm::level_full(std::size_t level) const {
  if (level > levels.size()) return false;
  if (level == 1) return levels[0].size() >= policy.l1_run_trigger;
  return level_bytes(level) > policy.capacity(level);
}

std::vector<SSTablePtr> NodeLsm::all_tables() const {
  std::vector<SSTablePtr> out;
  for (const auto& l : levels) out.insert(out.end(), l.begin(), l.end());
  return out;
}

bool NodeLsm::contains_table(SSTableId id) const {
  for (const auto& l : levels) {
    for (const auto& t : l) {
      if (t->id() == id) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

void sort_level(std::vector<SSTablePtr>& level) {
  std::sort(level.begin(), level.end(),
            [](const SSTablePtr& a, const SSTablePtr& b) { return a->min_key() < b->min_key(); });
}

}  // namespace

NodeLsm apply_edit(const NodeLsm& n, const LsmEdit& edit) {
  NodeLsm out = n;
  std::size_t found = 0;
  std::map<SSTableId, const std::vector<SSTablePtr>*> repl;
  for (const auto& [id, tables] : edit.replaced) repl.emplace(id, &tables);
  std::size_t replaced_found = 0;
  for (std::size_t li = 0; li < out.levels.size(); ++li) {
    auto& level = out.levels[li];
    std::vector<SSTablePtr> kept;
    kept.reserve(level.size());
    for (auto& t : level) {
      if (edit.removed.count(t->id())) {
        ++found;
        continue;
      }
      auto r = repl.find(t->id());
      if (r != repl.end()) {
        ++replaced_found;
        kept.insert(kept.end(), r->second->begin(), r->second->end());
        continue;
      }
      kept.push_back(t);
    }
    level = std::move(kept);
  }
  if (found != edit.removed.size() || replaced_found != edit.replaced.size()) {
    throw InputError("LsmEdit refers to tables missing from the target version");
  }
  if (!edit.new_runs.empty()) {
    auto& l1 = out.levels.at(0);
    l1.insert(l1.begin(), edit.new_runs.rbegin(), edit.new_runs.rend());
  }
  if (!edit.outputs.empty()) {
    if (edit.output_level == 0) throw InputError("LsmEdit outputs without a level");
    if (edit.output_level > out.levels.size()) {
      out.levels.resize(edit.output_level);
      out.compact_pointer.resize(edit.output_level);
    }
    auto& level = out.levels[edit.output_level - 1];
    if (edit.output_level == 1) {
      level.insert(level.begin(), edit.outputs.rbegin(), edit.outputs.rend());
    } else {
      level.insert(level.end(), edit.outputs.begin(), edit.outputs.end());
    }
  }
  for (std::size_t li = 1; li < out.levels.size(); ++li) sort_level(out.levels[li]);
  // Drop empty levels the root grew beyond its soft limit.
  while (out.levels.size() > out.max_levels && out.levels.back().empty()) {
    out.levels.pop_back();
    out.compact_pointer.pop_back();
  }
  if (edit.compact_pointer) {
    auto [lvl, key] = *edit.compact_pointer;
    if (lvl >= 1 && lvl <= out.compact_pointer.size()) out.compact_pointer[lvl - 1] = key;
  }
  if (edit.guards_version) out.guards_version = edit.guards_version;
  ++out.version_tag;
  return out;
}

NodeLsm lsm_add_runs(const NodeLsm& n, const std::vector<SSTablePtr>& runs) {
  LsmEdit e;
  e.new_runs = runs;
  return apply_edit(n, e);
}

bool lsm_needs_compaction(const NodeLsm& n) {
  for (std::size_t lvl = 1; lvl < n.levels.size(); ++lvl) {
    if (n.level_full(lvl)) return true;
  }
  return false;
}

Overflow lsm_overflow(const NodeLsm& n) {
  if (n.is_root) {
    if (n.levels.size() > n.max_levels || n.level_full(n.max_levels)) return Overflow::Soft;
    return Overflow::None;
  }
  return n.level_full(n.max_levels) ? Overflow::Hard : Overflow::None;
}

// ---------------------------------------------------------------------------
// Output construction
// ---------------------------------------------------------------------------

RunBuilder::RunBuilder(LsmContext& ctx, const std::vector<std::string>* cut_keys) : ctx_(ctx), cut_keys_(cut_keys) {}

void RunBuilder::cut() {
  if (!writer_ || writer_->empty()) return;
  auto t = writer_->finish();
  bytes_written_ += t->byte_size();
  out_.push_back(std::move(t));
  writer_.reset();
}

void RunBuilder::add(const EntryView& e) {
  bool crossed = false;
  if (cut_keys_ != nullptr) {
    while (next_cut_ < cut_keys_->size() && (*cut_keys_)[next_cut_] <= e.key) {
      ++next_cut_;
      crossed = true;
    }
  }
  if (writer_ && (crossed || writer_->estimated_bytes() >= ctx_.sstable_target)) cut();
  if (!writer_) writer_.emplace(ctx_.dir, ctx_.next_id(), ctx_.stats);
  writer_->add(e);
}

std::vector<SSTablePtr> RunBuilder::finish() {
  cut();
  return std::move(out_);
}

std::vector<SSTablePtr> write_merged(std::vector<std::unique_ptr<EntrySource>> sources, LsmContext& ctx,
                                     const std::vector<std::string>* cut_keys, bool drop_tombstones) {
  RunBuilder b(ctx, cut_keys);
  for (MergingIterator it(std::move(sources)); it.valid(); it.next()) {
    if (drop_tombstones && it.entry().is_tombstone()) continue;
    b.add(it.entry());
  }
  return b.finish();
}

bool within_one_guard(const SSTable& t, const std::vector<std::string>& guards) {
  auto g = std::upper_bound(guards.begin(), guards.end(), t.min_key());
  return g == guards.end() || t.max_key() < *g;
}

// ---------------------------------------------------------------------------
// Compaction
// ---------------------------------------------------------------------------

namespace {

std::vector<SSTablePtr> overlapping(const std::vector<SSTablePtr>& level, std::string_view lo, std::string_view hi) {
  std::vector<SSTablePtr> out;
  for (const auto& t : level) {
    if (t->max_key() >= lo && t->min_key() <= hi) out.push_back(t);
  }
  return out;
}

}  // namespace

LsmEdit lsm_plan_compaction(const NodeLsm& n, const std::vector<std::string>* guards,
                            std::optional<std::uint64_t> guards_version, LsmContext& ctx) {
  LsmEdit edit;
  std::size_t from = 0;
  if (n.levels.size() >= 2 && n.level_full(1)) {
    from = 1;
  } else {
    double best = 1.0;
    for (std::size_t lvl = 2; lvl < n.levels.size(); ++lvl) {
      double score = static_cast<double>(n.level_bytes(lvl)) / static_cast<double>(n.policy.capacity(lvl));
      if (score > best) {
        best = score;
        from = lvl;
      }
    }
  }
  if (from == 0) return edit;
  std::size_t to = from + 1;
  const auto& next_level = n.levels[to - 1];

  std::vector<SSTablePtr> inputs;
  if (from == 1) {
    inputs = n.levels[0];
  } else {
    const auto& level = n.levels[from - 1];
    const std::string& ptr = n.compact_pointer[from - 1];
    auto it = std::find_if(level.begin(), level.end(), [&](const SSTablePtr& t) { return t->min_key() > ptr; });
    if (it == level.end()) it = level.begin();
    inputs.push_back(*it);
    edit.compact_pointer = std::make_pair(from, (*it)->max_key());
  }
  std::string lo = inputs.front()->min_key(), hi = inputs.front()->max_key();
  for (const auto& t : inputs) {
    lo = std::min(lo, t->min_key());
    hi = std::max(hi, t->max_key());
  }
  auto lower = overlapping(next_level, lo, hi);

  if (from >= 2 && lower.empty() && (guards == nullptr || within_one_guard(*inputs.front(), *guards))) {
    // Trivial move: no rewrite.
    edit.removed.insert(inputs.front()->id());
    edit.output_level = to;
    edit.outputs = inputs;
    if (guards != nullptr) edit.guards_version = guards_version;
    return edit;
  }

  std::vector<std::unique_ptr<EntrySource>> sources;
  for (const auto& t : inputs) sources.push_back(std::make_unique<SSTableSource>(t, KeyRange::all()));
  for (const auto& t : lower) sources.push_back(std::make_unique<SSTableSource>(t, KeyRange::all()));
  edit.outputs = write_merged(std::move(sources), ctx, guards);
  edit.output_level = to;
  for (const auto& t : inputs) edit.removed.insert(t->id());
  for (const auto& t : lower) edit.removed.insert(t->id());
  if (guards != nullptr) edit.guards_version = guards_version;
  return edit;
}

NodeLsm lsm_internal_compact(const NodeLsm& n, const std::vector<std::string>* guards,
                             std::optional<std::uint64_t> guards_version, LsmContext& ctx) {
  auto edit = lsm_plan_compaction(n, guards, guards_version, ctx);
  if (edit.empty()) return n;
  auto out = apply_edit(n, edit);
  for (const auto& t : n.all_tables()) {
    if (edit.removed.count(t->id()) && !out.contains_table(t->id())) t->mark_obsolete();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reads
// ---------------------------------------------------------------------------

std::size_t lsm_sources(const NodeLsm& n, const KeyRange& range, std::vector<std::unique_ptr<EntrySource>>& out) {
  std::size_t touched = 0;
  for (std::size_t li = 0; li < n.levels.size(); ++li) {
    const auto& level = n.levels[li];
    if (li == 0) {
      for (const auto& t : level) {
        if (range.overlaps_closed(t->min_key(), t->max_key())) {
          out.push_back(std::make_unique<SSTableSource>(t, range));
          ++touched;
        }
      }
      continue;
    }
    auto it = std::lower_bound(level.begin(), level.end(), range.lo,
                               [](const SSTablePtr& t, const std::string& lo) { return t->max_key() < lo; });
    for (; it != level.end() && (!range.hi || (*it)->min_key() < *range.hi); ++it) {
      out.push_back(std::make_unique<SSTableSource>(*it, range));
      ++touched;
    }
  }
  return touched;
}

std::vector<Entry> lsm_range(const NodeLsm& n, const KeyRange& range) {
  std::vector<std::unique_ptr<EntrySource>> sources;
  lsm_sources(n, range, sources);
  return merge_newest(std::move(sources), /*drop_tombstones=*/false);
}

std::pair<std::vector<SSTablePtr>, NodeLsm> lsm_extract_bottom(const NodeLsm& n) {
  NodeLsm rest = n;
  std::vector<SSTablePtr> bottom = std::move(rest.levels.back());
  if (rest.levels.size() > rest.max_levels) {
    rest.levels.pop_back();
    rest.compact_pointer.pop_back();
  } else {
    rest.levels.back().clear();
  }
  ++rest.version_tag;
  return {std::move(bottom), std::move(rest)};
}

}  // namespace aha
