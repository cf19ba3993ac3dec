#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aha/io_stats.hpp"
#include "aha/merge.hpp"
#include "aha/sstable.hpp"
#include "aha/types.hpp"

namespace aha {

/// Compaction triggers for one NodeLsm. L1 is triggered by run count, deeper
/// levels by bytes: capacity(L2) = base_level_bytes, then x size_ratio.
struct LevelPolicy {
  std::size_t l1_run_trigger = 4;
  std::size_t size_ratio = 10;
  std::uint64_t base_level_bytes = 10ull << 20;

  std::uint64_t capacity(std::size_t level) const;
  void validate() const;
};

/// Where compaction outputs go and how big they get.
struct LsmContext {
  std::filesystem::path dir;
  std::function<SSTableId()> next_id;
  std::size_t sstable_target = 2u << 20;
  IoStats* stats = nullptr;
};

/// A multi-level LSM without MemTables, attached to one tree node. Values are
/// immutable once published; every change produces a new version.
///
/// levels[0] is L1: runs that may overlap, newest first. levels[i >= 1] hold
/// disjoint tables sorted by key.
struct NodeLsm {
  std::vector<std::vector<SSTablePtr>> levels;
  std::size_t max_levels = 2;
  bool is_root = false;
  LevelPolicy policy;
  std::optional<std::uint64_t> guards_version;
  std::uint64_t version_tag = 0;
  std::vector<std::string> compact_pointer;  // per level, round-robin start key

  NodeLsm() = default;
  NodeLsm(std::size_t max_levels, LevelPolicy policy, bool is_root = false);

  std::size_t level_count() const { return levels.size(); }
  std::uint64_t level_bytes(std::size_t level) const;  // 1-based
  std::size_t table_count() const;
  std::uint64_t total_bytes() const;
  bool empty() const { return table_count() == 0; }
  bool level_full(std::size_t level) const;  // 1-based
  std::vector<SSTablePtr> all_tables() const;
  /// Deepest level index (1-based) that exists in this version.
  std::size_t bottom_level() const { return levels.size(); }
  bool contains_table(SSTableId id) const;
};

using NodeLsmPtr = std::shared_ptr<const NodeLsm>;

enum class Overflow { None, Hard, Soft };

/// A change to a NodeLsm expressed against table ids, so it can be replayed
/// onto a newer version than the one it was computed from.
struct LsmEdit {
  std::set<SSTableId> removed;
  std::size_t output_level = 0;  // 1-based; 0 = no outputs
  std::vector<SSTablePtr> outputs;
  std::vector<SSTablePtr> new_runs;  // prepended to L1, last = newest
  // In-place rewrites: the old table's slot is taken by the new tables.
  std::vector<std::pair<SSTableId, std::vector<SSTablePtr>>> replaced;
  std::optional<std::pair<std::size_t, std::string>> compact_pointer;
  std::optional<std::uint64_t> guards_version;

  bool empty() const { return removed.empty() && outputs.empty() && new_runs.empty() && replaced.empty(); }
};

/// Replays edit on n. Throws InputError if a removed id is missing.
NodeLsm apply_edit(const NodeLsm& n, const LsmEdit& edit);

/// Adds runs to L1 (arrival order; the last one is newest).
NodeLsm lsm_add_runs(const NodeLsm& n, const std::vector<SSTablePtr>& runs);

/// True if some level can push data into the next one without exceeding
/// max_levels.
bool lsm_needs_compaction(const NodeLsm& n);

/// Computes one compaction unit (writes the output files) without touching n.
/// guards are the routing keys of the node page; outputs never span one.
LsmEdit lsm_plan_compaction(const NodeLsm& n, const std::vector<std::string>* guards,
                            std::optional<std::uint64_t> guards_version, LsmContext& ctx);

/// One internal compaction unit; returns n unchanged when nothing is due.
NodeLsm lsm_internal_compact(const NodeLsm& n, const std::vector<std::string>* guards,
                             std::optional<std::uint64_t> guards_version, LsmContext& ctx);

Overflow lsm_overflow(const NodeLsm& n);

/// Newest-wins entries with key in range (tombstones included).
std::vector<Entry> lsm_range(const NodeLsm& n, const KeyRange& range);

/// Appends one source per table overlapping range.
std::size_t lsm_sources(const NodeLsm& n, const KeyRange& range, std::vector<std::unique_ptr<EntrySource>>& out);

/// Bottom-level tables plus the version without them.
std::pair<std::vector<SSTablePtr>, NodeLsm> lsm_extract_bottom(const NodeLsm& n);

/// Sorted tables, one file per target size, never spanning a cut key.
class RunBuilder {
 public:
  RunBuilder(LsmContext& ctx, const std::vector<std::string>* cut_keys);
  void add(const EntryView& e);
  std::vector<SSTablePtr> finish();
  std::uint64_t bytes_written() const { return bytes_written_; }

 private:
  void cut();
  LsmContext& ctx_;
  const std::vector<std::string>* cut_keys_;
  std::size_t next_cut_ = 0;
  std::optional<SSTableWriter> writer_;
  std::vector<SSTablePtr> out_;
  std::uint64_t bytes_written_ = 0;
};

/// Merges the sources newest-wins into tables cut at target size and at
/// cut_keys. Tombstones survive unless drop_tombstones.
std::vector<SSTablePtr> write_merged(std::vector<std::unique_ptr<EntrySource>> sources, LsmContext& ctx,
                                     const std::vector<std::string>* cut_keys, bool drop_tombstones = false);

/// True if [min, max] of t lies strictly inside one interval of guards.
bool within_one_guard(const SSTable& t, const std::vector<std::string>& guards);

}  // namespace aha
