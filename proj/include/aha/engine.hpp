#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "aha/adapt.hpp"
#include "aha/hotspot.hpp"
#include "aha/io_stats.hpp"
#include "aha/leaf_pages.hpp"
#include "aha/manifest.hpp"
#include "aha/memtable.hpp"
#include "aha/node_lsm.hpp"
#include "aha/page_pool.hpp"
#include "aha/tree.hpp"

namespace aha {

enum class EngineMode { Aha, PureLsm, PureBtree };

const char* to_string(EngineMode m);
EngineMode parse_engine_mode(std::string_view s);  // "aha" | "pure-lsm" | "pure-btree"

struct EngineConfig {
  std::filesystem::path data_dir;
  EngineMode mode = EngineMode::Aha;
  std::size_t root_max_levels = 3;
  std::size_t node_max_levels = 2;
  std::size_t memtable_budget = 4u << 20;
  std::size_t sstable_target = 2u << 20;
  std::size_t page_size = 4096;
  std::size_t pool_pages = 4096;
  std::size_t max_leaf_pages = 16;
  std::size_t nonleaf_capacity = 256;
  LevelPolicy policy;
  LeafStrategy leaf_strategy = LeafStrategy::DownSplit;
  // false: no maintenance threads; callers drive maintenance_step_* and
  // rotation flushes inline.
  bool background = true;

  void validate() const;
};

enum class Workload { ReadHeavy, WriteHeavy };

struct QueryStats {
  std::uint64_t nodelsm_probes = 0;  // NodeLsms with a table overlapping the routed subrange
  std::uint64_t sstables_touched = 0;
  std::uint64_t pages_read = 0;
  std::uint64_t entries_emitted = 0;

  QueryStats& operator+=(const QueryStats& o) {
    nodelsm_probes += o.nodelsm_probes;
    sstables_touched += o.sstables_touched;
    pages_read += o.pages_read;
    entries_emitted += o.entries_emitted;
    return *this;
  }
};

struct EngineStats {
  EngineState state = EngineState::W0;
  bool adapting = false;
  std::uint64_t completed_adaptations = 0;
  std::uint64_t adaptation_units = 0;
  std::uint64_t tree_units = 0;
  std::uint64_t root_units = 0;
  std::size_t node_count = 0;
  std::size_t height = 0;
  std::size_t page_leaves = 0;
  std::size_t root_tables = 0;
  std::size_t memtable_entries = 0;
  std::uint64_t logical_bytes = 0;
  std::uint64_t physical_bytes = 0;
  std::uint64_t migration_rewrite_bytes = 0;
  std::uint64_t sst_data_reads = 0;
  double write_amplification = 0;
  SeqNo last_seq = 0;
};

struct AuditReport {
  std::vector<std::string> problems;
  std::size_t entries_checked = 0;
  bool ok() const { return problems.empty(); }
};

using KeyValue = std::pair<std::string, std::string>;

/// The adaptive index. Thread-safe: any number of reader and writer threads;
/// structure is changed only by the root role (flush, root compaction) and
/// the tree role (everything below the root NodeLsm, adaptation).
class Engine {
 public:
  /// Loads dir/MANIFEST.aha, or starts a fresh engine in an empty directory.
  static std::unique_ptr<Engine> open(EngineConfig cfg);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Flushes MemTables, drains maintenance and checkpoints. Idempotent.
  void close();
  void checkpoint();

  void put(std::string_view key, std::string_view value);
  void remove(std::string_view key);
  std::optional<std::string> get(std::string_view key, QueryStats* qs = nullptr);
  /// Live pairs with lo <= key < hi, ascending. Throws InputError unless lo < hi.
  std::vector<KeyValue> range(std::string_view lo, std::string_view hi, QueryStats* qs = nullptr);
  std::vector<KeyValue> scan(const KeyRange& r, QueryStats* qs = nullptr);

  void set_hotspots(std::vector<KeyRange> ranges);
  EngineState transition(Workload w);
  EngineState state() const;
  bool adapting() const;
  EngineStats stats() const;
  const IoStats& io() const { return io_; }
  const EngineConfig& config() const { return cfg_; }
  TreeVersionPtr tree_snapshot() const;
  HotspotSetPtr hotspots() const;

  /// One root unit (flush or root compaction); false when idle.
  bool maintenance_step_root();
  /// One tree unit in priority order; false when idle.
  bool maintenance_step_tree();
  /// Runs both roles until neither has work. Usable in either mode.
  void run_maintenance();
  /// Freezes a nonempty MemTable and flushes it.
  void flush();

  /// Tree well-formedness plus both freshness invariants.
  AuditReport audit() const;

  /// Test hook: the next flush writes its table but never installs it.
  void drop_next_flush() { drop_next_flush_ = true; }

 private:
  explicit Engine(EngineConfig cfg);

  struct Current {
    MemTablePtr mem;
    MemTablePtr imm;
    TreeVersionPtr tree;
  };

  void start();
  void load_or_init();
  void init_fresh();
  void load(const ManifestData& m);
  ManifestData snapshot_manifest() const;

  void write(std::string_view key, EntryKind kind, std::string_view value);
  bool direct_write(std::string_view key, EntryKind kind, std::string_view value);
  void rotate(const MemTablePtr& full);
  bool flush_imm();
  bool compact_root();
  bool root_overflow_unit();
  bool pending_unit();
  bool adapt_unit();
  bool completion_check();
  bool hot_in_memtables(const Current& c, const HotspotSet& hs) const;

  TreeContext make_ctx();
  void commit(TreeDraft& d);
  void abandon(TreeDraft& d);
  void request_check(NodeId id);
  void wake_root();
  void wake_tree();
  void root_loop();
  void tree_loop();
  void stop_threads();

  std::vector<Entry> read(const KeyRange& r, QueryStats* qs);

  EngineConfig cfg_;
  TreeConfig tree_cfg_;
  IoStats io_;
  SeqAllocator seqs_;
  std::atomic<SSTableId> next_sst_{1};
  std::atomic<NodeId> next_node_{1};
  std::atomic<std::uint64_t> next_page_version_{1};
  std::atomic<std::uint64_t> epoch_{0};
  LsmContext lsm_ctx_;
  std::unique_ptr<PageBufferPool> pool_;
  std::unique_ptr<LeafStore> leaves_;

  mutable std::shared_mutex state_mu_;  // guards everything below up to hs_
  Current cur_;
  EngineState state_ = EngineState::W0;
  bool adapting_ = false;
  EngineState adapt_from_ = EngineState::W0;
  HotspotSetPtr hs_;
  std::condition_variable_any imm_cv_;

  // Writers hold it shared from routing decision to insertion; routing
  // changes take it exclusively.
  std::shared_mutex admission_mu_;
  std::mutex root_role_mu_;
  std::mutex tree_mu_;
  std::mutex root_lsm_mu_;  // serializes root compaction with tree units on the root NodeLsm

  std::mutex work_mu_;
  std::set<NodeId> pending_;
  AdaptQueue adapt_q_;
  std::atomic<std::uint64_t> completed_adaptations_{0};
  std::atomic<std::uint64_t> adaptation_units_{0};
  std::atomic<std::uint64_t> tree_units_{0};
  std::atomic<std::uint64_t> root_units_{0};
  std::atomic<bool> drop_next_flush_{false};

  std::mutex wake_mu_;
  std::condition_variable root_cv_;
  std::condition_variable tree_cv_;
  bool root_wake_ = false;
  bool tree_wake_ = false;
  std::atomic<bool> stop_{false};
  std::thread root_thread_;
  std::thread tree_thread_;
  bool closed_ = true;  // until open succeeds
  std::mutex close_mu_;
};

}  // namespace aha
