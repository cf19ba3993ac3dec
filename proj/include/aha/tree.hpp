#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "aha/hotspot.hpp"
#include "aha/leaf_pages.hpp"
#include "aha/node_lsm.hpp"
#include "aha/types.hpp"

namespace aha {

enum class NodeKind : std::uint8_t { Leaf, NonLeaf };

/// One tree node: a page (routing keys and children, or a leaf page chain)
/// paired with an optional NodeLsm. Node values are immutable once installed
/// in a TreeVersion; the leaf chain is the one mutable part and is guarded by
/// its own latch.
struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::Leaf;
  KeyRange covered;
  std::vector<std::string> routing_keys;
  std::vector<NodeId> children;  // routing_keys.size() + 1 entries
  std::shared_ptr<const NodeLsm> lsm;
  LeafChainPtr chain;
  std::uint64_t page_version = 0;  // changes whenever routing_keys change

  bool is_leaf() const { return kind == NodeKind::Leaf; }
  bool has_lsm_data() const { return lsm && !lsm->empty(); }
  /// Index of the child whose range holds key.
  std::size_t child_slot(std::string_view key) const;
  KeyRange child_range(std::size_t slot) const;
};

using NodePtr = std::shared_ptr<const Node>;

/// Copy-on-write map NodeId -> NodePtr in fixed-size chunks, so a new
/// version shares every chunk it does not touch.
class NodeTable {
 public:
  NodePtr get(NodeId id) const;
  void set(NodeId id, NodePtr n);
  std::size_t size() const { return size_; }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& c : chunks_) {
      if (!c) continue;
      for (const auto& n : *c) {
        if (n) f(*n);
      }
    }
  }

 private:
  static constexpr std::size_t kChunk = 256;
  std::vector<std::shared_ptr<std::vector<NodePtr>>> chunks_;
  std::vector<bool> owned_;  // chunk copied since the last freeze
  std::size_t size_ = 0;
  friend struct TreeVersion;
  void freeze() { owned_.assign(chunks_.size(), false); }
};

/// Immutable snapshot of the whole tree.
struct TreeVersion {
  NodeId root = 0;
  NodeTable nodes;
  std::uint64_t epoch = 0;

  const Node& node(NodeId id) const;
  NodePtr find(NodeId id) const { return nodes.get(id); }
  const Node& root_node() const { return node(root); }
  std::size_t node_count() const { return nodes.size(); }
  std::size_t height() const;
  void freeze() { nodes.freeze(); }
};

using TreeVersionPtr = std::shared_ptr<const TreeVersion>;

/// A node visited by a range query and the part of the query inside it.
struct RouteStep {
  NodeId id;
  KeyRange sub;
  std::size_t depth;
};

/// Every node whose covered range intersects range, root first, children
/// left to right (depth-first).
std::vector<RouteStep> route_range(const TreeVersion& v, const KeyRange& range);

/// Root-to-leaf path for key.
std::vector<NodeId> route_key(const TreeVersion& v, std::string_view key);

/// Parent of id, found by descending from the root; nullopt for the root.
std::optional<NodeId> parent_of(const TreeVersion& v, NodeId id);

enum class LeafStrategy { DownSplit, SideSplit };

struct TreeConfig {
  std::size_t node_max_levels = 2;
  LevelPolicy policy;
  std::size_t nonleaf_capacity = 256;  // routing keys per non-leaf page
  LeafStrategy leaf_strategy = LeafStrategy::DownSplit;
};

/// Everything a structural operation needs besides the tree itself.
struct TreeContext {
  TreeConfig cfg;
  LsmContext* lsm = nullptr;
  LeafStore* leaves = nullptr;
  IoStats* stats = nullptr;
  std::function<NodeId()> next_node_id;
  std::function<std::uint64_t()> next_page_version;
  HotspotSetPtr hotspots;  // may be null
  // Data pushed into a leaf that only has pages is merged into the pages
  // (read-optimized states) rather than given a fresh NodeLsm.
  bool merge_into_pages = false;

  std::vector<std::string> hotspot_bounds() const;
  NodeLsm empty_lsm() const { return NodeLsm(cfg.node_max_levels, cfg.policy, false); }
};

/// Pending structural change over a base version. Nodes are copied on first
/// edit; nothing is visible to readers until the engine commits the draft.
///
/// Changes to the root's NodeLsm are also recorded as LsmEdits so they can be
/// replayed onto whatever root NodeLsm is current at commit time (flushes may
/// have added runs in between).
class TreeDraft {
 public:
  explicit TreeDraft(TreeVersionPtr base);

  const TreeVersion& base() const { return *base_; }
  TreeVersionPtr base_ptr() const { return base_; }
  NodeId root() const { return root_; }
  void set_root(NodeId id) { root_ = id; }

  bool exists(NodeId id) const;
  const Node& get(NodeId id) const;
  Node& edit(NodeId id);
  Node& add(Node n);
  void erase(NodeId id);
  std::optional<NodeId> parent_of(NodeId id) const;

  /// Applies e to the root's NodeLsm in this draft and records it.
  void edit_root_lsm(const LsmEdit& e);

  /// Marks a node for a follow-up maintenance check after commit.
  void touch(NodeId id) { touched.insert(id); }

  bool empty() const { return modified_.empty() && erased_.empty() && root_edits.empty() && root_ == base_->root; }

  /// New version: base + this draft, with the root NodeLsm rebuilt by
  /// replaying root_edits onto current_root_lsm.
  TreeVersionPtr build(const TreeVersion& current, std::uint64_t epoch) const;

  std::vector<SSTablePtr> obsolete;           // unlinked once unreferenced after commit
  std::vector<SSTablePtr> created;            // unlinked if the draft is abandoned
  std::vector<LeafChainPtr> retired;          // flagged after commit
  std::vector<std::unique_lock<std::shared_mutex>> held_latches;  // released after commit
  std::vector<LsmEdit> root_edits;
  std::set<NodeId> touched;

 private:
  TreeVersionPtr base_;
  NodeId root_;
  std::map<NodeId, std::shared_ptr<Node>> modified_;
  std::set<NodeId> erased_;
};

// ---------------------------------------------------------------------------
// Structural operations. All of them read and write through a draft.
// ---------------------------------------------------------------------------

/// Cut keys for SSTables written on behalf of node n: its routing keys plus
/// hotspot bounds.
std::vector<std::string> node_cut_keys(const Node& n, const TreeContext& ctx);

/// One guarded internal compaction unit of a non-root NodeLsm. Returns false
/// when nothing was due.
bool compact_node(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Moves the bottom level of a non-leaf NodeLsm into its children. Tables
/// that lie inside one routing interval move by pointer; others are
/// rewritten (counted in migration_rewrite_bytes).
void node_empty(TreeDraft& d, TreeContext& ctx, NodeId parent);

/// Hands sorted, disjoint tables to children: slot i of per_child goes to
/// child i's L1, or is merged into the child's pages when the child is a
/// page-only leaf and ctx.merge_into_pages is set.
void distribute_to_children(TreeDraft& d, TreeContext& ctx, NodeId parent,
                            std::vector<std::vector<SSTablePtr>> per_child);

/// Merges the leaf NodeLsm into sorted tables and replaces the leaf with one
/// sibling per table (a single table is split at its median key).
std::vector<NodeId> split_leaf(TreeDraft& d, TreeContext& ctx, NodeId leaf);

/// Splits a non-leaf page at its median routing key. The root keeps its
/// NodeLsm at the new root; other nodes merge theirs across the two halves.
std::pair<NodeId, NodeId> split_nonleaf(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Splits non-leaf pages from id upward until every page is within capacity.
void fix_nonleaf_overflow(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Replaces old_id in its parent by siblings (ascending, covering old's
/// range) and splits overfull ancestors.
void replace_with_siblings(TreeDraft& d, TreeContext& ctx, NodeId old_id, std::vector<Node> siblings);

/// Turns a root without children into a non-leaf whose children each own one
/// bottom-level table of the root NodeLsm. Only metadata is read when the
/// bottom level is sorted and holds at least two tables.
void bootstrap_from_root(TreeDraft& d, TreeContext& ctx);

/// Splits a page leaf whose chain exceeds the per-leaf page limit by
/// partitioning its page list.
void page_leaf_split(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Merges a page leaf's NodeLsm into its pages and drops the NodeLsm.
void merge_lsm_into_pages(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Rewrites all of a leaf's data as page leaves (one or more siblings).
void convert_to_pages(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Newest-wins entries of a set of tables (tombstones included).
std::vector<Entry> read_tables(const std::vector<SSTablePtr>& tables, const KeyRange& range = KeyRange::all());

/// A NodeLsm (non-root shape) whose bottom level holds tables.
std::shared_ptr<NodeLsm> lsm_with_bottom(const TreeContext& ctx, std::vector<SSTablePtr> tables);

/// Leaf siblings each owning one of the sorted, disjoint tables; together
/// they cover range.
std::vector<Node> leaves_for_tables(TreeContext& ctx, const std::vector<SSTablePtr>& tables, const KeyRange& range);

/// Builds page-leaf siblings from sorted tombstone-free entries; the first
/// covers from range.lo, the last to range.hi.
std::vector<Node> build_page_leaves(TreeContext& ctx, const std::vector<Entry>& entries, const KeyRange& range);

}  // namespace aha
