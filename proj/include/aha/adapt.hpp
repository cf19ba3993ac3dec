#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <set>

#include "aha/hotspot.hpp"
#include "aha/tree.hpp"

namespace aha {

enum class EngineState { W0, R, WPlus };

const char* to_string(EngineState s);

/// True if n still holds hotspot data in a NodeLsm, or is a leaf inside a
/// hotspot whose data is not yet in pages.
bool node_needs_adaptation(const Node& n, const HotspotSet& hs);

/// True once no node on a hotspot path needs adaptation.
bool tree_adapted(const TreeVersion& v, const HotspotSet& hs);

/// Pushes every hotspot entry of a non-leaf NodeLsm to its children. Tables
/// keep their cold part in place (same level, same position).
void hotspot_empty(TreeDraft& d, TreeContext& ctx, NodeId id);

/// First step of down-split: the bottom tables become single-table children
/// and the leaf becomes a non-leaf keeping its upper levels. A leaf with
/// fewer than two bottom tables is converted to pages directly.
void leaf_transform_downsplit(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Merges the whole leaf NodeLsm into page leaves.
void leaf_transform_sidesplit(TreeDraft& d, TreeContext& ctx, NodeId id);

/// One adaptation unit for node id under ctx.hotspots; returns false when
/// the node needed nothing.
bool adapt_node(TreeDraft& d, TreeContext& ctx, NodeId id);

/// Node ids discovered by queries, each queued at most once.
class AdaptQueue {
 public:
  bool push(NodeId id);
  std::optional<NodeId> pop();
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::deque<NodeId> q_;
  std::set<NodeId> queued_;
};

}  // namespace aha
