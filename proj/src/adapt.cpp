#include "aha/adapt.hpp"

namespace aha {

const char* to_string(EngineState s) {
  switch (s) {
    case EngineState::W0:
      return "W0";
    case EngineState::R:
      return "R";
    case EngineState::WPlus:
      return "W+";
  }
  return "?";
}

namespace {

bool lsm_overlaps(const NodeLsm& lsm, const HotspotSet& hs) {
  for (const auto& level : lsm.levels) {
    for (const auto& t : level) {
      if (hs.overlaps_closed(t->min_key(), t->max_key())) return true;
    }
  }
  return false;
}

}  // namespace

bool node_needs_adaptation(const Node& n, const HotspotSet& hs) {
  if (hs.empty()) return false;
  if (n.is_leaf() && !n.chain && hs.overlaps(n.covered)) return true;
  return n.lsm && lsm_overlaps(*n.lsm, hs);
}

bool tree_adapted(const TreeVersion& v, const HotspotSet& hs) {
  for (const auto& h : hs.ranges) {
    for (const auto& step : route_range(v, h)) {
      if (node_needs_adaptation(v.node(step.id), hs)) return false;
    }
  }
  return true;
}

void hotspot_empty(TreeDraft& d, TreeContext& ctx, NodeId id) {
  const Node n = d.get(id);
  if (n.is_leaf() || !n.lsm || !ctx.hotspots) return;
  const HotspotSet& hs = *ctx.hotspots;
  auto cuts = node_cut_keys(n, ctx);
  auto hot = hs.hot_parts(n.covered);

  LsmEdit e;
  std::vector<std::unique_ptr<EntrySource>> hot_sources;
  for (const auto& level : n.lsm->levels) {
    for (const auto& t : level) {
      if (!hs.overlaps_closed(t->min_key(), t->max_key())) continue;
      RunBuilder cold(*ctx.lsm, &cuts);
      for (const auto& c : hs.cold_parts(t->meta().closed_range())) {
        for (auto cur = t->seek(c); cur.valid(); cur.next()) cold.add(cur.entry());
      }
      auto outs = cold.finish();
      if (outs.empty()) {
        e.removed.insert(t->id());
      } else {
        d.created.insert(d.created.end(), outs.begin(), outs.end());
        e.replaced.emplace_back(t->id(), std::move(outs));
      }
      for (const auto& h : hot) hot_sources.push_back(std::make_unique<SSTableSource>(t, h));
      d.obsolete.push_back(t);
    }
  }
  if (e.empty()) return;
  // Tombstones travel down: older versions may still sit below.
  auto outs = write_merged(std::move(hot_sources), *ctx.lsm, &cuts);
  d.created.insert(d.created.end(), outs.begin(), outs.end());
  std::vector<std::vector<SSTablePtr>> per_child(n.children.size());
  for (const auto& o : outs) per_child[n.child_slot(o->min_key())].push_back(o);

  if (id == d.root()) {
    d.edit_root_lsm(e);
  } else {
    Node& x = d.edit(id);
    x.lsm = std::make_shared<NodeLsm>(apply_edit(*x.lsm, e));
  }
  d.touch(id);
  distribute_to_children(d, ctx, id, std::move(per_child));
}

void leaf_transform_sidesplit(TreeDraft& d, TreeContext& ctx, NodeId id) { convert_to_pages(d, ctx, id); }

void leaf_transform_downsplit(TreeDraft& d, TreeContext& ctx, NodeId id) {
  const Node n = d.get(id);
  if (!n.is_leaf() || n.chain || id == d.root()) throw Error("down-split needs a non-root leaf without pages");
  if (!n.has_lsm_data()) {
    convert_to_pages(d, ctx, id);
    return;
  }
  const NodeLsm& lsm = *n.lsm;
  std::vector<SSTablePtr> bottom;
  NodeLsm rest = lsm;
  if (lsm.levels.size() >= 2 && !lsm.levels.back().empty()) {
    bottom = lsm.levels.back();
    rest.levels.back().clear();
  } else {
    // The bottom level overlaps (or is empty): merge into sorted tables first.
    auto all = lsm.all_tables();
    auto cuts = ctx.hotspot_bounds();
    std::vector<std::unique_ptr<EntrySource>> sources;
    for (const auto& t : all) sources.push_back(std::make_unique<SSTableSource>(t, KeyRange::all()));
    bottom = write_merged(std::move(sources), *ctx.lsm, &cuts, /*drop_tombstones=*/true);
    d.created.insert(d.created.end(), bottom.begin(), bottom.end());
    d.obsolete.insert(d.obsolete.end(), all.begin(), all.end());
    rest = ctx.empty_lsm();
    d.edit(id).lsm = lsm_with_bottom(ctx, bottom);
  }
  if (bottom.size() < 2) {
    convert_to_pages(d, ctx, id);
    return;
  }
  auto kids = leaves_for_tables(ctx, bottom, n.covered);
  Node& x = d.edit(id);
  x.kind = NodeKind::NonLeaf;
  x.routing_keys.clear();
  x.children.clear();
  for (std::size_t i = 0; i < kids.size(); ++i) {
    if (i > 0) x.routing_keys.push_back(kids[i].covered.lo);
    x.children.push_back(kids[i].id);
  }
  ++rest.version_tag;
  x.lsm = std::make_shared<NodeLsm>(std::move(rest));
  x.page_version = ctx.next_page_version();
  for (auto& k : kids) d.add(std::move(k));
  d.touch(id);
  fix_nonleaf_overflow(d, ctx, id);
}

bool adapt_node(TreeDraft& d, TreeContext& ctx, NodeId id) {
  if (!ctx.hotspots || !d.exists(id)) return false;
  const Node& n = d.get(id);
  if (!node_needs_adaptation(n, *ctx.hotspots)) return false;
  if (!n.is_leaf()) {
    hotspot_empty(d, ctx, id);
  } else if (id == d.root()) {
    bootstrap_from_root(d, ctx);
  } else if (n.chain) {
    merge_lsm_into_pages(d, ctx, id);
  } else if (ctx.cfg.leaf_strategy == LeafStrategy::SideSplit) {
    leaf_transform_sidesplit(d, ctx, id);
  } else {
    leaf_transform_downsplit(d, ctx, id);
  }
  return true;
}

bool AdaptQueue::push(NodeId id) {
  std::lock_guard lock(mu_);
  if (!queued_.insert(id).second) return false;
  q_.push_back(id);
  return true;
}

std::optional<NodeId> AdaptQueue::pop() {
  std::lock_guard lock(mu_);
  if (q_.empty()) return std::nullopt;
  NodeId id = q_.front();
  q_.pop_front();
  queued_.erase(id);
  return id;
}

std::size_t AdaptQueue::size() const {
  std::lock_guard lock(mu_);
  return q_.size();
}

void AdaptQueue::clear() {
  std::lock_guard lock(mu_);
  q_.clear();
  queued_.clear();
}

}  // namespace aha
