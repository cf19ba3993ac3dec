#include "aha/tree.hpp"

#include <algorithm>

namespace aha {

// ---------------------------------------------------------------------------
// Node, NodeTable, TreeVersion
// ---------------------------------------------------------------------------

std::size_t Node::child_slot(std::string_view key) const {
  return static_cast<std::size_t>(std::upper_bound(routing_keys.begin(), routing_keys.end(), key) -
                                  routing_keys.begin());
}

KeyRange Node::child_range(std::size_t slot) const {
  KeyRange r;
  r.lo = slot == 0 ? covered.lo : routing_keys[slot - 1];
  r.hi = slot == routing_keys.size() ? covered.hi : std::optional<std::string>(routing_keys[slot]);
  return r;
}

NodePtr NodeTable::get(NodeId id) const {
  std::size_t c = id / kChunk;
  if (c >= chunks_.size() || !chunks_[c]) return nullptr;
  return (*chunks_[c])[id % kChunk];
}

void NodeTable::set(NodeId id, NodePtr n) {
  std::size_t c = id / kChunk;
  if (c >= chunks_.size()) {
    chunks_.resize(c + 1);
    owned_.resize(c + 1, false);
  }
  if (!chunks_[c]) {
    chunks_[c] = std::make_shared<std::vector<NodePtr>>(kChunk);
    owned_[c] = true;
  } else if (!owned_[c]) {
    chunks_[c] = std::make_shared<std::vector<NodePtr>>(*chunks_[c]);
    owned_[c] = true;
  }
  auto& slot = (*chunks_[c])[id % kChunk];
  if (slot && !n) --size_;
  if (!slot && n) ++size_;
  slot = std::move(n);
}

const Node& TreeVersion::node(NodeId id) const {
  auto n = nodes.get(id);
  if (!n) throw Error("tree version has no node " + std::to_string(id));
  return *n;
}

std::size_t TreeVersion::height() const {
  std::size_t best = 0;
  std::vector<std::pair<NodeId, std::size_t>> stack{{root, 1}};
  while (!stack.empty()) {
    auto [id, depth] = stack.back();
    stack.pop_back();
    best = std::max(best, depth);
    const Node& n = node(id);
    for (auto c : n.children) stack.emplace_back(c, depth + 1);
  }
  return best;
}

std::vector<RouteStep> route_range(const TreeVersion& v, const KeyRange& range) {
  std::vector<RouteStep> out;
  out.reserve(8);
  std::vector<RouteStep> stack{{v.root, range.intersect(v.root_node().covered), 0}};
  while (!stack.empty()) {
    RouteStep s = std::move(stack.back());
    stack.pop_back();
    if (s.sub.empty()) continue;
    const Node& n = v.node(s.id);
    if (n.is_leaf()) {
      out.push_back(std::move(s));
      continue;
    }
    out.push_back(s);
    std::size_t first = n.child_slot(s.sub.lo);
    std::size_t last = first;
    while (last + 1 < n.children.size() && (!s.sub.hi || n.routing_keys[last] < *s.sub.hi)) ++last;
    for (std::size_t i = last + 1; i-- > first;) {
      stack.push_back(RouteStep{n.children[i], s.sub.intersect(n.child_range(i)), s.depth + 1});
    }
  }
  return out;
}

std::vector<NodeId> route_key(const TreeVersion& v, std::string_view key) {
  std::vector<NodeId> path{v.root};
  for (;;) {
    const Node& n = v.node(path.back());
    if (n.is_leaf()) return path;
    path.push_back(n.children[n.child_slot(key)]);
  }
}

std::optional<NodeId> parent_of(const TreeVersion& v, NodeId id) {
  if (id == v.root) return std::nullopt;
  auto target = v.find(id);
  if (!target) return std::nullopt;
  NodeId cur = v.root;
  for (;;) {
    const Node& n = v.node(cur);
    if (n.is_leaf()) return std::nullopt;
    NodeId next = n.children[n.child_slot(target->covered.lo)];
    if (next == id) return cur;
    cur = next;
  }
}

// ---------------------------------------------------------------------------
// TreeContext, TreeDraft
// ---------------------------------------------------------------------------

std::vector<std::string> TreeContext::hotspot_bounds() const {
  return hotspots ? hotspots->bounds() : std::vector<std::string>{};
}

TreeDraft::TreeDraft(TreeVersionPtr base) : base_(std::move(base)), root_(base_->root) {}

bool TreeDraft::exists(NodeId id) const {
  if (erased_.count(id)) return false;
  return modified_.count(id) || base_->find(id) != nullptr;
}

const Node& TreeDraft::get(NodeId id) const {
  if (erased_.count(id)) throw Error("draft node " + std::to_string(id) + " was erased");
  auto it = modified_.find(id);
  if (it != modified_.end()) return *it->second;
  return base_->node(id);
}

Node& TreeDraft::edit(NodeId id) {
  auto it = modified_.find(id);
  if (it != modified_.end()) return *it->second;
  auto n = std::make_shared<Node>(get(id));
  return *modified_.emplace(id, std::move(n)).first->second;
}

Node& TreeDraft::add(Node n) {
  NodeId id = n.id;
  erased_.erase(id);
  auto p = std::make_shared<Node>(std::move(n));
  auto& slot = modified_[id];
  slot = std::move(p);
  touched.insert(id);
  return *slot;
}

void TreeDraft::erase(NodeId id) {
  modified_.erase(id);
  erased_.insert(id);
  touched.erase(id);
}

std::optional<NodeId> TreeDraft::parent_of(NodeId id) const {
  if (id == root_) return std::nullopt;
  const std::string& lo = get(id).covered.lo;
  NodeId cur = root_;
  for (;;) {
    const Node& n = get(cur);
    if (n.is_leaf()) return std::nullopt;
    NodeId next = n.children[n.child_slot(lo)];
    if (next == id) return cur;
    cur = next;
  }
}

void TreeDraft::edit_root_lsm(const LsmEdit& e) {
  Node& r = edit(root_);
  r.lsm = std::make_shared<NodeLsm>(apply_edit(*r.lsm, e));
  root_edits.push_back(e);
}

TreeVersionPtr TreeDraft::build(const TreeVersion& current, std::uint64_t epoch) const {
  auto v = std::make_shared<TreeVersion>(current);
  v->freeze();
  v->epoch = epoch;
  for (auto id : erased_) v->nodes.set(id, nullptr);
  for (const auto& [id, n] : modified_) v->nodes.set(id, n);
  v->root = root_;
  // The root NodeLsm always derives from the current one: flushes and root
  // compactions may have changed it since the draft started.
  bool root_changed = root_ != current.root || modified_.count(root_) || !root_edits.empty();
  if (root_changed) {
    auto lsm = current.root_node().lsm;
    if (!root_edits.empty()) {
      NodeLsm x = *lsm;
      for (const auto& e : root_edits) x = apply_edit(x, e);
      lsm = std::make_shared<NodeLsm>(std::move(x));
    }
    auto r = std::make_shared<Node>(*v->nodes.get(root_));
    r->lsm = std::move(lsm);
    v->nodes.set(root_, std::move(r));
  }
  v->freeze();
  return v;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

std::shared_ptr<NodeLsm> lsm_with_bottom(const TreeContext& ctx, std::vector<SSTablePtr> tables) {
  auto l = std::make_shared<NodeLsm>(ctx.empty_lsm());
  l->levels.back() = std::move(tables);
  std::sort(l->levels.back().begin(), l->levels.back().end(),
            [](const SSTablePtr& a, const SSTablePtr& b) { return a->min_key() < b->min_key(); });
  return l;
}

namespace {

std::vector<std::unique_ptr<EntrySource>> sources_of(const std::vector<SSTablePtr>& tables,
                                                     const KeyRange& range = KeyRange::all()) {
  std::vector<std::unique_ptr<EntrySource>> out;
  for (const auto& t : tables) out.push_back(std::make_unique<SSTableSource>(t, range));
  return out;
}

std::vector<SSTablePtr> write_entries(TreeContext& ctx, const std::vector<Entry>& entries,
                                      const std::vector<std::string>* cuts) {
  RunBuilder b(*ctx.lsm, cuts);
  for (const auto& e : entries) b.add(view_of(e));
  return b.finish();
}

// Splits a table in two at its median key; a table with one entry stays.
std::vector<SSTablePtr> median_split(TreeDraft& d, TreeContext& ctx, const SSTablePtr& t) {
  auto entries = t->all();
  if (entries.size() < 2) return {t};
  std::vector<std::string> cut{entries[entries.size() / 2].key};
  auto outs = write_entries(ctx, entries, &cut);
  d.created.insert(d.created.end(), outs.begin(), outs.end());
  d.obsolete.push_back(t);
  return outs;
}

std::size_t slot_in_parent(const Node& p, NodeId child) {
  auto it = std::find(p.children.begin(), p.children.end(), child);
  if (it == p.children.end()) throw Error("node " + std::to_string(child) + " missing from its parent");
  return static_cast<std::size_t>(it - p.children.begin());
}

std::size_t estimated_page_bytes(const Entry& e, std::size_t page_size) {
  std::size_t inline_size = 2 + e.key.size() + 13 + e.value.size() + 2;
  if (inline_size <= page_size / 4) return inline_size;
  return 2 + e.key.size() + 13 + 4 + 8 * ((e.value.size() + page_size - 1) / page_size) + 2;
}

}  // namespace

std::vector<Node> leaves_for_tables(TreeContext& ctx, const std::vector<SSTablePtr>& tables, const KeyRange& range) {
  std::vector<Node> out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    Node n;
    n.id = ctx.next_node_id();
    n.kind = NodeKind::Leaf;
    n.covered.lo = i == 0 ? range.lo : tables[i]->min_key();
    n.covered.hi = i + 1 == tables.size() ? range.hi : std::optional<std::string>(tables[i + 1]->min_key());
    n.lsm = lsm_with_bottom(ctx, {tables[i]});
    n.page_version = ctx.next_page_version();
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<Entry> read_tables(const std::vector<SSTablePtr>& tables, const KeyRange& range) {
  return merge_newest(sources_of(tables, range), /*drop_tombstones=*/false);
}

std::vector<std::string> node_cut_keys(const Node& n, const TreeContext& ctx) {
  return merge_cut_keys(n.routing_keys, ctx.hotspot_bounds());
}

std::vector<Node> build_page_leaves(TreeContext& ctx, const std::vector<Entry>& entries, const KeyRange& range) {
  std::size_t ps = ctx.leaves->page_size();
  std::size_t target_pages = std::max<std::size_t>(1, ctx.leaves->max_pages_per_leaf() * 3 / 4);
  auto budget = static_cast<std::size_t>(static_cast<double>(target_pages * ps) * 0.85);
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t start = 0, acc = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::size_t sz = estimated_page_bytes(entries[i], ps);
    if (i > start && acc + sz > budget) {
      groups.emplace_back(start, i);
      start = i;
      acc = 0;
    }
    acc += sz;
  }
  if (start < entries.size() || groups.empty()) groups.emplace_back(start, entries.size());

  std::vector<Node> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto [from, to] = groups[g];
    Node n;
    n.id = ctx.next_node_id();
    n.kind = NodeKind::Leaf;
    n.covered.lo = g == 0 ? range.lo : entries[from].key;
    n.covered.hi = g + 1 == groups.size() ? range.hi : std::optional<std::string>(entries[groups[g + 1].first].key);
    n.chain = ctx.leaves->build(std::span<const Entry>(entries.data() + from, to - from), n.covered.lo);
    n.page_version = ctx.next_page_version();
    out.push_back(std::move(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

bool compact_node(TreeDraft& d, TreeContext& ctx, NodeId id) {
  if (id == d.root() || !d.exists(id)) return false;
  const Node& n = d.get(id);
  if (!n.lsm || !lsm_needs_compaction(*n.lsm)) return false;
  auto cuts = node_cut_keys(n, ctx);
  auto edit = lsm_plan_compaction(*n.lsm, &cuts, n.page_version, *ctx.lsm);
  if (edit.empty()) return false;
  auto old = n.lsm;
  auto fresh = std::make_shared<NodeLsm>(apply_edit(*old, edit));
  for (const auto& t : edit.outputs) {
    if (!edit.removed.count(t->id())) d.created.push_back(t);
  }
  for (const auto& t : old->all_tables()) {
    if (edit.removed.count(t->id()) && !fresh->contains_table(t->id())) d.obsolete.push_back(t);
  }
  d.edit(id).lsm = std::move(fresh);
  d.touch(id);
  return true;
}

void distribute_to_children(TreeDraft& d, TreeContext& ctx, NodeId parent,
                            std::vector<std::vector<SSTablePtr>> per_child) {
  const std::vector<NodeId> children = d.get(parent).children;
  for (std::size_t i = 0; i < per_child.size(); ++i) {
    auto& tables = per_child[i];
    if (tables.empty()) continue;
    NodeId cid = children[i];
    const Node& c = d.get(cid);
    if (c.is_leaf() && c.chain && !c.has_lsm_data() && ctx.merge_into_pages) {
      auto entries = read_tables(tables);
      {
        std::unique_lock lock(c.chain->latch);
        ctx.leaves->merge(*c.chain, entries);
      }
      d.obsolete.insert(d.obsolete.end(), tables.begin(), tables.end());
      if (c.lsm) d.edit(cid).lsm = nullptr;
    } else {
      Node& cn = d.edit(cid);
      NodeLsm base = cn.lsm ? *cn.lsm : ctx.empty_lsm();
      cn.lsm = std::make_shared<NodeLsm>(lsm_add_runs(base, tables));
    }
    d.touch(cid);
  }
}

void node_empty(TreeDraft& d, TreeContext& ctx, NodeId parent) {
  const Node& p = d.get(parent);
  if (p.is_leaf() || !p.lsm || p.lsm->levels.back().empty()) return;
  std::vector<SSTablePtr> bottom = p.lsm->levels.back();
  // An L1 bottom holds overlapping runs newest first; children take runs
  // oldest first.
  if (p.lsm->levels.size() == 1) std::reverse(bottom.begin(), bottom.end());
  const std::vector<std::string> guards = p.routing_keys;
  const Node snapshot = p;

  std::vector<std::vector<SSTablePtr>> per_child(snapshot.children.size());
  LsmEdit e;
  for (const auto& t : bottom) {
    e.removed.insert(t->id());
    if (within_one_guard(*t, guards)) {
      per_child[snapshot.child_slot(t->min_key())].push_back(t);
      continue;
    }
    auto outs = write_merged(sources_of({t}), *ctx.lsm, &guards);
    std::uint64_t bytes = 0;
    for (const auto& o : outs) {
      bytes += o->byte_size();
      per_child[snapshot.child_slot(o->min_key())].push_back(o);
    }
    if (ctx.stats) ctx.stats->migration_rewrite_bytes += bytes;
    d.created.insert(d.created.end(), outs.begin(), outs.end());
    d.obsolete.push_back(t);
  }
  if (parent == d.root()) {
    d.edit_root_lsm(e);
  } else {
    Node& pn = d.edit(parent);
    pn.lsm = std::make_shared<NodeLsm>(apply_edit(*pn.lsm, e));
  }
  d.touch(parent);
  distribute_to_children(d, ctx, parent, std::move(per_child));
}

void replace_with_siblings(TreeDraft& d, TreeContext& ctx, NodeId old_id, std::vector<Node> siblings) {
  if (siblings.empty()) throw Error("replace_with_siblings needs at least one sibling");
  if (old_id == d.root()) {
    const Node old = d.get(old_id);
    Node root;
    root.id = ctx.next_node_id();
    root.kind = NodeKind::NonLeaf;
    root.covered = old.covered;
    root.lsm = old.lsm;
    root.page_version = ctx.next_page_version();
    for (std::size_t i = 0; i < siblings.size(); ++i) {
      if (i > 0) root.routing_keys.push_back(siblings[i].covered.lo);
      root.children.push_back(siblings[i].id);
    }
    d.erase(old_id);
    for (auto& s : siblings) d.add(std::move(s));
    NodeId rid = root.id;
    d.add(std::move(root));
    d.set_root(rid);
    fix_nonleaf_overflow(d, ctx, rid);
    return;
  }
  NodeId pid = *d.parent_of(old_id);
  Node& p = d.edit(pid);
  std::size_t slot = slot_in_parent(p, old_id);
  std::vector<NodeId> ids;
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < siblings.size(); ++i) {
    ids.push_back(siblings[i].id);
    if (i > 0) keys.push_back(siblings[i].covered.lo);
  }
  p.children.erase(p.children.begin() + static_cast<std::ptrdiff_t>(slot));
  p.children.insert(p.children.begin() + static_cast<std::ptrdiff_t>(slot), ids.begin(), ids.end());
  p.routing_keys.insert(p.routing_keys.begin() + static_cast<std::ptrdiff_t>(slot), keys.begin(), keys.end());
  p.page_version = ctx.next_page_version();
  d.erase(old_id);
  for (auto& s : siblings) d.add(std::move(s));
  d.touch(pid);
  fix_nonleaf_overflow(d, ctx, pid);
}

std::pair<NodeId, NodeId> split_nonleaf(TreeDraft& d, TreeContext& ctx, NodeId id) {
  const Node n = d.get(id);
  std::size_t k = n.routing_keys.size();
  if (n.is_leaf() || k < 2) throw Error("split_nonleaf needs a non-leaf page with two or more keys");
  std::size_t m = k / 2;
  const std::string promoted = n.routing_keys[m];

  Node left, right;
  left.id = ctx.next_node_id();
  right.id = ctx.next_node_id();
  left.kind = right.kind = NodeKind::NonLeaf;
  left.covered = KeyRange{n.covered.lo, promoted};
  right.covered = KeyRange{promoted, n.covered.hi};
  left.routing_keys.assign(n.routing_keys.begin(), n.routing_keys.begin() + static_cast<std::ptrdiff_t>(m));
  right.routing_keys.assign(n.routing_keys.begin() + static_cast<std::ptrdiff_t>(m) + 1, n.routing_keys.end());
  left.children.assign(n.children.begin(), n.children.begin() + static_cast<std::ptrdiff_t>(m) + 1);
  right.children.assign(n.children.begin() + static_cast<std::ptrdiff_t>(m) + 1, n.children.end());
  left.page_version = ctx.next_page_version();
  right.page_version = ctx.next_page_version();

  if (id == d.root()) {
    left.lsm = std::make_shared<NodeLsm>(ctx.empty_lsm());
    right.lsm = std::make_shared<NodeLsm>(ctx.empty_lsm());
    Node root;
    root.id = ctx.next_node_id();
    root.kind = NodeKind::NonLeaf;
    root.covered = n.covered;
    root.routing_keys = {promoted};
    root.children = {left.id, right.id};
    root.lsm = n.lsm;
    root.page_version = ctx.next_page_version();
    std::pair<NodeId, NodeId> out{left.id, right.id};
    NodeId rid = root.id;
    d.erase(id);
    d.add(std::move(left));
    d.add(std::move(right));
    d.add(std::move(root));
    d.set_root(rid);
    return out;
  }

  std::vector<SSTablePtr> lt, rt;
  if (n.has_lsm_data()) {
    auto tables = n.lsm->all_tables();
    auto cuts = merge_cut_keys(n.routing_keys, ctx.hotspot_bounds());
    auto outs = write_merged(sources_of(tables), *ctx.lsm, &cuts);
    d.created.insert(d.created.end(), outs.begin(), outs.end());
    d.obsolete.insert(d.obsolete.end(), tables.begin(), tables.end());
    for (auto& o : outs) (o->max_key() < promoted ? lt : rt).push_back(o);
  }
  left.lsm = lsm_with_bottom(ctx, std::move(lt));
  right.lsm = lsm_with_bottom(ctx, std::move(rt));

  NodeId pid = *d.parent_of(id);
  Node& p = d.edit(pid);
  std::size_t slot = slot_in_parent(p, id);
  p.children[slot] = left.id;
  p.children.insert(p.children.begin() + static_cast<std::ptrdiff_t>(slot) + 1, right.id);
  p.routing_keys.insert(p.routing_keys.begin() + static_cast<std::ptrdiff_t>(slot), promoted);
  p.page_version = ctx.next_page_version();
  std::pair<NodeId, NodeId> out{left.id, right.id};
  d.erase(id);
  d.add(std::move(left));
  d.add(std::move(right));
  d.touch(pid);
  return out;
}

void fix_nonleaf_overflow(TreeDraft& d, TreeContext& ctx, NodeId id) {
  if (!d.exists(id)) return;
  const Node& n = d.get(id);
  if (n.is_leaf() || n.routing_keys.size() <= ctx.cfg.nonleaf_capacity) return;
  auto parent = d.parent_of(id);
  auto [l, r] = split_nonleaf(d, ctx, id);
  fix_nonleaf_overflow(d, ctx, l);
  fix_nonleaf_overflow(d, ctx, r);
  fix_nonleaf_overflow(d, ctx, parent ? *parent : d.root());
}

std::vector<NodeId> split_leaf(TreeDraft& d, TreeContext& ctx, NodeId leaf) {
  const Node n = d.get(leaf);
  if (!n.is_leaf() || leaf == d.root()) throw Error("split_leaf needs a non-root leaf");
  if (n.chain) {
    merge_lsm_into_pages(d, ctx, leaf);
    return {leaf};
  }
  auto tables = n.lsm ? n.lsm->all_tables() : std::vector<SSTablePtr>{};
  auto cuts = ctx.hotspot_bounds();
  // Nothing lies below a leaf NodeLsm, so deleted keys can be dropped here.
  auto outs = write_merged(sources_of(tables), *ctx.lsm, &cuts, /*drop_tombstones=*/true);
  d.created.insert(d.created.end(), outs.begin(), outs.end());
  d.obsolete.insert(d.obsolete.end(), tables.begin(), tables.end());
  if (outs.size() == 1) outs = median_split(d, ctx, outs.front());
  if (outs.size() <= 1) {
    d.edit(leaf).lsm = lsm_with_bottom(ctx, outs);
    d.touch(leaf);
    return {leaf};
  }
  auto sibs = leaves_for_tables(ctx, outs, n.covered);
  std::vector<NodeId> ids;
  for (const auto& s : sibs) ids.push_back(s.id);
  replace_with_siblings(d, ctx, leaf, std::move(sibs));
  return ids;
}

void bootstrap_from_root(TreeDraft& d, TreeContext& ctx) {
  const Node r = d.get(d.root());
  if (!r.is_leaf() || r.chain) throw Error("bootstrap_from_root needs a root without children");
  const NodeLsm& lsm = *r.lsm;
  LsmEdit e;
  std::vector<SSTablePtr> tables;
  if (lsm.levels.size() >= 2 && !lsm.levels.back().empty()) {
    tables = lsm.levels.back();
    for (const auto& t : tables) e.removed.insert(t->id());
  } else if (!lsm.empty()) {
    // No sorted bottom level: merge everything into disjoint tables first.
    auto all = lsm.all_tables();
    auto cuts = ctx.hotspot_bounds();
    tables = write_merged(sources_of(all), *ctx.lsm, &cuts);
    d.created.insert(d.created.end(), tables.begin(), tables.end());
    d.obsolete.insert(d.obsolete.end(), all.begin(), all.end());
    for (const auto& t : all) e.removed.insert(t->id());
  }
  if (tables.size() == 1) tables = median_split(d, ctx, tables.front());

  std::vector<Node> kids;
  if (tables.empty()) {
    Node leaf;
    leaf.id = ctx.next_node_id();
    leaf.kind = NodeKind::Leaf;
    leaf.covered = r.covered;
    leaf.lsm = std::make_shared<NodeLsm>(ctx.empty_lsm());
    leaf.page_version = ctx.next_page_version();
    kids.push_back(std::move(leaf));
  } else {
    kids = leaves_for_tables(ctx, tables, r.covered);
  }
  if (!e.removed.empty()) d.edit_root_lsm(e);
  Node& root = d.edit(d.root());
  root.kind = NodeKind::NonLeaf;
  root.routing_keys.clear();
  root.children.clear();
  for (std::size_t i = 0; i < kids.size(); ++i) {
    if (i > 0) root.routing_keys.push_back(kids[i].covered.lo);
    root.children.push_back(kids[i].id);
  }
  root.page_version = ctx.next_page_version();
  for (auto& k : kids) d.add(std::move(k));
  d.touch(d.root());
  fix_nonleaf_overflow(d, ctx, d.root());
}

void merge_lsm_into_pages(TreeDraft& d, TreeContext& ctx, NodeId id) {
  const Node& n = d.get(id);
  if (!n.chain || !n.lsm) return;
  auto tables = n.lsm->all_tables();
  if (!tables.empty()) {
    auto entries = read_tables(tables);
    std::unique_lock lock(n.chain->latch);
    ctx.leaves->merge(*n.chain, entries);
  }
  d.obsolete.insert(d.obsolete.end(), tables.begin(), tables.end());
  d.edit(id).lsm = nullptr;
  d.touch(id);
}

void convert_to_pages(TreeDraft& d, TreeContext& ctx, NodeId id) {
  const Node n = d.get(id);
  if (!n.is_leaf() || id == d.root()) throw Error("convert_to_pages needs a non-root leaf");
  if (n.chain) {
    merge_lsm_into_pages(d, ctx, id);
    return;
  }
  auto tables = n.lsm ? n.lsm->all_tables() : std::vector<SSTablePtr>{};
  auto entries = read_tables(tables);
  std::erase_if(entries, [](const Entry& e) { return e.is_tombstone(); });
  auto sibs = build_page_leaves(ctx, entries, n.covered);
  d.obsolete.insert(d.obsolete.end(), tables.begin(), tables.end());
  if (sibs.size() == 1) {
    Node& x = d.edit(id);
    x.lsm = nullptr;
    x.chain = sibs.front().chain;
    d.touch(id);
    return;
  }
  replace_with_siblings(d, ctx, id, std::move(sibs));
}

void page_leaf_split(TreeDraft& d, TreeContext& ctx, NodeId id) {
  if (!d.exists(id)) return;
  if (d.get(id).has_lsm_data()) merge_lsm_into_pages(d, ctx, id);
  const Node n = d.get(id);
  if (!n.chain || id == d.root()) return;
  std::unique_lock lock(n.chain->latch);
  const auto& pages = n.chain->pages;
  std::size_t max_pages = ctx.leaves->max_pages_per_leaf();
  if (pages.size() <= max_pages) return;
  std::size_t target = std::max<std::size_t>(1, max_pages * 3 / 4);
  std::size_t groups = (pages.size() + target - 1) / target;
  std::size_t per = (pages.size() + groups - 1) / groups;

  std::vector<Node> sibs;
  for (std::size_t start = 0; start < pages.size(); start += per) {
    std::size_t end = std::min(pages.size(), start + per);
    Node s;
    s.id = ctx.next_node_id();
    s.kind = NodeKind::Leaf;
    s.covered.lo = start == 0 ? n.covered.lo : pages[start].low;
    s.covered.hi = end == pages.size() ? n.covered.hi : std::optional<std::string>(pages[end].low);
    s.chain = std::make_shared<LeafChain>();
    s.chain->pages.assign(pages.begin() + static_cast<std::ptrdiff_t>(start),
                          pages.begin() + static_cast<std::ptrdiff_t>(end));
    s.chain->pages.front().low = s.covered.lo;
    s.page_version = ctx.next_page_version();
    sibs.push_back(std::move(s));
  }
  d.retired.push_back(n.chain);
  d.held_latches.push_back(std::move(lock));
  replace_with_siblings(d, ctx, id, std::move(sibs));
}

}  // namespace aha
