#pragma once

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "aha/adapt.hpp"
#include "aha/tree.hpp"
#include "../test_util.hpp"

namespace aha::testing {

/// A TreeContext over a scratch directory, plus a newest-wins oracle of
/// every entry written through it.
class TreeFixture {
  TempDir dir_;  // first: the pool lives inside it

 public:
  explicit TreeFixture(std::size_t sstable_target = 4 << 10, std::size_t nonleaf_capacity = 8)
      : pool_(dir_.path() / "pages", 4096, 64, &stats), leaves_(pool_, 4) {
    lsm_ctx.dir = dir_.path();
    lsm_ctx.next_id = [this] { return next_sst_++; };
    lsm_ctx.sstable_target = sstable_target;
    lsm_ctx.stats = &stats;
    ctx.cfg.node_max_levels = 2;
    ctx.cfg.policy.l1_run_trigger = 2;
    ctx.cfg.policy.size_ratio = 4;
    ctx.cfg.policy.base_level_bytes = 8 << 10;
    ctx.cfg.nonleaf_capacity = nonleaf_capacity;
    ctx.lsm = &lsm_ctx;
    ctx.leaves = &leaves_;
    ctx.stats = &stats;
    ctx.next_node_id = [this] { return next_node_++; };
    ctx.next_page_version = [this] { return next_pv_++; };
  }

  /// Sorted table over key indexes; each entry gets a fresh (newer) seq.
  SSTablePtr table(const std::vector<int>& keys, const std::vector<int>& deleted = {}) {
    std::map<std::string, Entry> es;
    for (int k : keys) es[key(k, 4)] = Entry{key(k, 4), ++seq, EntryKind::Put, "v" + std::to_string(seq)};
    for (int k : deleted) es[key(k, 4)] = Entry{key(k, 4), ++seq, EntryKind::Tombstone, ""};
    std::vector<Entry> v;
    for (auto& [k, e] : es) {
      v.push_back(e);
      record(e);
    }
    return write_sstable(dir_.path(), next_sst_++, v, &stats);
  }

  SSTablePtr table_range(int lo, int hi, int step = 1) {
    std::vector<int> ks;
    for (int k = lo; k < hi; k += step) ks.push_back(k);
    return table(ks);
  }

  void record(const Entry& e) {
    auto& slot = oracle_[e.key];
    if (slot.seq < e.seq) slot = e;
  }

  std::map<std::string, std::string> oracle_live() const {
    std::map<std::string, std::string> out;
    for (auto& [k, e] : oracle_) {
      if (!e.is_tombstone()) out[k] = e.value;
    }
    return out;
  }

  Node leaf_node(KeyRange covered, std::shared_ptr<NodeLsm> lsm) {
    Node n;
    n.id = next_node_++;
    n.kind = NodeKind::Leaf;
    n.covered = std::move(covered);
    n.lsm = std::move(lsm);
    n.page_version = next_pv_++;
    return n;
  }

  std::shared_ptr<NodeLsm> node_lsm(std::vector<std::vector<SSTablePtr>> levels, bool root = false,
                                    std::size_t max_levels = 2) {
    auto l = std::make_shared<NodeLsm>(max_levels, ctx.cfg.policy, root);
    for (std::size_t i = 0; i < levels.size(); ++i) l->levels[i] = std::move(levels[i]);
    return l;
  }

  /// Version with just a root leaf holding lsm.
  TreeVersionPtr single_root(std::shared_ptr<NodeLsm> lsm) {
    auto v = std::make_shared<TreeVersion>();
    Node r = leaf_node(KeyRange::all(), std::move(lsm));
    v->root = r.id;
    v->nodes.set(r.id, std::make_shared<Node>(std::move(r)));
    v->freeze();
    return v;
  }

  /// Root non-leaf over leaves split at routing keys; children get no LSM data.
  TreeVersionPtr two_level(std::shared_ptr<NodeLsm> root_lsm, const std::vector<std::string>& routing) {
    auto v = std::make_shared<TreeVersion>();
    Node r;
    r.id = next_node_++;
    r.kind = NodeKind::NonLeaf;
    r.lsm = std::move(root_lsm);
    r.routing_keys = routing;
    r.page_version = next_pv_++;
    for (std::size_t i = 0; i <= routing.size(); ++i) {
      KeyRange c;
      c.lo = i == 0 ? "" : routing[i - 1];
      if (i < routing.size()) c.hi = routing[i];
      Node leaf = leaf_node(c, std::make_shared<NodeLsm>(ctx.empty_lsm()));
      r.children.push_back(leaf.id);
      v->nodes.set(leaf.id, std::make_shared<Node>(std::move(leaf)));
    }
    v->root = r.id;
    v->nodes.set(r.id, std::make_shared<Node>(std::move(r)));
    v->freeze();
    return v;
  }

  TreeVersionPtr commit(TreeDraft& d) {
    auto v = d.build(d.base(), ++epoch_);
    for (const auto& c : d.retired) c->retired = true;
    d.held_latches.clear();
    return v;
  }

  /// Newest-wins live key -> value map over every node of v.
  std::map<std::string, std::string> content(const TreeVersion& v) {
    std::map<std::string, Entry> best;
    auto offer = [&](const Entry& e) {
      auto& slot = best[e.key];
      if (slot.seq < e.seq) slot = e;
    };
    v.nodes.for_each([&](const Node& n) {
      if (n.lsm) {
        for (const auto& t : n.lsm->all_tables()) {
          for (const auto& e : t->all()) offer(e);
        }
      }
      if (n.chain) {
        for (const auto& e : leaves_.all(*n.chain)) offer(e);
      }
    });
    std::map<std::string, std::string> out;
    for (auto& [k, e] : best) {
      if (!e.is_tombstone()) out[k] = e.value;
    }
    return out;
  }

  /// Routing well-formedness and contiguous child ranges; returns problems.
  std::vector<std::string> check_shape(const TreeVersion& v) {
    std::vector<std::string> out;
    std::size_t reached = 0;
    std::function<void(NodeId, const KeyRange&)> walk = [&](NodeId id, const KeyRange& range) {
      ++reached;
      const Node& n = v.node(id);
      if (!(n.covered == range)) out.push_back("node " + std::to_string(id) + " covers " + to_string(n.covered));
      auto in_range = [&](const std::string& lo, const std::string& hi) {
        return range.overlaps_closed(lo, hi) && range.covers_closed(lo, hi);
      };
      if (n.lsm) {
        for (const auto& t : n.lsm->all_tables()) {
          if (!in_range(t->min_key(), t->max_key())) out.push_back("table outside node " + std::to_string(id));
        }
      }
      if (n.is_leaf()) {
        if (!n.children.empty()) out.push_back("leaf with children");
        return;
      }
      if (n.children.size() != n.routing_keys.size() + 1) out.push_back("child count mismatch");
      if (n.routing_keys.size() > ctx.cfg.nonleaf_capacity) out.push_back("page over capacity");
      for (std::size_t i = 1; i < n.routing_keys.size(); ++i) {
        if (!(n.routing_keys[i - 1] < n.routing_keys[i])) out.push_back("routing keys unsorted");
      }
      for (std::size_t i = 0; i < n.children.size(); ++i) walk(n.children[i], n.child_range(i));
    };
    walk(v.root, KeyRange::all());
    if (reached != v.node_count()) out.push_back("unreachable nodes");
    return out;
  }

  /// For each key, entries on a root-to-leaf path get older going down.
  std::vector<std::string> check_freshness(const TreeVersion& v) {
    std::vector<std::string> out;
    std::function<void(NodeId, const std::map<std::string, SeqNo>&)> walk =
        [&](NodeId id, const std::map<std::string, SeqNo>& above) {
          const Node& n = v.node(id);
          std::map<std::string, SeqNo> here = above;
          std::map<std::string, SeqNo> mine;
          if (n.lsm) {
            for (const auto& t : n.lsm->all_tables()) {
              for (const auto& e : t->all()) mine[e.key] = std::max(mine[e.key], e.seq);
            }
          }
          if (n.chain) {
            for (const auto& e : leaves_.all(*n.chain)) mine[e.key] = std::max(mine[e.key], e.seq);
          }
          for (auto& [k, s] : mine) {
            auto it = above.find(k);
            if (it != above.end() && it->second <= s) out.push_back("stale ancestor for " + k);
            if (it == above.end()) here[k] = s;
          }
          for (auto c : n.children) walk(c, here);
        };
    walk(v.root, {});
    return out;
  }

  IoStats stats;
  LsmContext lsm_ctx;
  TreeContext ctx;
  SeqNo seq = 0;

 private:
  PageBufferPool pool_;
  LeafStore leaves_;
  SSTableId next_sst_ = 1;
  NodeId next_node_ = 1;
  std::uint64_t next_pv_ = 1;
  std::uint64_t epoch_ = 0;
  std::map<std::string, Entry> oracle_;
};

}  // namespace aha::testing
