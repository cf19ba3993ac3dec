#include "aha/engine.hpp"

#include <algorithm>
#include <deque>
#include <iostream>
#include <map>
#include <unordered_set>

#include "aha/manifest.hpp"

namespace aha {

namespace {

// A PureLsm root never hands data to a tree; its level limit only bounds
// the number of levels a compaction may create.
constexpr std::size_t kPureLsmRootLevels = 8;

constexpr auto kIdleWait = std::chrono::milliseconds(20);

}  // namespace

const char* to_string(EngineMode m) {
  switch (m) {
    case EngineMode::Aha:
      return "aha";
    case EngineMode::PureLsm:
      return "pure-lsm";
    case EngineMode::PureBtree:
      return "pure-btree";
  }
  return "?";
}

EngineMode parse_engine_mode(std::string_view s) {
  if (s == "aha") return EngineMode::Aha;
  if (s == "pure-lsm") return EngineMode::PureLsm;
  if (s == "pure-btree") return EngineMode::PureBtree;
  throw InputError("unknown engine mode '" + std::string(s) + "'");
}

void EngineConfig::validate() const {
  if (data_dir.empty()) throw InputError("data_dir must be set");
  if (root_max_levels < 1) throw InputError("root_max_levels must be >= 1");
  if (node_max_levels < 1) throw InputError("node_max_levels must be >= 1");
  if (memtable_budget == 0) throw InputError("memtable_budget must be positive");
  if (sstable_target == 0) throw InputError("sstable_target must be positive");
  if (page_size < 4096 || page_size > 65535) throw InputError("page_size must be in [4096, 65535]");
  if (pool_pages < 16) throw InputError("pool_pages must be >= 16");
  if (max_leaf_pages < 2) throw InputError("max_leaf_pages must be >= 2");
  if (nonleaf_capacity < 3) throw InputError("nonleaf_capacity must be >= 3");
  policy.validate();
}

// ---------------------------------------------------------------------------
// Lifecycle
// ---------------------------------------------------------------------------

Engine::Engine(EngineConfig cfg) : cfg_(std::move(cfg)) {
  tree_cfg_.node_max_levels = cfg_.node_max_levels;
  tree_cfg_.policy = cfg_.policy;
  tree_cfg_.nonleaf_capacity = cfg_.nonleaf_capacity;
  tree_cfg_.leaf_strategy = cfg_.leaf_strategy;
  lsm_ctx_.dir = cfg_.data_dir;
  lsm_ctx_.next_id = [this] { return next_sst_.fetch_add(1); };
  lsm_ctx_.sstable_target = cfg_.sstable_target;
  lsm_ctx_.stats = &io_;
}

std::unique_ptr<Engine> Engine::open(EngineConfig cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.data_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.data_dir.string() + ": " + ec.message());
  std::unique_ptr<Engine> e(new Engine(std::move(cfg)));
  e->load_or_init();
  e->start();
  e->closed_ = false;
  return e;
}

Engine::~Engine() {
  try {
    close();
  } catch (const std::exception& ex) {
    std::cerr << "aha: close failed: " << ex.what() << "\n";
  }
}

void Engine::load_or_init() {
  auto m = read_manifest(cfg_.data_dir);
  if (m) {
    load(*m);
  } else {
    init_fresh();
  }
}

void Engine::init_fresh() {
  pool_ = std::make_unique<PageBufferPool>(cfg_.data_dir / kPagesName, cfg_.page_size, cfg_.pool_pages, &io_, 0);
  leaves_ = std::make_unique<LeafStore>(*pool_, cfg_.max_leaf_pages);
  std::size_t root_levels = cfg_.mode == EngineMode::PureLsm ? std::max(kPureLsmRootLevels, cfg_.root_max_levels)
                                                              : cfg_.root_max_levels;
  auto v = std::make_shared<TreeVersion>();
  Node root;
  root.id = next_node_++;
  root.kind = NodeKind::Leaf;
  root.lsm = std::make_shared<NodeLsm>(root_levels, cfg_.policy, true);
  root.page_version = next_page_version_++;
  if (cfg_.mode == EngineMode::PureBtree) {
    Node leaf;
    leaf.id = next_node_++;
    leaf.kind = NodeKind::Leaf;
    leaf.chain = leaves_->build({}, "");
    leaf.page_version = next_page_version_++;
    root.kind = NodeKind::NonLeaf;
    root.children = {leaf.id};
    v->nodes.set(leaf.id, std::make_shared<Node>(std::move(leaf)));
    state_ = EngineState::R;
    hs_ = std::make_shared<HotspotSet>(HotspotSet::make({KeyRange::all()}, 1));
  }
  v->root = root.id;
  v->nodes.set(root.id, std::make_shared<Node>(std::move(root)));
  v->freeze();
  cur_.tree = v;
  cur_.mem = std::make_shared<MemTable>(cfg_.memtable_budget);
}

void Engine::load(const ManifestData& m) {
  if (m.page_size != cfg_.page_size) {
    throw InputError("page_size " + std::to_string(cfg_.page_size) + " does not match the stored " +
                     std::to_string(m.page_size));
  }
  if (m.mode != to_string(cfg_.mode)) throw InputError("data directory was written in mode " + m.mode);
  next_sst_ = m.next_sst;
  next_node_ = m.next_node;
  next_page_version_ = m.next_page_version;
  seqs_.advance_to(m.last_seq);
  pool_ = std::make_unique<PageBufferPool>(cfg_.data_dir / kPagesName, cfg_.page_size, cfg_.pool_pages, &io_,
                                           m.next_page);
  leaves_ = std::make_unique<LeafStore>(*pool_, cfg_.max_leaf_pages);

  std::map<SSTableId, SSTablePtr> tables;
  auto table = [&](SSTableId id) {
    auto it = tables.find(id);
    if (it != tables.end()) throw CorruptionError("MANIFEST references table " + std::to_string(id) + " twice");
    auto t = SSTable::open(cfg_.data_dir / sstable_file_name(id), id, &io_);
    tables.emplace(id, t);
    return t;
  };

  auto v = std::make_shared<TreeVersion>();
  v->root = m.root;
  for (const auto& r : m.nodes) {
    Node n;
    n.id = r.id;
    n.kind = r.leaf ? NodeKind::Leaf : NodeKind::NonLeaf;
    n.covered = r.covered;
    n.routing_keys = r.routing_keys;
    n.children = r.children;
    n.page_version = r.page_version;
    if (r.has_lsm) {
      NodeLsm lsm(r.max_levels, cfg_.policy, r.is_root_lsm);
      lsm.levels.clear();
      for (const auto& level : r.levels) {
        std::vector<SSTablePtr> ts;
        for (auto id : level) ts.push_back(table(id));
        lsm.levels.push_back(std::move(ts));
      }
      if (lsm.levels.size() < lsm.max_levels) lsm.levels.resize(lsm.max_levels);
      lsm.compact_pointer.resize(lsm.levels.size());
      n.lsm = std::make_shared<NodeLsm>(std::move(lsm));
    }
    if (r.has_chain) {
      n.chain = std::make_shared<LeafChain>();
      n.chain->pages = r.pages;
    }
    v->nodes.set(n.id, std::make_shared<Node>(std::move(n)));
  }
  if (!v->find(v->root)) throw CorruptionError("MANIFEST root node is missing");
  v->freeze();
  cur_.tree = v;
  cur_.mem = std::make_shared<MemTable>(cfg_.memtable_budget);

  // Files no checkpoint refers to are leftovers of uninstalled work.
  for (const auto& de : std::filesystem::directory_iterator(cfg_.data_dir)) {
    auto name = de.path().filename().string();
    if (name.rfind("sst_", 0) != 0) continue;
    bool live = false;
    for (const auto& [id, t] : tables) {
      if (sstable_file_name(id) == name) live = true;
    }
    if (!live) std::filesystem::remove(de.path());
  }

  if (m.state == "R") state_ = EngineState::R;
  else if (m.state == "W+") state_ = EngineState::WPlus;
  else if (m.state == "W0") state_ = EngineState::W0;
  else throw CorruptionError("MANIFEST: unknown state " + m.state);
  if (!m.hotspots.empty() || cfg_.mode == EngineMode::PureBtree) {
    hs_ = std::make_shared<HotspotSet>(HotspotSet::make(m.hotspots, m.hotspot_version));
  }
  // Adaptation progress is re-derived: an R engine re-verifies its hot paths
  // before admitting direct leaf writes again.
  if (cfg_.mode == EngineMode::Aha && (m.adapting || state_ == EngineState::R)) {
    adapting_ = true;
    adapt_from_ = state_;
  }
}

ManifestData Engine::snapshot_manifest() const {
  ManifestData m;
  m.page_size = cfg_.page_size;
  m.mode = to_string(cfg_.mode);
  TreeVersionPtr tree;
  {
    std::shared_lock st(state_mu_);
    tree = cur_.tree;
    m.state = to_string(state_);
    m.adapting = adapting_;
    if (hs_) {
      m.hotspot_version = hs_->version;
      m.hotspots = hs_->ranges;
    }
  }
  m.next_sst = next_sst_.load();
  m.next_node = next_node_.load();
  m.next_page = pool_->next_page_id();
  m.next_page_version = next_page_version_.load();
  m.last_seq = seqs_.last();
  m.root = tree->root;
  tree->nodes.for_each([&](const Node& n) {
    ManifestData::NodeRec r;
    r.id = n.id;
    r.leaf = n.is_leaf();
    r.covered = n.covered;
    r.page_version = n.page_version;
    r.routing_keys = n.routing_keys;
    r.children = n.children;
    if (n.lsm) {
      r.has_lsm = true;
      r.max_levels = n.lsm->max_levels;
      r.is_root_lsm = n.lsm->is_root;
      for (const auto& level : n.lsm->levels) {
        std::vector<SSTableId> ids;
        for (const auto& t : level) ids.push_back(t->id());
        r.levels.push_back(std::move(ids));
      }
    }
    if (n.chain) {
      r.has_chain = true;
      std::shared_lock latch(n.chain->latch);
      r.pages = n.chain->pages;
    }
    m.nodes.push_back(std::move(r));
  });
  return m;
}

void Engine::checkpoint() {
  std::scoped_lock roles(root_role_mu_, tree_mu_);
  std::unique_lock adm(admission_mu_);
  auto m = snapshot_manifest();
  pool_->flush_all();
  write_manifest(cfg_.data_dir, m);
}

void Engine::close() {
  std::lock_guard g(close_mu_);
  if (closed_) return;
  flush();
  stop_threads();
  checkpoint();
  closed_ = true;
}

void Engine::start() {
  if (!cfg_.background) return;
  root_thread_ = std::thread([this] { root_loop(); });
  tree_thread_ = std::thread([this] { tree_loop(); });
}

void Engine::stop_threads() {
  stop_ = true;
  wake_root();
  wake_tree();
  if (root_thread_.joinable()) root_thread_.join();
  if (tree_thread_.joinable()) tree_thread_.join();
}

void Engine::wake_root() {
  {
    std::lock_guard g(wake_mu_);
    root_wake_ = true;
  }
  root_cv_.notify_one();
}

void Engine::wake_tree() {
  {
    std::lock_guard g(wake_mu_);
    tree_wake_ = true;
  }
  tree_cv_.notify_one();
}

void Engine::root_loop() {
  while (!stop_) {
    bool did = false;
    try {
      did = maintenance_step_root();
    } catch (const std::exception& ex) {
      std::cerr << "aha: root maintenance failed, will retry: " << ex.what() << "\n";
    }
    if (did) {
      wake_tree();
      continue;
    }
    std::unique_lock lk(wake_mu_);
    root_cv_.wait_for(lk, kIdleWait, [&] { return root_wake_ || stop_.load(); });
    root_wake_ = false;
  }
}

void Engine::tree_loop() {
  while (!stop_) {
    bool did = false;
    try {
      did = maintenance_step_tree();
    } catch (const std::exception& ex) {
      std::cerr << "aha: tree maintenance failed, will retry: " << ex.what() << "\n";
    }
    if (did) continue;
    std::unique_lock lk(wake_mu_);
    tree_cv_.wait_for(lk, kIdleWait, [&] { return tree_wake_ || stop_.load(); });
    tree_wake_ = false;
  }
}

// ---------------------------------------------------------------------------
// Writes
// ---------------------------------------------------------------------------

void Engine::put(std::string_view key, std::string_view value) {
  validate_key(key);
  validate_value(value);
  write(key, EntryKind::Put, value);
}

void Engine::remove(std::string_view key) {
  validate_key(key);
  write(key, EntryKind::Tombstone, {});
}

void Engine::write(std::string_view key, EntryKind kind, std::string_view value) {
  io_.logical_bytes.fetch_add(17 + key.size() + value.size());
  for (;;) {
    std::shared_lock adm(admission_mu_);
    MemTablePtr mem;
    bool direct = false;
    {
      std::shared_lock st(state_mu_);
      mem = cur_.mem;
      direct = cfg_.mode == EngineMode::PureBtree ||
               (cfg_.mode == EngineMode::Aha && state_ == EngineState::R && !adapting_ && hs_ && hs_->contains(key));
    }
    if (direct && direct_write(key, kind, value)) return;
    if (mem->put(seqs_, key, kind, value) == MemTable::PutResult::Accepted) return;
    adm.unlock();
    rotate(mem);
  }
}

bool Engine::direct_write(std::string_view key, EntryKind kind, std::string_view value) {
  for (;;) {
    auto tree = tree_snapshot();
    auto path = route_key(*tree, key);
    const Node& leaf = tree->node(path.back());
    if (!leaf.chain || leaf.has_lsm_data()) return false;
    std::unique_lock latch(leaf.chain->latch);
    if (leaf.chain->retired) continue;
    Entry e{std::string(key), seqs_.allocate(), kind, std::string(value)};
    leaves_->upsert(*leaf.chain, e);
    bool over = leaf.chain->pages.size() > leaves_->max_pages_per_leaf();
    latch.unlock();
    if (over) request_check(leaf.id);
    return true;
  }
}

void Engine::rotate(const MemTablePtr& full) {
  std::unique_lock st(state_mu_);
  for (;;) {
    if (cur_.mem != full) return;
    if (!cur_.imm) break;
    // Both MemTables are full: wait for the flush (bounded waits, re-checked).
    if (cfg_.background) {
      wake_root();
      imm_cv_.wait_for(st, kIdleWait);
    } else {
      st.unlock();
      {
        std::lock_guard g(root_role_mu_);
        flush_imm();
      }
      st.lock();
    }
  }
  full->freeze();
  cur_.imm = full;
  cur_.mem = std::make_shared<MemTable>(cfg_.memtable_budget);
  st.unlock();
  if (cfg_.background) {
    wake_root();
  } else {
    std::lock_guard g(root_role_mu_);
    flush_imm();
  }
}

void Engine::flush() {
  MemTablePtr mem;
  {
    std::shared_lock st(state_mu_);
    mem = cur_.mem;
  }
  if (!mem->empty()) rotate(mem);
  std::unique_lock st(state_mu_);
  while (cur_.imm) {
    if (cfg_.background && !stop_) {
      wake_root();
      imm_cv_.wait_for(st, kIdleWait);
    } else {
      st.unlock();
      {
        std::lock_guard g(root_role_mu_);
        flush_imm();
      }
      st.lock();
    }
  }
}

// ---------------------------------------------------------------------------
// Root role
// ---------------------------------------------------------------------------

bool Engine::maintenance_step_root() {
  std::lock_guard g(root_role_mu_);
  bool did = flush_imm() || compact_root();
  if (did) root_units_.fetch_add(1);
  return did;
}

bool Engine::flush_imm() {
  MemTablePtr imm;
  HotspotSetPtr hs;
  bool cut_hot = false;
  {
    std::shared_lock st(state_mu_);
    imm = cur_.imm;
    hs = hs_;
    cut_hot = cfg_.mode == EngineMode::Aha && (state_ == EngineState::R || adapting_);
  }
  if (!imm) return false;
  // One table per flush, split only at hotspot bounds so no flushed table
  // straddles a hot and a cold range.
  LsmContext ctx = lsm_ctx_;
  ctx.sstable_target = SIZE_MAX;
  std::vector<std::string> cuts;
  if (cut_hot && hs) cuts = hs->bounds();
  RunBuilder b(ctx, &cuts);
  for (const auto& e : imm->entries()) b.add(view_of(e));
  auto outs = b.finish();
  bool drop = drop_next_flush_.exchange(false);
  if (drop) {
    for (const auto& t : outs) t->mark_obsolete();
    outs.clear();
  }
  {
    std::unique_lock st(state_mu_);
    if (!outs.empty()) {
      auto v = std::make_shared<TreeVersion>(*cur_.tree);
      v->freeze();
      v->epoch = ++epoch_;
      auto root = std::make_shared<Node>(v->root_node());
      root->lsm = std::make_shared<NodeLsm>(lsm_add_runs(*root->lsm, outs));
      v->nodes.set(v->root, std::move(root));
      v->freeze();
      cur_.tree = v;
    }
    cur_.imm = nullptr;
  }
  imm_cv_.notify_all();
  wake_tree();
  return true;
}

bool Engine::compact_root() {
  std::unique_lock rl(root_lsm_mu_, std::try_to_lock);
  if (!rl.owns_lock()) return false;
  auto tree = tree_snapshot();
  const Node& root = tree->root_node();
  if (!lsm_needs_compaction(*root.lsm)) return false;
  std::vector<std::string> guards;
  HotspotSetPtr hs = hotspots();
  if (cfg_.mode != EngineMode::PureLsm) {
    guards = root.routing_keys;
    if (hs) guards = merge_cut_keys(guards, hs->bounds());
  }
  auto edit = lsm_plan_compaction(*root.lsm, &guards, root.page_version, lsm_ctx_);
  if (edit.empty()) return false;
  std::vector<SSTablePtr> gone;
  {
    std::unique_lock st(state_mu_);
    auto v = std::make_shared<TreeVersion>(*cur_.tree);
    v->freeze();
    v->epoch = ++epoch_;
    auto r = std::make_shared<Node>(v->root_node());
    auto old = r->lsm;
    r->lsm = std::make_shared<NodeLsm>(apply_edit(*old, edit));
    for (const auto& t : old->all_tables()) {
      if (edit.removed.count(t->id()) && !r->lsm->contains_table(t->id())) gone.push_back(t);
    }
    v->nodes.set(v->root, std::move(r));
    v->freeze();
    cur_.tree = v;
  }
  for (const auto& t : gone) t->mark_obsolete();
  wake_tree();
  return true;
}

// ---------------------------------------------------------------------------
// Tree role
// ---------------------------------------------------------------------------

TreeContext Engine::make_ctx() {
  TreeContext ctx;
  ctx.cfg = tree_cfg_;
  ctx.lsm = &lsm_ctx_;
  ctx.leaves = leaves_.get();
  ctx.stats = &io_;
  ctx.next_node_id = [this] { return next_node_.fetch_add(1); };
  ctx.next_page_version = [this] { return next_page_version_.fetch_add(1); };
  std::shared_lock st(state_mu_);
  if (cfg_.mode == EngineMode::Aha) ctx.hotspots = hs_;
  ctx.merge_into_pages = cfg_.mode == EngineMode::PureBtree || state_ == EngineState::R || adapting_;
  return ctx;
}

void Engine::commit(TreeDraft& d) {
  if (!d.empty()) {
    std::unique_lock st(state_mu_);
    cur_.tree = d.build(*cur_.tree, ++epoch_);
  }
  for (const auto& c : d.retired) c->retired = true;
  d.held_latches.clear();
  for (const auto& t : d.obsolete) t->mark_obsolete();
  {
    std::lock_guard g(work_mu_);
    pending_.insert(d.touched.begin(), d.touched.end());
  }
}

void Engine::abandon(TreeDraft& d) {
  for (const auto& t : d.created) t->mark_obsolete();
  d.held_latches.clear();
}

void Engine::request_check(NodeId id) {
  {
    std::lock_guard g(work_mu_);
    pending_.insert(id);
  }
  wake_tree();
}

bool Engine::maintenance_step_tree() {
  if (cfg_.mode == EngineMode::PureLsm) return false;
  std::lock_guard g(tree_mu_);
  bool did = root_overflow_unit() || pending_unit() || adapt_unit() || completion_check();
  if (did) tree_units_.fetch_add(1);
  return did;
}

namespace {

template <typename F>
void run_unit(TreeDraft& d, F&& f, const std::function<void(TreeDraft&)>& commit,
              const std::function<void(TreeDraft&)>& abandon) {
  try {
    f(d);
  } catch (...) {
    abandon(d);
    throw;
  }
  commit(d);
}

}  // namespace

bool Engine::root_overflow_unit() {
  {
    auto tree = tree_snapshot();
    const Node& r = tree->root_node();
    if (!r.lsm || lsm_overflow(*r.lsm) != Overflow::Soft) return false;
  }
  std::lock_guard rl(root_lsm_mu_);
  TreeDraft d(tree_snapshot());
  auto ctx = make_ctx();
  run_unit(
      d,
      [&](TreeDraft& x) {
        if (x.get(x.root()).is_leaf()) bootstrap_from_root(x, ctx);
        else node_empty(x, ctx, x.root());
      },
      [this](TreeDraft& x) { commit(x); }, [this](TreeDraft& x) { abandon(x); });
  return true;
}

bool Engine::pending_unit() {
  enum class Work { None, Compact, Overflow, NonLeafSplit, PageSplit };
  for (;;) {
    NodeId id;
    {
      std::lock_guard g(work_mu_);
      if (pending_.empty()) return false;
      id = *pending_.begin();
      pending_.erase(pending_.begin());
    }
    auto tree = tree_snapshot();
    auto np = tree->find(id);
    if (!np) continue;
    const Node& n = *np;
    bool is_root = id == tree->root;
    Work w = Work::None;
    if (!is_root && n.lsm && lsm_needs_compaction(*n.lsm)) {
      w = Work::Compact;
    } else if (!is_root && n.lsm && lsm_overflow(*n.lsm) == Overflow::Hard) {
      w = Work::Overflow;
    } else if (!n.is_leaf() && n.routing_keys.size() > cfg_.nonleaf_capacity) {
      w = Work::NonLeafSplit;
    } else if (n.chain && !is_root) {
      std::shared_lock latch(n.chain->latch);
      if (n.chain->pages.size() > leaves_->max_pages_per_leaf()) w = Work::PageSplit;
    }
    if (w == Work::None) continue;

    TreeDraft d(tree);
    auto ctx = make_ctx();
    run_unit(
        d,
        [&](TreeDraft& x) {
          switch (w) {
            case Work::Compact:
              compact_node(x, ctx, id);
              break;
            case Work::Overflow:
              if (x.get(id).is_leaf()) split_leaf(x, ctx, id);
              else node_empty(x, ctx, id);
              break;
            case Work::NonLeafSplit:
              fix_nonleaf_overflow(x, ctx, id);
              break;
            case Work::PageSplit:
              page_leaf_split(x, ctx, id);
              break;
            case Work::None:
              break;
          }
        },
        [this](TreeDraft& x) { commit(x); }, [this](TreeDraft& x) { abandon(x); });
    return true;
  }
}

bool Engine::adapt_unit() {
  for (;;) {
    auto id = adapt_q_.pop();
    if (!id) return false;
    HotspotSetPtr hs;
    {
      std::shared_lock st(state_mu_);
      if (!adapting_) {
        adapt_q_.clear();
        return false;
      }
      hs = hs_;
    }
    if (!hs) continue;
    auto tree = tree_snapshot();
    auto np = tree->find(*id);
    if (!np || !node_needs_adaptation(*np, *hs)) continue;
    std::unique_lock<std::mutex> rl(root_lsm_mu_, std::defer_lock);
    if (*id == tree->root) rl.lock();
    TreeDraft d(tree_snapshot());
    auto ctx = make_ctx();
    run_unit(
        d, [&](TreeDraft& x) { adapt_node(x, ctx, *id); }, [this](TreeDraft& x) { commit(x); },
        [this](TreeDraft& x) { abandon(x); });
    adaptation_units_.fetch_add(1);
    return true;
  }
}

bool Engine::hot_in_memtables(const Current& c, const HotspotSet& hs) const {
  for (const auto& h : hs.ranges) {
    if (c.mem->intersects(h)) return true;
    if (c.imm && c.imm->intersects(h)) return true;
  }
  return false;
}

bool Engine::completion_check() {
  Current c;
  HotspotSetPtr hs;
  {
    std::shared_lock st(state_mu_);
    if (!adapting_) return false;
    c = cur_;
    hs = hs_;
  }
  bool no_hot = !hs || hs->empty();
  if (!no_hot) {
    if (hot_in_memtables(c, *hs)) {
      // Hot writes admitted while adapting must reach the tree first.
      if (!c.imm && !c.mem->empty()) {
        rotate(c.mem);
        return true;
      }
      return false;
    }
    if (!tree_adapted(*c.tree, *hs)) return false;
  }
  std::unique_lock adm(admission_mu_, std::try_to_lock);
  if (!adm.owns_lock()) return false;
  std::unique_lock st(state_mu_);
  if (!adapting_ || hs_ != hs) return false;
  if (!no_hot && (hot_in_memtables(cur_, *hs) || !tree_adapted(*cur_.tree, *hs))) return false;
  state_ = EngineState::R;
  adapting_ = false;
  completed_adaptations_.fetch_add(1);
  adapt_q_.clear();
  return true;
}

void Engine::run_maintenance() {
  for (;;) {
    bool a = maintenance_step_root();
    bool b = maintenance_step_tree();
    if (!a && !b) return;
  }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

void Engine::set_hotspots(std::vector<KeyRange> ranges) {
  std::uint64_t version;
  {
    std::shared_lock st(state_mu_);
    version = (hs_ ? hs_->version : 0) + 1;
  }
  auto hs = std::make_shared<HotspotSet>(HotspotSet::make(std::move(ranges), version));
  if (cfg_.mode == EngineMode::PureBtree) return;
  std::unique_lock adm(admission_mu_);
  std::unique_lock st(state_mu_);
  hs_ = std::move(hs);
  adapt_q_.clear();
  if (cfg_.mode == EngineMode::Aha && state_ == EngineState::R && !adapting_) {
    adapting_ = true;
    adapt_from_ = EngineState::R;
  }
  st.unlock();
  wake_tree();
}

EngineState Engine::transition(Workload w) {
  if (cfg_.mode != EngineMode::Aha) return state();
  std::unique_lock adm(admission_mu_);
  std::unique_lock st(state_mu_);
  if (w == Workload::ReadHeavy) {
    if (!adapting_ && state_ != EngineState::R) {
      adapting_ = true;
      adapt_from_ = state_;
      adapt_q_.clear();
    }
  } else {
    if (adapting_) {
      adapting_ = false;
      adapt_q_.clear();
    }
    if (state_ == EngineState::R) state_ = EngineState::WPlus;
  }
  auto s = state_;
  st.unlock();
  adm.unlock();
  wake_tree();
  return s;
}

EngineState Engine::state() const {
  std::shared_lock st(state_mu_);
  return state_;
}

bool Engine::adapting() const {
  std::shared_lock st(state_mu_);
  return adapting_;
}

TreeVersionPtr Engine::tree_snapshot() const {
  std::shared_lock st(state_mu_);
  return cur_.tree;
}

HotspotSetPtr Engine::hotspots() const {
  std::shared_lock st(state_mu_);
  return hs_;
}

EngineStats Engine::stats() const {
  EngineStats s;
  Current c;
  {
    std::shared_lock st(state_mu_);
    s.state = state_;
    s.adapting = adapting_;
    c = cur_;
  }
  s.completed_adaptations = completed_adaptations_.load();
  s.adaptation_units = adaptation_units_.load();
  s.tree_units = tree_units_.load();
  s.root_units = root_units_.load();
  s.node_count = c.tree->node_count();
  s.height = c.tree->height();
  c.tree->nodes.for_each([&](const Node& n) {
    if (n.chain) ++s.page_leaves;
  });
  s.root_tables = c.tree->root_node().lsm ? c.tree->root_node().lsm->table_count() : 0;
  s.memtable_entries = c.mem->size() + (c.imm ? c.imm->size() : 0);
  s.logical_bytes = io_.logical_bytes.load();
  s.physical_bytes = io_.physical_bytes();
  s.migration_rewrite_bytes = io_.migration_rewrite_bytes.load();
  s.sst_data_reads = io_.sst_data_reads.load();
  s.write_amplification = io_.write_amplification();
  s.last_seq = seqs_.last();
  return s;
}

// ---------------------------------------------------------------------------
// Reads
// ---------------------------------------------------------------------------

std::vector<Entry> Engine::read(const KeyRange& r, QueryStats* qs) {
  for (;;) {
    Current c;
    HotspotSetPtr hs;
    bool adapting = false;
    {
      std::shared_lock st(state_mu_);
      c = cur_;
      hs = hs_;
      adapting = adapting_;
    }
    QueryStats local;
    std::deque<std::vector<Entry>> owned;
    std::vector<std::unique_ptr<EntrySource>> sources;
    auto add_run = [&](std::vector<Entry> run) {
      if (run.empty()) return;
      owned.push_back(std::move(run));
      sources.push_back(std::make_unique<VectorSource>(owned.back()));
    };
    add_run(c.mem->range(r));
    if (c.imm) add_run(c.imm->range(r));
    bool retry = false;
    std::vector<NodeId> visited_hot;
    for (const auto& step : route_range(*c.tree, r)) {
      const Node& n = c.tree->node(step.id);
      if (n.lsm) {
        std::size_t touched = lsm_sources(*n.lsm, step.sub, sources);
        if (touched > 0) {
          ++local.nodelsm_probes;
          local.sstables_touched += touched;
        }
      }
      if (n.chain) {
        std::shared_lock latch(n.chain->latch);
        if (n.chain->retired) {
          retry = true;
          break;
        }
        std::vector<Entry> run;
        local.pages_read += leaves_->read_range(*n.chain, step.sub, run);
        add_run(std::move(run));
      }
      if (adapting && hs && node_needs_adaptation(n, *hs)) visited_hot.push_back(step.id);
    }
    if (retry) continue;
    if (!visited_hot.empty()) {
      bool any = false;
      for (auto id : visited_hot) any |= adapt_q_.push(id);
      if (any) wake_tree();
    }
    std::vector<Entry> out;
    if (sources.size() == 1 && owned.size() == 1) {
      // one materialized run: already sorted with one entry per key
      out = std::move(owned.front());
      std::erase_if(out, [](const Entry& e) { return e.is_tombstone(); });
    } else {
      out = merge_newest(std::move(sources), /*drop_tombstones=*/true);
    }
    local.entries_emitted = out.size();
    if (qs) *qs += local;
    return out;
  }
}

std::optional<std::string> Engine::get(std::string_view key, QueryStats* qs) {
  validate_key(key);
  auto out = read(KeyRange::point(key), qs);
  if (out.empty()) return std::nullopt;
  return std::move(out.front().value);
}

std::vector<KeyValue> Engine::range(std::string_view lo, std::string_view hi, QueryStats* qs) {
  if (!(lo < hi)) throw InputError("range needs lo < hi");
  return scan(KeyRange{std::string(lo), std::string(hi)}, qs);
}

std::vector<KeyValue> Engine::scan(const KeyRange& r, QueryStats* qs) {
  if (r.empty()) throw InputError("empty key range " + to_string(r));
  auto entries = read(r, qs);
  std::vector<KeyValue> out;
  out.reserve(entries.size());
  for (auto& e : entries) out.emplace_back(std::move(e.key), std::move(e.value));
  return out;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

namespace {

using Bounds = std::map<std::string, SeqNo, std::less<>>;

Bounds restrict(const Bounds& b, const KeyRange& r) {
  auto from = b.lower_bound(r.lo);
  auto to = r.hi ? b.lower_bound(*r.hi) : b.end();
  return Bounds(from, to);
}

}  // namespace

AuditReport Engine::audit() const {
  AuditReport rep;
  Current c;
  {
    std::shared_lock st(state_mu_);
    c = cur_;
  }
  auto problem = [&](std::string s) {
    if (rep.problems.size() < 50) rep.problems.push_back(std::move(s));
  };
  const TreeVersion& v = *c.tree;
  if (!v.find(v.root)) {
    problem("root node missing");
    return rep;
  }
  if (!(v.root_node().covered == KeyRange::all())) problem("root does not cover the keyspace");

  // Freshness bounds from the MemTables: every older copy must have a lower seq.
  Bounds top;
  for (const auto& e : c.mem->entries()) top[e.key] = e.seq;
  if (c.imm) {
    for (const auto& e : c.imm->entries()) {
      ++rep.entries_checked;
      auto it = top.find(e.key);
      if (it != top.end()) {
        if (e.seq >= it->second) problem("immutable MemTable fresher than mutable for key " + e.key);
      } else {
        top[e.key] = e.seq;
      }
    }
  }

  std::unordered_set<NodeId> seen;
  std::unordered_set<SSTableId> tables_seen;
  std::size_t reachable = 0;

  auto check_group = [&](const std::vector<Entry>& entries, const Bounds& b, Bounds& next, const std::string& where) {
    for (const auto& e : entries) {
      ++rep.entries_checked;
      auto it = b.find(e.key);
      if (it != b.end() && e.seq >= it->second) {
        problem("freshness: " + where + " holds key " + e.key + " seq " + std::to_string(e.seq) +
                " not older than seq " + std::to_string(it->second) + " above it");
      }
      auto [nit, inserted] = next.emplace(e.key, e.seq);
      if (!inserted) nit->second = std::min(nit->second, e.seq);
    }
  };

  std::function<void(NodeId, const Bounds&)> visit = [&](NodeId id, const Bounds& bounds) {
    auto np = v.find(id);
    if (!np) {
      problem("dangling child id " + std::to_string(id));
      return;
    }
    if (!seen.insert(id).second) {
      problem("node " + std::to_string(id) + " reachable twice");
      return;
    }
    ++reachable;
    const Node& n = *np;
    std::string where = "node " + std::to_string(id);
    if (n.is_leaf()) {
      if (!n.children.empty() || !n.routing_keys.empty()) problem(where + ": leaf with routing keys");
    } else {
      if (n.chain) problem(where + ": non-leaf with pages");
      if (n.children.size() != n.routing_keys.size() + 1) problem(where + ": children/keys mismatch");
      for (std::size_t i = 0; i < n.routing_keys.size(); ++i) {
        if (i > 0 && !(n.routing_keys[i - 1] < n.routing_keys[i])) problem(where + ": routing keys not increasing");
        if (!n.covered.contains(n.routing_keys[i]) || n.routing_keys[i] == n.covered.lo) {
          problem(where + ": routing key outside covered range");
        }
      }
    }

    Bounds below = bounds;
    if (n.lsm) {
      const auto& levels = n.lsm->levels;
      for (std::size_t li = 0; li < levels.size(); ++li) {
        for (std::size_t ti = 0; ti < levels[li].size(); ++ti) {
          const auto& t = levels[li][ti];
          if (!tables_seen.insert(t->id()).second) problem("table " + std::to_string(t->id()) + " referenced twice");
          if (t->obsolete()) problem("live table " + std::to_string(t->id()) + " marked obsolete");
          if (!n.covered.covers_closed(t->min_key(), t->max_key())) {
            problem(where + ": table " + std::to_string(t->id()) + " outside covered range");
          }
          if (li > 0 && ti > 0 && !(levels[li][ti - 1]->max_key() < t->min_key())) {
            problem(where + ": level " + std::to_string(li + 1) + " tables overlap");
          }
        }
      }
      // L1 runs one by one (newest first), then each deeper level.
      for (std::size_t li = 0; li < levels.size(); ++li) {
        if (li == 0) {
          for (const auto& t : levels[0]) {
            Bounds next = below;
            check_group(t->all(), below, next, where + " L1 run " + std::to_string(t->id()));
            below = std::move(next);
          }
        } else {
          std::vector<Entry> all;
          for (const auto& t : levels[li]) {
            auto es = t->all();
            all.insert(all.end(), es.begin(), es.end());
          }
          Bounds next = below;
          check_group(all, below, next, where + " L" + std::to_string(li + 1));
          below = std::move(next);
        }
      }
    }
    if (n.chain) {
      std::shared_lock latch(n.chain->latch);
      const auto& pages = n.chain->pages;
      if (pages.empty()) problem(where + ": empty page chain");
      else if (pages.front().low != n.covered.lo) problem(where + ": chain low differs from covered lo");
      for (std::size_t i = 1; i < pages.size(); ++i) {
        if (!(pages[i - 1].low < pages[i].low)) problem(where + ": page lows not increasing");
      }
      std::vector<Entry> entries;
      leaves_->read_range(*n.chain, KeyRange::all(), entries);
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!n.covered.contains(entries[i].key)) problem(where + ": page entry outside covered range");
        if (i > 0 && !(entries[i - 1].key < entries[i].key)) problem(where + ": page entries not sorted");
        if (entries[i].is_tombstone()) problem(where + ": tombstone in a page");
      }
      Bounds unused;
      check_group(entries, below, unused, where + " pages");
    }
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      auto cp = v.find(n.children[i]);
      if (cp && !(cp->covered == n.child_range(i))) {
        problem(where + ": child " + std::to_string(n.children[i]) + " covers " + to_string(cp->covered) +
                ", expected " + to_string(n.child_range(i)));
      }
      visit(n.children[i], restrict(below, n.child_range(i)));
    }
  };
  visit(v.root, top);
  if (reachable != v.node_count()) {
    problem("node table holds " + std::to_string(v.node_count()) + " nodes, " + std::to_string(reachable) +
            " reachable");
  }
  return rep;
}

}  // namespace aha
