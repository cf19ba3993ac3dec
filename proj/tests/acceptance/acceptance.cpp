// Acceptance driver: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. --quick shrinks every workload for development runs.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "aha/bench.hpp"
#include "aha/engine.hpp"

namespace fs = std::filesystem;
using namespace aha;
using namespace aha::bench;

namespace {

struct Scale {
  std::uint64_t keys = 2'000'000;
  std::uint64_t phase_ops = 200'000;
  std::uint64_t script_ops = 100'000;
  std::uint64_t residence_queries = 10'000;
  int runs = 3;
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Scratch {
 public:
  Scratch() {
    std::string tmpl = (fs::temp_directory_path() / "aha-accept-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    root_ = tmpl;
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  // Fresh empty directory; the previous one with the same name is removed.
  fs::path dir(const std::string& name) {
    auto p = root_ / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }

 private:
  fs::path root_;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0 : v[v.size() / 2];
}

std::vector<Phase> oscillation(const Scale& s) {
  return {{PhaseKind::Load, s.keys}, {PhaseKind::Read, s.phase_ops}, {PhaseKind::Write, s.phase_ops},
          {PhaseKind::Read, s.phase_ops}};
}

WorkloadSpec base_spec(const Scale& s) {
  WorkloadSpec w;
  w.keys = s.keys;
  w.phases = oscillation(s);
  return w;
}

RunOptions background_opts(const fs::path& dir) {
  RunOptions o;
  o.engine.data_dir = dir;
  o.threads = 4;
  return o;
}

// Fixed maintenance schedule: one root and one tree unit per 100 ops, one
// worker. Op-count results are then independent of thread scheduling.
RunOptions inline_opts(const fs::path& dir) {
  RunOptions o;
  o.engine.data_dir = dir;
  o.engine.background = false;
  o.inline_maintenance_every = 100;
  o.threads = 1;
  return o;
}

// ---------------------------------------------------------------------------
// Engine-level oracle: key index -> live version (or none).
// ---------------------------------------------------------------------------

class IndexOracle {
 public:
  IndexOracle(std::uint64_t keys, std::size_t key_len, std::size_t val_len)
      : ver_(keys, kAbsent), key_len_(key_len), val_len_(val_len) {}
  void put(std::uint64_t k, std::uint64_t v) { ver_[k] = v; }
  void remove(std::uint64_t k) { ver_[k] = kAbsent; }
  std::vector<KeyValue> range(std::uint64_t lo, std::uint64_t hi) const {
    std::vector<KeyValue> out;
    for (auto k = lo; k < hi; ++k) {
      if (ver_[k] != kAbsent) out.emplace_back(make_key(k, key_len_), make_value(k, ver_[k], val_len_));
    }
    return out;
  }

 private:
  static constexpr std::uint64_t kAbsent = ~0ull;
  std::vector<std::uint64_t> ver_;
  std::size_t key_len_, val_len_;
};

struct ResidenceScenario {
  std::uint64_t keys = 0;
  std::vector<std::vector<HotspotDecl>> read_phases;  // hot set per read phase
};

struct ResidenceOutcome {
  bool ok = true;
  std::vector<std::string> notes;
};

// Loads the keyspace, then for each hot set: ReadHeavy until adaptation
// completes, n hot queries that must all report zero NodeLsm probes, n cold
// queries, then a WriteHeavy burst. Every query result is checked.
ResidenceOutcome residence(const fs::path& dir, const ResidenceScenario& sc, std::uint64_t n) {
  ResidenceOutcome out;
  const std::size_t key_len = 20, val_len = 128;
  EngineConfig cfg;
  cfg.data_dir = dir;
  auto e = Engine::open(cfg);
  IndexOracle oracle(sc.keys, key_len, val_len);
  std::mt19937_64 rng(42);
  std::vector<std::uint64_t> perm(sc.keys);
  for (std::uint64_t i = 0; i < sc.keys; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uint64_t version = 0;
  for (auto k : perm) {
    e->put(make_key(k, key_len), make_value(k, version, val_len));
    oracle.put(k, version);
  }
  e->flush();
  e->run_maintenance();

  const std::uint64_t width = std::max<std::uint64_t>(1, std::llround(2e-6 * static_cast<double>(sc.keys)));
  std::uint64_t wrong = 0;
  auto query = [&](std::uint64_t lo, QueryStats* qs) {
    auto got = e->range(make_key(lo, key_len), make_key(lo + width, key_len), qs);
    if (got != oracle.range(lo, lo + width)) ++wrong;
  };

  for (std::size_t pi = 0; pi < sc.read_phases.size(); ++pi) {
    auto hot = hotspot_intervals(sc.read_phases[pi], sc.keys);
    std::vector<KeyRange> ranges;
    for (const auto& h : hot) ranges.push_back(KeyRange{make_key(h.lo, key_len), make_key(h.hi, key_len)});
    e->set_hotspots(ranges);
    e->transition(Workload::ReadHeavy);
    auto hot_start = [&]() {
      const auto& h = hot[rng() % hot.size()];
      return h.lo + rng() % (h.size() - width + 1);
    };
    std::uint64_t driven = 0;
    while (e->adapting() && driven < 5'000'000) {
      query(hot_start(), nullptr);
      ++driven;
    }
    if (e->adapting() || e->state() != EngineState::R) {
      out.ok = false;
      out.notes.push_back(fmt("phase %zu: adaptation incomplete after %llu queries", pi, (unsigned long long)driven));
      continue;
    }
    std::uint64_t probed = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      QueryStats qs;
      query(hot_start(), &qs);
      if (qs.nodelsm_probes != 0) ++probed;
    }
    // Cold queries: start anywhere whose window avoids every hot interval.
    std::uint64_t cold = 0;
    while (cold < n) {
      std::uint64_t lo = rng() % (sc.keys - width + 1);
      bool touches = std::any_of(hot.begin(), hot.end(), [&](const KeyInterval& h) { return lo < h.hi && h.lo < lo + width; });
      if (touches) continue;
      query(lo, nullptr);
      ++cold;
    }
    out.notes.push_back(fmt("phase %zu: adapted after %llu queries, %llu/%llu hot queries probed", pi,
                            (unsigned long long)driven, (unsigned long long)probed, (unsigned long long)n));
    if (probed != 0) out.ok = false;

    e->transition(Workload::WriteHeavy);
    for (std::uint64_t i = 0; i < sc.keys / 20; ++i) {
      std::uint64_t k = rng() % sc.keys;
      ++version;
      if (rng() % 10 == 0) {
        e->remove(make_key(k, key_len));
        oracle.remove(k);
      } else {
        e->put(make_key(k, key_len), make_value(k, version, val_len));
        oracle.put(k, version);
      }
    }
  }
  // Full comparison at the end.
  for (std::uint64_t lo = 0; lo < sc.keys; lo += 50'000) {
    std::uint64_t hi = std::min(sc.keys, lo + 50'000);
    if (e->range(make_key(lo, key_len), make_key(hi, key_len)) != oracle.range(lo, hi)) ++wrong;
  }
  e->close();
  out.notes.push_back(fmt("%llu wrong results", (unsigned long long)wrong));
  if (wrong != 0) out.ok = false;
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
  return s;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Verdict c1_oracle(const Scale& s, Scratch& scratch) {
  std::vector<std::string> notes;
  bool ok = true;
  for (auto dist : {Distribution::Uniform, Distribution::Zipf}) {
    for (auto split : {LeafStrategy::DownSplit, LeafStrategy::SideSplit}) {
      auto spec = base_spec(s);
      spec.dist = dist;
      auto opts = background_opts(scratch.dir("c1"));
      opts.engine.leaf_strategy = split;
      auto r = verify(spec, opts);
      bool fast = r.total_seconds < 600;
      ok = ok && r.divergences == 0 && fast;
      notes.push_back(fmt("%s/%s: %llu divergences in %.0fs", dist == Distribution::Uniform ? "uniform" : "zipf",
                          split == LeafStrategy::DownSplit ? "down" : "side", (unsigned long long)r.divergences,
                          r.total_seconds));
      if (r.divergences) notes.push_back(r.first_divergence);
    }
  }
  return {ok, join(notes)};
}

// Scripted mixed trace on a small engine; every structural install and every
// explicit maintenance unit is followed by an audit.
Verdict c2_freshness(const Scale& s, Scratch& scratch) {
  EngineConfig cfg;
  cfg.data_dir = scratch.dir("c2");
  cfg.memtable_budget = 8 << 10;
  cfg.sstable_target = 4 << 10;
  cfg.pool_pages = 32;
  cfg.max_leaf_pages = 4;
  cfg.nonleaf_capacity = 6;
  cfg.policy.l1_run_trigger = 3;
  cfg.policy.size_ratio = 4;
  cfg.policy.base_level_bytes = 16 << 10;
  cfg.background = false;
  auto e = Engine::open(cfg);

  const std::uint64_t n = 4000;
  const std::size_t key_len = 8, val_len = 40;
  std::map<std::string, std::string> oracle;
  std::mt19937_64 rng(7);
  std::uint64_t audits = 0, violations = 0, wrong = 0;
  std::string first;
  TreeVersionPtr audited;
  auto audit = [&]() {
    auto rep = e->audit();
    ++audits;
    violations += rep.problems.size();
    if (!rep.ok() && first.empty()) first = rep.problems.front();
    audited = e->tree_snapshot();
  };
  auto audit_if_changed = [&]() {
    if (e->tree_snapshot() != audited) audit();
  };
  auto drain_some = [&](int units) {
    for (int i = 0; i < units; ++i) {
      bool did = e->maintenance_step_root();
      if (did) audit();
      bool did_tree = e->maintenance_step_tree();
      if (did_tree) audit();
      if (!did && !did_tree) break;
    }
  };
  e->set_hotspots({KeyRange{make_key(1000, key_len), make_key(1800, key_len)},
                   KeyRange{make_key(3000, key_len), make_key(3300, key_len)}});

  const std::uint64_t per_phase = s.script_ops / 8;
  std::uint64_t ops = 0;
  for (int phase = 0; phase < 8; ++phase) {
    bool reading = phase % 2 == 1;
    if (reading) {
      e->transition(Workload::ReadHeavy);
      // Hot-only queries until adaptation completes.
      for (int q = 0; e->adapting() && q < 100'000; ++q) {
        std::uint64_t k = q % 2 ? 1000 + rng() % 790 : 3000 + rng() % 290;
        auto lo = make_key(k, key_len), hi = make_key(k + 8, key_len);
        std::vector<KeyValue> want(oracle.lower_bound(lo), oracle.lower_bound(hi));
        if (e->range(lo, hi) != want) ++wrong;
        if (q % 10 == 0) drain_some(2);
      }
    } else if (phase > 0) {
      e->transition(Workload::WriteHeavy);
    }
    for (std::uint64_t i = 0; i < per_phase; ++i, ++ops) {
      std::uint64_t k = rng() % n;
      if (reading && rng() % 4 != 0) k = rng() % 2 ? 1000 + rng() % 800 : 3000 + rng() % 300;
      int op = static_cast<int>(rng() % 10);
      if (reading ? op < 2 : op < 6) {
        auto v = make_value(k, ops, val_len);
        e->put(make_key(k, key_len), v);
        oracle[make_key(k, key_len)] = v;
      } else if (reading ? op < 3 : op < 8) {
        e->remove(make_key(k, key_len));
        oracle.erase(make_key(k, key_len));
      } else {
        std::uint64_t span = 1 + rng() % 30;
        auto lo = make_key(k, key_len), hi = make_key(k + span, key_len);
        std::vector<KeyValue> want(oracle.lower_bound(lo), oracle.lower_bound(hi));
        if (e->range(lo, hi) != want) ++wrong;
      }
      audit_if_changed();
      if (ops % 50 == 0) drain_some(4);
    }
    drain_some(1'000'000);
  }
  std::vector<KeyValue> want(oracle.begin(), oracle.end());
  if (e->scan(KeyRange::all()) != want) ++wrong;
  auto st = e->stats();
  e->close();
  bool ok = violations == 0 && wrong == 0 && st.completed_adaptations >= 4;
  return {ok, fmt("%llu ops, %llu audits, %llu violations, %llu wrong reads, %llu adaptations%s%s",
                  (unsigned long long)ops, (unsigned long long)audits, (unsigned long long)violations,
                  (unsigned long long)wrong, (unsigned long long)st.completed_adaptations,
                  first.empty() ? "" : "; first: ", first.c_str())};
}

Verdict c3_residence(const Scale& s, Scratch& scratch) {
  ResidenceScenario sc;
  sc.keys = s.keys;
  sc.read_phases = {{{0.0, 0.10}}};
  auto r = residence(scratch.dir("c3"), sc, s.residence_queries);
  return {r.ok, join(r.notes)};
}

// Bootstrap: the root step that grows the tree from one node must not read
// SSTable data. Migration: a full oscillation run must rewrite no bytes.
struct InlineRuns {
  std::vector<RunResult> down, side, one_level;
};

Verdict c4_guarded(const Scale& s, Scratch& scratch, const InlineRuns& ir) {
  EngineConfig cfg;
  cfg.data_dir = scratch.dir("c4");
  cfg.background = false;
  cfg.memtable_budget = 1 << 20;
  cfg.sstable_target = 512 << 10;
  cfg.policy.base_level_bytes = 2 << 20;
  auto e = Engine::open(cfg);
  std::mt19937_64 rng(3);
  std::optional<std::uint64_t> bootstrap_reads;
  std::size_t height = e->stats().height;
  for (std::uint64_t i = 0; i < 2'000'000 && !bootstrap_reads; ++i) {
    std::uint64_t k = rng() % 1'000'000'000'000ull;
    e->put(make_key(k, 20), make_value(k, i, 128));
    if (i % 1000 != 0) continue;
    // Each unit is measured on its own; the one that grows a single-node
    // tree is the bootstrap.
    auto step = [&](bool root_role) {
      auto before = e->io().sst_data_reads.load();
      bool did = root_role ? e->maintenance_step_root() : e->maintenance_step_tree();
      auto h = e->stats().height;
      if (h > height && height == 1) bootstrap_reads = e->io().sst_data_reads.load() - before;
      height = h;
      return did;
    };
    while (!bootstrap_reads && (step(true) || step(false))) {
    }
  }
  e->close();

  std::uint64_t mig = 0;
  std::size_t runs = 0;
  for (const auto* b : {&ir.down, &ir.side, &ir.one_level}) {
    for (const auto& r : *b) {
      mig += r.final_stats.migration_rewrite_bytes;
      ++runs;
    }
  }
  bool ok = bootstrap_reads && *bootstrap_reads == 0 && mig == 0 && runs > 0;
  return {ok, fmt("bootstrap data reads %s; migration rewrite bytes %llu over %zu %llu-key oscillation runs",
                  bootstrap_reads ? std::to_string(*bootstrap_reads).c_str() : "n/a (no bootstrap)",
                  (unsigned long long)mig, runs, (unsigned long long)s.keys)};
}

Verdict c5_write_amp(const Scale& s, Scratch& scratch) {
  auto spec = base_spec(s);
  spec.phases = {{PhaseKind::Load, s.keys}};
  auto run_mode = [&](EngineMode m, bool inline_sched) {
    auto opts = inline_sched ? inline_opts(scratch.dir("c5")) : background_opts(scratch.dir("c5"));
    opts.engine.mode = m;
    return run(spec, opts).load_write_amplification;
  };
  double aha = run_mode(EngineMode::Aha, true), lsm = run_mode(EngineMode::PureLsm, true);
  double aha_bg = run_mode(EngineMode::Aha, false), lsm_bg = run_mode(EngineMode::PureLsm, false);
  return {aha < lsm, fmt("fixed schedule: Aha %.2f vs PureLsm %.2f; background threads: Aha %.2f vs PureLsm %.2f",
                         aha, lsm, aha_bg, lsm_bg)};
}

double total_adaptation_seconds(const RunResult& r) {
  double t = 0;
  for (const auto& p : r.phases) t += p.adaptation_seconds.value_or(0);
  return t;
}

bool all_adapted(const RunResult& r) {
  for (const auto& p : r.phases) {
    if (p.kind == PhaseKind::Read && !p.adaptation_ops) return false;
  }
  return true;
}

Verdict c6_down_vs_side(const InlineRuns& ir) {
  std::vector<double> down, side;
  bool adapted = true;
  for (const auto& r : ir.down) {
    down.push_back(total_adaptation_seconds(r));
    adapted = adapted && all_adapted(r);
  }
  for (const auto& r : ir.side) {
    side.push_back(total_adaptation_seconds(r));
    adapted = adapted && all_adapted(r);
  }
  double md = median(down), ms = median(side);
  return {adapted && md <= ms, fmt("median adaptation wall time down %.3fs, side %.3fs (%zu runs each)%s", md, ms,
                                   down.size(), adapted ? "" : "; some read phase never adapted")};
}

struct ModeRates {
  std::vector<double> read, write;
};

// Steady state: the second half of each phase by completion order.
void add_rates(ModeRates& m, const RunResult& r) {
  double rd = 0;
  int nr = 0;
  for (const auto& p : r.phases) {
    if (p.kind == PhaseKind::Read) {
      rd += p.tail_throughput;
      ++nr;
    } else if (p.kind == PhaseKind::Write) {
      m.write.push_back(p.tail_throughput);
    }
  }
  if (nr) m.read.push_back(rd / nr);
}

Verdict c7_throughput(const Scale& s, Scratch& scratch) {
  std::map<EngineMode, ModeRates> rates;
  for (int i = 0; i < s.runs; ++i) {
    for (auto m : {EngineMode::Aha, EngineMode::PureLsm, EngineMode::PureBtree}) {
      auto spec = base_spec(s);
      spec.seed = static_cast<std::uint64_t>(i + 1);
      auto opts = background_opts(scratch.dir("c7"));
      opts.engine.mode = m;
      add_rates(rates[m], run(spec, opts));
    }
  }
  double ar = median(rates[EngineMode::Aha].read), aw = median(rates[EngineMode::Aha].write);
  double lr = median(rates[EngineMode::PureLsm].read), lw = median(rates[EngineMode::PureLsm].write);
  double br = median(rates[EngineMode::PureBtree].read), bw = median(rates[EngineMode::PureBtree].write);
  bool r_lsm = ar >= 2.0 * lr, r_bt = ar >= 0.8 * br, w_lsm = aw >= 0.9 * lw, w_bt = aw >= 1.5 * bw;
  return {r_lsm && r_bt && w_lsm && w_bt,
          fmt("read ops/s Aha %.0f, PureLsm %.0f (%.2fx, need 2x %s), PureBtree %.0f (%.2fx, need 0.8x %s); "
              "write ops/s Aha %.0f, PureLsm %.0f (%.2fx, need 0.9x %s), PureBtree %.0f (%.2fx, need 1.5x %s)",
              ar, lr, ar / lr, r_lsm ? "ok" : "missed", br, ar / br, r_bt ? "ok" : "missed", aw, lw, aw / lw,
              w_lsm ? "ok" : "missed", bw, aw / bw, w_bt ? "ok" : "missed")};
}

Verdict c8_versatility(const Scale& s, Scratch& scratch) {
  std::vector<std::string> notes;
  bool ok = true;
  const std::vector<HotspotDecl> two{{0.20, 0.05}, {0.60, 0.05}};
  const std::vector<HotspotDecl> first{{0.0, 0.10}}, drifted{{0.50, 0.10}};

  ResidenceScenario two_hot{s.keys, {two, two}};
  auto a = residence(scratch.dir("c8a"), two_hot, s.residence_queries);
  ok = ok && a.ok;
  notes.push_back("two hotspots: " + join(a.notes));
  ResidenceScenario drift{s.keys, {first, drifted}};
  auto b = residence(scratch.dir("c8b"), drift, s.residence_queries);
  ok = ok && b.ok;
  notes.push_back("drift: " + join(b.notes));

  auto spec = base_spec(s);
  spec.hotspots = two;
  auto r1 = verify(spec, background_opts(scratch.dir("c8v")));
  spec.hotspots = first;
  spec.drift = drifted;
  auto r2 = verify(spec, background_opts(scratch.dir("c8v")));
  ok = ok && r1.divergences == 0 && r2.divergences == 0;
  notes.push_back(fmt("bench verify divergences: two hotspots %llu, drift %llu", (unsigned long long)r1.divergences,
                      (unsigned long long)r2.divergences));
  return {ok, join(notes)};
}

Verdict c9_levels(const InlineRuns& ir) {
  auto first_read = [](const RunResult& r) -> std::optional<double> {
    for (const auto& p : r.phases) {
      if (p.kind == PhaseKind::Read) {
        if (!p.adaptation_ops) return std::nullopt;
        return static_cast<double>(*p.adaptation_ops);
      }
    }
    return std::nullopt;
  };
  std::vector<double> def, one;
  for (const auto& r : ir.down) {
    if (auto v = first_read(r)) def.push_back(*v);
  }
  for (const auto& r : ir.one_level) {
    if (auto v = first_read(r)) one.push_back(*v);
  }
  if (def.size() != ir.down.size() || one.size() != ir.one_level.size()) {
    return {false, "a W0->R phase never finished adapting"};
  }
  double md = median(def), mo = median(one);
  return {mo > md, fmt("median W0->R adaptation ops: (3,2) %.0f, (3,1) %.0f", md, mo)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  bool quick = false;
  std::vector<int> only;
  app.add_flag("--quick", quick, "small workloads for development");
  app.add_option("--only", only, "criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);

  Scale s;
  if (quick) {
    s.keys = 200'000;
    s.phase_ops = 50'000;
    s.script_ops = 20'000;
    s.residence_queries = 2'000;
    s.runs = 1;
  }
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  Scratch scratch;
  int failures = 0;
  auto report = [&](int c, const char* name, const std::function<Verdict()>& fn) {
    if (!wanted(c)) return;
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& ex) {
      v = {false, std::string("error: ") + ex.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.0fs]\n", v.pass ? "PASS" : "FAIL", c, name, v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  InlineRuns ir;
  auto inline_runs = [&]() {
    if (!ir.down.empty()) return;
    for (int i = 0; i < s.runs; ++i) {
      auto spec = base_spec(s);
      spec.seed = static_cast<std::uint64_t>(i + 1);
      for (auto* bucket : {&ir.down, &ir.side, &ir.one_level}) {
        auto opts = inline_opts(scratch.dir("inline"));
        if (bucket == &ir.side) opts.engine.leaf_strategy = LeafStrategy::SideSplit;
        if (bucket == &ir.one_level) opts.engine.node_max_levels = 1;
        bucket->push_back(run(spec, opts));
      }
    }
  };

  report(1, "oracle equivalence", [&] { return c1_oracle(s, scratch); });
  report(2, "freshness invariants", [&] { return c2_freshness(s, scratch); });
  report(3, "hotspot residence", [&] { return c3_residence(s, scratch); });
  report(4, "guarded-compaction economy", [&] {
    inline_runs();
    return c4_guarded(s, scratch, ir);
  });
  report(5, "write amplification", [&] { return c5_write_amp(s, scratch); });
  report(6, "down- vs side-split", [&] {
    inline_runs();
    return c6_down_vs_side(ir);
  });
  report(7, "oscillation throughput", [&] { return c7_throughput(s, scratch); });
  report(8, "hotspot versatility", [&] { return c8_versatility(s, scratch); });
  report(9, "node level sensitivity", [&] {
    inline_runs();
    return c9_levels(ir);
  });
  return failures == 0 ? 0 : 1;
}
