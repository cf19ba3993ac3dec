#include "aha/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace aha::bench {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

double parse_double(std::string_view s, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(std::string(s), &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
}

std::uint64_t parse_count(std::string_view s, const char* what) {
  try {
    std::size_t pos = 0;
    auto v = std::stoull(std::string(s), &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) return out;
    start = p + 1;
  }
}

}  // namespace

const char* to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::Load:
      return "load";
    case PhaseKind::Read:
      return "read";
    case PhaseKind::Write:
      return "write";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Spec
// ---------------------------------------------------------------------------

void WorkloadSpec::validate() const {
  if (keys == 0) throw InputError("keys must be positive");
  if (key_len == 0 || key_len > kMaxKeyBytes) throw InputError("key_len out of range");
  if (key_len < 20 && keys > static_cast<std::uint64_t>(std::pow(10.0, static_cast<double>(key_len)))) {
    throw InputError("key_len too short for the key count");
  }
  if (val_len > kMaxValueBytes) throw InputError("val_len out of range");
  if (dist == Distribution::Zipf && !(theta > 0 && theta < 1)) throw InputError("theta must be in (0, 1)");
  if (phases.empty()) throw InputError("phases must be nonempty");
  for (const auto& p : phases) {
    if (p.kind == PhaseKind::Load && p.ops > keys) throw InputError("a load phase inserts at most keys distinct keys");
  }
  auto check = [&](const std::vector<HotspotDecl>& hs) {
    for (const auto& h : hs) {
      if (!(h.frac > 0 && h.frac <= 1)) throw InputError("hotspot fraction must be in (0, 1]");
      if (h.lo < 0 || h.lo + h.frac > 1 + 1e-12) throw InputError("hotspot must lie inside the keyspace");
    }
    hotspot_intervals(hs, keys);  // rejects overlaps
  };
  check(effective_hotspots());
  check(drift);
  double sel = effective_selectivity();
  if (!(sel > 0 && sel <= 1)) throw InputError("selectivity must be in (0, 1]");
  if (delete_fraction < 0 || delete_fraction > 1) throw InputError("delete_fraction must be in [0, 1]");
}

std::vector<HotspotDecl> WorkloadSpec::effective_hotspots() const {
  if (!hotspots.empty()) return hotspots;
  return {HotspotDecl{0.0, dist == Distribution::Uniform ? 0.10 : 0.01}};
}

double WorkloadSpec::effective_selectivity() const {
  if (selectivity > 0) return selectivity;
  return dist == Distribution::Uniform ? 2e-6 : 2e-7;
}

std::uint64_t WorkloadSpec::scan_keys() const {
  auto n = static_cast<std::uint64_t>(std::llround(effective_selectivity() * static_cast<double>(keys)));
  return std::max<std::uint64_t>(1, n);
}

std::vector<Phase> parse_phases(std::string_view s) {
  std::vector<Phase> out;
  for (auto item : split(s, ',')) {
    auto kv = split(item, ':');
    if (kv.size() != 2) throw InputError("phase must be kind:count, got '" + std::string(item) + "'");
    Phase p;
    if (kv[0] == "load") p.kind = PhaseKind::Load;
    else if (kv[0] == "read") p.kind = PhaseKind::Read;
    else if (kv[0] == "write") p.kind = PhaseKind::Write;
    else throw InputError("unknown phase kind '" + std::string(kv[0]) + "'");
    p.ops = parse_count(kv[1], "phase count");
    out.push_back(p);
  }
  return out;
}

std::vector<HotspotDecl> parse_hotspots(std::string_view s) {
  std::vector<HotspotDecl> out;
  if (s.empty()) return out;
  for (auto item : split(s, ',')) {
    auto kv = split(item, ':');
    if (kv.size() != 2) throw InputError("hotspot must be LO:FRAC, got '" + std::string(item) + "'");
    out.push_back({parse_double(kv[0], "hotspot start"), parse_double(kv[1], "hotspot fraction")});
  }
  return out;
}

std::vector<KeyInterval> hotspot_intervals(const std::vector<HotspotDecl>& hs, std::uint64_t keys) {
  std::vector<KeyInterval> out;
  for (const auto& h : hs) {
    auto lo = static_cast<std::uint64_t>(std::llround(h.lo * static_cast<double>(keys)));
    auto hi = static_cast<std::uint64_t>(std::llround((h.lo + h.frac) * static_cast<double>(keys)));
    hi = std::min(hi, keys);
    if (hi <= lo) hi = std::min(keys, lo + 1);
    if (hi <= lo) throw InputError("hotspot is empty at this key count");
    out.push_back({lo, hi});
  }
  std::sort(out.begin(), out.end(), [](const KeyInterval& a, const KeyInterval& b) { return a.lo < b.lo; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].lo < out[i - 1].hi) throw InputError("hotspots overlap");
  }
  return out;
}

std::string make_key(std::uint64_t idx, std::size_t len) {
  std::string digits = std::to_string(idx);
  if (digits.size() > len) throw InputError("key index does not fit key_len");
  return std::string(len - digits.size(), '0') + digits;
}

std::string make_value(std::uint64_t idx, std::uint64_t version, std::size_t len) {
  std::string v = "v" + std::to_string(idx) + "." + std::to_string(version) + ".";
  if (v.size() >= len) {
    v.resize(len);
    return v;
  }
  v.reserve(len);
  std::uint64_t x = splitmix64(idx * 0x100000001b3ull ^ version);
  while (v.size() < len) {
    for (int b = 0; b < 8 && v.size() < len; ++b) v.push_back(static_cast<char>('a' + ((x >> (b * 8)) & 0xff) % 26));
    x = splitmix64(x);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Zipfian
// ---------------------------------------------------------------------------

Zipfian::Zipfian(std::uint64_t n, double theta) : n_(n), theta_(theta) {
  if (n == 0) throw InputError("Zipfian needs n > 0");
  alpha_ = 1.0 / (1.0 - theta_);
  zetan_ = 0;
  for (std::uint64_t i = 1; i <= n_; ++i) zetan_ += 1.0 / std::pow(static_cast<double>(i), theta_);
  double zeta2 = 1.0 + std::pow(0.5, theta_);
  eta_ = n_ <= 1 ? 0 : (1.0 - std::pow(2.0 / static_cast<double>(n_), 1.0 - theta_)) / (1.0 - zeta2 / zetan_);
}

std::uint64_t Zipfian::next(std::mt19937_64& rng) const {
  double u = u01(rng);
  double uz = u * zetan_;
  if (uz < 1.0 || n_ == 1) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return 1;
  auto r = static_cast<std::uint64_t>(static_cast<double>(n_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(r, n_ - 1);
}

// ---------------------------------------------------------------------------
// Operation streams
// ---------------------------------------------------------------------------

std::vector<Op> gen_ops(const WorkloadSpec& spec, std::size_t phase_index, const std::vector<KeyInterval>& hot) {
  const Phase& phase = spec.phases.at(phase_index);
  std::mt19937_64 rng(splitmix64(spec.seed ^ (0x5bd1e995ull * (phase_index + 1))));
  std::vector<Op> ops;
  ops.reserve(phase.ops);

  if (phase.kind == PhaseKind::Load) {
    std::vector<std::uint64_t> perm(spec.keys);
    for (std::uint64_t i = 0; i < spec.keys; ++i) perm[i] = i;
    for (std::uint64_t i = spec.keys; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
    for (std::uint64_t i = 0; i < phase.ops; ++i) ops.push_back({Op::Kind::Put, perm[i], 0});
    return ops;
  }

  if (hot.empty() && (phase.kind == PhaseKind::Read || spec.hot_writes)) throw InputError("no hotspot to draw from");
  std::uint64_t hot_total = 0;
  for (const auto& h : hot) hot_total += h.size();
  auto pick_hot = [&]() -> const KeyInterval& {
    if (hot.size() == 1) return hot.front();
    std::uint64_t x = rng() % hot_total;
    for (const auto& h : hot) {
      if (x < h.size()) return h;
      x -= h.size();
    }
    return hot.back();
  };
  std::vector<std::optional<Zipfian>> hot_zipf(hot.size());
  auto offset_in = [&](const KeyInterval& h, std::uint64_t width) -> std::uint64_t {
    if (spec.dist == Distribution::Uniform) return rng() % width;
    std::size_t i = static_cast<std::size_t>(&h - hot.data());
    if (!hot_zipf[i] || hot_zipf[i]->n() != width) hot_zipf[i].emplace(width, spec.theta);
    return hot_zipf[i]->next(rng);
  };

  if (phase.kind == PhaseKind::Read) {
    for (std::uint64_t i = 0; i < phase.ops; ++i) {
      const KeyInterval& h = pick_hot();
      std::uint64_t len = std::min(spec.scan_keys(), h.size());
      std::uint64_t start = h.lo + offset_in(h, h.size() - len + 1);
      ops.push_back({Op::Kind::Scan, start, len});
    }
    return ops;
  }

  std::optional<Zipfian> full;
  if (spec.dist == Distribution::Zipf && !spec.hot_writes) full.emplace(spec.keys, spec.theta);
  for (std::uint64_t i = 0; i < phase.ops; ++i) {
    std::uint64_t k;
    if (spec.hot_writes) {
      const KeyInterval& h = pick_hot();
      k = h.lo + offset_in(h, h.size());
    } else if (full) {
      k = full->next(rng);
    } else {
      k = rng() % spec.keys;
    }
    bool del = spec.delete_fraction > 0 && u01(rng) < spec.delete_fraction;
    ops.push_back({del ? Op::Kind::Delete : Op::Kind::Put, k, 0});
  }
  return ops;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

namespace {

void prepare_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (dir.empty()) throw InputError("data dir must be set");
  if (!fs::exists(dir)) {
    fs::create_directories(dir);
    return;
  }
  for (const auto& de : fs::directory_iterator(dir)) {
    auto name = de.path().filename().string();
    bool ours = name == kManifestName || name == std::string(kManifestName) + ".tmp" || name == kPagesName ||
                name.rfind("sst_", 0) == 0;
    if (!ours) throw InputError("data dir " + dir.string() + " holds foreign file " + name);
  }
  for (const auto& de : fs::directory_iterator(dir)) fs::remove(de.path());
}

std::uint8_t state_code(const Engine& e) {
  auto s = e.state();
  auto code = static_cast<std::uint8_t>(s);
  if (e.adapting()) code |= 4;
  return code;
}

std::string state_name(std::uint8_t code) {
  std::string s = to_string(static_cast<EngineState>(code & 3));
  if (code & 4) s += ">R";
  return s;
}

std::uint64_t fnv(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<KeyRange> to_key_ranges(const std::vector<KeyInterval>& iv, std::size_t key_len) {
  std::vector<KeyRange> out;
  for (const auto& h : iv) out.push_back(KeyRange{make_key(h.lo, key_len), make_key(h.hi, key_len)});
  return out;
}

/// Oracle: latest version per key index (0 = absent).
class VersionOracle {
 public:
  explicit VersionOracle(std::uint64_t keys) : ver_(keys, 0) {}
  void put(std::uint64_t k, std::uint64_t version) { ver_[k] = version + 1; }
  void remove(std::uint64_t k) { ver_[k] = 0; }
  std::vector<KeyValue> range(std::uint64_t lo, std::uint64_t hi, const WorkloadSpec& spec) const {
    std::vector<KeyValue> out;
    for (std::uint64_t k = lo; k < hi && k < ver_.size(); ++k) {
      if (ver_[k]) out.emplace_back(make_key(k, spec.key_len), make_value(k, ver_[k] - 1, spec.val_len));
    }
    return out;
  }

 private:
  std::vector<std::uint64_t> ver_;
};

std::string describe_divergence(std::uint64_t op, std::uint64_t lo, std::uint64_t hi, const std::vector<KeyValue>& want,
                                const std::vector<KeyValue>& got) {
  std::ostringstream o;
  o << "op " << op << " scan [" << lo << ", " << hi << "): expected " << want.size() << " entries, got " << got.size();
  std::size_t n = std::min(want.size(), got.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (want[i] != got[i]) {
      o << "; first difference at position " << i << ": expected key " << want[i].first << " got " << got[i].first;
      if (want[i].first == got[i].first) o << " (value differs)";
      return o.str();
    }
  }
  if (want.size() > n) o << "; missing key " << want[n].first;
  if (got.size() > n) o << "; unexpected key " << got[n].first;
  return o.str();
}

struct OpRecord {
  std::uint64_t end_ns = 0;
  std::uint32_t probes = 0;
  std::uint8_t state = 0;
};

RunResult run_impl(const WorkloadSpec& spec, const RunOptions& opts) {
  spec.validate();
  if (opts.threads < 1) throw InputError("threads must be >= 1");
  if ((opts.inline_maintenance_every > 0) == opts.engine.background) {
    throw InputError("inline maintenance needs background maintenance off, and vice versa");
  }
  prepare_dir(opts.engine.data_dir);
  auto engine = Engine::open(opts.engine);
  Engine& e = *engine;

  RunResult result;
  auto hot = hotspot_intervals(spec.effective_hotspots(), spec.keys);
  e.set_hotspots(to_key_ranges(hot, spec.key_len));
  std::optional<VersionOracle> oracle;
  if (opts.verify) oracle.emplace(spec.keys);

  std::vector<OpRecord> records;  // all phases, by global op index
  std::uint64_t total_ops = 0;
  for (const auto& p : spec.phases) total_ops += p.ops;
  records.resize(total_ops);
  std::vector<std::uint64_t> op_hash(total_ops, 0);

  const std::uint64_t run_start = now_ns();
  std::uint64_t global = 0;
  bool seen_read = false;
  bool drifted = false;
  std::mutex div_mu;

  for (std::size_t pi = 0; pi < spec.phases.size(); ++pi) {
    const Phase& phase = spec.phases[pi];
    if (phase.kind == PhaseKind::Read) {
      if (seen_read && !spec.drift.empty() && !drifted) {
        hot = hotspot_intervals(spec.drift, spec.keys);
        e.set_hotspots(to_key_ranges(hot, spec.key_len));
        drifted = true;
      }
      seen_read = true;
      e.transition(Workload::ReadHeavy);
    } else if (phase.kind == PhaseKind::Write) {
      e.transition(Workload::WriteHeavy);
    }
    auto ops = gen_ops(spec, pi, hot);
    PhaseResult pr;
    pr.kind = phase.kind;
    pr.first_op = global;
    pr.ops = ops.size();

    std::atomic<std::uint64_t> done{0};
    std::atomic<bool> adapted{phase.kind != PhaseKind::Read};
    std::atomic<std::uint64_t> adapted_at_op{0};
    std::atomic<std::uint64_t> adapted_at_ns{0};
    std::atomic<std::uint64_t> hot_after{0}, hot_after_probes{0};
    std::atomic<std::uint64_t> probes{0}, tables{0}, pages{0}, emitted{0};
    std::atomic<bool> abort{false};
    std::exception_ptr error;
    std::mutex err_mu;
    const std::uint64_t phase_start = now_ns();
    const auto threads = static_cast<std::uint64_t>(opts.threads);

    auto worker = [&](std::uint64_t t) {
      try {
        std::uint64_t mine = 0;
        for (std::uint64_t i = 0; i < ops.size() && !abort; ++i) {
          const Op& op = ops[i];
          std::uint64_t owner = op.kind == Op::Kind::Scan ? i % threads : splitmix64(op.key) % threads;
          if (owner != t) continue;
          std::uint64_t g = global + i;
          OpRecord& rec = records[g];
          switch (op.kind) {
            case Op::Kind::Put:
              e.put(make_key(op.key, spec.key_len), make_value(op.key, g, spec.val_len));
              break;
            case Op::Kind::Delete:
              e.remove(make_key(op.key, spec.key_len));
              break;
            case Op::Kind::Scan: {
              bool was_adapted = adapted.load();
              QueryStats qs;
              auto lo = make_key(op.key, spec.key_len);
              auto hi = make_key(op.key + op.len, spec.key_len);
              auto got = e.range(lo, hi, &qs);
              std::uint64_t h = 0xcbf29ce484222325ull;
              for (const auto& [k, v] : got) h = fnv(fnv(h, k), v);
              op_hash[g] = h;
              rec.probes = static_cast<std::uint32_t>(qs.nodelsm_probes);
              probes += qs.nodelsm_probes;
              tables += qs.sstables_touched;
              pages += qs.pages_read;
              emitted += qs.entries_emitted;
              if (was_adapted) {
                ++hot_after;
                if (qs.nodelsm_probes > 0) ++hot_after_probes;
              }
              if (oracle) {
                auto want = oracle->range(op.key, op.key + op.len, spec);
                if (want != got) {
                  std::lock_guard g2(div_mu);
                  if (result.divergences++ == 0) {
                    result.first_divergence = describe_divergence(g, op.key, op.key + op.len, want, got);
                  }
                }
              }
              break;
            }
          }
          if (opts.fault_at_op && *opts.fault_at_op == g) e.drop_next_flush();
          if (opts.inline_maintenance_every > 0 && ++mine % opts.inline_maintenance_every == 0) {
            e.maintenance_step_root();
            e.maintenance_step_tree();
          }
          rec.end_ns = now_ns() - run_start;
          auto completed = ++done;
          if (!adapted.load() && !e.adapting()) {
            bool expected = false;
            if (adapted.compare_exchange_strong(expected, true)) {
              adapted_at_op = completed;
              adapted_at_ns = now_ns();
            }
          }
          rec.state = state_code(e);
        }
      } catch (...) {
        std::lock_guard g2(err_mu);
        if (!error) error = std::current_exception();
        abort = true;
      }
    };
    std::vector<std::thread> pool;
    for (std::uint64_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    const std::uint64_t phase_end = now_ns();

    pr.seconds = static_cast<double>(phase_end - phase_start) * 1e-9;
    pr.throughput = pr.seconds > 0 ? static_cast<double>(pr.ops) / pr.seconds : 0;
    // Tail throughput: ops completing in the second half of the phase's
    // completion order.
    if (pr.ops >= 2) {
      std::vector<std::uint64_t> ends;
      ends.reserve(pr.ops);
      for (std::uint64_t i = 0; i < pr.ops; ++i) ends.push_back(records[global + i].end_ns);
      std::sort(ends.begin(), ends.end());
      std::uint64_t mid = ends[pr.ops / 2 - 1];
      double secs = static_cast<double>(ends.back() - mid) * 1e-9;
      pr.tail_throughput = secs > 0 ? static_cast<double>(pr.ops - pr.ops / 2) / secs : 0;
    }
    if (phase.kind == PhaseKind::Read && adapted.load()) {
      auto at = adapted_at_op.load();
      if (at == 0) at = 0;
      pr.adaptation_ops = at;
      pr.adaptation_complete_op = global + at;
      pr.adaptation_seconds = static_cast<double>(adapted_at_ns.load() - phase_start) * 1e-9;
    }
    pr.queries.nodelsm_probes = probes;
    pr.queries.sstables_touched = tables;
    pr.queries.pages_read = pages;
    pr.queries.entries_emitted = emitted;
    pr.hot_queries_after_adaptation = hot_after;
    pr.hot_queries_with_probes = hot_after_probes;

    if (oracle) {
      for (std::uint64_t i = 0; i < ops.size(); ++i) {
        if (ops[i].kind == Op::Kind::Put) oracle->put(ops[i].key, global + i);
        else if (ops[i].kind == Op::Kind::Delete) oracle->remove(ops[i].key);
      }
    }
    global += ops.size();

    if (phase.kind == PhaseKind::Load) {
      if (opts.settle_after_load) {
        e.flush();
        e.run_maintenance();
      }
      result.load_logical_bytes = e.io().logical_bytes.load();
      result.load_physical_bytes = e.io().physical_bytes();
      result.load_write_amplification = e.io().write_amplification();
    }
    pr.state_at_end = state_name(state_code(e));
    result.phases.push_back(pr);
  }
  result.total_seconds = static_cast<double>(now_ns() - run_start) * 1e-9;

  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto x : op_hash) h = (h ^ x) * 0x100000001b3ull;
  result.result_hash = h;

  if (oracle) {
    // Whole keyspace, in chunks.
    const std::uint64_t chunk = 50'000;
    for (std::uint64_t lo = 0; lo < spec.keys; lo += chunk) {
      std::uint64_t hi = std::min(spec.keys, lo + chunk);
      auto got = e.range(make_key(lo, spec.key_len), make_key(hi, spec.key_len));
      auto want = oracle->range(lo, hi, spec);
      if (got != want) {
        if (result.divergences++ == 0) {
          result.first_divergence = "final scan: " + describe_divergence(global, lo, hi, want, got);
        }
      }
    }
  }
  result.final_stats = e.stats();

  if (!opts.out_csv.empty()) {
    std::vector<std::uint64_t> order(records.size());
    for (std::uint64_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint64_t a, std::uint64_t b) { return records[a].end_ns < records[b].end_ns; });
    std::ofstream out(opts.out_csv);
    if (!out) throw IoError("cannot write " + opts.out_csv.string());
    out << "op_index,wall_ns,window_tput,state,nodelsm_probes\n";
    const std::size_t window = 100;
    std::size_t every = std::max<std::size_t>(1, opts.csv_every);
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (j % every != 0 && j + 1 != order.size()) continue;
      const auto& r = records[order[j]];
      double tput = 0;
      if (j > 0) {
        std::size_t w = std::min(window, j);
        std::uint64_t dt = r.end_ns - records[order[j - w]].end_ns;
        tput = dt > 0 ? static_cast<double>(w) * 1e9 / static_cast<double>(dt) : 0;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.1f", tput);
      out << j << "," << r.end_ns << "," << buf << "," << state_name(r.state) << "," << r.probes << "\n";
    }
  }
  engine->close();
  return result;
}

}  // namespace

RunResult run(const WorkloadSpec& spec, const RunOptions& opts) { return run_impl(spec, opts); }

RunResult verify(const WorkloadSpec& spec, RunOptions opts) {
  opts.verify = true;
  return run_impl(spec, opts);
}

std::string summary_json(const WorkloadSpec& spec, const RunOptions& opts, const RunResult& r) {
  using nlohmann::json;
  json j;
  j["mode"] = to_string(opts.engine.mode);
  j["distribution"] = spec.dist == Distribution::Uniform ? "uniform" : "zipf";
  j["keys"] = spec.keys;
  j["threads"] = opts.threads;
  j["seed"] = spec.seed;
  j["leaf_split"] = opts.engine.leaf_strategy == LeafStrategy::DownSplit ? "down" : "side";
  j["root_levels"] = opts.engine.root_max_levels;
  j["node_levels"] = opts.engine.node_max_levels;
  j["scan_keys"] = spec.scan_keys();
  j["inline_maintenance_every"] = opts.inline_maintenance_every;
  j["total_seconds"] = r.total_seconds;
  j["load_write_amplification"] = r.load_write_amplification;
  j["load_logical_bytes"] = r.load_logical_bytes;
  j["load_physical_bytes"] = r.load_physical_bytes;
  j["result_hash"] = r.result_hash;
  j["divergences"] = r.divergences;
  if (!r.first_divergence.empty()) j["first_divergence"] = r.first_divergence;
  json phases = json::array();
  for (const auto& p : r.phases) {
    json pj;
    pj["kind"] = to_string(p.kind);
    pj["first_op"] = p.first_op;
    pj["ops"] = p.ops;
    pj["seconds"] = p.seconds;
    pj["throughput"] = p.throughput;
    pj["tail_throughput"] = p.tail_throughput;
    pj["state_at_end"] = p.state_at_end;
    if (p.adaptation_complete_op) {
      pj["adaptation_complete_op"] = *p.adaptation_complete_op;
      pj["adaptation_ops"] = *p.adaptation_ops;
      pj["adaptation_seconds"] = *p.adaptation_seconds;
    }
    pj["nodelsm_probes"] = p.queries.nodelsm_probes;
    pj["sstables_touched"] = p.queries.sstables_touched;
    pj["pages_read"] = p.queries.pages_read;
    pj["entries_emitted"] = p.queries.entries_emitted;
    pj["hot_queries_after_adaptation"] = p.hot_queries_after_adaptation;
    pj["hot_queries_with_probes"] = p.hot_queries_with_probes;
    phases.push_back(pj);
  }
  j["phases"] = phases;
  const auto& s = r.final_stats;
  j["final"] = {{"state", to_string(s.state)},
                {"adapting", s.adapting},
                {"node_count", s.node_count},
                {"height", s.height},
                {"page_leaves", s.page_leaves},
                {"root_tables", s.root_tables},
                {"adaptation_units", s.adaptation_units},
                {"completed_adaptations", s.completed_adaptations},
                {"logical_bytes", s.logical_bytes},
                {"physical_bytes", s.physical_bytes},
                {"write_amplification", s.write_amplification},
                {"migration_rewrite_bytes", s.migration_rewrite_bytes}};
  return j.dump(2);
}

}  // namespace aha::bench
