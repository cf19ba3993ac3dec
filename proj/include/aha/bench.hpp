#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "aha/engine.hpp"

namespace aha::bench {

enum class Distribution { Uniform, Zipf };
enum class PhaseKind { Load, Read, Write };

const char* to_string(PhaseKind k);

struct Phase {
  PhaseKind kind = PhaseKind::Load;
  std::uint64_t ops = 0;
};

/// A hot range declared as [lo, lo + frac) in fractions of the keyspace.
struct HotspotDecl {
  double lo = 0;
  double frac = 0;
};

/// Key-index interval [lo, hi).
struct KeyInterval {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  std::uint64_t size() const { return hi - lo; }
};

struct WorkloadSpec {
  Distribution dist = Distribution::Uniform;
  double theta = 0.99;
  std::uint64_t keys = 2'000'000;
  std::size_t key_len = 20;
  std::size_t val_len = 128;
  std::vector<HotspotDecl> hotspots;  // empty: 10% (uniform) or 1% (zipf) at the left edge
  std::vector<HotspotDecl> drift;     // hotspots after the first read phase; empty: no drift
  double selectivity = 0;             // 0: 2e-6 (uniform) or 2e-7 (zipf)
  std::vector<Phase> phases{{PhaseKind::Load, 2'000'000}, {PhaseKind::Read, 200'000},
                            {PhaseKind::Write, 200'000}, {PhaseKind::Read, 200'000}};
  std::uint64_t seed = 1;
  bool hot_writes = false;       // writes drawn from the hotspots only
  double delete_fraction = 0;    // share of write-phase ops that delete

  void validate() const;
  std::vector<HotspotDecl> effective_hotspots() const;
  double effective_selectivity() const;
  /// Keys per range query (at least one).
  std::uint64_t scan_keys() const;
};

std::vector<Phase> parse_phases(std::string_view s);       // "load:N,read:N,write:N"
std::vector<HotspotDecl> parse_hotspots(std::string_view s);  // "LO:FRAC[,LO:FRAC]"

std::vector<KeyInterval> hotspot_intervals(const std::vector<HotspotDecl>& hs, std::uint64_t keys);

/// Zero-padded decimal of idx, exactly len bytes.
std::string make_key(std::uint64_t idx, std::size_t len);
/// Deterministic value for (idx, version), exactly len bytes.
std::string make_value(std::uint64_t idx, std::uint64_t version, std::size_t len);

/// Zipfian ranks in [0, n) with rank 0 most frequent (Gray et al.
/// generator as used by YCSB).
class Zipfian {
 public:
  Zipfian(std::uint64_t n, double theta);
  std::uint64_t next(std::mt19937_64& rng) const;
  std::uint64_t n() const { return n_; }

 private:
  std::uint64_t n_;
  double theta_, alpha_, zetan_, eta_;
};

struct Op {
  enum class Kind : std::uint8_t { Put, Delete, Scan };
  Kind kind = Kind::Put;
  std::uint64_t key = 0;  // key index; scan start
  std::uint64_t len = 0;  // scan width in keys
};

/// Deterministic operation stream of one phase. Read phases scan inside
/// the given hot intervals only.
std::vector<Op> gen_ops(const WorkloadSpec& spec, std::size_t phase_index, const std::vector<KeyInterval>& hot);

struct RunOptions {
  EngineConfig engine;
  int threads = 4;
  std::filesystem::path out_csv;  // empty: no CSV
  std::size_t csv_every = 1;      // emit every n-th op row
  bool verify = false;
  bool settle_after_load = true;  // drain maintenance before the first timed phase
  std::optional<std::uint64_t> fault_at_op;  // drop the flush following this global op index
  // With engine.background off: each worker runs one root unit and one tree
  // unit after every n of its ops. 0 requires background maintenance.
  std::size_t inline_maintenance_every = 0;
};

struct PhaseResult {
  PhaseKind kind = PhaseKind::Load;
  std::uint64_t first_op = 0;
  std::uint64_t ops = 0;
  double seconds = 0;
  double throughput = 0;
  double tail_throughput = 0;  // last half of the phase
  std::optional<std::uint64_t> adaptation_complete_op;  // global op index
  std::optional<std::uint64_t> adaptation_ops;           // ops into the phase
  std::optional<double> adaptation_seconds;
  QueryStats queries;
  std::uint64_t hot_queries_with_probes = 0;  // after adaptation completed
  std::uint64_t hot_queries_after_adaptation = 0;
  std::string state_at_end;
};

struct RunResult {
  std::vector<PhaseResult> phases;
  EngineStats final_stats;
  double load_write_amplification = 0;
  std::uint64_t load_logical_bytes = 0;
  std::uint64_t load_physical_bytes = 0;
  std::uint64_t divergences = 0;
  std::string first_divergence;
  std::uint64_t result_hash = 0;  // over every read result, in stream order
  double total_seconds = 0;
};

/// Executes the phases against a fresh engine in opts.engine.data_dir.
RunResult run(const WorkloadSpec& spec, const RunOptions& opts);

/// run with oracle checks of every read plus a final full comparison.
RunResult verify(const WorkloadSpec& spec, RunOptions opts);

/// JSON summary (phases, adaptation markers, I/O counters).
std::string summary_json(const WorkloadSpec& spec, const RunOptions& opts, const RunResult& r);

}  // namespace aha::bench
