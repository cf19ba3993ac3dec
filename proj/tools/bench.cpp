#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aha/bench.hpp"

namespace {

aha::LeafStrategy parse_split(const std::string& s) {
  if (s == "down") return aha::LeafStrategy::DownSplit;
  if (s == "side") return aha::LeafStrategy::SideSplit;
  throw aha::InputError("--leaf-split must be down or side");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AHA-tree benchmark harness"};
  app.require_subcommand(1);

  std::string mode = "aha", dist = "uniform", hotspot, drift, phases, split = "down", data_dir = "bench-data", out;
  double theta = 0.99, selectivity = 0, delete_fraction = 0;
  std::uint64_t keys = 2'000'000, seed = 1;
  std::size_t key_len = 20, val_len = 128, root_levels = 3, node_levels = 2, csv_every = 1;
  std::size_t memtable_mib = 4, pool_pages = 4096, inline_every = 0;
  int threads = 4;
  bool hot_writes = false, no_settle = false;
  std::int64_t fault_at = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--mode", mode, "aha | pure-lsm | pure-btree")->capture_default_str();
    sub->add_option("--dist", dist, "uniform | zipf")->capture_default_str();
    sub->add_option("--theta", theta, "Zipf skew")->capture_default_str();
    sub->add_option("--keys", keys, "keyspace size")->capture_default_str();
    sub->add_option("--key-len", key_len, "key bytes")->capture_default_str();
    sub->add_option("--val-len", val_len, "value bytes")->capture_default_str();
    sub->add_option("--hotspot", hotspot, "LO:FRAC[,LO:FRAC] as keyspace fractions");
    sub->add_option("--drift-hotspot", drift, "hotspots from the second read phase on");
    sub->add_option("--selectivity", selectivity, "range query width as a keyspace fraction");
    sub->add_option("--phases", phases, "load:N,read:N,write:N,read:N");
    sub->add_option("--root-levels", root_levels)->capture_default_str();
    sub->add_option("--node-levels", node_levels)->capture_default_str();
    sub->add_option("--leaf-split", split, "down | side")->capture_default_str();
    sub->add_option("--threads", threads)->capture_default_str();
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_option("--out", out, "per-op CSV; a .json summary is written next to it");
    sub->add_option("--csv-every", csv_every, "emit every n-th CSV row")->capture_default_str();
    sub->add_option("--data-dir", data_dir)->capture_default_str();
    sub->add_option("--memtable-mib", memtable_mib)->capture_default_str();
    sub->add_option("--pool-pages", pool_pages)->capture_default_str();
    sub->add_flag("--hot-writes", hot_writes, "draw writes from the hotspots");
    sub->add_option("--delete-fraction", delete_fraction, "share of writes that delete")->capture_default_str();
    sub->add_flag("--no-settle", no_settle, "skip draining maintenance after load");
    sub->add_option("--inline-maintenance", inline_every,
                    "no maintenance threads; one root and one tree unit per worker every N ops");
    sub->add_option("--fault-drop-flush-at", fault_at, "drop the flush after this global op (verify should fail)");
  };
  auto* run_cmd = app.add_subcommand("run", "execute a workload and report metrics");
  auto* verify_cmd = app.add_subcommand("verify", "execute a workload against an in-memory oracle");
  add_common(run_cmd);
  add_common(verify_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    aha::bench::WorkloadSpec spec;
    if (dist == "uniform") spec.dist = aha::bench::Distribution::Uniform;
    else if (dist == "zipf") spec.dist = aha::bench::Distribution::Zipf;
    else throw aha::InputError("--dist must be uniform or zipf");
    spec.theta = theta;
    spec.keys = keys;
    spec.key_len = key_len;
    spec.val_len = val_len;
    spec.hotspots = aha::bench::parse_hotspots(hotspot);
    spec.drift = aha::bench::parse_hotspots(drift);
    spec.selectivity = selectivity;
    if (!phases.empty()) {
      spec.phases = aha::bench::parse_phases(phases);
    } else {
      spec.phases = {{aha::bench::PhaseKind::Load, keys},
                     {aha::bench::PhaseKind::Read, 200'000},
                     {aha::bench::PhaseKind::Write, 200'000},
                     {aha::bench::PhaseKind::Read, 200'000}};
    }
    spec.seed = seed;
    spec.hot_writes = hot_writes;
    spec.delete_fraction = delete_fraction;

    aha::bench::RunOptions opts;
    opts.engine.data_dir = data_dir;
    opts.engine.mode = aha::parse_engine_mode(mode);
    opts.engine.root_max_levels = root_levels;
    opts.engine.node_max_levels = node_levels;
    opts.engine.leaf_strategy = parse_split(split);
    opts.engine.memtable_budget = memtable_mib << 20;
    opts.engine.pool_pages = pool_pages;
    opts.threads = threads;
    opts.out_csv = out;
    opts.csv_every = csv_every;
    opts.settle_after_load = !no_settle;
    opts.inline_maintenance_every = inline_every;
    opts.engine.background = inline_every == 0;
    if (fault_at >= 0) opts.fault_at_op = static_cast<std::uint64_t>(fault_at);

    const bool verifying = verify_cmd->parsed();
    auto r = verifying ? aha::bench::verify(spec, opts) : aha::bench::run(spec, opts);
    auto json = aha::bench::summary_json(spec, opts, r);
    if (!out.empty()) {
      auto path = std::filesystem::path(out);
      path.replace_extension(".json");
      std::ofstream(path) << json << "\n";
    }
    std::cout << json << "\n";
    if (verifying) {
      if (r.divergences) {
        std::cerr << "verify: " << r.divergences << " divergence(s); " << r.first_divergence << "\n";
        return 1;
      }
      std::cerr << "verify: ok\n";
    }
    return 0;
  } catch (const aha::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 3;
  }
}
