#pragma once

#include <atomic>
#include <cstdint>

namespace aha {

/// Process-wide byte and I/O counters for one engine instance. Every writer
/// of physical bytes reports here; write amplification is derived from it.
struct IoStats {
  std::atomic<std::uint64_t> logical_bytes{0};        // encoded bytes admitted by put/delete
  std::atomic<std::uint64_t> sst_bytes_written{0};
  std::atomic<std::uint64_t> page_bytes_written{0};
  std::atomic<std::uint64_t> sst_data_reads{0};       // cursors opened over SSTable data
  std::atomic<std::uint64_t> sst_bytes_read{0};
  std::atomic<std::uint64_t> page_reads{0};           // pool misses served from disk
  std::atomic<std::uint64_t> migration_rewrite_bytes{0};
  std::atomic<std::uint64_t> sstables_created{0};
  std::atomic<std::uint64_t> sstables_deleted{0};

  std::uint64_t physical_bytes() const { return sst_bytes_written.load() + page_bytes_written.load(); }

  double write_amplification() const {
    auto logical = logical_bytes.load();
    return logical == 0 ? 0.0 : static_cast<double>(physical_bytes()) / static_cast<double>(logical);
  }
};

}  // namespace aha
