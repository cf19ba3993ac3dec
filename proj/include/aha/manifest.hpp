#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aha/leaf_pages.hpp"
#include "aha/types.hpp"

namespace aha {

inline constexpr char kManifestName[] = "MANIFEST.aha";
inline constexpr char kPagesName[] = "pages.aha";

/// Plain-data image of one checkpoint. Keys are hex-encoded on disk so any
/// byte string round-trips; "-" stands for an absent bound.
struct ManifestData {
  struct NodeRec {
    NodeId id = 0;
    bool leaf = true;
    KeyRange covered;
    std::uint64_t page_version = 0;
    std::vector<std::string> routing_keys;
    std::vector<NodeId> children;
    bool has_lsm = false;
    std::size_t max_levels = 0;
    bool is_root_lsm = false;
    std::vector<std::vector<SSTableId>> levels;
    bool has_chain = false;
    std::vector<LeafPageRef> pages;
  };

  std::size_t page_size = 0;
  std::string mode;
  SSTableId next_sst = 1;
  NodeId next_node = 1;
  PageId next_page = 0;
  std::uint64_t next_page_version = 1;
  SeqNo last_seq = 0;
  std::string state = "W0";
  bool adapting = false;
  std::uint64_t hotspot_version = 0;
  std::vector<KeyRange> hotspots;
  NodeId root = 0;
  std::vector<NodeRec> nodes;
};

std::string serialize_manifest(const ManifestData& m);

/// Throws CorruptionError naming the offending line.
ManifestData parse_manifest(std::string_view text);

/// Writes dir/MANIFEST.aha through a temporary file and rename.
void write_manifest(const std::filesystem::path& dir, const ManifestData& m);

/// nullopt when the directory holds no manifest.
std::optional<ManifestData> read_manifest(const std::filesystem::path& dir);

}  // namespace aha
