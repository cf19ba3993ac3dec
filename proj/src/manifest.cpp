#include "aha/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

namespace aha {

namespace {

constexpr char kHeader[] = "AHA-MANIFEST 1";

std::string hex(std::string_view s) {
  static const char* d = "0123456789abcdef";
  std::string out = "x";
  for (unsigned char c : s) {
    out.push_back(d[c >> 4]);
    out.push_back(d[c & 15]);
  }
  return out;
}

std::string unhex(const std::string& s) {
  if (s.empty() || s[0] != 'x' || s.size() % 2 == 0) throw CorruptionError("bad hex field '" + s + "'");
  auto nib = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw CorruptionError("bad hex field '" + s + "'");
  };
  std::string out;
  for (std::size_t i = 1; i < s.size(); i += 2) out.push_back(static_cast<char>(nib(s[i]) * 16 + nib(s[i + 1])));
  return out;
}

std::string opt_hex(const std::optional<std::string>& s) { return s ? hex(*s) : "-"; }
std::optional<std::string> opt_unhex(const std::string& s) {
  if (s == "-") return std::nullopt;
  return unhex(s);
}

struct Reader {
  std::istringstream in;
  std::size_t line_no = 0;
  std::string line;

  explicit Reader(std::string_view text) : in(std::string(text)) {}

  std::istringstream next(const char* expected_tag) {
    if (!std::getline(in, line)) fail(std::string("missing '") + expected_tag + "' record");
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != expected_tag) fail(std::string("expected '") + expected_tag + "', found '" + tag + "'");
    return ls;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw CorruptionError("MANIFEST line " + std::to_string(line_no) + ": " + msg);
  }
  template <typename T>
  T field(std::istringstream& ls) const {
    T v{};
    if (!(ls >> v)) fail("truncated record");
    return v;
  }
};

}  // namespace

std::string serialize_manifest(const ManifestData& m) {
  std::ostringstream o;
  o << kHeader << "\n";
  o << "config " << m.page_size << " " << m.mode << "\n";
  o << "counters " << m.next_sst << " " << m.next_node << " " << m.next_page << " " << m.next_page_version << " "
    << m.last_seq << "\n";
  o << "state " << m.state << " " << (m.adapting ? 1 : 0) << "\n";
  o << "hotspots " << m.hotspot_version << " " << m.hotspots.size() << "\n";
  for (const auto& h : m.hotspots) o << "hot " << hex(h.lo) << " " << opt_hex(h.hi) << "\n";
  o << "root " << m.root << " " << m.nodes.size() << "\n";
  for (const auto& n : m.nodes) {
    o << "node " << n.id << " " << (n.leaf ? 'L' : 'N') << " " << hex(n.covered.lo) << " " << opt_hex(n.covered.hi)
      << " " << n.page_version << "\n";
    o << "keys " << n.routing_keys.size();
    for (const auto& k : n.routing_keys) o << " " << hex(k);
    o << "\n";
    o << "children " << n.children.size();
    for (auto c : n.children) o << " " << c;
    o << "\n";
    if (n.has_lsm) {
      o << "lsm " << n.max_levels << " " << (n.is_root_lsm ? 1 : 0) << " " << n.levels.size() << "\n";
      for (const auto& level : n.levels) {
        o << "level " << level.size();
        for (auto id : level) o << " " << id;
        o << "\n";
      }
    } else {
      o << "nolsm\n";
    }
    if (n.has_chain) {
      o << "chain " << n.pages.size() << "\n";
      for (const auto& p : n.pages) o << "page " << p.id << " " << hex(p.low) << " " << p.count << " " << p.used << "\n";
    } else {
      o << "nochain\n";
    }
  }
  o << "end\n";
  return o.str();
}

ManifestData parse_manifest(std::string_view text) {
  Reader r(text);
  ManifestData m;
  if (!std::getline(r.in, r.line) || r.line != kHeader) throw CorruptionError("MANIFEST: bad header");
  ++r.line_no;
  {
    auto ls = r.next("config");
    m.page_size = r.field<std::size_t>(ls);
    m.mode = r.field<std::string>(ls);
  }
  {
    auto ls = r.next("counters");
    m.next_sst = r.field<SSTableId>(ls);
    m.next_node = r.field<NodeId>(ls);
    m.next_page = r.field<PageId>(ls);
    m.next_page_version = r.field<std::uint64_t>(ls);
    m.last_seq = r.field<SeqNo>(ls);
  }
  {
    auto ls = r.next("state");
    m.state = r.field<std::string>(ls);
    m.adapting = r.field<int>(ls) != 0;
  }
  std::size_t hot_count = 0;
  {
    auto ls = r.next("hotspots");
    m.hotspot_version = r.field<std::uint64_t>(ls);
    hot_count = r.field<std::size_t>(ls);
  }
  for (std::size_t i = 0; i < hot_count; ++i) {
    auto ls = r.next("hot");
    KeyRange h;
    h.lo = unhex(r.field<std::string>(ls));
    h.hi = opt_unhex(r.field<std::string>(ls));
    m.hotspots.push_back(std::move(h));
  }
  std::size_t node_count = 0;
  {
    auto ls = r.next("root");
    m.root = r.field<NodeId>(ls);
    node_count = r.field<std::size_t>(ls);
  }
  for (std::size_t i = 0; i < node_count; ++i) {
    ManifestData::NodeRec n;
    {
      auto ls = r.next("node");
      n.id = r.field<NodeId>(ls);
      auto kind = r.field<std::string>(ls);
      if (kind != "L" && kind != "N") r.fail("bad node kind");
      n.leaf = kind == "L";
      n.covered.lo = unhex(r.field<std::string>(ls));
      n.covered.hi = opt_unhex(r.field<std::string>(ls));
      n.page_version = r.field<std::uint64_t>(ls);
    }
    {
      auto ls = r.next("keys");
      auto k = r.field<std::size_t>(ls);
      for (std::size_t j = 0; j < k; ++j) n.routing_keys.push_back(unhex(r.field<std::string>(ls)));
    }
    {
      auto ls = r.next("children");
      auto k = r.field<std::size_t>(ls);
      for (std::size_t j = 0; j < k; ++j) n.children.push_back(r.field<NodeId>(ls));
    }
    std::string peek;
    std::streampos pos = r.in.tellg();
    std::getline(r.in, peek);
    r.in.seekg(pos);
    if (peek.rfind("lsm", 0) == 0) {
      auto ls = r.next("lsm");
      n.has_lsm = true;
      n.max_levels = r.field<std::size_t>(ls);
      n.is_root_lsm = r.field<int>(ls) != 0;
      auto levels = r.field<std::size_t>(ls);
      for (std::size_t j = 0; j < levels; ++j) {
        auto ll = r.next("level");
        auto k = r.field<std::size_t>(ll);
        std::vector<SSTableId> ids;
        for (std::size_t t = 0; t < k; ++t) ids.push_back(r.field<SSTableId>(ll));
        n.levels.push_back(std::move(ids));
      }
    } else {
      r.next("nolsm");
    }
    pos = r.in.tellg();
    std::getline(r.in, peek);
    r.in.seekg(pos);
    if (peek.rfind("chain", 0) == 0) {
      auto ls = r.next("chain");
      n.has_chain = true;
      auto k = r.field<std::size_t>(ls);
      for (std::size_t j = 0; j < k; ++j) {
        auto pl = r.next("page");
        LeafPageRef p;
        p.id = r.field<PageId>(pl);
        p.low = unhex(r.field<std::string>(pl));
        p.count = r.field<std::uint32_t>(pl);
        p.used = r.field<std::uint32_t>(pl);
        n.pages.push_back(std::move(p));
      }
    } else {
      r.next("nochain");
    }
    m.nodes.push_back(std::move(n));
  }
  r.next("end");
  return m;
}

void write_manifest(const std::filesystem::path& dir, const ManifestData& m) {
  auto final_path = dir / kManifestName;
  auto tmp = dir / (std::string(kManifestName) + ".tmp");
  std::string text = serialize_manifest(m);
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw IoError("cannot create " + tmp.string());
  std::size_t off = 0;
  while (off < text.size()) {
    ssize_t w = ::write(fd, text.data() + off, text.size() - off);
    if (w <= 0) {
      ::close(fd);
      throw IoError("short write to " + tmp.string());
    }
    off += static_cast<std::size_t>(w);
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) throw IoError("rename " + tmp.string() + ": " + ec.message());
}

std::optional<ManifestData> read_manifest(const std::filesystem::path& dir) {
  auto path = dir / kManifestName;
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

}  // namespace aha
