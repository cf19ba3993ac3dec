#include "aha/sstable.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>

namespace aha {

static_assert(std::endian::native == std::endian::little, "encoding assumes a little-endian host");

namespace {

template <typename T>
void put_fixed(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_fixed(std::string_view data, std::size_t pos) {
  T v;
  std::memcpy(&v, data.data() + pos, sizeof(T));
  return v;
}

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks to stay within range.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), n);
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void throw_io(const std::string& what, const std::filesystem::path& p) {
  throw IoError(what + " " + p.string() + ": " + std::strerror(errno));
}

}  // namespace

KeyRange SSTableMeta::closed_range() const {
  std::string hi = max_key;
  hi.push_back('\0');
  return {min_key, std::move(hi)};
}

std::string sstable_file_name(SSTableId id) { return "sst_" + std::to_string(id) + ".aha"; }

void encode_entry(std::string& out, const EntryView& e) {
  put_fixed<std::uint32_t>(out, static_cast<std::uint32_t>(e.key.size()));
  out.append(e.key);
  put_fixed<std::uint64_t>(out, e.seq);
  out.push_back(static_cast<char>(e.kind));
  put_fixed<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.size()));
  out.append(e.value);
}

EntryView decode_entry(std::string_view data, std::size_t& pos) {
  auto need = [&](std::size_t n) {
    if (pos + n > data.size()) throw CorruptionError("truncated entry");
  };
  EntryView e;
  need(4);
  auto klen = get_fixed<std::uint32_t>(data, pos);
  pos += 4;
  need(klen + 13);
  e.key = data.substr(pos, klen);
  pos += klen;
  e.seq = get_fixed<std::uint64_t>(data, pos);
  pos += 8;
  auto kind = static_cast<std::uint8_t>(data[pos]);
  if (kind > 1) throw CorruptionError("bad entry kind");
  e.kind = static_cast<EntryKind>(kind);
  pos += 1;
  auto vlen = get_fixed<std::uint32_t>(data, pos);
  pos += 4;
  need(vlen);
  e.value = data.substr(pos, vlen);
  pos += vlen;
  return e;
}

// ---------------------------------------------------------------------------
// SSTable
// ---------------------------------------------------------------------------

SSTable::~SSTable() {
  if (base_ != nullptr) ::munmap(const_cast<char*>(base_), mapped_len_);
  if (obsolete_.load()) {
    std::error_code ec;
    std::filesystem::remove(meta_.file_path, ec);
    if (stats_ != nullptr && !ec) stats_->sstables_deleted.fetch_add(1);
  }
}

void SSTable::map_file(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw_io("open", path);
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw_io("stat", path);
  }
  mapped_len_ = static_cast<std::size_t>(st.st_size);
  if (mapped_len_ == 0) {
    ::close(fd);
    throw CorruptionError("empty sstable " + path.string());
  }
  void* p = ::mmap(nullptr, mapped_len_, PROT_READ, MAP_SHARED, fd, 0);
  ::close(fd);
  if (p == MAP_FAILED) throw_io("mmap", path);
  base_ = static_cast<const char*>(p);
}

std::shared_ptr<const SSTable> SSTable::open(const std::filesystem::path& path, SSTableId id, IoStats* stats) {
  std::shared_ptr<SSTable> t(new SSTable());
  t->stats_ = stats;
  t->meta_.id = id;
  t->meta_.file_path = path.string();
  t->map_file(path);
  std::string_view data(t->base_, t->mapped_len_);
  auto corrupt = [&](const std::string& why) -> CorruptionError {
    return CorruptionError("sstable " + path.string() + ": " + why);
  };
  if (data.size() < kSSTableHeaderBytes || std::memcmp(data.data(), kSSTableMagic, 4) != 0) {
    throw corrupt("bad magic");
  }
  if (get_fixed<std::uint16_t>(data, 4) != kSSTableVersion) throw corrupt("unsupported version");

  // The body has no length prefix: decode forward until the remaining bytes
  // are exactly a footer for the entries seen so far.
  std::size_t pos = kSSTableHeaderBytes;
  std::size_t count = 0;
  std::string_view first_key, last_key;
  try {
    while (true) {
      if (count > 0) {
        std::size_t footer = 8 + 4 + first_key.size() + 4 + last_key.size() + 4;
        if (pos + footer == data.size() && get_fixed<std::uint64_t>(data, pos) == count) break;
      }
      if (pos >= data.size()) throw corrupt("no footer");
      std::size_t at = pos;
      EntryView e = decode_entry(data, pos);
      if (count > 0 && e.key <= last_key) throw corrupt("keys not strictly ascending");
      if (count % kIndexInterval == 0) t->index_.push_back({std::string(e.key), at});
      if (count == 0) first_key = e.key;
      last_key = e.key;
      ++count;
    }
  } catch (const CorruptionError& e) {
    std::string msg = e.what();
    if (msg.rfind("sstable ", 0) == 0) throw;
    throw corrupt(msg);
  }
  t->body_end_ = pos;
  std::size_t f = pos + 8;
  auto min_len = get_fixed<std::uint32_t>(data, f);
  f += 4;
  std::string_view min_key = data.substr(f, min_len);
  f += min_len;
  auto max_len = get_fixed<std::uint32_t>(data, f);
  f += 4;
  std::string_view max_key = data.substr(f, max_len);
  f += max_len;
  if (min_key != first_key || max_key != last_key) throw corrupt("footer key range mismatch");
  auto stored_crc = get_fixed<std::uint32_t>(data, f);
  if (stored_crc != crc_of(data.substr(kSSTableHeaderBytes, t->body_end_ - kSSTableHeaderBytes))) {
    throw corrupt("checksum mismatch");
  }
  t->meta_.min_key = std::string(min_key);
  t->meta_.max_key = std::string(max_key);
  t->meta_.entry_count = count;
  t->meta_.byte_size = data.size();
  return t;
}

std::size_t SSTable::lower_bound_offset(std::string_view key) const {
  // Last index point with key <= target; scanning starts there.
  auto it = std::upper_bound(index_.begin(), index_.end(), key,
                             [](std::string_view k, const IndexPoint& p) { return k < p.key; });
  if (it == index_.begin()) return body_begin_;
  return std::prev(it)->offset;
}

SSTable::Cursor SSTable::seek(const KeyRange& range) const {
  Cursor c;
  c.data_ = std::string_view(base_, mapped_len_);
  c.end_ = body_end_;
  c.hi_ = range.hi;
  c.pos_ = lower_bound_offset(range.lo);
  if (stats_ != nullptr) stats_->sst_data_reads.fetch_add(1, std::memory_order_relaxed);
  c.load();
  while (c.valid_ && c.cur_.key < range.lo) c.next();
  return c;
}

void SSTable::Cursor::load() {
  if (pos_ >= end_) {
    valid_ = false;
    return;
  }
  cur_ = decode_entry(data_.substr(0, end_), pos_);
  valid_ = !hi_ || cur_.key < *hi_;
}

void SSTable::Cursor::next() {
  if (valid_) load();
}

std::vector<Entry> SSTable::range(const KeyRange& r) const {
  std::vector<Entry> out;
  std::size_t bytes = 0;
  for (auto c = seek(r); c.valid(); c.next()) {
    out.push_back(c.entry().to_entry());
    bytes += c.entry().encoded_size();
  }
  if (stats_ != nullptr) stats_->sst_bytes_read.fetch_add(bytes, std::memory_order_relaxed);
  return out;
}

// ---------------------------------------------------------------------------
// SSTableWriter
// ---------------------------------------------------------------------------

SSTableWriter::SSTableWriter(std::filesystem::path dir, SSTableId id, IoStats* stats)
    : dir_(std::move(dir)), id_(id), stats_(stats) {
  buf_.append(kSSTableMagic, 4);
  put_fixed<std::uint16_t>(buf_, kSSTableVersion);
}

SSTableWriter::~SSTableWriter() = default;

void SSTableWriter::add(const EntryView& e) {
  if (count_ > 0 && e.key <= last_key_) {
    throw InputError("SSTableWriter: keys must be strictly ascending");
  }
  if (e.is_tombstone() && !e.value.empty()) throw InputError("tombstone with a value");
  if (count_ % SSTable::kIndexInterval == 0) index_.push_back({std::string(e.key), buf_.size()});
  encode_entry(buf_, e);
  if (count_ == 0) min_key_ = std::string(e.key);
  last_key_.assign(e.key);
  ++count_;
}

SSTablePtr SSTableWriter::finish() {
  if (count_ == 0) throw InputError("SSTableWriter: empty table");
  if (finished_) throw InputError("SSTableWriter: finish called twice");
  finished_ = true;
  std::size_t body_end = buf_.size();
  std::uint32_t crc = crc_of(std::string_view(buf_).substr(kSSTableHeaderBytes, body_end - kSSTableHeaderBytes));
  put_fixed<std::uint64_t>(buf_, count_);
  put_fixed<std::uint32_t>(buf_, static_cast<std::uint32_t>(min_key_.size()));
  buf_.append(min_key_);
  put_fixed<std::uint32_t>(buf_, static_cast<std::uint32_t>(last_key_.size()));
  buf_.append(last_key_);
  put_fixed<std::uint32_t>(buf_, crc);

  auto path = dir_ / sstable_file_name(id_);
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_io("create", path);
  std::size_t off = 0;
  while (off < buf_.size()) {
    ssize_t n = ::write(fd, buf_.data() + off, buf_.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw_io("write", path);
    }
    off += static_cast<std::size_t>(n);
  }
  ::close(fd);
  if (stats_ != nullptr) {
    stats_->sst_bytes_written.fetch_add(buf_.size(), std::memory_order_relaxed);
    stats_->sstables_created.fetch_add(1, std::memory_order_relaxed);
  }

  std::shared_ptr<SSTable> t(new SSTable());
  t->stats_ = stats_;
  t->meta_ = SSTableMeta{id_, std::move(min_key_), std::move(last_key_), count_, buf_.size(), path.string()};
  t->map_file(path);
  t->body_end_ = body_end;
  t->index_ = std::move(index_);
  std::string().swap(buf_);
  return t;
}

SSTablePtr write_sstable(const std::filesystem::path& dir, SSTableId id, const std::vector<Entry>& sorted,
                         IoStats* stats) {
  SSTableWriter w(dir, id, stats);
  for (const auto& e : sorted) w.add(view_of(e));
  return w.finish();
}

}  // namespace aha
