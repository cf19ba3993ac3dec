#include "aha/leaf_pages.hpp"

#include <algorithm>
#include <cstring>

namespace aha {

// In-memory form of one page slot; payload is either the value itself or an
// overflow reference.
struct PageEntry {
  std::string key;
  SeqNo seq = 0;
  bool overflow = false;
  std::uint32_t value_len = 0;
  std::string payload;

  std::size_t size() const { return 2 + key.size() + 13 + payload.size() + 2; }  // includes the slot
};

namespace {

constexpr std::size_t kHeader = 4;
constexpr std::uint8_t kFlagOverflow = 2;
constexpr double kFillFactor = 0.9;

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void store(char* p, T v) {
  std::memcpy(p, &v, sizeof(T));
}

struct SlotView {
  std::string_view key;
  SeqNo seq = 0;
  std::uint8_t flags = 0;
  std::uint32_t value_len = 0;
  std::string_view payload;
};

std::size_t slot_count(std::span<const char> page) { return load<std::uint16_t>(page.data()); }

SlotView slot_at(std::span<const char> page, std::size_t i) {
  auto off = load<std::uint16_t>(page.data() + kHeader + 2 * i);
  const char* p = page.data() + off;
  SlotView v;
  auto klen = load<std::uint16_t>(p);
  v.key = std::string_view(p + 2, klen);
  p += 2 + klen;
  v.seq = load<std::uint64_t>(p);
  v.flags = static_cast<std::uint8_t>(p[8]);
  v.value_len = load<std::uint32_t>(p + 9);
  p += 13;
  std::size_t plen = (v.flags & kFlagOverflow) ? 4 + 8 * static_cast<std::size_t>(load<std::uint32_t>(p)) : v.value_len;
  v.payload = std::string_view(p, plen);
  return v;
}

std::size_t lower_slot(std::span<const char> page, std::string_view key) {
  std::size_t lo = 0, hi = slot_count(page);
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (slot_at(page, mid).key < key) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}

std::vector<PageEntry> read_page(PageBufferPool& pool, PageId id) {
  auto h = pool.fetch(id);
  auto page = h.data();
  std::size_t n = slot_count(page);
  std::vector<PageEntry> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto s = slot_at(page, i);
    out.push_back(PageEntry{std::string(s.key), s.seq, (s.flags & kFlagOverflow) != 0, s.value_len,
                            std::string(s.payload)});
  }
  return out;
}

// Serializes entries[from, to) into page id; returns bytes used.
std::uint32_t write_page(PageBufferPool& pool, PageId id, const std::vector<PageEntry>& entries, std::size_t from,
                         std::size_t to) {
  auto h = pool.fetch(id, PageBufferPool::Access::Write);
  auto page = h.mutable_data();
  std::memset(page.data(), 0, page.size());
  std::size_t n = to - from;
  std::size_t off = kHeader + 2 * n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = entries[from + i];
    if (off + e.size() - 2 > page.size()) throw Error("leaf page overflow while packing");
    store<std::uint16_t>(page.data() + kHeader + 2 * i, static_cast<std::uint16_t>(off));
    char* p = page.data() + off;
    store<std::uint16_t>(p, static_cast<std::uint16_t>(e.key.size()));
    std::memcpy(p + 2, e.key.data(), e.key.size());
    p += 2 + e.key.size();
    store<std::uint64_t>(p, e.seq);
    p[8] = static_cast<char>(e.overflow ? kFlagOverflow : 0);
    store<std::uint32_t>(p + 9, e.value_len);
    std::memcpy(p + 13, e.payload.data(), e.payload.size());
    off += e.size() - 2;
  }
  store<std::uint16_t>(page.data(), static_cast<std::uint16_t>(n));
  store<std::uint16_t>(page.data() + 2, static_cast<std::uint16_t>(off));
  return static_cast<std::uint32_t>(off);
}

// Splits entries into page-sized groups of roughly equal bytes.
std::vector<std::pair<std::size_t, std::size_t>> pack(const std::vector<PageEntry>& entries, std::size_t page_size) {
  std::size_t cap = page_size - kHeader;
  std::size_t total = 0;
  for (const auto& e : entries) total += e.size();
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  if (total <= cap) {
    groups.emplace_back(0, entries.size());
    return groups;
  }
  auto fill = static_cast<std::size_t>(static_cast<double>(cap) * kFillFactor);
  std::size_t k = (total + fill - 1) / fill;
  std::size_t target = (total + k - 1) / k;
  std::size_t start = 0, used = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::size_t sz = entries[i].size();
    if (i > start && (used + sz > cap || used >= target)) {
      groups.emplace_back(start, i);
      start = i;
      used = 0;
    }
    used += sz;
  }
  groups.emplace_back(start, entries.size());
  return groups;
}

}  // namespace

std::size_t LeafChain::entry_count() const {
  std::size_t n = 0;
  for (const auto& p : pages) n += p.count;
  return n;
}

LeafStore::LeafStore(PageBufferPool& pool, std::size_t max_pages_per_leaf) : pool_(pool), max_pages_(max_pages_per_leaf) {
  if (pool_.page_size() < 4096 || pool_.page_size() > 65535) {
    throw InputError("leaf pages need 4096 <= page_size <= 65535");
  }
  if (max_pages_ < 2) throw InputError("max_pages_per_leaf must be >= 2");
}

PageEntry LeafStore::to_page_entry(const Entry& e) {
  PageEntry p{e.key, e.seq, false, static_cast<std::uint32_t>(e.value.size()), {}};
  if (2 + e.key.size() + 13 + e.value.size() + 2 <= inline_limit()) {
    p.payload = e.value;
    return p;
  }
  std::size_t ps = pool_.page_size();
  auto n = static_cast<std::uint32_t>((e.value.size() + ps - 1) / ps);
  p.overflow = true;
  p.payload.resize(4 + 8 * static_cast<std::size_t>(n));
  store<std::uint32_t>(p.payload.data(), n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto h = pool_.allocate();
    auto dst = h.mutable_data();
    std::size_t off = static_cast<std::size_t>(i) * ps;
    std::memcpy(dst.data(), e.value.data() + off, std::min(ps, e.value.size() - off));
    store<std::uint64_t>(p.payload.data() + 4 + 8 * i, h.id());
  }
  return p;
}

std::string LeafStore::materialize(std::string_view payload, std::uint32_t len) {
  std::size_t ps = pool_.page_size();
  auto n = load<std::uint32_t>(payload.data());
  std::string out;
  out.reserve(len);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto h = pool_.fetch(load<std::uint64_t>(payload.data() + 4 + 8 * i));
    out.append(h.data().data(), std::min<std::size_t>(ps, len - out.size()));
  }
  return out;
}

std::size_t LeafStore::page_index(const LeafChain& chain, std::string_view key) const {
  auto it = std::upper_bound(chain.pages.begin(), chain.pages.end(), key,
                             [](std::string_view k, const LeafPageRef& p) { return k < p.low; });
  return it == chain.pages.begin() ? 0 : static_cast<std::size_t>(it - chain.pages.begin()) - 1;
}

LeafChainPtr LeafStore::build(std::span<const Entry> sorted, const std::string& low) {
  auto chain = std::make_shared<LeafChain>();
  std::vector<PageEntry> entries;
  entries.reserve(sorted.size());
  for (const auto& e : sorted) {
    if (e.is_tombstone()) continue;
    entries.push_back(to_page_entry(e));
  }
  {
    auto h = pool_.allocate();
    chain->pages.push_back(LeafPageRef{h.id(), low, 0, 0});
  }
  rewrite_at(*chain, 0, std::move(entries));
  return chain;
}

void LeafStore::rewrite_at(LeafChain& chain, std::size_t i, std::vector<PageEntry> entries) {
  if (entries.empty()) {
    if (chain.pages.size() > 1) {
      if (i == 0) chain.pages[1].low = chain.pages[0].low;
      chain.pages.erase(chain.pages.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      chain.pages[i].used = write_page(pool_, chain.pages[i].id, entries, 0, 0);
      chain.pages[i].count = 0;
    }
    return;
  }
  auto groups = pack(entries, pool_.page_size());
  std::vector<LeafPageRef> refs;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto [from, to] = groups[g];
    LeafPageRef ref;
    if (g == 0) {
      ref = chain.pages[i];
    } else {
      auto h = pool_.allocate();
      ref.id = h.id();
      ref.low = entries[from].key;
    }
    ref.used = write_page(pool_, ref.id, entries, from, to);
    ref.count = static_cast<std::uint32_t>(to - from);
    refs.push_back(std::move(ref));
  }
  chain.pages[i] = std::move(refs[0]);
  chain.pages.insert(chain.pages.begin() + static_cast<std::ptrdiff_t>(i) + 1, std::make_move_iterator(refs.begin() + 1),
                     std::make_move_iterator(refs.end()));
}

std::size_t LeafStore::read_range(const LeafChain& chain, const KeyRange& range, std::vector<Entry>& out) {
  const auto& pages = chain.pages;
  std::size_t read = 0;
  for (std::size_t i = pages.empty() ? 0 : page_index(chain, range.lo); i < pages.size(); ++i) {
    if (i > 0 && range.hi && pages[i].low >= *range.hi) break;
    if (pages[i].count == 0) continue;
    ++read;
    std::vector<std::pair<std::size_t, std::string>> spilled;  // out index -> overflow payload
    {
      auto h = pool_.fetch(pages[i].id);
      auto page = h.data();
      std::size_t n = slot_count(page);
      for (std::size_t s = lower_slot(page, range.lo); s < n; ++s) {
        auto v = slot_at(page, s);
        if (range.hi && v.key >= *range.hi) break;
        Entry e{std::string(v.key), v.seq, EntryKind::Put, {}};
        if (v.flags & kFlagOverflow) {
          e.value.resize(v.value_len);
          spilled.emplace_back(out.size(), std::string(v.payload));
        } else {
          e.value.assign(v.payload);
        }
        out.push_back(std::move(e));
      }
    }
    for (auto& [idx, payload] : spilled) {
      out[idx].value = materialize(payload, static_cast<std::uint32_t>(out[idx].value.size()));
    }
  }
  return read;
}

void LeafStore::upsert(LeafChain& chain, const Entry& e) {
  if (chain.pages.empty()) throw Error("upsert into a chain without pages");
  std::size_t i = page_index(chain, e.key);
  auto entries = read_page(pool_, chain.pages[i].id);
  auto it = std::lower_bound(entries.begin(), entries.end(), e.key,
                             [](const PageEntry& p, const std::string& k) { return p.key < k; });
  bool present = it != entries.end() && it->key == e.key;
  if (present && it->seq > e.seq) return;
  if (e.is_tombstone()) {
    if (!present) return;
    entries.erase(it);
  } else if (present) {
    *it = to_page_entry(e);
  } else {
    entries.insert(it, to_page_entry(e));
  }
  rewrite_at(chain, i, std::move(entries));
}

void LeafStore::merge(LeafChain& chain, const std::vector<Entry>& sorted) {
  if (sorted.empty()) return;
  if (chain.pages.empty()) throw Error("merge into a chain without pages");
  // Bucket the batch by destination page, then rewrite pages back to front so
  // inserted pages never shift an index still to be processed.
  std::vector<std::pair<std::size_t, std::size_t>> buckets;  // page index -> [begin of batch slice)
  for (std::size_t b = 0; b < sorted.size();) {
    std::size_t i = page_index(chain, sorted[b].key);
    std::size_t e = b + 1;
    std::string_view next_low = i + 1 < chain.pages.size() ? std::string_view(chain.pages[i + 1].low) : std::string_view();
    bool last = i + 1 >= chain.pages.size();
    while (e < sorted.size() && (last || sorted[e].key < next_low)) ++e;
    buckets.emplace_back(i, b);
    b = e;
  }
  for (std::size_t k = buckets.size(); k-- > 0;) {
    auto [i, begin] = buckets[k];
    std::size_t end = k + 1 < buckets.size() ? buckets[k + 1].second : sorted.size();
    auto resident = read_page(pool_, chain.pages[i].id);
    std::vector<PageEntry> merged;
    merged.reserve(resident.size() + (end - begin));
    std::size_t r = 0;
    for (std::size_t b = begin; b < end; ++b) {
      const Entry& in = sorted[b];
      while (r < resident.size() && resident[r].key < in.key) merged.push_back(std::move(resident[r++]));
      bool present = r < resident.size() && resident[r].key == in.key;
      if (present && resident[r].seq > in.seq) {
        merged.push_back(std::move(resident[r++]));
        continue;
      }
      if (present) ++r;
      if (!in.is_tombstone()) merged.push_back(to_page_entry(in));
    }
    while (r < resident.size()) merged.push_back(std::move(resident[r++]));
    rewrite_at(chain, i, std::move(merged));
  }
}

}  // namespace aha
