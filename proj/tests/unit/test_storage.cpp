#include <gtest/gtest.h>

#include <fstream>
#include <list>
#include <map>
#include <random>

#include "aha/memtable.hpp"
#include "aha/merge.hpp"
#include "aha/page_pool.hpp"
#include "aha/sstable.hpp"
#include "../test_util.hpp"

using namespace aha;
using aha::testing::key;
using aha::testing::TempDir;

namespace {

Entry put_entry(std::string k, SeqNo s, std::string v) { return Entry{std::move(k), s, EntryKind::Put, std::move(v)}; }

std::vector<Entry> read_all(const SSTable& t, const KeyRange& r = KeyRange::all()) { return t.range(r); }

}  // namespace

// ---------------------------------------------------------------------------
// MemTable
// ---------------------------------------------------------------------------

TEST(MemTable, FirstInsertGetsSeqOne) {
  SeqAllocator seqs;
  MemTable mt(1 << 20);
  SeqNo s = 0;
  EXPECT_EQ(mt.put(seqs, "a", EntryKind::Put, "1", &s), MemTable::PutResult::Accepted);
  EXPECT_EQ(s, 1u);
  auto all = mt.entries();
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0], put_entry("a", 1, "1"));
}

TEST(MemTable, SameKeyKeepsNewest) {
  SeqAllocator seqs;
  MemTable mt(1 << 20);
  mt.put(seqs, "a", EntryKind::Put, "1");
  mt.put(seqs, "a", EntryKind::Put, "2");
  auto all = mt.entries();
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].seq, 2u);
  EXPECT_EQ(all[0].value, "2");
}

TEST(MemTable, FullBudgetThenOneMoreNeedsRotation) {
  // Encoded entry: 4 + key + 8 + 1 + 4 + value.
  const std::string v(33, 'x');
  const std::size_t per = 4 + 3 + 8 + 1 + 4 + v.size();
  SeqAllocator seqs;
  MemTable mt(per * 5);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(mt.put(seqs, key(i, 3), EntryKind::Put, v), MemTable::PutResult::Accepted);
  EXPECT_EQ(mt.bytes(), per * 5);
  EXPECT_EQ(mt.put(seqs, key(5, 3), EntryKind::Put, v), MemTable::PutResult::NeedsRotation);
  EXPECT_EQ(mt.size(), 5u);
  EXPECT_EQ(seqs.last(), 5u);  // rejected puts allocate nothing
}

TEST(MemTable, FrozenRejectsAndLimitsEnforced) {
  SeqAllocator seqs;
  MemTable mt(1 << 20);
  EXPECT_THROW(mt.put(seqs, "", EntryKind::Put, "v"), InputError);
  EXPECT_THROW(mt.put(seqs, std::string(kMaxKeyBytes + 1, 'k'), EntryKind::Put, "v"), InputError);
  EXPECT_THROW(mt.put(seqs, "k", EntryKind::Put, std::string(kMaxValueBytes + 1, 'v')), InputError);
  EXPECT_NO_THROW(mt.put(seqs, std::string(kMaxKeyBytes, 'k'), EntryKind::Put, std::string(kMaxValueBytes, 'v')));
  mt.freeze();
  EXPECT_EQ(mt.put(seqs, "z", EntryKind::Put, "v"), MemTable::PutResult::NeedsRotation);
}

// ---------------------------------------------------------------------------
// Flush and SSTable files
// ---------------------------------------------------------------------------

TEST(Flush, SortsTwoKeys) {
  TempDir dir;
  SeqAllocator seqs;
  MemTable mt(1 << 20);
  mt.put(seqs, "a", EntryKind::Put, "y");  // seq 1
  mt.put(seqs, "b", EntryKind::Put, "x");  // seq 2
  mt.freeze();
  auto t = flush_memtable(mt, dir.path(), 7, nullptr);
  ASSERT_TRUE(t);
  EXPECT_EQ((*t)->meta().min_key, "a");
  EXPECT_EQ((*t)->meta().max_key, "b");
  EXPECT_EQ((*t)->meta().entry_count, 2u);
  auto all = read_all(**t);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].key, "a");
  EXPECT_EQ(all[1].key, "b");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "sst_7.aha"));
}

TEST(Flush, TombstoneSupersedesPut) {
  TempDir dir;
  SeqAllocator seqs(4);
  MemTable mt(1 << 20);
  mt.put(seqs, "k", EntryKind::Put, "v");  // seq 5
  seqs.advance_to(8);
  mt.put(seqs, "k", EntryKind::Tombstone, "");  // seq 9
  mt.freeze();
  auto t = flush_memtable(mt, dir.path(), 1, nullptr);
  auto all = read_all(**t);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].seq, 9u);
  EXPECT_TRUE(all[0].is_tombstone());
}

TEST(Flush, EmptyIsNoOp) {
  TempDir dir;
  MemTable mt(1 << 20);
  mt.freeze();
  EXPECT_FALSE(flush_memtable(mt, dir.path(), 1, nullptr));
}

TEST(Flush, RandomRoundTripMatchesOrderedMap) {
  TempDir dir;
  std::mt19937_64 rng(11);
  SeqAllocator seqs;
  MemTable mt(64 << 20);
  std::map<std::string, Entry> oracle;
  for (int i = 0; i < 1000; ++i) {
    std::string k = key(rng() % 400, 5);
    bool del = rng() % 5 == 0;
    std::string v = del ? "" : std::string(rng() % 40, static_cast<char>('a' + rng() % 26));
    SeqNo s = 0;
    mt.put(seqs, k, del ? EntryKind::Tombstone : EntryKind::Put, v, &s);
    oracle[k] = Entry{k, s, del ? EntryKind::Tombstone : EntryKind::Put, v};
  }
  mt.freeze();
  IoStats stats;
  auto t = flush_memtable(mt, dir.path(), 3, &stats);
  EXPECT_EQ((*t)->meta().entry_count, oracle.size());
  EXPECT_EQ(stats.sst_bytes_written.load(), std::filesystem::file_size(dir.path() / "sst_3.aha"));
  std::vector<Entry> want;
  for (auto& [k, e] : oracle) want.push_back(e);
  EXPECT_EQ(read_all(**t), want);

  // Reopen from disk: same contents.
  auto again = SSTable::open(dir.path() / "sst_3.aha", 3, nullptr);
  EXPECT_EQ(read_all(*again), want);
}

TEST(SSTable, RangeQueriesMatchBruteForce) {
  TempDir dir;
  std::mt19937_64 rng(5);
  std::vector<Entry> sorted;
  for (int i = 0; i < 700; ++i) sorted.push_back(put_entry(key(i * 3, 6), 1000 + i, std::to_string(i)));
  auto t = write_sstable(dir.path(), 1, sorted, nullptr);

  EXPECT_EQ(read_all(*t), sorted);
  EXPECT_TRUE(t->range({"", std::string("000000")}).empty());  // strictly below min_key
  EXPECT_TRUE(t->range({key(5000, 6), std::nullopt}).empty());
  for (int q = 0; q < 200; ++q) {
    auto a = rng() % 2200, b = rng() % 2200;
    if (a > b) std::swap(a, b);
    KeyRange r{key(a, 6), key(b, 6)};
    std::vector<Entry> want;
    for (const auto& e : sorted) {
      if (r.contains(e.key)) want.push_back(e);
    }
    EXPECT_EQ(t->range(r), want) << to_string(r);
  }
}

TEST(SSTable, ChecksumMismatchNamesFile) {
  TempDir dir;
  std::vector<Entry> sorted{put_entry("a", 1, "hello"), put_entry("b", 2, "world")};
  write_sstable(dir.path(), 9, sorted, nullptr);
  auto path = dir.path() / "sst_9.aha";
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(kSSTableHeaderBytes + 4 + 1 + 8 + 1 + 4);  // first value byte
    f.put('H');
  }
  try {
    SSTable::open(path, 9, nullptr);
    FAIL() << "corruption not detected";
  } catch (const CorruptionError& e) {
    EXPECT_NE(std::string(e.what()).find("sst_9.aha"), std::string::npos) << e.what();
  }
}

TEST(SSTable, RejectsUnsortedOrEmptyInput) {
  TempDir dir;
  EXPECT_THROW(write_sstable(dir.path(), 1, {}, nullptr), InputError);
  std::vector<Entry> bad{put_entry("b", 1, ""), put_entry("a", 2, "")};
  EXPECT_ANY_THROW(write_sstable(dir.path(), 2, bad, nullptr));
}

TEST(SSTable, ObsoleteFileUnlinkedAfterLastReference) {
  TempDir dir;
  auto t = write_sstable(dir.path(), 4, {put_entry("a", 1, "v")}, nullptr);
  auto path = dir.path() / "sst_4.aha";
  auto reader = t;
  t->mark_obsolete();
  t.reset();
  EXPECT_TRUE(std::filesystem::exists(path));
  EXPECT_EQ(read_all(*reader).size(), 1u);
  reader.reset();
  EXPECT_FALSE(std::filesystem::exists(path));
}

// ---------------------------------------------------------------------------
// Merge
// ---------------------------------------------------------------------------

TEST(Merge, NewestWinsAgainstReplay) {
  std::mt19937_64 rng(17);
  SeqNo seq = 0;
  std::vector<std::vector<Entry>> runs(5);
  std::map<std::string, Entry> latest;
  for (int i = 0; i < 3000; ++i) {
    auto& run = runs[rng() % runs.size()];
    std::string k = key(rng() % 500, 4);
    bool del = rng() % 4 == 0;
    Entry e{k, ++seq, del ? EntryKind::Tombstone : EntryKind::Put, del ? "" : std::to_string(seq)};
    latest[k] = e;
    run.push_back(e);
  }
  for (auto& r : runs) {
    std::sort(r.begin(), r.end(), EntryOrder{});
    r = newest_per_key(std::move(r));
  }
  std::vector<Entry> with_tombs, live;
  for (auto& [k, e] : latest) {
    with_tombs.push_back(e);
    if (!e.is_tombstone()) live.push_back(e);
  }
  EXPECT_EQ(merge_runs(runs, false), with_tombs);
  EXPECT_EQ(merge_runs(runs, true), live);
}

// ---------------------------------------------------------------------------
// Page buffer pool
// ---------------------------------------------------------------------------

TEST(PagePool, SameIdTwicePinsTwice) {
  TempDir dir;
  PageBufferPool pool(dir.path() / "p", 4096, 4, nullptr);
  PageId id;
  {
    auto h = pool.allocate();
    id = h.id();
    h.mutable_data()[0] = 'q';
  }
  auto a = pool.fetch(id);
  auto b = pool.fetch(id);
  EXPECT_EQ(pool.pin_count(id), 2u);
  EXPECT_EQ(a.data()[0], 'q');
  EXPECT_EQ(b.data()[0], 'q');
  a.release();
  EXPECT_EQ(pool.pin_count(id), 1u);
}

TEST(PagePool, LruEvictionMatchesTraceReplay) {
  TempDir dir;
  const std::size_t cap = 3;
  IoStats stats;
  PageBufferPool pool(dir.path() / "p", 4096, cap, &stats);
  std::vector<PageId> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(pool.allocate().id());

  // Oracle: LRU list of resident ids, front = most recent.
  std::list<PageId> lru;
  auto touch = [&](PageId id) {
    lru.remove(id);
    lru.push_front(id);
    if (lru.size() > cap) lru.pop_back();
  };
  for (auto id : ids) touch(id);
  std::mt19937_64 rng(3);
  for (int step = 0; step < 200; ++step) {
    PageId id = ids[rng() % ids.size()];
    pool.fetch(id);
    touch(id);
    for (auto x : ids) {
      bool want = std::find(lru.begin(), lru.end(), x) != lru.end();
      ASSERT_EQ(pool.is_resident(x), want) << "step " << step << " page " << x;
    }
  }
  EXPECT_LE(pool.resident(), cap);
}

TEST(PagePool, CapacityTwoEvictsLeastRecentlyUsed) {
  TempDir dir;
  PageBufferPool pool(dir.path() / "p", 4096, 2, nullptr);
  PageId p1 = pool.allocate().id();
  PageId p2 = pool.allocate().id();
  PageId p3 = pool.allocate().id();
  EXPECT_FALSE(pool.is_resident(p1));
  EXPECT_TRUE(pool.is_resident(p2));
  EXPECT_TRUE(pool.is_resident(p3));
}

TEST(PagePool, DirtyVictimWrittenBack) {
  TempDir dir;
  IoStats stats;
  PageBufferPool pool(dir.path() / "p", 4096, 1, &stats);
  PageId a;
  {
    auto h = pool.allocate();
    a = h.id();
    auto d = h.mutable_data();
    std::fill(d.begin(), d.end(), 'A');
  }
  pool.allocate();  // evicts a
  EXPECT_FALSE(pool.is_resident(a));
  auto h = pool.fetch(a);
  EXPECT_EQ(std::count(h.data().begin(), h.data().end(), 'A'), 4096);
  EXPECT_GE(stats.page_reads.load(), 1u);
}

TEST(PagePool, AllPinnedIsExhausted) {
  TempDir dir;
  PageBufferPool pool(dir.path() / "p", 4096, 2, nullptr);
  auto a = pool.allocate();
  auto b = pool.allocate();
  EXPECT_THROW(pool.allocate(), PoolExhaustedError);
  b.release();
  EXPECT_NO_THROW(pool.allocate());
  EXPECT_THROW(pool.fetch(999), InputError);
}
