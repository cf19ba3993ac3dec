#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "aha/io_stats.hpp"
#include "aha/types.hpp"

namespace aha {

struct PoolFrame {
  PageId id = 0;
  std::vector<char> bytes;
  std::uint32_t pins = 0;
  bool dirty = false;
  std::shared_mutex latch;
  std::list<PoolFrame*>::iterator lru_pos;
  bool in_lru = false;
};

/// Fixed-capacity LRU cache of page_size frames over one pages file
/// (page_id * page_size addressing). Pinned frames are never evicted; dirty
/// victims are written back before reuse. A Read handle holds the frame latch
/// shared, a Write handle holds it exclusively.
class PageBufferPool {
 public:
  enum class Access { Read, Write };

  class Handle {
   public:
    Handle() = default;
    Handle(Handle&& o) noexcept { *this = std::move(o); }
    Handle& operator=(Handle&& o) noexcept;
    ~Handle() { release(); }

    PageId id() const { return frame_->id; }
    std::span<const char> data() const { return {frame_->bytes.data(), frame_->bytes.size()}; }
    /// Writable view; marks the page dirty. Write handles only.
    std::span<char> mutable_data();
    void release();
    explicit operator bool() const { return frame_ != nullptr; }

   private:
    friend class PageBufferPool;
    PageBufferPool* pool_ = nullptr;
    PoolFrame* frame_ = nullptr;
    Access access_ = Access::Read;
  };

  PageBufferPool(std::filesystem::path file, std::size_t page_size, std::size_t capacity, IoStats* stats,
                 PageId next_page_id = 0);
  ~PageBufferPool();
  PageBufferPool(const PageBufferPool&) = delete;
  PageBufferPool& operator=(const PageBufferPool&) = delete;

  /// Pins page_id, loading it if needed. Throws PoolExhaustedError when every
  /// frame is pinned, InputError for a page never allocated.
  Handle fetch(PageId id, Access access = Access::Read);

  /// Allocates a zeroed page, returned pinned for writing.
  Handle allocate();

  /// Writes back every dirty frame.
  void flush_all();

  std::size_t page_size() const { return page_size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t resident() const;
  std::uint32_t pin_count(PageId id) const;
  bool is_resident(PageId id) const;
  PageId next_page_id() const;

 private:
  Handle pin_locked(PoolFrame* f, Access access, std::unique_lock<std::mutex>& lock);
  PoolFrame* free_frame_locked();
  void unpin(PoolFrame* f);
  void write_back(PoolFrame& f);

  std::filesystem::path path_;
  std::size_t page_size_;
  std::size_t capacity_;
  IoStats* stats_;
  int fd_ = -1;

  mutable std::mutex mu_;
  std::vector<std::unique_ptr<PoolFrame>> frames_;
  std::unordered_map<PageId, PoolFrame*> table_;
  std::list<PoolFrame*> lru_;  // unpinned resident frames, front = most recent
  PageId next_page_id_;
};

}  // namespace aha
