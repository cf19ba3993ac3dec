#include "aha/page_pool.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace aha {

PageBufferPool::Handle& PageBufferPool::Handle::operator=(Handle&& o) noexcept {
  if (this != &o) {
    release();
    pool_ = o.pool_;
    frame_ = o.frame_;
    access_ = o.access_;
    o.pool_ = nullptr;
    o.frame_ = nullptr;
  }
  return *this;
}

std::span<char> PageBufferPool::Handle::mutable_data() {
  if (access_ != Access::Write) throw InputError("mutable_data on a read handle");
  frame_->dirty = true;
  return {frame_->bytes.data(), frame_->bytes.size()};
}

void PageBufferPool::Handle::release() {
  if (frame_ == nullptr) return;
  if (access_ == Access::Write) frame_->latch.unlock();
  else frame_->latch.unlock_shared();
  pool_->unpin(frame_);
  frame_ = nullptr;
  pool_ = nullptr;
}

PageBufferPool::PageBufferPool(std::filesystem::path file, std::size_t page_size, std::size_t capacity,
                               IoStats* stats, PageId next_page_id)
    : path_(std::move(file)), page_size_(page_size), capacity_(capacity), stats_(stats), next_page_id_(next_page_id) {
  if (page_size_ == 0 || capacity_ == 0) throw InputError("page pool needs nonzero page size and capacity");
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("open " + path_.string() + ": " + std::strerror(errno));
}

PageBufferPool::~PageBufferPool() {
  try {
    flush_all();
  } catch (...) {
  }
  if (fd_ >= 0) ::close(fd_);
}

void PageBufferPool::write_back(PoolFrame& f) {
  auto off = static_cast<off_t>(f.id * page_size_);
  std::size_t done = 0;
  while (done < page_size_) {
    ssize_t n = ::pwrite(fd_, f.bytes.data() + done, page_size_ - done, off + static_cast<off_t>(done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("pwrite " + path_.string() + ": " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  f.dirty = false;
  if (stats_ != nullptr) stats_->page_bytes_written.fetch_add(page_size_, std::memory_order_relaxed);
}

PoolFrame* PageBufferPool::free_frame_locked() {
  if (frames_.size() < capacity_) {
    frames_.push_back(std::make_unique<PoolFrame>());
    frames_.back()->bytes.resize(page_size_);
    return frames_.back().get();
  }
  if (lru_.empty()) throw PoolExhaustedError("all " + std::to_string(capacity_) + " frames pinned");
  PoolFrame* v = lru_.back();
  lru_.pop_back();
  v->in_lru = false;
  if (v->dirty) write_back(*v);
  table_.erase(v->id);
  return v;
}

PageBufferPool::Handle PageBufferPool::pin_locked(PoolFrame* f, Access access, std::unique_lock<std::mutex>& lock) {
  if (f->in_lru) {
    lru_.erase(f->lru_pos);
    f->in_lru = false;
  }
  ++f->pins;
  lock.unlock();
  if (access == Access::Write) f->latch.lock();
  else f->latch.lock_shared();
  Handle h;
  h.pool_ = this;
  h.frame_ = f;
  h.access_ = access;
  return h;
}

PageBufferPool::Handle PageBufferPool::fetch(PageId id, Access access) {
  std::unique_lock lock(mu_);
  if (id >= next_page_id_) throw InputError("page " + std::to_string(id) + " was never allocated");
  auto it = table_.find(id);
  if (it != table_.end()) return pin_locked(it->second, access, lock);

  PoolFrame* f = free_frame_locked();
  f->id = id;
  f->dirty = false;
  f->pins = 0;
  auto off = static_cast<off_t>(id * page_size_);
  std::size_t done = 0;
  while (done < page_size_) {
    ssize_t n = ::pread(fd_, f->bytes.data() + done, page_size_ - done, off + static_cast<off_t>(done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("pread " + path_.string() + ": " + std::strerror(errno));
    }
    if (n == 0) {
      // Allocated but never written back: reads as zeros.
      std::memset(f->bytes.data() + done, 0, page_size_ - done);
      break;
    }
    done += static_cast<std::size_t>(n);
  }
  if (stats_ != nullptr) stats_->page_reads.fetch_add(1, std::memory_order_relaxed);
  table_.emplace(id, f);
  return pin_locked(f, access, lock);
}

PageBufferPool::Handle PageBufferPool::allocate() {
  std::unique_lock lock(mu_);
  PoolFrame* f = free_frame_locked();
  f->id = next_page_id_++;
  f->pins = 0;
  std::memset(f->bytes.data(), 0, page_size_);
  f->dirty = true;
  table_.emplace(f->id, f);
  return pin_locked(f, Access::Write, lock);
}

void PageBufferPool::unpin(PoolFrame* f) {
  std::lock_guard lock(mu_);
  if (--f->pins == 0) {
    lru_.push_front(f);
    f->lru_pos = lru_.begin();
    f->in_lru = true;
  }
}

void PageBufferPool::flush_all() {
  std::lock_guard lock(mu_);
  for (auto& f : frames_) {
    if (!f->dirty) continue;
    // Skip frames currently latched for writing; their owner will dirty them again.
    if (!f->latch.try_lock_shared()) continue;
    write_back(*f);
    f->latch.unlock_shared();
  }
}

std::size_t PageBufferPool::resident() const {
  std::lock_guard lock(mu_);
  return table_.size();
}

std::uint32_t PageBufferPool::pin_count(PageId id) const {
  std::lock_guard lock(mu_);
  auto it = table_.find(id);
  return it == table_.end() ? 0 : it->second->pins;
}

bool PageBufferPool::is_resident(PageId id) const {
  std::lock_guard lock(mu_);
  return table_.count(id) != 0;
}

PageId PageBufferPool::next_page_id() const {
  std::lock_guard lock(mu_);
  return next_page_id_;
}

}  // namespace aha
