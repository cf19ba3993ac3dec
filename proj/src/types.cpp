#include "aha/types.hpp"

#include <sstream>

namespace aha {

void validate_key(std::string_view key) {
  if (key.empty() || key.size() > kMaxKeyBytes) {
    throw InputError("key length " + std::to_string(key.size()) + " outside 1.." + std::to_string(kMaxKeyBytes));
  }
}

void validate_value(std::string_view value) {
  if (value.size() > kMaxValueBytes) {
    throw InputError("value length " + std::to_string(value.size()) + " exceeds " + std::to_string(kMaxValueBytes));
  }
}

std::string to_string(const KeyRange& r) {
  std::ostringstream os;
  os << "[" << (r.lo.empty() ? "-inf" : r.lo) << ", " << (r.hi ? *r.hi : "+inf") << ")";
  return os.str();
}

std::vector<Entry> newest_per_key(std::vector<Entry> sorted) {
  std::vector<Entry> out;
  out.reserve(sorted.size());
  for (auto& e : sorted) {
    if (!out.empty() && out.back().key == e.key) continue;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace aha
