#pragma once

#include <cstddef>

namespace segparse {

/// Contiguous token range within an utterance. Indices are 1-based and
/// inclusive on both ends, matching the on-disk format. A span satisfies
/// 1 <= start < end <= length, or equals the whole utterance (1, length),
/// which doubles as the "stop" signal when length == 1.
struct Span {
  int start = 1;
  int end = 1;

  bool operator==(const Span&) const = default;

  int length() const { return end - start + 1; }

  bool is_whole(std::size_t utterance_len) const {
    return start == 1 && end == static_cast<int>(utterance_len);
  }

  static Span whole(std::size_t utterance_len) {
    return Span{1, static_cast<int>(utterance_len)};
  }

  bool valid_for(std::size_t utterance_len) const {
    const int m = static_cast<int>(utterance_len);
    if (start == 1 && end == m) return m >= 1;
    return 1 <= start && start < end && end <= m;
  }
};

}  // namespace segparse
