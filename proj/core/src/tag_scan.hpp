#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "scr/trajectory.hpp"

namespace scr::detail {

struct TagToken {
  SegmentKind kind;
  bool closing;
  std::size_t offset;  // position of '<'
  std::size_t length;
};

// Every literal tag occurrence, in document order. Anything else, including
// tag-like text such as "<answer >", is body text.
std::vector<TagToken> scan_tags(std::string_view text);

// An open tag immediately followed in the tag stream by its matching close.
struct TagPair {
  SegmentKind kind;
  CharSpan body;
  CharSpan outer;
};

// Pairs found in the tag stream; unmatched tags are skipped over.
std::vector<TagPair> lenient_pairs(std::string_view text,
                                   const std::vector<TagToken>& tags);

bool is_blank(std::string_view s) noexcept;

}  // namespace scr::detail
