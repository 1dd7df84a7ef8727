#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "scr/trajectory.hpp"

namespace scr {

using TokenId = std::int64_t;

struct TokenizedText {
  std::vector<TokenId> ids;
  std::vector<CharSpan> offsets;  // byte range of each token in the input
};

// Whitespace + punctuation tokenizer used when no model tokenizer is wired in.
// The six segment tags are single tokens, alphanumeric runs (and any non-ASCII
// bytes) form one token, every other printable byte is its own token and
// whitespace is dropped. Ids are a stable hash of the piece text.
class FallbackTokenizer {
 public:
  static constexpr TokenId kEos = 2;

  TokenizedText tokenize(std::string_view text) const;
  static TokenId id_for(std::string_view piece) noexcept;
};

}  // namespace scr
