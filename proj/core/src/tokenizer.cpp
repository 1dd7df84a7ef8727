#include "scr/tokenizer.hpp"

#include <cctype>

namespace scr {

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

TokenId FallbackTokenizer::id_for(std::string_view piece) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : piece) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // Ids below 16 are reserved for specials.
  return static_cast<TokenId>(16 + (h % ((1ULL << 31) - 16)));
}

TokenizedText FallbackTokenizer::tokenize(std::string_view text) const {
  TokenizedText out;
  std::size_t i = 0;
  auto emit = [&](std::size_t begin, std::size_t end) {
    out.ids.push_back(id_for(text.substr(begin, end - begin)));
    out.offsets.push_back({begin, end});
  };
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '<') {
      std::size_t tag_len = 0;
      for (auto kind : {SegmentKind::Answer, SegmentKind::Critic, SegmentKind::Revised}) {
        for (auto tag : {open_tag(kind), close_tag(kind)}) {
          if (text.compare(i, tag.size(), tag) == 0) tag_len = tag.size();
        }
      }
      if (tag_len > 0) {
        emit(i, i + tag_len);
        i += tag_len;
        continue;
      }
    }
    if (word_byte(c)) {
      std::size_t j = i;
      while (j < text.size() && word_byte(static_cast<unsigned char>(text[j]))) ++j;
      emit(i, j);
      i = j;
      continue;
    }
    emit(i, i + 1);
    ++i;
  }
  return out;
}

}  // namespace scr
