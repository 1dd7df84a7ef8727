#include "tag_scan.hpp"

#include <array>
#include <cctype>

namespace scr::detail {

namespace {

struct TagLiteral {
  std::string_view text;
  SegmentKind kind;
  bool closing;
};

constexpr std::array<TagLiteral, 6> kTags{{
    {"<answer>", SegmentKind::Answer, false},
    {"</answer>", SegmentKind::Answer, true},
    {"<critic>", SegmentKind::Critic, false},
    {"</critic>", SegmentKind::Critic, true},
    {"<revised>", SegmentKind::Revised, false},
    {"</revised>", SegmentKind::Revised, true},
}};

}  // namespace

std::vector<TagToken> scan_tags(std::string_view text) {
  std::vector<TagToken> out;
  std::size_t pos = text.find('<');
  while (pos != std::string_view::npos) {
    std::size_t advance = 1;
    for (const auto& lit : kTags) {
      if (text.compare(pos, lit.text.size(), lit.text) == 0) {
        out.push_back({lit.kind, lit.closing, pos, lit.text.size()});
        advance = lit.text.size();
        break;
      }
    }
    pos = text.find('<', pos + advance);
  }
  return out;
}

std::vector<TagPair> lenient_pairs(std::string_view text,
                                   const std::vector<TagToken>& tags) {
  (void)text;
  std::vector<TagPair> pairs;
  for (std::size_t i = 0; i + 1 < tags.size(); ++i) {
    const auto& open = tags[i];
    const auto& close = tags[i + 1];
    if (!open.closing && close.closing && open.kind == close.kind) {
      pairs.push_back({open.kind,
                       {open.offset + open.length, close.offset},
                       {open.offset, close.offset + close.length}});
      ++i;
    }
  }
  return pairs;
}

bool is_blank(std::string_view s) noexcept {
  for (unsigned char c : s) {
    if (!std::isspace(c)) return false;
  }
  return true;
}

}  // namespace scr::detail
