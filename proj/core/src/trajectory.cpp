#include "scr/trajectory.hpp"

#include <cctype>
#include <stdexcept>

#include "tag_scan.hpp"

namespace scr {

std::string_view tag_name(SegmentKind kind) noexcept {
  switch (kind) {
    case SegmentKind::Answer: return "answer";
    case SegmentKind::Critic: return "critic";
    case SegmentKind::Revised: return "revised";
  }
  return "?";
}

std::string_view open_tag(SegmentKind kind) noexcept {
  switch (kind) {
    case SegmentKind::Answer: return "<answer>";
    case SegmentKind::Critic: return "<critic>";
    case SegmentKind::Revised: return "<revised>";
  }
  return "";
}

std::string_view close_tag(SegmentKind kind) noexcept {
  switch (kind) {
    case SegmentKind::Answer: return "</answer>";
    case SegmentKind::Critic: return "</critic>";
    case SegmentKind::Revised: return "</revised>";
  }
  return "";
}

char to_char(Verdict v) noexcept { return v == Verdict::T ? 'T' : 'F'; }

Trajectory::Trajectory(std::vector<Segment> segments, std::vector<Verdict> verdicts,
                       std::string source, std::vector<CharSpan> filler)
    : segments_(std::move(segments)),
      verdicts_(std::move(verdicts)),
      source_(std::move(source)),
      filler_(std::move(filler)) {}

std::size_t Trajectory::revision_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : segments_) n += s.kind == SegmentKind::Revised;
  return n;
}

const Segment& Trajectory::final_answer() const {
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    if (it->kind != SegmentKind::Critic) return *it;
  }
  throw std::logic_error("trajectory without answer segment");
}

std::optional<Verdict> Trajectory::first_verdict() const noexcept {
  if (verdicts_.empty()) return std::nullopt;
  return verdicts_.front();
}

std::optional<Verdict> Trajectory::final_verdict() const noexcept {
  if (verdicts_.empty()) return std::nullopt;
  return verdicts_.back();
}

bool operator==(const Trajectory& a, const Trajectory& b) {
  if (a.segments_.size() != b.segments_.size() || a.verdicts_ != b.verdicts_) return false;
  for (std::size_t i = 0; i < a.segments_.size(); ++i) {
    if (a.segments_[i].kind != b.segments_[i].kind ||
        a.segments_[i].text != b.segments_[i].text) {
      return false;
    }
  }
  return true;
}

Expected<Verdict, ErrorCode> extract_verdict(std::string_view critic_text) {
  std::size_t end = critic_text.size();
  while (end > 0) {
    const unsigned char c = static_cast<unsigned char>(critic_text[end - 1]);
    if (std::isspace(c) || c == '.' || c == ',') {
      --end;
    } else {
      break;
    }
  }
  std::size_t begin = end;
  while (begin > 0 && !std::isspace(static_cast<unsigned char>(critic_text[begin - 1]))) {
    --begin;
  }
  const std::string_view token = critic_text.substr(begin, end - begin);
  if (token == "T") return Verdict::T;
  if (token == "F") return Verdict::F;
  return unexpected(ErrorCode::NoVerdict);
}

namespace {

enum class State { Start, AfterAnswer, AfterCriticF, AfterCriticT, AfterRevised };

ParseDiagnostics diag(ErrorCode code, std::size_t offset, std::string message) {
  return {code, offset, std::move(message)};
}

std::size_t first_non_space(std::string_view text, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to; ++i) {
    if (!std::isspace(static_cast<unsigned char>(text[i]))) return i;
  }
  return to;
}

// Grammar check for an opening tag of `kind` in `state`.
std::optional<ParseDiagnostics> check_open(State state, SegmentKind kind, std::size_t at) {
  const std::string tag(open_tag(kind));
  switch (state) {
    case State::Start:
      if (kind == SegmentKind::Answer) return std::nullopt;
      return diag(ErrorCode::OrderViolation, at, tag + " before <answer>");
    case State::AfterAnswer:
    case State::AfterRevised:
      if (kind == SegmentKind::Critic) return std::nullopt;
      if (kind == SegmentKind::Revised) {
        return diag(ErrorCode::DanglingRevision, at, "<revised> without a preceding F critic");
      }
      return diag(ErrorCode::OrderViolation, at, "<answer> may only open the trajectory");
    case State::AfterCriticF:
      if (kind == SegmentKind::Revised) return std::nullopt;
      if (kind == SegmentKind::Critic) {
        return diag(ErrorCode::MissingRevision, at, "F critic must be followed by <revised>");
      }
      return diag(ErrorCode::OrderViolation, at, "<answer> may only open the trajectory");
    case State::AfterCriticT:
      return diag(ErrorCode::TrailingContentAfterT, at, tag + " after a T critic");
  }
  return std::nullopt;
}

}  // namespace

Expected<Trajectory, ParseDiagnostics> parse_trajectory(std::string_view raw) {
  if (detail::is_blank(raw)) {
    return unexpected(diag(ErrorCode::EmptyInput, 0, "input is empty"));
  }

  const auto tags = detail::scan_tags(raw);
  std::vector<Segment> segments;
  std::vector<Verdict> verdicts;
  std::vector<CharSpan> filler;
  State state = State::Start;
  const detail::TagToken* open = nullptr;
  std::size_t cursor = 0;  // end of the last consumed tag

  // Text between tags while no segment is open.
  auto visit_outside = [&](std::size_t to) -> std::optional<ParseDiagnostics> {
    const std::size_t first = first_non_space(raw, cursor, to);
    if (first == to) return std::nullopt;
    if (state == State::AfterCriticT) {
      return diag(ErrorCode::TrailingContentAfterT, first, "content after a T critic");
    }
    std::size_t last = to;
    while (last > first && std::isspace(static_cast<unsigned char>(raw[last - 1]))) --last;
    filler.push_back({first, last});
    return std::nullopt;
  };

  for (const auto& tag : tags) {
    if (!tag.closing) {
      if (open != nullptr) {
        return unexpected(diag(ErrorCode::UnbalancedTag, tag.offset,
                               std::string(open_tag(tag.kind)) + " nested inside " +
                                   std::string(open_tag(open->kind))));
      }
      if (auto d = visit_outside(tag.offset)) return unexpected(std::move(*d));
      if (auto d = check_open(state, tag.kind, tag.offset)) return unexpected(std::move(*d));
      open = &tag;
      cursor = tag.offset + tag.length;
      continue;
    }

    if (open == nullptr || open->kind != tag.kind) {
      return unexpected(diag(ErrorCode::UnbalancedTag, tag.offset,
                             std::string(close_tag(tag.kind)) + " without matching " +
                                 std::string(open_tag(tag.kind))));
    }
    const CharSpan body{open->offset + open->length, tag.offset};
    const CharSpan outer{open->offset, tag.offset + tag.length};
    const std::string_view text = raw.substr(body.begin, body.size());
    switch (tag.kind) {
      case SegmentKind::Answer:
        if (body.empty()) {
          return unexpected(diag(ErrorCode::EmptyAnswer, body.begin, "empty <answer> body"));
        }
        state = State::AfterAnswer;
        break;
      case SegmentKind::Critic: {
        auto v = extract_verdict(text);
        if (!v) {
          return unexpected(diag(ErrorCode::NoVerdict, body.begin,
                                 "critic does not conclude with T or F"));
        }
        verdicts.push_back(*v);
        state = *v == Verdict::T ? State::AfterCriticT : State::AfterCriticF;
        break;
      }
      case SegmentKind::Revised:
        state = State::AfterRevised;
        break;
    }
    segments.push_back({tag.kind, std::string(text), body, outer});
    open = nullptr;
    cursor = tag.offset + tag.length;
  }

  if (open != nullptr) {
    return unexpected(diag(ErrorCode::UnbalancedTag, open->offset,
                           std::string(open_tag(open->kind)) + " is never closed"));
  }
  if (auto d = visit_outside(raw.size())) return unexpected(std::move(*d));

  switch (state) {
    case State::Start:
      return unexpected(diag(ErrorCode::MissingTag, 0, "no <answer> tag pair"));
    case State::AfterAnswer:
      return unexpected(diag(ErrorCode::MissingTag, raw.size(), "no <critic> tag pair"));
    case State::AfterCriticF:
      return unexpected(diag(ErrorCode::MissingRevision, raw.size(),
                             "F critic must be followed by <revised>"));
    case State::AfterCriticT:
    case State::AfterRevised:
      break;
  }
  return Trajectory(std::move(segments), std::move(verdicts), std::string(raw),
                    std::move(filler));
}

std::string serialize(const Trajectory& traj) {
  std::string out;
  bool first = true;
  for (const auto& seg : traj.segments()) {
    if (!first) out += '\n';
    first = false;
    out += open_tag(seg.kind);
    out += seg.text;
    out += close_tag(seg.kind);
  }
  return out;
}

Expected<Trajectory, ParseDiagnostics> make_trajectory(
    const std::vector<std::pair<SegmentKind, std::string>>& parts) {
  std::string text;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) text += '\n';
    text += open_tag(parts[i].first);
    text += parts[i].second;
    text += close_tag(parts[i].first);
  }
  return parse_trajectory(text);
}

}  // namespace scr
