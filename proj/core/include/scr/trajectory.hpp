#pragma once

// Tagged Generate-Verify-Revise trajectories:
//
//   <answer>...</answer>
//   <critic>... T|F</critic>
//   <revised>...</revised>      (only after an F critic)
//   <critic>... T|F</critic>    (optional further rounds)
//
// Accepted grammar over segments: Answer (Critic_F Revised)* Critic_T?
// with at least one Critic. A T critic is terminal.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scr/error.hpp"
#include "scr/expected.hpp"

namespace scr {

enum class SegmentKind { Answer, Critic, Revised };
enum class Verdict { T, F };

std::string_view tag_name(SegmentKind kind) noexcept;
std::string_view open_tag(SegmentKind kind) noexcept;
std::string_view close_tag(SegmentKind kind) noexcept;
char to_char(Verdict v) noexcept;

// Half-open range [begin, end) of byte offsets into the source text.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Segment {
  SegmentKind kind = SegmentKind::Answer;
  std::string text;  // body without tags
  CharSpan body;     // range of `text` inside the source
  CharSpan outer;    // body plus its enclosing tags
};

struct ParseDiagnostics {
  ErrorCode code = ErrorCode::EmptyInput;
  std::size_t offset = 0;
  std::string message;
};

class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<Segment> segments, std::vector<Verdict> verdicts,
             std::string source, std::vector<CharSpan> filler = {});

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const std::vector<Verdict>& verdicts() const noexcept { return verdicts_; }
  const std::string& source() const noexcept { return source_; }
  // Non-whitespace text found outside any tag pair.
  const std::vector<CharSpan>& filler() const noexcept { return filler_; }

  std::size_t rounds() const noexcept { return verdicts_.size(); }
  std::size_t revision_count() const noexcept;
  const Segment& initial_answer() const { return segments_.front(); }
  // Last Answer or Revised segment.
  const Segment& final_answer() const;
  std::optional<Verdict> first_verdict() const noexcept;
  std::optional<Verdict> final_verdict() const noexcept;

  // Structural equality: kinds, bodies and verdicts. Offsets and the source
  // are ignored so that re-serialized trajectories compare equal.
  friend bool operator==(const Trajectory& a, const Trajectory& b);

 private:
  std::vector<Segment> segments_;
  std::vector<Verdict> verdicts_;
  std::string source_;
  std::vector<CharSpan> filler_;
};

Expected<Trajectory, ParseDiagnostics> parse_trajectory(std::string_view raw);

// Tags are separated by a single '\n'; bodies are emitted verbatim.
std::string serialize(const Trajectory& traj);

// Builds a trajectory from (kind, body) pairs by serializing and re-parsing,
// so the result carries offsets into its own canonical source.
Expected<Trajectory, ParseDiagnostics> make_trajectory(
    const std::vector<std::pair<SegmentKind, std::string>>& parts);

// The verdict is the final whitespace-delimited token after trailing
// whitespace, '.' and ',' are stripped; it must be exactly "T" or "F".
Expected<Verdict, ErrorCode> extract_verdict(std::string_view critic_text);

}  // namespace scr
