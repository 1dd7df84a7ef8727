#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scr/tokenizer.hpp"
#include "scr/trajectory.hpp"

namespace scr {

// Token index range [begin, end) of one segment, enclosing tags included.
struct TokenSegment {
  SegmentKind kind = SegmentKind::Answer;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Prompt tokens followed by response tokens. Offsets and segment ranges refer
// to the response text; segment token indices are absolute.
struct TokenizedRecord {
  std::string id;
  std::vector<TokenId> tokens;
  std::size_t prompt_tokens = 0;
  std::vector<CharSpan> response_offsets;  // one per response token (EOS excluded)
  std::vector<TokenSegment> segments;
  std::vector<Verdict> verdicts;
  bool init_correct = false;
  TokenId eos_token = FallbackTokenizer::kEos;
  bool dts_applied = false;
  bool eos_supervised = false;

  std::size_t response_tokens() const noexcept { return tokens.size() - prompt_tokens; }
  // Absolute index of the response token covering `char_offset`, or of the
  // first token starting after it.
  std::size_t char_to_token(std::size_t char_offset) const;
};

struct LossMask {
  std::vector<std::uint8_t> bits;  // one per token, prompt included
};

struct PolicyMask {
  std::vector<std::uint8_t> bits;  // one per response token
};

// Aligns a parsed trajectory with caller-supplied response tokens. Throws
// Error(AlignmentError) when a token straddles a tag boundary.
TokenizedRecord build_record(std::string id, std::span<const TokenId> prompt_tokens,
                             const TokenizedText& response, const Trajectory& trajectory,
                             bool init_correct, TokenId eos_token = FallbackTokenizer::kEos);

// Same, tokenizing with the fallback tokenizer. Throws Error with the parse
// error code when `response` is not a valid trajectory.
TokenizedRecord build_record(std::string id, std::string_view prompt, std::string_view response,
                             bool init_correct);

// T as final verdict: the sequence ends with a supervised EOS right after the
// closing critic tag. F: nothing is appended. Throws Error(MissingVerdict).
TokenizedRecord apply_dts(const TokenizedRecord& record);

// Prompt tokens are 0. With an incorrect initial answer, the answer segment
// (tags included) is 0 as well; every other response token is 1.
LossMask build_sft_mask(const TokenizedRecord& record);

// 0 on revised segments (tags included), 1 on all other response tokens.
PolicyMask build_stage1_policy_mask(const TokenizedRecord& record);

// Sum over t of mask_t * loss_t.
double masked_loss(std::span<const double> per_token_loss, const LossMask& mask);

// {id, tokens, prompt_tokens, spans, verdicts, verdict, init_correct, eos,
//  mask, policy_mask} as one JSON line without trailing newline.
std::string to_json_line(const TokenizedRecord& record, const LossMask& mask,
                         const PolicyMask& policy);

}  // namespace scr
