#include "scr/masks.hpp"

#include <algorithm>

#include "json.hpp"

namespace scr {

namespace {

// True when some token strictly contains `c` (begin < c < end).
bool straddled(const std::vector<CharSpan>& offsets, std::size_t c) {
  auto it = std::upper_bound(offsets.begin(), offsets.end(), c,
                             [](std::size_t v, const CharSpan& s) { return v < s.begin; });
  if (it == offsets.begin()) return false;
  --it;
  return it->begin < c && c < it->end;
}

std::size_t first_token_at_or_after(const std::vector<CharSpan>& offsets, std::size_t c) {
  auto it = std::lower_bound(offsets.begin(), offsets.end(), c,
                             [](const CharSpan& s, std::size_t v) { return s.begin < v; });
  return static_cast<std::size_t>(it - offsets.begin());
}

}  // namespace

std::size_t TokenizedRecord::char_to_token(std::size_t char_offset) const {
  auto it = std::upper_bound(
      response_offsets.begin(), response_offsets.end(), char_offset,
      [](std::size_t v, const CharSpan& s) { return v < s.begin; });
  std::size_t idx = static_cast<std::size_t>(it - response_offsets.begin());
  if (idx > 0 && char_offset < response_offsets[idx - 1].end) --idx;
  return prompt_tokens + idx;
}

TokenizedRecord build_record(std::string id, std::span<const TokenId> prompt_tokens,
                             const TokenizedText& response, const Trajectory& trajectory,
                             bool init_correct, TokenId eos_token) {
  if (response.ids.size() != response.offsets.size()) {
    throw Error(ErrorCode::AlignmentError, "token ids and offsets differ in length");
  }
  for (std::size_t i = 0; i < response.offsets.size(); ++i) {
    const auto& s = response.offsets[i];
    if (s.begin >= s.end || (i > 0 && s.begin < response.offsets[i - 1].end)) {
      throw Error(ErrorCode::AlignmentError, "token offsets must be non-empty and increasing");
    }
  }

  TokenizedRecord r;
  r.id = std::move(id);
  r.tokens.assign(prompt_tokens.begin(), prompt_tokens.end());
  r.prompt_tokens = prompt_tokens.size();
  r.tokens.insert(r.tokens.end(), response.ids.begin(), response.ids.end());
  r.response_offsets = response.offsets;
  r.verdicts = trajectory.verdicts();
  r.init_correct = init_correct;
  r.eos_token = eos_token;

  for (const auto& seg : trajectory.segments()) {
    for (std::size_t c : {seg.outer.begin, seg.body.begin, seg.body.end, seg.outer.end}) {
      if (straddled(response.offsets, c)) {
        throw Error(ErrorCode::AlignmentError,
                    "a token straddles a " + std::string(tag_name(seg.kind)) +
                        " tag boundary at offset " + std::to_string(c));
      }
    }
    const std::size_t begin = first_token_at_or_after(response.offsets, seg.outer.begin);
    const std::size_t end = first_token_at_or_after(response.offsets, seg.outer.end);
    if (begin >= end) {
      throw Error(ErrorCode::AlignmentError,
                  std::string(tag_name(seg.kind)) + " segment covers no tokens");
    }
    r.segments.push_back({seg.kind, r.prompt_tokens + begin, r.prompt_tokens + end});
  }
  return r;
}

TokenizedRecord build_record(std::string id, std::string_view prompt, std::string_view response,
                             bool init_correct) {
  auto parsed = parse_trajectory(response);
  if (!parsed) throw Error(parsed.error().code, parsed.error().message);
  const FallbackTokenizer tok;
  const auto prompt_tokens = tok.tokenize(prompt);
  return build_record(std::move(id), prompt_tokens.ids, tok.tokenize(response), *parsed,
                      init_correct);
}

TokenizedRecord apply_dts(const TokenizedRecord& record) {
  if (record.verdicts.empty()) {
    throw Error(ErrorCode::MissingVerdict, "record '" + record.id + "' has no critic verdict");
  }
  TokenizedRecord out = record;
  if (out.dts_applied) return out;
  out.dts_applied = true;
  if (out.verdicts.back() != Verdict::T) return out;

  const auto last_critic =
      std::find_if(out.segments.rbegin(), out.segments.rend(),
                   [](const TokenSegment& s) { return s.kind == SegmentKind::Critic; });
  const std::size_t cut = last_critic->end;
  out.tokens.resize(cut);
  out.response_offsets.resize(cut - out.prompt_tokens);
  out.tokens.push_back(out.eos_token);
  out.eos_supervised = true;
  return out;
}

LossMask build_sft_mask(const TokenizedRecord& record) {
  LossMask m;
  m.bits.assign(record.tokens.size(), 1);
  std::fill_n(m.bits.begin(), record.prompt_tokens, 0);
  if (!record.init_correct) {
    for (const auto& seg : record.segments) {
      if (seg.kind != SegmentKind::Answer) continue;
      std::fill(m.bits.begin() + static_cast<std::ptrdiff_t>(seg.begin),
                m.bits.begin() + static_cast<std::ptrdiff_t>(seg.end), 0);
    }
  }
  return m;
}

PolicyMask build_stage1_policy_mask(const TokenizedRecord& record) {
  PolicyMask m;
  m.bits.assign(record.response_tokens(), 1);
  for (const auto& seg : record.segments) {
    if (seg.kind != SegmentKind::Revised) continue;
    for (std::size_t t = seg.begin; t < seg.end; ++t) m.bits[t - record.prompt_tokens] = 0;
  }
  return m;
}

double masked_loss(std::span<const double> per_token_loss, const LossMask& mask) {
  if (per_token_loss.size() != mask.bits.size()) {
    throw Error(ErrorCode::LengthMismatch, "loss and mask lengths differ");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < per_token_loss.size(); ++t) {
    if (mask.bits[t] != 0) sum += per_token_loss[t];
  }
  return sum;
}

std::string to_json_line(const TokenizedRecord& record, const LossMask& mask,
                         const PolicyMask& policy) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["tokens"] = record.tokens;
  j["prompt_tokens"] = record.prompt_tokens;
  auto spans = nlohmann::ordered_json::array();
  for (const auto& s : record.segments) {
    spans.push_back({{"kind", tag_name(s.kind)}, {"begin", s.begin}, {"end", s.end}});
  }
  j["spans"] = std::move(spans);
  auto verdicts = nlohmann::ordered_json::array();
  for (auto v : record.verdicts) verdicts.push_back(std::string(1, to_char(v)));
  j["verdicts"] = verdicts;
  j["verdict"] = record.verdicts.empty() ? nlohmann::ordered_json(nullptr)
                                         : nlohmann::ordered_json(verdicts.back());
  j["init_correct"] = record.init_correct;
  j["eos"] = record.eos_supervised;
  j["mask"] = mask.bits;
  j["policy_mask"] = policy.bits;
  return j.dump();
}

}  // namespace scr
