#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "scr/error.hpp"
#include "scr/expected.hpp"

namespace scr {

struct BoxedAnswer {
  std::string raw;         // exact content between the braces
  std::string normalized;  // normalize_answer(raw)
};

struct GroundTruth {
  std::string value;
  std::string problem_id;
};

// Content of the last balanced \boxed{...}; braces are depth-counted and
// escaped braces (\{, \}) do not count. Boxes nested in a balanced box are
// not visited. UnbalancedBraces when the final occurrence never closes.
Expected<BoxedAnswer, ErrorCode> extract_boxed(std::string_view text);

// Canonical form used for string comparison. Rewrites are applied until a
// fixed point, so normalize_answer is idempotent.
std::string normalize_answer(std::string_view raw);

// True iff the normalized forms are byte-equal or both denote the same exact
// rational (integers, finite decimals, and a/b of those). No floating point.
bool answers_equal(std::string_view a, std::string_view b);

// 1 iff the answer matches the ground truth; an absent answer scores 0.
int accuracy_reward(const std::optional<BoxedAnswer>& answer, const GroundTruth& gt);

}  // namespace scr
