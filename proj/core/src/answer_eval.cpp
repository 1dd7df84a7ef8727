#include "scr/answer_eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>

namespace scr {

namespace {

constexpr std::string_view kBoxed = "\\boxed{";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Index of the '}' closing the group whose '{' is at `open`, or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\\' && i + 1 < s.size() && (s[i + 1] == '{' || s[i + 1] == '}')) {
      ++i;
      continue;
    }
    if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Removes `\name` when not followed by another letter (so \left does not eat
// \leftarrow).
void remove_command(std::string& s, std::string_view name) {
  std::size_t pos = 0;
  while ((pos = s.find(name, pos)) != std::string::npos) {
    const std::size_t after = pos + name.size();
    if (after < s.size() && is_alpha(s[after])) {
      pos = after;
      continue;
    }
    s.erase(pos, name.size());
  }
}

// \cmd{X} -> X for text-style wrappers.
void unwrap_command(std::string& s, std::string_view name) {
  const std::string prefix = std::string(name) + "{";
  std::size_t pos = 0;
  while ((pos = s.find(prefix, pos)) != std::string::npos) {
    const std::size_t open = pos + name.size();
    const std::size_t close = match_brace(s, open);
    if (close == std::string::npos) {
      pos = open;
      continue;
    }
    s = s.substr(0, pos) + s.substr(open + 1, close - open - 1) + s.substr(close + 1);
  }
}

bool is_atomic(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!is_alnum(s[i]) && s[i] != '.') return false;
  }
  return true;
}

std::string rewrite_fracs(std::string_view s);

// Reads one \frac argument starting at `pos` (after optional spaces).
bool read_frac_arg(std::string_view s, std::size_t& pos, std::string& out) {
  while (pos < s.size() && s[pos] == ' ') ++pos;
  if (pos >= s.size()) return false;
  if (s[pos] == '{') {
    const std::size_t close = match_brace(s, pos);
    if (close == std::string_view::npos) return false;
    out = rewrite_fracs(trim(s.substr(pos + 1, close - pos - 1)));
    pos = close + 1;
    return true;
  }
  if (is_alnum(s[pos])) {
    out = std::string(1, s[pos]);
    ++pos;
    return true;
  }
  return false;
}

std::string rewrite_fracs(std::string_view s) {
  static constexpr std::array<std::string_view, 3> kFracs{"\\dfrac", "\\tfrac", "\\frac"};
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::string_view matched;
    for (auto f : kFracs) {
      if (s.compare(i, f.size(), f) == 0 &&
          (i + f.size() >= s.size() || !is_alpha(s[i + f.size()]))) {
        matched = f;
        break;
      }
    }
    if (matched.empty()) {
      out += s[i++];
      continue;
    }
    std::size_t pos = i + matched.size();
    std::string num, den;
    if (!read_frac_arg(s, pos, num) || !read_frac_arg(s, pos, den)) {
      out += s[i++];
      continue;
    }
    out += is_atomic(num) ? num : "(" + num + ")";
    out += '/';
    out += is_atomic(den) ? den : "(" + den + ")";
    i = pos;
  }
  return out;
}

// Drops whitespace except a single space between two alphanumerics.
std::string squeeze_spaces(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_space(s[i])) {
      out += s[i];
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_space(s[j])) ++j;
    if (!out.empty() && j < s.size() && is_alnum(out.back()) && is_alnum(s[j])) out += ' ';
    i = j - 1;
  }
  return out;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

// 1,234,567(.89) -> 1234567(.89)
std::string strip_thousands(std::string s) {
  std::string_view v = s;
  std::size_t start = (!v.empty() && v[0] == '-') ? 1 : 0;
  std::string_view body = v.substr(start);
  const std::size_t dot = body.find('.');
  std::string_view int_part = body.substr(0, dot);
  if (int_part.find(',') == std::string_view::npos) return s;
  const std::size_t first = int_part.find(',');
  if (first == 0 || first > 3 || !all_digits(int_part.substr(0, first))) return s;
  for (std::size_t p = first; p < int_part.size(); p += 4) {
    if (int_part[p] != ',' || p + 4 > int_part.size() ||
        !all_digits(int_part.substr(p + 1, 3))) {
      return s;
    }
  }
  if (dot != std::string_view::npos && !all_digits(body.substr(dot + 1))) return s;
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  return s;
}

// -?\d+\.\d+ -> drop trailing zeros, then a bare dot.
std::string canonical_decimal(std::string s) {
  std::string_view v = s;
  std::size_t start = (!v.empty() && (v[0] == '-' || v[0] == '+')) ? 1 : 0;
  const std::size_t dot = v.find('.');
  if (dot == std::string_view::npos) return s;
  std::string_view int_part = v.substr(start, dot - start);
  std::string_view frac_part = v.substr(dot + 1);
  if (!all_digits(frac_part) || (!int_part.empty() && !all_digits(int_part))) return s;
  std::string out(v.substr(0, start));
  if (v[0] == '+') out.clear();
  out += int_part.empty() ? "0" : std::string(int_part);
  std::string frac(frac_part);
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  if (!frac.empty()) out += "." + frac;
  if (out == "-0") out = "0";
  return out;
}

// "12 Feet" -> "12 feet"; only when a numeric value is followed by words.
std::string lowercase_units(std::string s) {
  const std::size_t space = s.find(' ');
  if (space == std::string::npos || space == 0) return s;
  const std::string_view value(s.data(), space);
  const bool numeric = std::all_of(value.begin(), value.end(), [](char c) {
    return is_digit(c) || c == '.' || c == '/' || c == '-' || c == '+';
  }) && std::any_of(value.begin(), value.end(), is_digit);
  if (!numeric) return s;
  for (std::size_t i = space + 1; i < s.size(); ++i) {
    if (!is_alpha(s[i]) && s[i] != ' ') return s;
  }
  std::transform(s.begin() + static_cast<std::ptrdiff_t>(space), s.end(),
                 s.begin() + static_cast<std::ptrdiff_t>(space),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string normalize_once(std::string_view input) {
  std::string s(trim(input));

  for (auto [open, close] : std::array<std::pair<std::string_view, std::string_view>, 4>{
           {{"$$", "$$"}, {"$", "$"}, {"\\(", "\\)"}, {"\\[", "\\]"}}}) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      s = s.substr(open.size(), s.size() - open.size() - close.size());
      break;
    }
  }

  for (auto cmd : {"\\displaystyle", "\\textstyle", "\\left", "\\right", "\\bigl", "\\bigr",
                   "\\Bigl", "\\Bigr", "\\biggl", "\\biggr", "\\Biggl", "\\Biggr", "\\big",
                   "\\Big", "\\bigg", "\\Bigg"}) {
    remove_command(s, cmd);
  }
  for (auto sp : {"\\,", "\\;", "\\:", "\\!", "\\ ", "~"}) replace_all(s, sp, " ");
  for (auto cmd : {"\\text", "\\textbf", "\\textit", "\\mathrm", "\\mathbf", "\\mbox"}) {
    unwrap_command(s, cmd);
  }
  replace_all(s, "^{\\circ}", "");
  replace_all(s, "^\\circ", "");
  replace_all(s, "\\%", "%");
  replace_all(s, "\\$", "");
  replace_all(s, "{,}", ",");

  s = rewrite_fracs(s);
  s = squeeze_spaces(s);

  if (s.size() >= 2 && s.front() == '{' && match_brace(s, 0) == s.size() - 1) {
    s = s.substr(1, s.size() - 2);
  }
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';' ||
                        s.back() == ':' || s.back() == '!')) {
    s.pop_back();
  }
  s = strip_thousands(std::move(s));
  s = canonical_decimal(std::move(s));
  s = lowercase_units(std::move(s));
  return std::string(trim(s));
}

__extension__ using i128 = __int128;

struct Rational {
  i128 num = 0;
  i128 den = 1;
};

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// [+-]?(\d+(\.\d*)?|\.\d+), at most 18 significant digits.
std::optional<Rational> parse_decimal(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  Rational r{0, 1};
  bool seen_dot = false;
  int digits = 0;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
      continue;
    }
    if (!is_digit(c) || ++digits > 18) return std::nullopt;
    r.num = r.num * 10 + (c - '0');
    if (seen_dot) r.den *= 10;
  }
  if (digits == 0) return std::nullopt;
  if (neg) r.num = -r.num;
  return r;
}

std::optional<Rational> parse_rational(std::string_view s) {
  const std::size_t slash = s.find('/');
  std::optional<Rational> r;
  if (slash == std::string_view::npos) {
    r = parse_decimal(s);
  } else {
    auto a = parse_decimal(s.substr(0, slash));
    auto b = parse_decimal(s.substr(slash + 1));
    if (!a || !b || b->num == 0) return std::nullopt;
    r = Rational{a->num * b->den, a->den * b->num};
  }
  if (!r) return std::nullopt;
  if (r->den < 0) {
    r->den = -r->den;
    r->num = -r->num;
  }
  const i128 g = gcd128(r->num, r->den);
  if (g > 1) {
    r->num /= g;
    r->den /= g;
  }
  return r;
}

}  // namespace

Expected<BoxedAnswer, ErrorCode> extract_boxed(std::string_view text) {
  std::optional<std::string_view> last;
  bool last_unbalanced = false;
  std::size_t pos = text.find(kBoxed);
  while (pos != std::string_view::npos) {
    const std::size_t open = pos + kBoxed.size() - 1;
    const std::size_t close = match_brace(text, open);
    if (close == std::string_view::npos) {
      // An unclosed box may still contain a later balanced one.
      last_unbalanced = true;
      pos = text.find(kBoxed, open + 1);
      continue;
    }
    last = text.substr(open + 1, close - open - 1);
    last_unbalanced = false;
    pos = text.find(kBoxed, close + 1);
  }
  if (last_unbalanced) return unexpected(ErrorCode::UnbalancedBraces);
  if (!last) return unexpected(ErrorCode::NoBox);
  return BoxedAnswer{std::string(*last), normalize_answer(*last)};
}

std::string normalize_answer(std::string_view raw) {
  std::string current = normalize_once(raw);
  for (int i = 0; i < 16; ++i) {
    std::string next = normalize_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

bool answers_equal(std::string_view a, std::string_view b) {
  const std::string na = normalize_answer(a);
  const std::string nb = normalize_answer(b);
  if (na == nb) return true;
  const auto ra = parse_rational(na);
  const auto rb = parse_rational(nb);
  return ra && rb && ra->num == rb->num && ra->den == rb->den;
}

int accuracy_reward(const std::optional<BoxedAnswer>& answer, const GroundTruth& gt) {
  if (!answer) return 0;
  return answers_equal(answer->normalized, gt.value) ? 1 : 0;
}

}  // namespace scr
