#include "oracles.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

namespace scr_test {

namespace {

const char* tag_text(Tok t) {
  switch (t) {
    case Tok::OpenA: return "<answer>";
    case Tok::CloseA: return "</answer>";
    case Tok::OpenC: return "<critic>";
    case Tok::CloseC: return "</critic>";
    case Tok::OpenR: return "<revised>";
    case Tok::CloseR: return "</revised>";
    case Tok::Text: return "";
  }
  return "";
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

int randint(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::string answer_body(std::mt19937_64& rng) {
  static const std::vector<std::string> lead{"We add the parts.", "Step one: factor.",
                                             "Let x be the unknown.", "Compute directly:", ""};
  static const std::vector<std::string> box{"\\boxed{42}", "\\boxed{\\frac{1}{2}}", "\\boxed{x+1}",
                                            "\\boxed{7}", "\\boxed{{3}}"};
  return pick(rng, lead) + "\n" + pick(rng, box) + (randint(rng, 0, 1) ? "\n" : "");
}

std::string critic_body(std::mt19937_64& rng, char verdict) {
  static const std::vector<std::string> lead{"The answer holds up.", "The sum is wrong.",
                                             "Check the sign.", "Looks right to me.", ""};
  static const std::vector<std::string> tail{"", ".", "\n", " .", ",\n"};
  return pick(rng, lead) + "\n" + std::string(1, verdict) + pick(rng, tail);
}

}  // namespace

std::string render(const std::vector<Piece>& pieces) {
  std::string out;
  for (const auto& p : pieces) out += p.tok == Tok::Text ? p.text : tag_text(p.tok);
  return out;
}

std::optional<char> oracle_verdict(const std::string& body) {
  static const std::regex re(R"((?:^|\s)([TF])[\s.,]*$)");
  std::smatch m;
  if (!std::regex_search(body, m, re)) return std::nullopt;
  return m[1].str()[0];
}

bool oracle_has_box(const std::string& body) {
  // The last \boxed{ must close; escaped braces do not count.
  const auto at = body.rfind("\\boxed{");
  if (at == std::string::npos) return false;
  int depth = 0;
  for (std::size_t i = at + 6; i < body.size(); ++i) {
    if (body[i] == '\\' && i + 1 < body.size() && (body[i + 1] == '{' || body[i + 1] == '}')) {
      ++i;
      continue;
    }
    if (body[i] == '{') ++depth;
    if (body[i] == '}' && --depth == 0) return true;
  }
  return false;
}

bool oracle_format_ok(const std::vector<Piece>& pieces) {
  // Merge adjacent text pieces.
  std::vector<Piece> p;
  for (const auto& x : pieces) {
    if (x.tok == Tok::Text && !p.empty() && p.back().tok == Tok::Text) {
      p.back().text += x.text;
    } else {
      p.push_back(x);
    }
  }
  std::string kinds;
  std::size_t i = 0;
  while (i < p.size()) {
    if (p[i].tok == Tok::Text) {
      // Filler outside pairs is tolerated, except after a terminal T critic.
      if (!blank(p[i].text) && !kinds.empty() && kinds.back() == 'T') return false;
      ++i;
      continue;
    }
    Tok open = p[i].tok;
    Tok close;
    char k;
    if (open == Tok::OpenA) { close = Tok::CloseA; k = 'A'; }
    else if (open == Tok::OpenC) { close = Tok::CloseC; k = 'C'; }
    else if (open == Tok::OpenR) { close = Tok::CloseR; k = 'R'; }
    else return false;  // stray closing tag
    std::string body;
    ++i;
    if (i < p.size() && p[i].tok == Tok::Text) body = p[i++].text;
    if (i >= p.size() || p[i].tok != close) return false;
    ++i;
    if (k == 'C') {
      const auto v = oracle_verdict(body);
      if (!v) return false;
      k = *v;
    } else {
      if (!oracle_has_box(body)) return false;
    }
    kinds += k;
  }
  static const std::regex grammar("^A(FR)*T?$");
  return kinds.size() >= 2 && std::regex_match(kinds, grammar);
}

std::vector<std::pair<scr::SegmentKind, std::string>> random_valid_parts(std::mt19937_64& rng) {
  using scr::SegmentKind;
  std::vector<std::pair<SegmentKind, std::string>> parts;
  parts.emplace_back(SegmentKind::Answer, answer_body(rng));
  const int rounds = randint(rng, 0, 2);
  for (int r = 0; r < rounds; ++r) {
    parts.emplace_back(SegmentKind::Critic, critic_body(rng, 'F'));
    parts.emplace_back(SegmentKind::Revised, answer_body(rng));
  }
  if (rounds == 0 || randint(rng, 0, 1)) parts.emplace_back(SegmentKind::Critic, critic_body(rng, 'T'));
  return parts;
}

std::vector<Piece> random_pieces(std::mt19937_64& rng) {
  std::vector<Piece> out;
  auto text = [](std::string s) { return Piece{Tok::Text, std::move(s)}; };
  static const std::vector<std::string> soup_text{
      "", "\n", "  ", "filler", "\\boxed{5}", "\\boxed{5", "ok T", "bad F.", "T", "F", "x\n",
      "\\boxed{\\{}", "\\boxed{a}\nT"};
  static const std::vector<Tok> tags{Tok::OpenA, Tok::CloseA, Tok::OpenC,
                                     Tok::CloseC, Tok::OpenR, Tok::CloseR};

  if (randint(rng, 0, 1) == 0) {
    for (int n = randint(rng, 0, 10); n > 0; --n) {
      if (randint(rng, 0, 2) == 0) out.push_back(text(pick(rng, soup_text)));
      else out.push_back({pick(rng, tags), {}});
    }
    return out;
  }

  for (const auto& [kind, body] : random_valid_parts(rng)) {
    const Tok open = kind == scr::SegmentKind::Answer   ? Tok::OpenA
                     : kind == scr::SegmentKind::Critic ? Tok::OpenC
                                                        : Tok::OpenR;
    if (!out.empty()) out.push_back(text(randint(rng, 0, 3) ? "\n" : ""));
    out.push_back({open, {}});
    out.push_back(text(body));
    out.push_back({static_cast<Tok>(static_cast<int>(open) + 1), {}});
  }
  for (int m = randint(rng, 0, 3); m > 0; --m) {
    const std::size_t at = std::uniform_int_distribution<std::size_t>(0, out.size() - 1)(rng);
    switch (randint(rng, 0, 6)) {
      case 0: out.erase(out.begin() + static_cast<std::ptrdiff_t>(at)); break;
      case 1: out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), out[at]); break;
      case 2: out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), text(pick(rng, soup_text))); break;
      case 3: out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), Piece{pick(rng, tags), {}}); break;
      case 4:
        if (out[at].tok == Tok::Text) out[at].text = pick(rng, soup_text);
        break;
      case 5: {
        const std::size_t other = std::uniform_int_distribution<std::size_t>(0, out.size() - 1)(rng);
        std::swap(out[at], out[other]);
        break;
      }
      default:
        out.push_back(text(pick(rng, soup_text)));
        break;
    }
    if (out.empty()) break;
  }
  return out;
}

std::optional<Frac> oracle_value(const std::string& raw) {
  std::string s;
  for (char c : raw) {
    if (c != ' ' && c != '$') s += c;
  }
  static const std::regex integer(R"(^(-?)(\d+)$)");
  static const std::regex decimal(R"(^(-?)(\d*)\.(\d+)$)");
  static const std::regex slash(R"(^(-?)(\d+)/(\d+)$)");
  static const std::regex frac(R"(^(-?)\\[dt]?frac\{(-?\d+)\}\{(\d+)\}$)");
  static const std::regex frac_short(R"(^(-?)\\[dt]?frac(\d)(\d)$)");
  std::smatch m;
  Frac f;
  auto sign = [&](const std::string& g) { return g == "-" ? -1 : 1; };
  if (std::regex_match(s, m, integer)) {
    f = {sign(m[1]) * std::stoll(m[2]), 1};
  } else if (std::regex_match(s, m, decimal)) {
    std::int64_t den = 1;
    for (std::size_t k = 0; k < m[3].length(); ++k) den *= 10;
    const std::int64_t whole = m[2].length() ? std::stoll(m[2]) : 0;
    f = {sign(m[1]) * (whole * den + std::stoll(m[3])), den};
  } else if (std::regex_match(s, m, slash) || std::regex_match(s, m, frac) ||
             std::regex_match(s, m, frac_short)) {
    f = {sign(m[1]) * std::stoll(m[2]), std::stoll(m[3])};
  } else {
    return std::nullopt;
  }
  if (f.den == 0) return std::nullopt;
  const std::int64_t g = std::gcd(f.num < 0 ? -f.num : f.num, f.den);
  if (g > 1) {
    f.num /= g;
    f.den /= g;
  }
  return f;
}

std::vector<std::vector<double>> fd_gradient(const scr::RolloutGroup& group,
                                             const std::vector<double>& adv,
                                             const scr::ClipConfig& clip, double h) {
  std::vector<std::vector<double>> g(group.size());
  scr::RolloutGroup work = group;
  for (std::size_t i = 0; i < group.size(); ++i) {
    g[i].resize(group.logp_new[i].size());
    for (std::size_t t = 0; t < g[i].size(); ++t) {
      const double x = group.logp_new[i][t];
      work.logp_new[i][t] = x + h;
      const double up = scr::clipped_objective(work, adv, clip);
      work.logp_new[i][t] = x - h;
      const double down = scr::clipped_objective(work, adv, clip);
      work.logp_new[i][t] = x;
      g[i][t] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

double min_kink_distance(const scr::RolloutGroup& group, const scr::ClipConfig& clip) {
  double best = INFINITY;
  for (std::size_t i = 0; i < group.size(); ++i) {
    for (std::size_t t = 0; t < group.logp_new[i].size(); ++t) {
      if (!group.masks[i].bits[t]) continue;
      const double r = std::exp(group.logp_new[i][t] - group.logp_old[i][t]);
      best = std::min({best, std::abs(r - (1.0 - clip.eps_low)), std::abs(r - (1.0 + clip.eps_high))});
    }
  }
  return best;
}

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

scr::RolloutGroup random_group(std::mt19937_64& rng, std::size_t max_g, std::size_t max_t) {
  scr::RolloutGroup g;
  const auto G = std::uniform_int_distribution<std::size_t>(2, max_g)(rng);
  for (std::size_t i = 0; i < G; ++i) {
    const auto T = std::uniform_int_distribution<std::size_t>(1, max_t)(rng);
    std::vector<double> lo(T), ln(T);
    scr::PolicyMask m;
    m.bits.resize(T);
    bool any = false;
    for (std::size_t t = 0; t < T; ++t) {
      lo[t] = -3.0 * uniform01(rng) - 0.05;
      ln[t] = lo[t] + (uniform01(rng) - 0.5) * 0.8;
      m.bits[t] = uniform01(rng) < 0.8 ? 1 : 0;
      any = any || m.bits[t];
    }
    if (!any) m.bits[0] = 1;
    g.rewards.push_back(std::round(uniform01(rng) * 4.0) / 2.0);
    g.logp_old.push_back(std::move(lo));
    g.logp_new.push_back(std::move(ln));
    g.masks.push_back(std::move(m));
  }
  return g;
}

std::string fixture_path(const std::string& relative) {
  return std::string(SCR_FIXTURE_DIR) + "/" + relative;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace scr_test
