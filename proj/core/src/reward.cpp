#include "scr/reward.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tag_scan.hpp"

namespace scr {

std::string_view to_string(Stage stage) noexcept { return stage == Stage::I ? "I" : "II"; }

std::optional<Stage> parse_stage(std::string_view s) noexcept {
  if (s == "I" || s == "1") return Stage::I;
  if (s == "II" || s == "2") return Stage::II;
  return std::nullopt;
}

std::vector<std::string> validate(const RewardConfig& c) {
  const std::array<std::pair<const char*, double>, 6> weights{{{"alpha", c.stage1.alpha},
                                                              {"beta", c.stage1.beta},
                                                              {"gamma", c.stage1.gamma},
                                                              {"nu", c.stage2.nu},
                                                              {"eta", c.stage2.eta},
                                                              {"phi", c.stage2.phi}}};
  for (const auto& [name, value] : weights) {
    if (!std::isfinite(value) || value < 0.0) {
      throw Error(ErrorCode::InvalidConfig,
                  std::string(name) + " must be finite and non-negative");
    }
  }
  const std::array<double, 4> mu{c.revision.mu1, c.revision.mu2, c.revision.mu3,
                                 c.revision.mu4};
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!std::isfinite(mu[i])) {
      throw Error(ErrorCode::InvalidConfig, "mu" + std::to_string(i + 1) + " is not finite");
    }
    if (i == 0) continue;
    const std::string pair = "mu" + std::to_string(i) + " and mu" + std::to_string(i + 1);
    if (mu[i - 1] < mu[i]) {
      throw Error(ErrorCode::InvalidConfig, pair + " violate mu1 >= mu2 >= mu3 >= mu4");
    }
    if (mu[i - 1] == mu[i]) {
      warnings.push_back(pair + " are equal; revision outcomes are not strictly ordered");
    }
  }
  return warnings;
}

RewardConfig parse_reward_config(std::string_view json_text, std::vector<std::string>* warnings) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("reward config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "reward config must be an object");

  RewardConfig c;
  const std::array<std::pair<const char*, double*>, 10> fields{{
      {"alpha", &c.stage1.alpha},
      {"beta", &c.stage1.beta},
      {"gamma", &c.stage1.gamma},
      {"nu", &c.stage2.nu},
      {"eta", &c.stage2.eta},
      {"phi", &c.stage2.phi},
      {"mu1", &c.revision.mu1},
      {"mu2", &c.revision.mu2},
      {"mu3", &c.revision.mu3},
      {"mu4", &c.revision.mu4},
  }};
  for (const auto& [key, value] : doc.items()) {
    if (key == "schema_version") {
      if (!value.is_number_integer() || value.get<int>() != 1) {
        throw Error(ErrorCode::InvalidConfig, "unsupported schema_version");
      }
      continue;
    }
    bool known = false;
    for (const auto& [name, slot] : fields) {
      if (key == name) {
        if (!value.is_number()) {
          throw Error(ErrorCode::InvalidConfig, key + " must be a number");
        }
        *slot = value.get<double>();
        known = true;
        break;
      }
    }
    if (!known) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
  }
  auto w = validate(c);
  if (warnings != nullptr) *warnings = std::move(w);
  return c;
}

RewardConfig load_reward_config(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_reward_config(buf.str(), warnings);
}

FormatResult format_reward(std::string_view raw) {
  const auto tags = detail::scan_tags(raw);
  const auto pairs = detail::lenient_pairs(raw, tags);

  bool balanced = tags.size() % 2 == 0;
  for (std::size_t i = 0; balanced && i < tags.size(); i += 2) {
    balanced = !tags[i].closing && tags[i + 1].closing && tags[i].kind == tags[i + 1].kind;
  }

  bool has_answer = false;
  bool has_critic = false;
  bool verdicts_ok = true;
  bool boxed_ok = true;
  std::vector<std::optional<Verdict>> verdicts(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto body = raw.substr(pairs[i].body.begin, pairs[i].body.size());
    switch (pairs[i].kind) {
      case SegmentKind::Answer:
      case SegmentKind::Revised:
        has_answer |= pairs[i].kind == SegmentKind::Answer;
        boxed_ok &= extract_boxed(body).has_value();
        break;
      case SegmentKind::Critic: {
        has_critic = true;
        auto v = extract_verdict(body);
        if (v) {
          verdicts[i] = *v;
        } else {
          verdicts_ok = false;
        }
        break;
      }
    }
  }

  bool ordered = balanced && !pairs.empty() && pairs.front().kind == SegmentKind::Answer;
  for (std::size_t i = 1; ordered && i < pairs.size(); ++i) {
    switch (pairs[i].kind) {
      case SegmentKind::Answer: ordered = false; break;
      case SegmentKind::Critic: break;
      case SegmentKind::Revised: ordered = pairs[i - 1].kind == SegmentKind::Critic; break;
    }
  }

  bool continuation_ok = true;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].kind == SegmentKind::Revised) {
      if (i > 0 && verdicts[i - 1] == Verdict::T) continuation_ok = false;
      continue;
    }
    if (pairs[i].kind != SegmentKind::Critic || !verdicts[i]) continue;
    if (*verdicts[i] == Verdict::F) {
      if (i + 1 >= pairs.size() || pairs[i + 1].kind != SegmentKind::Revised) {
        continuation_ok = false;
      }
    } else {
      const std::size_t end = pairs[i].outer.end;
      if (i + 1 < pairs.size() || !detail::is_blank(raw.substr(end))) continuation_ok = false;
    }
  }

  FormatResult r;
  r.constraints = {has_answer && has_critic, has_critic && verdicts_ok, continuation_ok,
                   has_answer && boxed_ok, ordered};
  r.value = 1;
  for (bool c : r.constraints) r.value *= c ? 1 : 0;
  return r;
}

int self_verification_reward(Verdict verdict, bool init_correct) noexcept {
  return (init_correct && verdict == Verdict::T) || (!init_correct && verdict == Verdict::F)
             ? 1
             : 0;
}

double revision_reward(bool init_correct, bool final_correct, bool revised_present,
                       const RevisionCoeffs& coeffs) {
  if (!revised_present) {
    if (init_correct != final_correct) {
      throw Error(ErrorCode::InconsistentState,
                  "correctness changed although no revision is present");
    }
    return 0.0;
  }
  if (!init_correct) return final_correct ? coeffs.mu1 : coeffs.mu2;
  return final_correct ? coeffs.mu3 : coeffs.mu4;
}

double stage1_total(int fmt, int acc_init, int crit, const StageIWeights& w) noexcept {
  return w.alpha * fmt + w.beta * acc_init + w.gamma * crit;
}

double stage2_total(int fmt, int acc_final, double rev, const StageIIWeights& w) noexcept {
  return w.nu * fmt + w.eta * acc_final + w.phi * rev;
}

double recompute_total(const RewardBreakdown& b, const RewardConfig& config) noexcept {
  return b.stage == Stage::I ? stage1_total(b.format, b.acc_init, b.crit, config.stage1)
                             : stage2_total(b.format, b.acc_final, b.rev, config.stage2);
}

namespace {

std::optional<BoxedAnswer> boxed_or_none(std::string_view text) {
  auto b = extract_boxed(text);
  if (!b) return std::nullopt;
  return std::move(b).value();
}

}  // namespace

RewardBreakdown score_rollout(std::string_view raw, const GroundTruth& gt, Stage stage,
                              const RewardConfig& config) {
  RewardBreakdown b;
  b.stage = stage;
  const FormatResult fmt = format_reward(raw);
  b.format = fmt.value;
  b.constraints = fmt.constraints;

  std::optional<std::string_view> init_text;
  std::optional<std::string_view> final_text;

  auto parsed = parse_trajectory(raw);
  if (parsed) {
    const Trajectory& t = *parsed;
    init_text = raw.substr(t.initial_answer().body.begin, t.initial_answer().body.size());
    final_text = raw.substr(t.final_answer().body.begin, t.final_answer().body.size());
    b.verdict = t.first_verdict();
    b.revised = t.revision_count() > 0;
  } else {
    b.parse_error = parsed.error().code;
    b.parse_offset = parsed.error().offset;
    const auto pairs = detail::lenient_pairs(raw, detail::scan_tags(raw));
    for (const auto& p : pairs) {
      const auto body = raw.substr(p.body.begin, p.body.size());
      if (p.kind == SegmentKind::Answer && !init_text) {
        init_text = body;
      } else if (p.kind == SegmentKind::Critic && !b.verdict && init_text) {
        if (auto v = extract_verdict(body)) b.verdict = *v;
      } else if (p.kind == SegmentKind::Revised && init_text) {
        final_text = body;
        b.revised = true;
      }
    }
    if (!b.revised) final_text = init_text;
  }

  if (init_text) b.acc_init = accuracy_reward(boxed_or_none(*init_text), gt);
  if (final_text) b.acc_final = accuracy_reward(boxed_or_none(*final_text), gt);
  if (b.verdict) b.crit = self_verification_reward(*b.verdict, b.acc_init == 1);
  b.rev = revision_reward(b.acc_init == 1, b.acc_final == 1, b.revised, config.revision);
  b.total = recompute_total(b, config);
  return b;
}

std::vector<RewardBreakdown> score_batch(std::span<const std::string> rollouts,
                                         std::span<const GroundTruth> truths, Stage stage,
                                         const RewardConfig& config, unsigned threads) {
  if (rollouts.size() != truths.size()) {
    throw Error(ErrorCode::LengthMismatch, "rollouts and ground truths differ in length");
  }
  std::vector<RewardBreakdown> out(rollouts.size());
  const std::size_t n = rollouts.size();
  const unsigned workers =
      static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, n)));
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < n; i += workers) {
      out[i] = score_rollout(rollouts[i], truths[i], stage, config);
    }
  };
  if (workers == 1) {
    work(0);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return out;
}

}  // namespace scr
