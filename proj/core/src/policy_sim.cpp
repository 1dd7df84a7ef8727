#include "scr/policy_sim.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "scr/error.hpp"
#include "scr/grpo.hpp"
#include "scr/io.hpp"
#include "scr/tokenizer.hpp"

namespace scr {

using nlohmann::json;
using nlohmann::ordered_json;

SynthPolicy SynthPolicy::from_array(const std::array<double, 5>& a) noexcept {
  return {a[0], a[1], a[2], a[3], a[4]};
}

void validate(const SynthPolicy& policy) {
  for (double p : policy.as_array()) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "policy probabilities must lie in [0, 1]");
    }
  }
}

SimOutcome sample_outcome(const SynthPolicy& p, SimRng& rng) {
  SimOutcome o;
  o.init_correct = rng.bernoulli(p.p_init);
  if (o.init_correct) {
    o.verdict = rng.bernoulli(p.q_cc) ? Verdict::T : Verdict::F;
  } else {
    o.verdict = rng.bernoulli(p.q_ci) ? Verdict::F : Verdict::T;
  }
  o.revised = o.verdict == Verdict::F;
  o.final_correct = o.init_correct;
  if (o.revised) {
    o.final_correct = o.init_correct ? !rng.bernoulli(p.p_break) : rng.bernoulli(p.p_fix);
  }
  return o;
}

const GroundTruth& sim_ground_truth() {
  static const GroundTruth gt{"42", "sim"};
  return gt;
}

std::string sim_prompt() { return "What is 12 + 30?"; }

std::string render(const SimOutcome& o) {
  std::vector<std::pair<SegmentKind, std::string>> parts;
  parts.emplace_back(SegmentKind::Answer,
                     o.init_correct ? "Adding 12 and 30 gives 42.\n\\boxed{42}"
                                    : "Adding 12 and 30 gives 41.\n\\boxed{41}");
  parts.emplace_back(SegmentKind::Critic,
                     o.verdict == Verdict::T
                         ? "The addition checks out.\nT"
                         : "The sum needs to be recomputed digit by digit before it can be trusted.\nF");
  if (o.revised) {
    parts.emplace_back(SegmentKind::Revised,
                       o.final_correct ? "Redoing the addition, 12 + 30 = 42.\n\\boxed{42}"
                                       : "Redoing the addition, 12 + 30 = 41.\n\\boxed{41}");
  }
  auto t = make_trajectory(parts);
  if (!t) throw Error(ErrorCode::InvariantViolation, "simulator rendered an invalid trajectory");
  return t->source();
}

double outcome_reward(const SimOutcome& o, Stage stage, const RewardConfig& config) {
  if (stage == Stage::I) {
    return stage1_total(1, o.init_correct ? 1 : 0, self_verification_reward(o.verdict, o.init_correct),
                        config.stage1);
  }
  const double rev = revision_reward(o.init_correct, o.final_correct, o.revised, config.revision);
  return stage2_total(1, o.final_correct ? 1 : 0, rev, config.stage2);
}

double expected_stage1_reward(const SynthPolicy& p, const StageIWeights& w) {
  return w.alpha + w.beta * p.p_init + w.gamma * p.verdict_accuracy();
}

double expected_stage2_reward(const SynthPolicy& p, const StageIIWeights& w,
                              const RevisionCoeffs& mu) {
  // Correct and verified: no revision, stays correct (reward 0 from the
  // revision term). Wrong and accepted: stays wrong, also 0.
  const double c_rev = p.p_init * (1.0 - p.q_cc);
  const double i_rev = (1.0 - p.p_init) * p.q_ci;
  const double final_correct =
      p.p_init * p.q_cc + c_rev * (1.0 - p.p_break) + i_rev * p.p_fix;
  const double rev = c_rev * ((1.0 - p.p_break) * mu.mu3 + p.p_break * mu.mu4) +
                     i_rev * (p.p_fix * mu.mu1 + (1.0 - p.p_fix) * mu.mu2);
  return w.nu + w.eta * final_correct + w.phi * rev;
}

double expected_rendered_length(const SynthPolicy& p) {
  FallbackTokenizer tok;
  auto len = [&](const SimOutcome& o) {
    return static_cast<double>(tok.tokenize(render(o)).ids.size());
  };
  double total = 0.0;
  for (bool init : {true, false}) {
    const double pi = init ? p.p_init : 1.0 - p.p_init;
    const double p_t = init ? p.q_cc : 1.0 - p.q_ci;
    total += pi * p_t * len({init, Verdict::T, false, init});
    const double p_good = init ? 1.0 - p.p_break : p.p_fix;
    total += pi * (1.0 - p_t) * p_good * len({init, Verdict::F, true, true});
    total += pi * (1.0 - p_t) * (1.0 - p_good) * len({init, Verdict::F, true, false});
  }
  return total;
}

std::size_t transition_bucket(const SimOutcome& o) noexcept {
  if (!o.revised) return 4;
  if (o.init_correct) return o.final_correct ? 0 : 1;
  return o.final_correct ? 3 : 2;
}

void validate(const SimConfig& c) {
  if (c.group_size < 2) throw Error(ErrorCode::InvalidConfig, "group_size must be >= 2");
  if (c.problems_per_step < 1) throw Error(ErrorCode::InvalidConfig, "problems_per_step must be >= 1");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw Error(ErrorCode::InvalidConfig, "learning_rate must be finite and >= 0");
  }
  validate(c.initial);
  validate(c.rewards);
}

SimConfig parse_sim_config(std::string_view json_text) {
  SimConfig c;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("sim config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "sim config must be an object");
  if (!j.contains("seed")) throw Error(ErrorCode::InvalidConfig, "sim config needs a seed");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "schema_version") {
        if (v.get<int>() != 1) throw Error(ErrorCode::InvalidConfig, "schema_version must be 1");
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "stage") {
        const auto s = parse_stage(v.get<std::string>());
        if (!s) throw Error(ErrorCode::InvalidConfig, "stage must be I or II");
        c.stage = *s;
      } else if (key == "group_size") {
        c.group_size = v.get<std::size_t>();
      } else if (key == "problems_per_step") {
        c.problems_per_step = v.get<std::size_t>();
      } else if (key == "steps") {
        c.steps = v.get<std::size_t>();
      } else if (key == "learning_rate") {
        c.learning_rate = v.get<double>();
      } else if (key == "initial_policy") {
        for (const auto& [pk, pv] : v.items()) {
          if (pk == "p_init") c.initial.p_init = pv.get<double>();
          else if (pk == "q_cc") c.initial.q_cc = pv.get<double>();
          else if (pk == "q_ci") c.initial.q_ci = pv.get<double>();
          else if (pk == "p_fix") c.initial.p_fix = pv.get<double>();
          else if (pk == "p_break") c.initial.p_break = pv.get<double>();
          else throw Error(ErrorCode::InvalidConfig, "unknown policy key: " + pk);
        }
      } else if (key == "rewards") {
        c.rewards = parse_reward_config(v.dump());
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown sim key: " + key);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("sim config: ") + e.what());
  }
  validate(c);
  return c;
}

SimConfig load_sim_config(const std::string& path) { return parse_sim_config(read_file(path)); }

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  // Endpoints are pulled inside (0, 1) so the logits stay finite.
  constexpr double kEdge = 1e-6;
  p = std::min(std::max(p, kEdge), 1.0 - kEdge);
  return std::log(p / (1.0 - p));
}

// d log P(outcome) / d theta for each logit.
std::array<double, 5> score_function(const SimOutcome& o, const SynthPolicy& p) {
  std::array<double, 5> g{};
  g[0] = (o.init_correct ? 1.0 : 0.0) - p.p_init;
  if (o.init_correct) {
    g[1] = (o.verdict == Verdict::T ? 1.0 : 0.0) - p.q_cc;
    if (o.revised) g[4] = (o.final_correct ? 0.0 : 1.0) - p.p_break;
  } else {
    g[2] = (o.verdict == Verdict::F ? 1.0 : 0.0) - p.q_ci;
    if (o.revised) g[3] = (o.final_correct ? 1.0 : 0.0) - p.p_fix;
  }
  return g;
}

}  // namespace

SimReport run_policy_gradient(const SimConfig& config) {
  validate(config);
  SimRng rng(config.seed);
  std::array<double, 5> theta{};
  // Probabilities are recomputed only for logits that moved, so parameters
  // without updates stay bit-identical to the initial policy.
  std::array<double, 5> probs = config.initial.as_array();
  for (std::size_t i = 0; i < 5; ++i) theta[i] = logit(probs[i]);
  // Stage I rewards never see the revision, and its tokens are masked out of
  // the objective, so the revision parameters get no update.
  const std::array<bool, 5> trainable =
      config.stage == Stage::I ? std::array<bool, 5>{true, true, true, false, false}
                               : std::array<bool, 5>{true, true, true, true, true};

  SimReport report;
  report.stage = config.stage;
  report.seed = config.seed;
  report.steps.reserve(config.steps);
  const double n_samples = static_cast<double>(config.problems_per_step * config.group_size);

  std::vector<SimOutcome> outcomes(config.group_size);
  std::vector<double> rewards(config.group_size);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const SynthPolicy policy = SynthPolicy::from_array(probs);
    SimStep s;
    s.step = step;
    s.policy = policy;
    s.expected_verdict_accuracy = policy.verdict_accuracy();
    std::array<double, 5> grad{};
    std::size_t verdict_hits = 0;
    std::size_t terminated = 0;
    double reward_sum = 0.0;

    for (std::size_t prob = 0; prob < config.problems_per_step; ++prob) {
      for (std::size_t g = 0; g < config.group_size; ++g) {
        outcomes[g] = sample_outcome(policy, rng);
        rewards[g] = outcome_reward(outcomes[g], config.stage, config.rewards);
      }
      const auto adv = group_advantages(rewards);
      for (std::size_t g = 0; g < config.group_size; ++g) {
        const auto& o = outcomes[g];
        reward_sum += rewards[g];
        if ((o.verdict == Verdict::T) == o.init_correct) ++verdict_hits;
        if (!o.revised) ++terminated;
        ++s.transitions[transition_bucket(o)];
        if (adv[g] == 0.0) continue;
        const auto sf = score_function(o, policy);
        for (std::size_t i = 0; i < 5; ++i) grad[i] += adv[g] * sf[i];
      }
    }

    s.mean_reward = reward_sum / n_samples;
    s.verdict_accuracy = static_cast<double>(verdict_hits) / n_samples;
    s.terminate_fraction = static_cast<double>(terminated) / n_samples;
    for (std::size_t b = 0; b < 5; ++b) report.transitions[b] += s.transitions[b];
    report.samples += config.problems_per_step * config.group_size;
    report.steps.push_back(s);

    for (std::size_t i = 0; i < 5; ++i) {
      if (!trainable[i]) continue;
      const double next = theta[i] + config.learning_rate * grad[i] / n_samples;
      if (!std::isfinite(next)) {
        throw Error(ErrorCode::DivergedParameters,
                    "policy logit became non-finite at step " + std::to_string(step));
      }
      if (next != theta[i]) {
        theta[i] = next;
        probs[i] = sigmoid(next);
      }
    }
  }
  report.final_policy = SynthPolicy::from_array(probs);
  return report;
}

namespace {

ordered_json policy_json(const SynthPolicy& p) {
  return {{"p_init", p.p_init}, {"q_cc", p.q_cc}, {"q_ci", p.q_ci}, {"p_fix", p.p_fix},
          {"p_break", p.p_break}};
}

ordered_json histogram_json(const std::array<std::size_t, 5>& h) {
  ordered_json j;
  for (std::size_t b = 0; b < 5; ++b) j[std::string(kSimBuckets[b])] = h[b];
  return j;
}

}  // namespace

std::string SimReport::to_json() const {
  ordered_json j;
  j["stage"] = std::string(scr::to_string(stage));
  j["seed"] = seed;
  j["samples"] = samples;
  j["transitions"] = histogram_json(transitions);
  j["final_policy"] = policy_json(final_policy);
  j["steps"] = ordered_json::array();
  for (const auto& s : steps) {
    j["steps"].push_back({{"step", s.step},
                          {"mean_reward", s.mean_reward},
                          {"verdict_accuracy", s.verdict_accuracy},
                          {"expected_verdict_accuracy", s.expected_verdict_accuracy},
                          {"terminate_fraction", s.terminate_fraction},
                          {"transitions", histogram_json(s.transitions)},
                          {"policy", policy_json(s.policy)}});
  }
  return j.dump(2);
}

std::string SimReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,mean_reward,verdict_accuracy,expected_verdict_accuracy,terminate_fraction,"
        "TT,TF,FF,FT,NoRevision,p_init,q_cc,q_ci,p_fix,p_break\n";
  for (const auto& s : steps) {
    os << s.step << ',' << s.mean_reward << ',' << s.verdict_accuracy << ','
       << s.expected_verdict_accuracy << ',' << s.terminate_fraction;
    for (auto c : s.transitions) os << ',' << c;
    for (double p : s.policy.as_array()) os << ',' << p;
    os << '\n';
  }
  return os.str();
}

}  // namespace scr
