#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "scr/answer_eval.hpp"
#include "scr/reward.hpp"
#include "scr/trajectory.hpp"

namespace scr {

// Behavioral policy over one generate/verify/revise round.
struct SynthPolicy {
  double p_init = 0.5;   // initial answer correct
  double q_cc = 0.5;     // verdict T given a correct answer
  double q_ci = 0.5;     // verdict F given an incorrect answer
  double p_fix = 0.5;    // revision repairs a wrong answer
  double p_break = 0.5;  // revision breaks a right answer

  std::array<double, 5> as_array() const noexcept { return {p_init, q_cc, q_ci, p_fix, p_break}; }
  static SynthPolicy from_array(const std::array<double, 5>& a) noexcept;
  // Probability that the first verdict matches the initial answer.
  double verdict_accuracy() const noexcept { return p_init * q_cc + (1.0 - p_init) * q_ci; }
};

// Throws Error(InvalidConfig) unless every probability is in [0, 1].
void validate(const SynthPolicy& policy);

// Uniform doubles from the top 53 bits of a 64-bit Mersenne twister, so runs
// are reproducible across standard libraries.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

struct SimOutcome {
  bool init_correct = false;
  Verdict verdict = Verdict::T;
  bool revised = false;
  bool final_correct = false;

  friend bool operator==(const SimOutcome&, const SimOutcome&) = default;
};

SimOutcome sample_outcome(const SynthPolicy& policy, SimRng& rng);

// The fixed problem every simulated rollout answers.
const GroundTruth& sim_ground_truth();
std::string sim_prompt();

// Tagged trajectory for an outcome; always well-formed.
std::string render(const SimOutcome& outcome);

// Reward of a well-formed rollout with this outcome (format = 1).
double outcome_reward(const SimOutcome& outcome, Stage stage, const RewardConfig& config);

double expected_stage1_reward(const SynthPolicy& policy, const StageIWeights& w);
double expected_stage2_reward(const SynthPolicy& policy, const StageIIWeights& w,
                              const RevisionCoeffs& coeffs);

// Exact expectation of the fallback-tokenizer length of render(outcome).
double expected_rendered_length(const SynthPolicy& policy);

// Transition buckets: NoRevision for T verdicts, otherwise first/final
// correctness (TT, TF, FF, FT).
std::size_t transition_bucket(const SimOutcome& outcome) noexcept;
inline constexpr std::array<std::string_view, 5> kSimBuckets{"TT", "TF", "FF", "FT", "NoRevision"};

struct SimConfig {
  std::size_t group_size = 8;
  std::size_t problems_per_step = 16;
  std::size_t steps = 500;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
  Stage stage = Stage::I;
  SynthPolicy initial;
  RewardConfig rewards;
};

// Throws Error(InvalidConfig) for G < 2, zero problems per step, a negative
// or non-finite learning rate or an invalid initial policy.
void validate(const SimConfig& config);

// JSON with required "seed" and optional schema_version, stage, group_size,
// problems_per_step, steps, learning_rate, initial_policy {p_init, ...} and
// rewards (reward config object).
SimConfig parse_sim_config(std::string_view json_text);
SimConfig load_sim_config(const std::string& path);

struct SimStep {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double verdict_accuracy = 0.0;           // empirical, this step's samples
  double expected_verdict_accuracy = 0.0;  // of the policy that produced them
  double terminate_fraction = 0.0;         // samples that stop after the critic
  std::array<std::size_t, 5> transitions{};
  SynthPolicy policy;                      // policy used for this step
};

struct SimReport {
  Stage stage = Stage::I;
  std::uint64_t seed = 0;
  std::vector<SimStep> steps;
  std::array<std::size_t, 5> transitions{};
  std::size_t samples = 0;
  SynthPolicy final_policy;

  std::string to_json() const;
  std::string to_csv() const;
};

// REINFORCE on sigmoid logits with group-relative advantages. Stage I leaves
// the revision parameters (p_fix, p_break) untouched. Throws
// Error(DivergedParameters) if a logit becomes non-finite.
SimReport run_policy_gradient(const SimConfig& config);

}  // namespace scr
