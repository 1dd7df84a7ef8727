#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scr/answer_eval.hpp"
#include "scr/trajectory.hpp"

namespace scr {

enum class Stage { I, II };
std::string_view to_string(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view s) noexcept;

struct StageIWeights {
  double alpha = 0.1;  // format
  double beta = 1.0;   // initial accuracy
  double gamma = 1.0;  // self-verification
};

struct StageIIWeights {
  double nu = 0.1;   // format
  double eta = 1.0;  // final accuracy
  double phi = 1.0;  // revision
};

// Outcome-keyed revision rewards:
//   mu1  wrong -> right      mu2  wrong -> wrong
//   mu3  right -> right      mu4  right -> wrong
struct RevisionCoeffs {
  double mu1 = -0.1;
  double mu2 = -0.3;
  double mu3 = -0.5;
  double mu4 = -0.5;
};

struct RewardConfig {
  StageIWeights stage1;
  StageIIWeights stage2;
  RevisionCoeffs revision;
};

// Throws Error(InvalidConfig) on non-finite values, negative weights, or
// mu ordering violations (mu1 >= mu2 >= mu3 >= mu4). Returns warnings for
// orderings that hold only non-strictly.
std::vector<std::string> validate(const RewardConfig& config);

// JSON object with optional keys schema_version, alpha, beta, gamma, nu, eta,
// phi, mu1..mu4. Missing keys keep their defaults; unknown keys are rejected.
RewardConfig parse_reward_config(std::string_view json_text,
                                 std::vector<std::string>* warnings = nullptr);
RewardConfig load_reward_config(const std::string& path,
                                std::vector<std::string>* warnings = nullptr);

// Constraint bits:
//   [0] C1 answer and critic tag pairs present
//   [1] C2 every critic concludes with T or F
//   [2] C3 F critics are followed by a revision; T critics end the output
//   [3] C4 every answer and revised body carries a \boxed{} answer
//   [4] C5 tags are balanced and in Answer (Critic Revised?)* order
struct FormatResult {
  int value = 0;
  std::array<bool, 5> constraints{};
};

FormatResult format_reward(std::string_view raw);

int self_verification_reward(Verdict verdict, bool init_correct) noexcept;

// Throws Error(InconsistentState) when no revision happened but the
// correctness changed.
double revision_reward(bool init_correct, bool final_correct, bool revised_present,
                       const RevisionCoeffs& coeffs);

double stage1_total(int fmt, int acc_init, int crit, const StageIWeights& w) noexcept;
double stage2_total(int fmt, int acc_final, double rev, const StageIIWeights& w) noexcept;

struct RewardBreakdown {
  Stage stage = Stage::I;
  int format = 0;
  std::array<bool, 5> constraints{};
  int acc_init = 0;
  int crit = 0;
  double rev = 0.0;
  int acc_final = 0;
  double total = 0.0;
  std::optional<Verdict> verdict;  // first critic verdict, if any
  bool revised = false;
  std::optional<ErrorCode> parse_error;
  std::size_t parse_offset = 0;
};

// Recomputes the stage total from the stored components.
double recompute_total(const RewardBreakdown& b, const RewardConfig& config) noexcept;

// Total over arbitrary text: malformed rollouts receive format = 0 and
// components extracted from whatever well-formed tag pairs exist.
RewardBreakdown score_rollout(std::string_view raw, const GroundTruth& gt, Stage stage,
                              const RewardConfig& config);

// Scores rollouts[i] against truths[i]; results keep input order.
std::vector<RewardBreakdown> score_batch(std::span<const std::string> rollouts,
                                         std::span<const GroundTruth> truths, Stage stage,
                                         const RewardConfig& config, unsigned threads = 1);

}  // namespace scr
