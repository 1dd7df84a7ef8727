#pragma once

#include <span>
#include <vector>

#include "scr/masks.hpp"

namespace scr {

struct ClipConfig {
  double eps_low = 0.2;   // ratio floor is 1 - eps_low
  double eps_high = 0.2;  // ratio ceiling is 1 + eps_high
};

// Throws Error(InvalidConfig) unless 0 < eps_low < 1 and eps_high >= 0.
void validate(const ClipConfig& clip);

// G rollouts of one prompt with per-token log-probabilities under the current
// and the sampling policy, plus the per-token optimization mask.
struct RolloutGroup {
  std::vector<double> rewards;
  std::vector<std::vector<double>> logp_new;
  std::vector<std::vector<double>> logp_old;
  std::vector<PolicyMask> masks;

  std::size_t size() const noexcept { return rewards.size(); }
};

// Throws Error(LengthMismatch) when per-rollout lengths disagree.
void validate(const RolloutGroup& group);

using AdvantageVector = std::vector<double>;

inline constexpr double kAdvantageEpsilon = 1e-8;

// (r_i - mean) / (population std + 1e-8). Identical rewards give exact
// zeros. Throws Error(GroupTooSmall) for G < 2.
AdvantageVector group_advantages(std::span<const double> rewards);

// exp(logp_new - logp_old) per token.
std::vector<double> token_ratios(std::span<const double> logp_new,
                                 std::span<const double> logp_old);

// J = 1/G sum_i [ sum_t m_t min(rho_t A_i, clip(rho_t) A_i) / sum_t m_t ].
// Throws Error(EmptyMask) when a rollout has no unmasked token.
double clipped_objective(const RolloutGroup& group, std::span<const double> advantages,
                         const ClipConfig& clip);

// dJ / d logp_new[i][t]. Zero on masked tokens and where the clipped branch
// is the active minimum.
std::vector<std::vector<double>> objective_grad_wrt_logp(const RolloutGroup& group,
                                                         std::span<const double> advantages,
                                                         const ClipConfig& clip);

}  // namespace scr
