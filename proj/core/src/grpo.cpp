#include "scr/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace scr {

void validate(const ClipConfig& clip) {
  if (!std::isfinite(clip.eps_low) || clip.eps_low <= 0.0 || clip.eps_low >= 1.0) {
    throw Error(ErrorCode::InvalidConfig, "eps_low must lie in (0, 1)");
  }
  if (!std::isfinite(clip.eps_high) || clip.eps_high < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "eps_high must be finite and non-negative");
  }
}

void validate(const RolloutGroup& group) {
  const std::size_t g = group.size();
  if (group.logp_new.size() != g || group.logp_old.size() != g || group.masks.size() != g) {
    throw Error(ErrorCode::LengthMismatch, "group fields disagree on the number of rollouts");
  }
  for (std::size_t i = 0; i < g; ++i) {
    const std::size_t n = group.logp_new[i].size();
    if (group.logp_old[i].size() != n || group.masks[i].bits.size() != n) {
      throw Error(ErrorCode::LengthMismatch,
                  "rollout " + std::to_string(i) + " has mismatched sequence lengths");
    }
  }
}

AdvantageVector group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::GroupTooSmall, "advantage normalization needs at least 2 rollouts");
  }
  for (double r : rewards) {
    if (!std::isfinite(r)) throw Error(ErrorCode::NonFiniteInput, "non-finite reward");
  }
  AdvantageVector adv(rewards.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return adv;

  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::sqrt(var / n) + kAdvantageEpsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

std::vector<double> token_ratios(std::span<const double> logp_new,
                                 std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size()) {
    throw Error(ErrorCode::LengthMismatch, "log-probability sequences differ in length");
  }
  std::vector<double> out(logp_new.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (!std::isfinite(logp_new[t]) || !std::isfinite(logp_old[t])) {
      throw Error(ErrorCode::NonFiniteInput, "non-finite log-probability at token " +
                                                 std::to_string(t));
    }
    out[t] = std::exp(logp_new[t] - logp_old[t]);
  }
  return out;
}

namespace {

struct Prepared {
  std::vector<std::vector<double>> ratios;
  std::vector<double> active;  // unmasked token count per rollout
};

Prepared prepare(const RolloutGroup& group, std::span<const double> advantages,
                 const ClipConfig& clip) {
  validate(clip);
  validate(group);
  if (advantages.size() != group.size()) {
    throw Error(ErrorCode::LengthMismatch, "advantages do not match the group size");
  }
  Prepared p;
  for (std::size_t i = 0; i < group.size(); ++i) {
    p.ratios.push_back(token_ratios(group.logp_new[i], group.logp_old[i]));
    const auto& bits = group.masks[i].bits;
    const auto count = std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; });
    if (count == 0) {
      throw Error(ErrorCode::EmptyMask, "rollout " + std::to_string(i) + " has an empty mask");
    }
    p.active.push_back(static_cast<double>(count));
  }
  return p;
}

// True when min(rho A, clip(rho) A) takes the unclipped branch. Ties go to
// the unclipped branch.
bool unclipped_active(double rho, double adv, const ClipConfig& clip) {
  const double clipped = std::clamp(rho, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
  return rho * adv <= clipped * adv;
}

}  // namespace

double clipped_objective(const RolloutGroup& group, std::span<const double> advantages,
                         const ClipConfig& clip) {
  const Prepared p = prepare(group, advantages, clip);
  double total = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double a = advantages[i];
    double sum = 0.0;
    for (std::size_t t = 0; t < p.ratios[i].size(); ++t) {
      if (group.masks[i].bits[t] == 0) continue;
      const double rho = p.ratios[i][t];
      const double clipped = std::clamp(rho, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
      sum += std::min(rho * a, clipped * a);
    }
    total += sum / p.active[i];
  }
  return total / static_cast<double>(group.size());
}

std::vector<std::vector<double>> objective_grad_wrt_logp(const RolloutGroup& group,
                                                         std::span<const double> advantages,
                                                         const ClipConfig& clip) {
  const Prepared p = prepare(group, advantages, clip);
  const double g = static_cast<double>(group.size());
  std::vector<std::vector<double>> grad(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double a = advantages[i];
    grad[i].assign(p.ratios[i].size(), 0.0);
    for (std::size_t t = 0; t < p.ratios[i].size(); ++t) {
      if (group.masks[i].bits[t] == 0) continue;
      const double rho = p.ratios[i][t];
      if (unclipped_active(rho, a, clip)) grad[i][t] = a * rho / (g * p.active[i]);
    }
  }
  return grad;
}

}  // namespace scr
