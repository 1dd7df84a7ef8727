#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "scr/grpo.hpp"
#include "scr/masks.hpp"
#include "scr/reward.hpp"
#include "scr/trajectory.hpp"

namespace {

// A correction with `rounds` F critics, padded with `words` filler words per body.
std::string rollout(int rounds, int words) {
  std::string pad;
  for (int i = 0; i < words; ++i) pad += "step" + std::to_string(i) + " adds a term, ";
  std::vector<std::pair<scr::SegmentKind, std::string>> parts;
  parts.emplace_back(scr::SegmentKind::Answer, pad + "\\boxed{41}");
  for (int r = 0; r < rounds; ++r) {
    parts.emplace_back(scr::SegmentKind::Critic, pad + "the sum is off by one.\nF");
    parts.emplace_back(scr::SegmentKind::Revised, pad + "\\boxed{42}");
  }
  parts.emplace_back(scr::SegmentKind::Critic, pad + "this one holds.\nT");
  return scr::serialize(*scr::make_trajectory(parts));
}

void BM_ParseTrajectory(benchmark::State& state) {
  const std::string text = rollout(2, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scr::parse_trajectory(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseTrajectory)->Arg(10)->Arg(100)->Arg(1000);

void BM_FormatReward(benchmark::State& state) {
  const std::string text = rollout(2, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scr::format_reward(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_FormatReward)->Arg(10)->Arg(100)->Arg(1000);

void BM_ScoreBatch(benchmark::State& state) {
  const std::size_t n = 256;
  std::vector<std::string> rollouts(n, rollout(1, 50));
  std::vector<scr::GroundTruth> truths(n, scr::GroundTruth{"42", "p"});
  const scr::RewardConfig config;
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(scr::score_batch(rollouts, truths, scr::Stage::II, config, threads));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}
BENCHMARK(BM_ScoreBatch)->Arg(1)->Arg(4)->UseRealTime();

void BM_GroupAdvantages(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<double> r(static_cast<std::size_t>(state.range(0)));
  for (auto& x : r) x = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
  for (auto _ : state) benchmark::DoNotOptimize(scr::group_advantages(r));
}
BENCHMARK(BM_GroupAdvantages)->Arg(8)->Arg(64);

scr::RolloutGroup group(std::size_t g, std::size_t t) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  scr::RolloutGroup out;
  for (std::size_t i = 0; i < g; ++i) {
    std::vector<double> lo(t), ln(t);
    for (std::size_t k = 0; k < t; ++k) {
      lo[k] = -3.0 * u(rng);
      ln[k] = lo[k] + 0.4 * (u(rng) - 0.5);
    }
    out.rewards.push_back(u(rng));
    out.logp_old.push_back(std::move(lo));
    out.logp_new.push_back(std::move(ln));
    out.masks.push_back(scr::PolicyMask{std::vector<std::uint8_t>(t, 1)});
  }
  return out;
}

void BM_ClippedObjective(benchmark::State& state) {
  const auto g = group(8, static_cast<std::size_t>(state.range(0)));
  const auto adv = scr::group_advantages(g.rewards);
  for (auto _ : state) benchmark::DoNotOptimize(scr::clipped_objective(g, adv, {}));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * 8 * state.range(0)));
}
BENCHMARK(BM_ClippedObjective)->Arg(512)->Arg(4096);

void BM_ObjectiveGradient(benchmark::State& state) {
  const auto g = group(8, static_cast<std::size_t>(state.range(0)));
  const auto adv = scr::group_advantages(g.rewards);
  for (auto _ : state) benchmark::DoNotOptimize(scr::objective_grad_wrt_logp(g, adv, {}));
}
BENCHMARK(BM_ObjectiveGradient)->Arg(512)->Arg(4096);

void BM_BuildMasks(benchmark::State& state) {
  const std::string text = rollout(1, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const auto rec = scr::apply_dts(scr::build_record("b", "What is 12 + 30?", text, false));
    benchmark::DoNotOptimize(scr::build_sft_mask(rec));
    benchmark::DoNotOptimize(scr::build_stage1_policy_mask(rec));
  }
}
BENCHMARK(BM_BuildMasks)->Arg(10)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
