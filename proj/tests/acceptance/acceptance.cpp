// Acceptance gate: one line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "scr/grpo.hpp"
#include "scr/io.hpp"
#include "scr/masks.hpp"
#include "scr/policy_sim.hpp"
#include "scr/reward.hpp"
#include "scr/synth.hpp"
#include "scr/trace_analysis.hpp"

using namespace scr;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Counts failures and keeps the first one for the report line.
struct Checker {
  std::size_t failures = 0;
  std::string first;
  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (failures++ == 0) first = what;
  }
  Outcome done(std::string detail) const {
    if (failures == 0) return {true, std::move(detail)};
    return {false, std::to_string(failures) + " failure(s), first: " + first};
  }
};

std::string fmt(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1e", x);
  return buf;
}

// --- reward tables ---------------------------------------------------------

Outcome reward_tables() {
  Checker c;
  const RevisionCoeffs mu;
  for (bool init : {false, true}) {
    for (bool fin : {false, true}) {
      for (bool revised : {false, true}) {
        for (Verdict v : {Verdict::T, Verdict::F}) {
          const int crit = self_verification_reward(v, init);
          const int want_crit = (v == Verdict::T) == init ? 1 : 0;
          c.expect(crit == want_crit, "verdict table");
          if (!revised && init != fin) {
            bool threw = false;
            try {
              revision_reward(init, fin, revised, mu);
            } catch (const Error& e) {
              threw = e.code() == ErrorCode::InconsistentState;
            }
            c.expect(threw, "inconsistent state must be rejected");
            continue;
          }
          const double want = !revised ? 0.0
                              : !init  ? (fin ? -0.1 : -0.3)
                                       : (fin ? -0.5 : -0.5);
          c.expect(revision_reward(init, fin, revised, mu) == want, "revision table");
        }
      }
    }
  }
  // A successful correction, rendered and scored end to end.
  const std::string fixture =
      scr_test::slurp(scr_test::fixture_path("trajectories/swap_correction.txt"));
  const auto b = score_rollout(fixture, {"1799", "swap"}, Stage::II, RewardConfig{});
  c.expect(b.rev == -0.1, "fixture r_rev");
  const auto sim = score_rollout(render({false, Verdict::F, true, true}), sim_ground_truth(),
                                 Stage::II, RewardConfig{});
  c.expect(sim.rev == -0.1, "simulated correction r_rev");
  return c.done("16 combinations, correction r_rev = " + fmt(b.rev, 1));
}

// --- format soundness -------------------------------------------------------

Outcome format_soundness() {
  Checker c;
  std::mt19937_64 rng(20240601);
  std::size_t ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto pieces = scr_test::random_pieces(rng);
    const std::string text = scr_test::render(pieces);
    const auto f = format_reward(text);
    bool bits = true;
    for (bool x : f.constraints) bits &= x;
    const bool oracle = scr_test::oracle_format_ok(pieces);
    const auto parsed = parse_trajectory(text);
    const bool one = f.value == 1;
    ones += one;
    c.expect(one == bits, "value vs bits");
    c.expect(one == oracle, "value vs oracle");
    c.expect(!one || parsed.has_value(), "format 1 but parse failed");
  }
  return c.done(std::to_string(n) + " arrangements, " + std::to_string(ones) +
                " well formed, 0 counterexamples");
}

// --- verification metrics --------------------------------------------------

Outcome metrics_math() {
  Checker c;
  const double f1 = f1_from_pr(79.91, 92.84);
  c.expect(std::abs(f1 - 85.89) <= 0.01, "F1 from P/R");
  struct Row {
    double p, r;
  };
  const Row rows[] = {{79.91, 92.84}, {18.75, 100.0}, {47.41, 95.52}, {51.10, 93.12}};
  std::vector<VerificationMetrics> per;
  for (const auto& r : rows) {
    VerificationMetrics m;
    m.precision = r.p;
    m.recall = r.r;
    m.f1 = f1_from_pr(r.p, r.r);
    per.push_back(m);
  }
  const auto macro = macro_average(per);
  const double harmonic = f1_from_pr(macro.precision, macro.recall);
  c.expect(std::abs(harmonic - macro.f1) > 1.0, "macro and harmonic should differ");
  return c.done("F1 = " + fmt(f1, 2) + "; macro F1 " + fmt(macro.f1, 2) +
                " vs harmonic of averages " + fmt(harmonic, 2));
}

// --- mask laws --------------------------------------------------------------

Outcome mask_laws() {
  Checker c;
  std::mt19937_64 rng(77);
  const FallbackTokenizer tok;
  const std::string prompt = "Solve the stated problem carefully.";
  const std::size_t prompt_len = tok.tokenize(prompt).ids.size();
  std::vector<TokenizedRecord> records;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto parts = scr_test::random_valid_parts(rng);
    const bool init_correct = rng() % 2 == 0;
    auto t = make_trajectory(parts);
    if (!t) {
      c.expect(false, "generator produced an invalid trajectory");
      continue;
    }
    const auto rec = apply_dts(build_record("m" + std::to_string(i), prompt, serialize(*t),
                                            init_correct));
    const bool final_t = scr_test::oracle_verdict(parts.back().second) == 'T' &&
                         parts.back().first == SegmentKind::Critic;
    c.expect(rec.eos_supervised == final_t, "EOS iff final T");
    c.expect((rec.tokens.back() == FallbackTokenizer::kEos) == final_t, "EOS token placement");

    const std::size_t init_span =
        tok.tokenize("<answer>" + parts.front().second + "</answer>").ids.size();
    const auto sft = build_sft_mask(rec);
    const auto zeros = static_cast<std::size_t>(std::count(sft.bits.begin(), sft.bits.end(), 0));
    c.expect(zeros == prompt_len + (init_correct ? 0 : init_span), "SFT zero count");
    if (records.size() < 2000) records.push_back(rec);
  }

  // Stage I objective with revised tokens perturbed.
  double worst = 0.0;
  for (std::size_t start = 0; start + 4 <= records.size(); start += 4) {
    RolloutGroup g;
    for (std::size_t k = start; k < start + 4; ++k) {
      const auto pm = build_stage1_policy_mask(records[k]);
      const std::size_t T = pm.bits.size();
      std::vector<double> lo(T), ln(T);
      for (std::size_t t = 0; t < T; ++t) {
        lo[t] = -4.0 * scr_test::uniform01(rng) - 0.01;
        ln[t] = lo[t] + 0.6 * (scr_test::uniform01(rng) - 0.5);
      }
      g.rewards.push_back(std::floor(scr_test::uniform01(rng) * 3.0));
      g.logp_old.push_back(lo);
      g.logp_new.push_back(ln);
      g.masks.push_back(pm);
    }
    if (g.rewards[0] == g.rewards[1]) g.rewards[1] += 1.0;
    const auto adv = group_advantages(g.rewards);
    const double base = clipped_objective(g, adv, ClipConfig{});
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t t = 0; t < g.logp_new[i].size(); ++t) {
        if (g.masks[i].bits[t] == 0) g.logp_new[i][t] += 6.0 * (scr_test::uniform01(rng) - 0.5);
      }
    }
    const double moved = clipped_objective(g, adv, ClipConfig{});
    worst = std::max(worst, std::abs(moved - base));
  }
  c.expect(worst < 1e-12, "Stage I objective moved by " + std::to_string(worst));
  return c.done(std::to_string(n) + " records, max |dJ| = " + fmt(worst, 1));
}

// --- GRPO numerics ------------------------------------------------------------

Outcome grpo_numerics() {
  Checker c;
  std::mt19937_64 rng(4242);
  double worst_sum = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t G = 2 + rng() % 31;
    std::vector<double> r(G);
    for (auto& x : r) x = 4.0 * scr_test::uniform01(rng) - 1.0;
    const auto a = group_advantages(r);
    double s = 0.0;
    for (double x : a) s += x;
    worst_sum = std::max(worst_sum, std::abs(s));
    std::vector<double> same(G, r[0]);
    for (double x : group_advantages(same)) c.expect(x == 0.0, "constant rewards");
  }
  c.expect(worst_sum <= 1e-9, "advantage sum");

  const ClipConfig clip;
  double worst_rel = 0.0;
  int instances = 0;
  while (instances < 100) {
    const auto g = scr_test::random_group(rng, 4, 16);
    if (scr_test::min_kink_distance(g, clip) < 1e-3) continue;
    const auto adv = group_advantages(g.rewards);
    const auto an = objective_grad_wrt_logp(g, adv, clip);
    const auto fd = scr_test::fd_gradient(g, adv, clip, 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t t = 0; t < an[i].size(); ++t) {
        const double rel = std::abs(an[i][t] - fd[i][t]) / std::max(1.0, std::abs(an[i][t]));
        worst_rel = std::max(worst_rel, rel);
      }
    }
    ++instances;
  }
  c.expect(worst_rel <= 1e-6, "finite differences");
  return c.done("max |sum A| = " + sci(worst_sum) + ", max gradient rel. error = " +
                sci(worst_rel) + " over 100 instances");
}

// --- simulator ----------------------------------------------------------------

Outcome simulator() {
  Checker c;
  std::mt19937_64 rng(99);
  const RewardConfig cfg;
  double worst_z = 0.0;
  SimRng sim(99);
  for (int k = 0; k < 20; ++k) {
    SynthPolicy p{scr_test::uniform01(rng), scr_test::uniform01(rng), scr_test::uniform01(rng),
                  scr_test::uniform01(rng), scr_test::uniform01(rng)};
    for (Stage stage : {Stage::I, Stage::II}) {
      const int n = 20000;
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = outcome_reward(sample_outcome(p, sim), stage, cfg);
        sum += r;
        sq += r * r;
      }
      const double mean = sum / n;
      const double se = std::sqrt(std::max(sq / n - mean * mean, 1e-18) / n);
      const double closed = stage == Stage::I
                                ? expected_stage1_reward(p, cfg.stage1)
                                : expected_stage2_reward(p, cfg.stage2, cfg.revision);
      const double z = std::abs(mean - closed) / se;
      worst_z = std::max(worst_z, z);
      c.expect(z <= 3.0, "Monte Carlo vs closed form, policy " + std::to_string(k));
    }
  }

  int improved = 0;
  std::string gains;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimConfig sc;
    sc.seed = seed;
    sc.steps = 500;
    sc.stage = Stage::I;
    sc.initial = SynthPolicy{0.5, 0.5, 0.5, 0.5, 0.5};
    const auto report = run_policy_gradient(sc);
    const double gain = report.final_policy.verdict_accuracy() - sc.initial.verdict_accuracy();
    improved += gain >= 0.2;
    gains += (gains.empty() ? "" : "/") + fmt(gain, 2);
  }
  c.expect(improved >= 4, "verdict accuracy gain on " + std::to_string(improved) + " of 5 seeds");

  for (double p_init : {0.1, 0.5, 0.9}) {
    double prev = INFINITY;
    for (int k = 0; k <= 20; ++k) {
      const double len = expected_rendered_length({p_init, k / 20.0, 0.6, 0.5, 0.5});
      c.expect(len < prev, "length monotone in q_cc");
      prev = len;
    }
  }
  return c.done("max MC z = " + fmt(worst_z, 2) + "; Stage I accuracy gains " + gains +
                "; length decreasing in q_cc");
}

// --- pipeline -----------------------------------------------------------------

Outcome pipeline_integrity() {
  Checker c;
  std::vector<ProblemItem> problems;
  const char ops[] = {'+', '-', '*'};
  for (int i = 0; i < 50; ++i) {
    const int a = 2 + (i * 37) % 97;
    const int b = 3 + (i * 53) % 89;
    const char op = ops[i % 3];
    const int v = op == '+' ? a + b : op == '-' ? a - b : a * b;
    problems.push_back({"p" + std::to_string(i),
                        "What is " + std::to_string(a) + " " + op + " " + std::to_string(b) + "?",
                        {std::to_string(v), "p" + std::to_string(i)},
                        std::nullopt});
  }
  auto run = [&](unsigned workers) {
    PipelineConfig cfg;
    cfg.teacher.parallelism = workers;
    SimulatedTeacher teacher(2025, "mock-teacher");
    std::ostringstream out;
    const auto stats = run_pipeline(problems, cfg, teacher, teacher, out);
    return std::make_pair(out.str(), stats);
  };
  const auto [first, stats] = run(4);
  const auto second = run(4).first;
  const auto serial = run(1).first;
  c.expect(first == second, "repeated runs differ");
  c.expect(first == serial, "parallel and serial runs differ");

  std::size_t records = 0, verified = 0;
  std::istringstream in(first);
  for_each_line(in, [&](std::string_view line, std::size_t) {
    ++records;
    try {
      const auto rec = synth_record_from_json(line);
      const auto& gt = problems.at(std::stoul(rec.problem_id.substr(1))).ground_truth;
      verify_record(rec, gt);
      ++verified;
    } catch (const std::exception& e) {
      c.expect(false, e.what());
    }
  });
  c.expect(records > 0 && records == stats.records, "record count");
  return c.done(std::to_string(verified) + "/" + std::to_string(records) +
                " records re-verified (" + std::to_string(stats.correct_answer) +
                " correct_answer, " + std::to_string(stats.correction) +
                " correction), byte-identical across runs");
}

// --- pilot ----------------------------------------------------------------------

Outcome pilot() {
  Checker c;
  std::ifstream in(scr_test::fixture_path("pilot/pilot_traces.jsonl"));
  std::string line;
  TransitionSummary summary;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto id = j["trace_id"].get<std::string>();
    const auto states = extract_answer_states(j["annotator_output"].get<std::string>());
    const auto outcome = classify_transition(states, {j["gt"].get<std::string>(), id});
    c.expect(to_string(outcome) == j["label"].get<std::string>(), "label of " + id);
    if (id == "swap-1799") c.expect(outcome == TransitionOutcome::FT, "swap trace must be FT");
    summary.add(outcome);
    ++n;
  }
  c.expect(n == 20, "fixture size");
  std::string counts;
  for (auto o : kAllTransitions) {
    counts += std::string(counts.empty() ? "" : " ") + std::string(to_string(o)) + "=" +
              std::to_string(summary.count(o));
  }
  return c.done(std::to_string(n) + " traces match hand labels (" + counts +
                "); correctness preserved in " + fmt(summary.preserved_percent(), 2) +
                "% of revised traces");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"reward-tables", 1.0, reward_tables},
      {"format-soundness", 30.0, format_soundness},
      {"metrics-math", 1.0, metrics_math},
      {"mask-laws", 60.0, mask_laws},
      {"grpo-numerics", 60.0, grpo_numerics},
      {"simulator-shaping", 300.0, simulator},
      {"pipeline-integrity", 60.0, pipeline_integrity},
      {"pilot-transitions", 60.0, pilot},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = cr.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.ok && secs > cr.budget_seconds) {
      out = {false, "took " + fmt(secs, 2) + " s, budget " + fmt(cr.budget_seconds, 0) + " s"};
    }
    failed += !out.ok;
    std::printf("%s %-20s %7.3f s  %s\n", out.ok ? "PASS" : "FAIL", cr.name, secs,
                out.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}
