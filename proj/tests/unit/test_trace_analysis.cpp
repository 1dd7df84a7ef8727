#include <array>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "scr/trace_analysis.hpp"

using namespace scr;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected scr::Error");
  return ErrorCode::EmptyInput;
}

VerificationMetrics row(double p, double r, double f1) {
  VerificationMetrics m;
  m.precision = p;
  m.recall = r;
  m.f1 = f1;
  return m;
}

}  // namespace

TEST_SUITE("trace_analysis") {

TEST_CASE("operator counts are read from annotator text") {
  const auto c = parse_operator_counts(
      "The solver splits the task twice.\n"
      "COUNT_DECOMP_PLAN:2\n**COUNT_CAUSAL_INFER:5**\n`COUNT_MONITOR:1`\n"
      "COUNT_BACKTRACK:0\nCOUNT_REPR_REFRAME:3\n");
  REQUIRE(c);
  CHECK(c->decomp_plan == 2);
  CHECK(c->causal_infer == 5);
  CHECK(c->monitor == 1);
  CHECK(c->backtrack == 0);
  CHECK(c->repr_reframe == 3);
  CHECK(c->verification_revision() == 1);

  CHECK(parse_operator_counts("COUNT_DECOMP_PLAN:1\nCOUNT_MONITOR:2").error() ==
        ErrorCode::MissingCounter);
  CHECK(parse_operator_counts("COUNT_DECOMP_PLAN:x\nCOUNT_CAUSAL_INFER:1\nCOUNT_MONITOR:1\n"
                              "COUNT_BACKTRACK:1\nCOUNT_REPR_REFRAME:1")
            .error() == ErrorCode::MalformedInteger);
  CHECK(parse_operator_counts("COUNT_DECOMP_PLAN:-1\nCOUNT_CAUSAL_INFER:1\nCOUNT_MONITOR:1\n"
                              "COUNT_BACKTRACK:1\nCOUNT_REPR_REFRAME:1")
            .error() == ErrorCode::MalformedInteger);
}

TEST_CASE("operator counts survive serialization with surrounding noise") {
  std::mt19937_64 rng(8);
  const std::vector<std::string> noise{"", "Analysis follows.", "COUNT_ is a prefix",
                                       "Step 3: monitor", "  "};
  for (int i = 0; i < 3000; ++i) {
    OperatorCounts c{rng() % 1000, rng() % 50, rng() % 7, rng() % 7,
                     rng() % 2 ? rng() : rng() % 3};
    std::istringstream lines(serialize(c));
    std::string text, line;
    while (std::getline(lines, line)) {
      text += noise[rng() % noise.size()] + "\n" + line + "\n";
    }
    const auto back = parse_operator_counts(text);
    REQUIRE(back);
    CHECK(*back == c);
  }
}

TEST_CASE("repeated counters keep the last value") {
  const auto c = parse_operator_counts(
      "COUNT_DECOMP_PLAN:1\nCOUNT_CAUSAL_INFER:1\nCOUNT_MONITOR:1\nCOUNT_BACKTRACK:1\n"
      "COUNT_REPR_REFRAME:1\nCOUNT_MONITOR:9\n");
  REQUIRE(c);
  CHECK(c->monitor == 9);
}

TEST_CASE("transition classification") {
  const GroundTruth gt{"1799", "swap"};
  auto classify = [&](std::vector<std::string> s) { return classify_transition(s, gt); };
  CHECK(classify({"900", "1799"}) == TransitionOutcome::FT);
  CHECK(classify({"1799", "900"}) == TransitionOutcome::TF);
  CHECK(classify({"1799", "1,799"}) == TransitionOutcome::TT);
  CHECK(classify({"900", "901", "902"}) == TransitionOutcome::FF);
  CHECK(classify({"900"}) == TransitionOutcome::NoRevision);
  CHECK(classify({"900", "1799", "900"}) == TransitionOutcome::FF);
  CHECK(code_of([&] { classify({}); }) == ErrorCode::EmptyTrajectory);
}

TEST_CASE("answer states come from the trailing boxed lines") {
  const auto s = extract_answer_states(
      "Some reasoning with \\boxed{0} inline.\n\n\\boxed{900}\n  \\boxed{1799}  \n");
  CHECK(s == std::vector<std::string>{"900", "1799"});
  CHECK(extract_answer_states("no states here").empty());
}

TEST_CASE("pilot traces match their hand labels") {
  std::ifstream in(scr_test::fixture_path("pilot/pilot_traces.jsonl"));
  std::string line;
  TransitionSummary summary;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto states = extract_answer_states(j["annotator_output"].get<std::string>());
    const auto outcome = classify_transition(states, {j["gt"].get<std::string>(), ""});
    CAPTURE(j["trace_id"].get<std::string>());
    CHECK(to_string(outcome) == j["label"].get<std::string>());
    if (j["trace_id"] == "swap-1799") CHECK(outcome == TransitionOutcome::FT);
    summary.add(outcome);
    ++n;
  }
  CHECK(n == 20);
  CHECK(summary.revised() == 18);
  CHECK(summary.preserved_percent() == doctest::Approx(100.0 * 11.0 / 18.0));
}

TEST_CASE("analyze transitions on the pilot set reproduces the stored report") {
  std::ifstream in(scr_test::fixture_path("pilot/pilot_traces.jsonl"));
  const auto report = analyze(in, AnalysisKind::Transitions);
  const auto got = nlohmann::json::parse(report.json);
  const auto want =
      nlohmann::json::parse(scr_test::slurp(scr_test::fixture_path("pilot/transitions.expected.json")));
  CHECK(got == want);
  CHECK(report.records == 20);
  CHECK(report.skipped.empty());
}

TEST_CASE("verification metrics") {
  const std::vector<Verdict> v{Verdict::T, Verdict::T, Verdict::F, Verdict::F};
  const std::array<bool, 4> truth{true, false, false, true};
  const auto m = verification_metrics(v, truth);
  CHECK(m.accuracy == 50.0);
  CHECK(m.precision == 50.0);
  CHECK(m.recall == 50.0);
  CHECK(m.f1 == 50.0);
  REQUIRE(m.confusion);
  CHECK(m.confusion->tp == 1);
  CHECK(m.confusion->tn == 1);

  const std::array<bool, 1> short_truth{true};
  CHECK(code_of([&] { verification_metrics(v, short_truth); }) == ErrorCode::LengthMismatch);
  CHECK(code_of([] { verification_metrics({}, {}); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { macro_average({}); }) == ErrorCode::EmptyInput);

  const auto none_t = metrics_from_confusion(Confusion{0, 0, 3, 0});
  CHECK(none_t.precision == 0.0);
  CHECK(none_t.f1 == 0.0);
  CHECK(none_t.accuracy == 100.0);
}

TEST_CASE("reported F1 values follow from their precision and recall") {
  CHECK(std::abs(f1_from_pr(79.91, 92.84) - 85.89) <= 0.01);
  CHECK(std::abs(f1_from_pr(18.75, 100.0) - 31.58) <= 0.01);
  CHECK(std::abs(f1_from_pr(47.41, 95.52) - 63.37) <= 0.01);
  CHECK(std::abs(f1_from_pr(51.10, 93.12) - 65.99) <= 0.01);
  CHECK(f1_from_pr(0.0, 0.0) == 0.0);
}

TEST_CASE("macro F1 averages per-dataset F1, not the harmonic mean of averages") {
  const std::vector<VerificationMetrics> two{row(0, 0, 85.89), row(0, 0, 41.79)};
  CHECK(macro_average(two).f1 == doctest::Approx(63.84));

  const std::vector<VerificationMetrics> rows{row(79.91, 92.84, 85.89), row(18.75, 100.0, 31.58),
                                              row(47.41, 95.52, 63.37), row(51.10, 93.12, 65.99)};
  const auto macro = macro_average(rows);
  CHECK(macro.f1 == doctest::Approx(61.7075));
  CHECK(macro.precision == doctest::Approx(49.2925));
  CHECK(macro.recall == doctest::Approx(95.37));
  const double harmonic = f1_from_pr(macro.precision, macro.recall);
  CHECK(harmonic == doctest::Approx(64.99).epsilon(1e-4));
  CHECK(std::abs(harmonic - macro.f1) > 3.0);
  CHECK_FALSE(macro.confusion);
}

TEST_CASE("confusion identities on random data") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<Verdict> v(n);
    auto t_store = std::make_unique<bool[]>(n);
    std::span<bool> t(t_store.get(), n);
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = rng() % 2 ? Verdict::T : Verdict::F;
      t[k] = rng() % 3 != 0;
    }
    const auto m = verification_metrics(v, t);
    const auto& c = *m.confusion;
    CHECK(c.total() == n);
    CHECK(m.accuracy == doctest::Approx(100.0 * double(c.tp + c.tn) / double(n)));
    if (m.precision > 0 && m.recall > 0) {
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
    }
    CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-9);
    CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-9);
  }
}

TEST_CASE("length statistics") {
  const std::vector<std::size_t> c{4, 1, 3, 2};
  const auto s = length_stats(c);
  CHECK(s.n == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.p95 == doctest::Approx(3.85));
  const std::vector<std::size_t> one{7};
  CHECK(length_stats(one).p95 == 7.0);
  const std::vector<std::string> texts{"a b c", "x"};
  CHECK(length_stats(texts).mean == 2.0);
}

TEST_CASE("analyze other kinds") {
  std::istringstream ops(
      "{\"trace_id\": \"a\", \"annotator_output\": \"COUNT_DECOMP_PLAN:1\\nCOUNT_CAUSAL_INFER:2\\n"
      "COUNT_MONITOR:3\\nCOUNT_BACKTRACK:4\\nCOUNT_REPR_REFRAME:5\"}\n"
      "{\"trace_id\": \"b\", \"annotator_output\": \"nothing useful\"}\n");
  const auto r = analyze(ops, AnalysisKind::Operators);
  CHECK(r.records == 1);
  CHECK(r.skipped.size() == 1);
  CHECK(nlohmann::json::parse(r.json)["totals"]["verification_revision"] == 7);

  std::istringstream ver(
      "{\"trace_id\": \"1\", \"verdict\": \"T\", \"truth\": true, \"dataset\": \"x\"}\n"
      "{\"trace_id\": \"2\", \"verdict\": \"F\", \"truth\": true, \"dataset\": \"y\"}\n");
  const auto v = nlohmann::json::parse(analyze(ver, AnalysisKind::Verification).json);
  CHECK(v["datasets"]["x"]["f1"] == 100.0);
  CHECK(v["datasets"]["y"]["f1"] == 0.0);
  CHECK(v["macro_average"]["f1"] == 50.0);

  std::istringstream len("{\"trace_id\": \"1\", \"tokens\": 10}\n{\"trace_id\": \"2\", \"text\": \"a b\"}\n");
  const auto l = nlohmann::json::parse(analyze(len, AnalysisKind::Lengths).json);
  CHECK(l["groups"]["all"]["mean"] == 6.0);

  std::istringstream bad("{\"trace_id\": \"1\", \"verdict\": \"maybe\", \"truth\": true}\n");
  CHECK(code_of([&] { analyze(bad, AnalysisKind::Verification); }) == ErrorCode::MalformedRecord);
  std::istringstream junk("not json\n");
  CHECK(code_of([&] { analyze(junk, AnalysisKind::Operators); }) == ErrorCode::MalformedRecord);
  CHECK(parse_analysis_kind("lengths") == AnalysisKind::Lengths);
  CHECK_FALSE(parse_analysis_kind("nope"));
}

}
