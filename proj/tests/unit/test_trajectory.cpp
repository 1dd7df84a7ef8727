#include <random>
#include <regex>

#include "doctest.h"
#include "oracles.hpp"
#include "scr/trajectory.hpp"

using namespace scr;

TEST_SUITE("trajectory") {

TEST_CASE("correct-answer shape parses into two segments") {
  const auto t = parse_trajectory(
      "<answer>GCD is 8.\n\\boxed{8}</answer><critic>The answer is correct. T</critic>");
  REQUIRE(t);
  CHECK(t->segments().size() == 2);
  CHECK(t->verdicts() == std::vector<Verdict>{Verdict::T});
  CHECK(t->rounds() == 1);
  CHECK(t->revision_count() == 0);
  CHECK(t->final_answer().kind == SegmentKind::Answer);
}

TEST_CASE("fixture trajectories") {
  const auto swap = parse_trajectory(scr_test::slurp(scr_test::fixture_path("trajectories/swap_correction.txt")));
  REQUIRE(swap);
  CHECK(swap->verdicts() == std::vector<Verdict>{Verdict::F});
  CHECK(swap->segments().size() == 3);
  CHECK(swap->final_answer().kind == SegmentKind::Revised);

  const auto timber = parse_trajectory(scr_test::slurp(scr_test::fixture_path("trajectories/timber_correct.txt")));
  REQUIRE(timber);
  CHECK(timber->final_verdict() == Verdict::T);
}

TEST_CASE("error codes") {
  struct Case {
    const char* text;
    ErrorCode code;
  };
  const Case cases[] = {
      {"", ErrorCode::EmptyInput},
      {"  \n\t", ErrorCode::EmptyInput},
      {"just prose", ErrorCode::MissingTag},
      {"<answer>\\boxed{1}</answer>", ErrorCode::MissingTag},
      {"<critic>fine T</critic><answer>\\boxed{1}</answer>", ErrorCode::OrderViolation},
      {"<answer>a</answer><critic>x F</critic><revised>b</revised><answer>c</answer>",
       ErrorCode::OrderViolation},
      {"<answer>a</answer><revised>b</revised>", ErrorCode::DanglingRevision},
      {"<answer>a</answer><critic>no F</critic>", ErrorCode::MissingRevision},
      {"<answer>a</answer><critic>no F</critic><critic>ok T</critic>", ErrorCode::MissingRevision},
      {"<answer>a</answer><critic>ok T</critic>trailing", ErrorCode::TrailingContentAfterT},
      {"<answer>a</answer><critic>ok T</critic><revised>b</revised>",
       ErrorCode::TrailingContentAfterT},
      {"<answer>a</answer><critic>maybe</critic>", ErrorCode::NoVerdict},
      {"<answer></answer><critic>ok T</critic>", ErrorCode::EmptyAnswer},
      {"<answer>a<critic>ok T</critic></answer>", ErrorCode::UnbalancedTag},
      {"<answer>a</critic>", ErrorCode::UnbalancedTag},
      {"<answer>a", ErrorCode::UnbalancedTag},
      {"</answer>", ErrorCode::UnbalancedTag},
  };
  for (const auto& c : cases) {
    CAPTURE(c.text);
    const auto r = parse_trajectory(c.text);
    REQUIRE_FALSE(r);
    CHECK(r.error().code == c.code);
    CHECK(r.error().offset <= std::string_view(c.text).size());
    CHECK_FALSE(r.error().message.empty());
  }
}

TEST_CASE("filler outside tags is tolerated before the terminal critic") {
  const auto t = parse_trajectory("Let me see.\n<answer>\\boxed{2}</answer> so <critic>ok T</critic>\n");
  REQUIRE(t);
  CHECK(t->filler().size() == 2);
}

TEST_CASE("tags are case-sensitive literals") {
  const auto t = parse_trajectory("<Answer>1</Answer><critic>ok T</critic>");
  REQUIRE_FALSE(t);
  CHECK(t.error().code == ErrorCode::OrderViolation);
}

TEST_CASE("extract_verdict") {
  CHECK(extract_verdict("so the solution holds.\nT") == Verdict::T);
  CHECK(extract_verdict("the key mistake is the sum. F.") == Verdict::F);
  CHECK(extract_verdict("F,  \n") == Verdict::F);
  CHECK(extract_verdict("T") == Verdict::T);
  CHECK(extract_verdict("probably fine").error() == ErrorCode::NoVerdict);
  CHECK(extract_verdict("verdict:T").error() == ErrorCode::NoVerdict);
  CHECK(extract_verdict("The T is fine").error() == ErrorCode::NoVerdict);
  CHECK(extract_verdict("t").error() == ErrorCode::NoVerdict);
  CHECK(extract_verdict("").error() == ErrorCode::NoVerdict);
}

TEST_CASE("serialize emits one newline between pairs") {
  const auto t = make_trajectory({{SegmentKind::Answer, "x"}, {SegmentKind::Critic, "ok T"}});
  REQUIRE(t);
  CHECK(serialize(*t) == "<answer>x</answer>\n<critic>ok T</critic>");
}

TEST_CASE("three rounds serialize to three critic pairs") {
  std::vector<std::pair<SegmentKind, std::string>> parts{{SegmentKind::Answer, "\\boxed{1}"}};
  for (int i = 0; i < 2; ++i) {
    parts.emplace_back(SegmentKind::Critic, "wrong F");
    parts.emplace_back(SegmentKind::Revised, "\\boxed{2}");
  }
  parts.emplace_back(SegmentKind::Critic, "right T");
  const auto t = make_trajectory(parts);
  REQUIRE(t);
  CHECK(t->rounds() == 3);
  const std::string s = serialize(*t);
  const std::regex critic("<critic>");
  CHECK(std::distance(std::sregex_iterator(s.begin(), s.end(), critic), std::sregex_iterator()) == 3);
}

TEST_CASE("round trip and span consistency on generated trajectories") {
  std::mt19937_64 rng(20240611);
  for (int n = 0; n < 2000; ++n) {
    const auto parts = scr_test::random_valid_parts(rng);
    const auto t = make_trajectory(parts);
    REQUIRE(t);
    const auto again = parse_trajectory(serialize(*t));
    REQUIRE(again);
    CHECK(*again == *t);
    CHECK(serialize(*again) == serialize(*t));

    // Spans increase, never overlap, and slice out the bodies.
    std::size_t prev_end = 0;
    for (const auto& seg : t->segments()) {
      CHECK(seg.outer.begin >= prev_end);
      CHECK(t->source().substr(seg.body.begin, seg.body.size()) == seg.text);
      CHECK(t->source().substr(seg.outer.begin, seg.outer.size()) ==
            std::string(open_tag(seg.kind)) + seg.text + std::string(close_tag(seg.kind)));
      prev_end = seg.outer.end;
    }
  }
}

TEST_CASE("reformatted whitespace between tags parses to an equal trajectory") {
  const auto a = parse_trajectory("<answer>\\boxed{1}</answer><critic>ok T</critic>");
  const auto b = parse_trajectory("\n\n<answer>\\boxed{1}</answer>  \n\t<critic>ok T</critic>\n");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*a == *b);
  CHECK(serialize(*a) == serialize(*b));
}

TEST_CASE("grammar soundness on random tag soups") {
  std::mt19937_64 rng(7);
  static const std::regex grammar("^A(FR)*T?$");
  for (int n = 0; n < 20000; ++n) {
    const auto text = scr_test::render(scr_test::random_pieces(rng));
    const auto t = parse_trajectory(text);
    if (!t) {
      CHECK(t.error().offset <= text.size());
      continue;
    }
    std::string kinds;
    std::size_t v = 0;
    for (const auto& s : t->segments()) {
      if (s.kind == SegmentKind::Answer) kinds += 'A';
      else if (s.kind == SegmentKind::Revised) kinds += 'R';
      else kinds += to_char(t->verdicts().at(v++));
    }
    CAPTURE(text);
    CHECK(kinds.size() >= 2);
    CHECK(std::regex_match(kinds, grammar));
    CHECK(v == t->verdicts().size());
  }
}

}  // TEST_SUITE
