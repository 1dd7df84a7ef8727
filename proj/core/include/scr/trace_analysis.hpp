#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scr/answer_eval.hpp"
#include "scr/error.hpp"
#include "scr/expected.hpp"
#include "scr/trajectory.hpp"

namespace scr {

struct OperatorCounts {
  std::uint64_t decomp_plan = 0;
  std::uint64_t causal_infer = 0;
  std::uint64_t monitor = 0;
  std::uint64_t backtrack = 0;
  std::uint64_t repr_reframe = 0;

  // Monitoring and backtracking reported together.
  std::uint64_t verification_revision() const noexcept { return monitor + backtrack; }
  friend bool operator==(const OperatorCounts&, const OperatorCounts&) = default;
};

// Reads the five "COUNT_<NAME>:<int>" lines anywhere in the text; other lines
// are ignored and a repeated counter keeps its last value.
Expected<OperatorCounts, ErrorCode> parse_operator_counts(std::string_view annotator_output);
std::string serialize(const OperatorCounts& counts);

enum class TransitionOutcome { TT, TF, FF, FT, NoRevision };
std::string_view to_string(TransitionOutcome outcome) noexcept;
inline constexpr std::array<TransitionOutcome, 5> kAllTransitions{
    TransitionOutcome::TT, TransitionOutcome::TF, TransitionOutcome::FF, TransitionOutcome::FT,
    TransitionOutcome::NoRevision};

// The answer-state lines at the end of a recorder output: the trailing run of
// lines that consist of a single \boxed{...}, returned with their contents.
std::vector<std::string> extract_answer_states(std::string_view recorder_output);

// First vs last state. Throws Error(EmptyTrajectory) for an empty list.
TransitionOutcome classify_transition(std::span<const std::string> answer_states,
                                      const GroundTruth& gt);

struct TransitionSummary {
  std::array<std::size_t, 5> counts{};  // indexed like kAllTransitions

  void add(TransitionOutcome outcome) noexcept { ++counts[static_cast<std::size_t>(outcome)]; }
  std::size_t count(TransitionOutcome outcome) const noexcept {
    return counts[static_cast<std::size_t>(outcome)];
  }
  std::size_t total() const noexcept;
  std::size_t revised() const noexcept { return total() - count(TransitionOutcome::NoRevision); }
  // Percent of revised traces whose correctness is unchanged (TT or FF); 0
  // when nothing was revised.
  double preserved_percent() const noexcept;
};

struct Confusion {
  std::size_t tp = 0;  // said T, was correct
  std::size_t fp = 0;  // said T, was wrong
  std::size_t tn = 0;  // said F, was wrong
  std::size_t fn = 0;  // said F, was correct
  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

// Percentages. Macro averages carry no confusion matrix.
struct VerificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<Confusion> confusion;
};

double f1_from_pr(double precision, double recall) noexcept;
VerificationMetrics metrics_from_confusion(const Confusion& c);

// Positive class is verdict T. Throws LengthMismatch or EmptyInput.
VerificationMetrics verification_metrics(std::span<const Verdict> verdicts,
                                         std::span<const bool> truths);

// Field-wise unweighted mean (f1 included). Throws EmptyInput.
VerificationMetrics macro_average(std::span<const VerificationMetrics> per_dataset);

struct LengthStats {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;  // linear interpolation between order statistics
};

LengthStats length_stats(std::span<const std::size_t> token_counts);
// Counts fallback-tokenizer tokens of each text.
LengthStats length_stats(std::span<const std::string> texts);

enum class AnalysisKind { Operators, Transitions, Verification, Lengths };
std::optional<AnalysisKind> parse_analysis_kind(std::string_view s) noexcept;

struct AnalysisReport {
  std::string json;
  std::string csv;
  std::size_t records = 0;
  std::vector<std::string> skipped;  // "<line>: <reason>" for unusable annotator outputs
};

// JSONL inputs:
//   operators     {trace_id, annotator_output}
//   transitions   {trace_id, answer_states: [...] | annotator_output, gt}
//   verification  {trace_id, verdict: "T"|"F", truth: bool[, dataset]}
//   lengths       {trace_id, text | tokens: int[, group]}
// Structurally malformed lines throw Error(MalformedRecord); annotator text
// that cannot be parsed is listed in `skipped`.
AnalysisReport analyze(std::istream& in, AnalysisKind kind);

}  // namespace scr
