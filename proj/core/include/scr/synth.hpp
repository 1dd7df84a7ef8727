#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "scr/answer_eval.hpp"
#include "scr/expected.hpp"
#include "scr/prompts.hpp"
#include "scr/teacher.hpp"
#include "scr/trajectory.hpp"

namespace scr {

struct ProblemItem {
  std::string id;
  std::string statement;
  GroundTruth ground_truth;
  std::optional<std::string> difficulty;
};

enum class CandidateLabel { Correct, Incorrect, Unboxed };
std::string_view to_string(CandidateLabel label) noexcept;

struct CandidateSolution {
  std::string text;
  std::optional<BoxedAnswer> boxed;
  CandidateLabel label = CandidateLabel::Unboxed;
  std::string sampler_id;
  std::size_t index = 0;
};

struct CritiqueRecord {
  std::string text;
  Verdict verdict = Verdict::F;
  bool aligned = false;  // verdict agrees with the candidate's label
  int attempt = 0;
};

enum class RevisionMode { Refinement, Replacement };
std::string_view to_string(RevisionMode mode) noexcept;

struct Revision {
  std::string text;
  RevisionMode mode = RevisionMode::Refinement;
  int attempt = 0;  // counted within its mode
};

enum class RecordKind { CorrectAnswer, Correction };
std::string_view to_string(RecordKind kind) noexcept;

struct Provenance {
  std::string sampler;
  std::string teacher;
  std::size_t candidate_index = 0;
  int critique_attempt = 0;
  std::optional<RevisionMode> revision_mode;
  std::optional<int> revision_attempt;
};

struct SynthRecord {
  std::string id;
  std::string problem_id;
  std::string prompt;
  std::string trajectory_text;
  RecordKind kind = RecordKind::CorrectAnswer;
  int rounds = 0;  // number of revised segments
  std::string final_answer;
  bool eos_after_critic = false;  // dynamic termination applies when tokenized
  Provenance provenance;
};

struct PipelineConfig {
  std::size_t candidates = 4;
  double sampler_temperature = 1.0;
  int critique_attempts = 2;     // NoVerdict retries
  int refinement_attempts = 2;   // before falling back to replacement
  int replacement_attempts = 1;
  TeacherConfig teacher;         // transport retries and worker count
  PromptTemplates prompts = builtin_prompts();
};

void validate(const PipelineConfig& config);

// JSON object with optional keys candidates, sampler_temperature,
// critique_attempts, refinement_attempts, replacement_attempts, prompts_dir
// and teacher {endpoint, model, temperature, max_retries, timeout_seconds,
// parallelism, api_key_env}. Unknown keys are rejected.
PipelineConfig parse_pipeline_config(std::string_view json_text);
PipelineConfig load_pipeline_config(const std::string& path);

struct SynthStats {
  std::size_t problems = 0;
  std::size_t records = 0;
  std::size_t correct_answer = 0;
  std::size_t correction = 0;
  std::size_t candidates = 0;
  std::size_t candidates_correct = 0;
  std::size_t candidates_incorrect = 0;
  std::size_t candidates_unboxed = 0;
  std::size_t candidates_failed = 0;
  std::size_t teacher_calls = 0;
  std::size_t teacher_retries = 0;
  std::size_t replacements_used = 0;
  std::map<std::string, std::size_t> drops;  // reason -> count

  void merge(const SynthStats& other);
  std::string to_json() const;
};

CandidateLabel label_candidate(const std::optional<BoxedAnswer>& boxed, const GroundTruth& gt);

// One sampler call per candidate, each with transport retries. A candidate
// whose calls all fail is reported as UpstreamFailure; the others are kept.
std::vector<Expected<CandidateSolution, ErrorCode>> sample_candidates(
    const ProblemItem& problem, std::size_t n, TeacherClient& sampler,
    const PipelineConfig& config, SynthStats* stats = nullptr);

// Retries on NoVerdict up to critique_attempts. Misaligned critiques are
// returned with aligned = false; callers drop them.
Expected<CritiqueRecord, ErrorCode> generate_critique(const ProblemItem& problem,
                                                      const CandidateSolution& candidate,
                                                      TeacherClient& teacher,
                                                      const PipelineConfig& config,
                                                      SynthStats* stats = nullptr);

// Refinement attempts first, then replacement. Fails with ExhaustedAttempts
// when no attempt reproduces the ground truth.
Expected<Revision, ErrorCode> generate_revision(const ProblemItem& problem,
                                                const CandidateSolution& candidate,
                                                const CritiqueRecord& critique,
                                                TeacherClient& teacher,
                                                const PipelineConfig& config,
                                                SynthStats* stats = nullptr);

// Throws Error(InvariantViolation) when the pieces do not form a valid record.
SynthRecord assemble_record(const ProblemItem& problem, const CandidateSolution& candidate,
                            const CritiqueRecord& critique,
                            const std::optional<Revision>& revision,
                            const std::string& teacher_name);

// Re-checks the persisted invariants. Throws Error(InvariantViolation).
void verify_record(const SynthRecord& record, const GroundTruth& gt);

std::string to_json_line(const SynthRecord& record);
// Throws Error(MalformedRecord) on schema errors.
SynthRecord synth_record_from_json(std::string_view line);

// JSONL {id, statement, answer[, difficulty]}. Throws Error(MalformedRecord).
std::vector<ProblemItem> load_problems(std::istream& in);

// Runs every problem, writing records to `out` in problem order. Per-problem
// failures are counted in the returned statistics and never abort the run.
SynthStats run_pipeline(const std::vector<ProblemItem>& problems, const PipelineConfig& config,
                        TeacherClient& sampler, TeacherClient& teacher, std::ostream& out);

}  // namespace scr
