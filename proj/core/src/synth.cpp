#include "scr/synth.hpp"

#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "scr/error.hpp"
#include "scr/io.hpp"

namespace scr {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(CandidateLabel label) noexcept {
  switch (label) {
    case CandidateLabel::Correct: return "correct";
    case CandidateLabel::Incorrect: return "incorrect";
    case CandidateLabel::Unboxed: return "unboxed";
  }
  return "?";
}

std::string_view to_string(RevisionMode mode) noexcept {
  return mode == RevisionMode::Refinement ? "refinement" : "replacement";
}

std::string_view to_string(RecordKind kind) noexcept {
  return kind == RecordKind::CorrectAnswer ? "correct_answer" : "correction";
}

void validate(const PipelineConfig& config) {
  validate(config.teacher);
  if (config.candidates < 1) throw Error(ErrorCode::InvalidConfig, "candidates must be >= 1");
  if (config.critique_attempts < 1 || config.refinement_attempts < 0 ||
      config.replacement_attempts < 0 ||
      config.refinement_attempts + config.replacement_attempts < 1) {
    throw Error(ErrorCode::InvalidConfig, "attempt counts must allow at least one call");
  }
  if (!(config.sampler_temperature >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sampler_temperature must be >= 0");
  }
}

PipelineConfig parse_pipeline_config(std::string_view json_text) {
  PipelineConfig c;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("pipeline config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "pipeline config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "schema_version") {
        if (value.get<int>() != 1) throw Error(ErrorCode::InvalidConfig, "schema_version must be 1");
      } else if (key == "candidates") {
        c.candidates = value.get<std::size_t>();
      } else if (key == "sampler_temperature") {
        c.sampler_temperature = value.get<double>();
      } else if (key == "critique_attempts") {
        c.critique_attempts = value.get<int>();
      } else if (key == "refinement_attempts") {
        c.refinement_attempts = value.get<int>();
      } else if (key == "replacement_attempts") {
        c.replacement_attempts = value.get<int>();
      } else if (key == "prompts_dir") {
        c.prompts = load_prompts(value.get<std::string>());
      } else if (key == "teacher") {
        for (const auto& [tk, tv] : value.items()) {
          if (tk == "endpoint") c.teacher.endpoint = tv.get<std::string>();
          else if (tk == "model") c.teacher.model = tv.get<std::string>();
          else if (tk == "temperature") c.teacher.temperature = tv.get<double>();
          else if (tk == "max_retries") c.teacher.max_retries = tv.get<int>();
          else if (tk == "timeout_seconds") c.teacher.timeout_seconds = tv.get<double>();
          else if (tk == "parallelism") c.teacher.parallelism = tv.get<unsigned>();
          else if (tk == "api_key_env") c.teacher.api_key_env = tv.get<std::string>();
          else throw Error(ErrorCode::InvalidConfig, "unknown teacher key: " + tk);
        }
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown pipeline key: " + key);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("pipeline config: ") + e.what());
  }
  validate(c);
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  return parse_pipeline_config(read_file(path));
}

void SynthStats::merge(const SynthStats& o) {
  problems += o.problems;
  records += o.records;
  correct_answer += o.correct_answer;
  correction += o.correction;
  candidates += o.candidates;
  candidates_correct += o.candidates_correct;
  candidates_incorrect += o.candidates_incorrect;
  candidates_unboxed += o.candidates_unboxed;
  candidates_failed += o.candidates_failed;
  teacher_calls += o.teacher_calls;
  teacher_retries += o.teacher_retries;
  replacements_used += o.replacements_used;
  for (const auto& [k, v] : o.drops) drops[k] += v;
}

std::string SynthStats::to_json() const {
  ordered_json j;
  j["problems"] = problems;
  j["records"] = records;
  j["correct_answer"] = correct_answer;
  j["correction"] = correction;
  j["candidates"] = {{"total", candidates},
                     {"correct", candidates_correct},
                     {"incorrect", candidates_incorrect},
                     {"unboxed", candidates_unboxed},
                     {"failed", candidates_failed}};
  j["teacher_calls"] = teacher_calls;
  j["teacher_retries"] = teacher_retries;
  j["replacements_used"] = replacements_used;
  j["drops"] = ordered_json::object();
  for (const auto& [k, v] : drops) j["drops"][k] = v;
  return j.dump();
}

CandidateLabel label_candidate(const std::optional<BoxedAnswer>& boxed, const GroundTruth& gt) {
  if (!boxed) return CandidateLabel::Unboxed;
  return accuracy_reward(boxed, gt) == 1 ? CandidateLabel::Correct : CandidateLabel::Incorrect;
}

namespace {

std::string call_with_retries(TeacherClient& client, TeacherRequest request,
                              const PipelineConfig& config, SynthStats* stats) {
  for (int retry = 0;; ++retry) {
    request.retry = retry;
    if (stats) {
      ++stats->teacher_calls;
      if (retry > 0) ++stats->teacher_retries;
    }
    try {
      return client.complete(request);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UpstreamFailure || retry >= config.teacher.max_retries) throw;
    }
  }
}

std::vector<ChatMessage> chat(const std::string& system, std::string user) {
  return {{"system", system}, {"user", std::move(user)}};
}

void drop(SynthStats* stats, const std::string& reason) {
  if (stats) ++stats->drops[reason];
}

std::optional<BoxedAnswer> boxed_of(std::string_view text) {
  auto b = extract_boxed(text);
  if (!b) return std::nullopt;
  return *b;
}

}  // namespace

std::vector<Expected<CandidateSolution, ErrorCode>> sample_candidates(
    const ProblemItem& problem, std::size_t n, TeacherClient& sampler,
    const PipelineConfig& config, SynthStats* stats) {
  if (n < 1) throw Error(ErrorCode::PreconditionFailed, "sample_candidates: n must be >= 1");
  std::vector<Expected<CandidateSolution, ErrorCode>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TeacherRequest req;
    req.role = TeacherRole::Sample;
    req.problem_id = problem.id;
    req.candidate_index = i;
    req.temperature = config.sampler_temperature;
    req.messages = chat(config.prompts.sampler_system, problem.statement);
    if (stats) ++stats->candidates;
    try {
      CandidateSolution c;
      c.text = call_with_retries(sampler, req, config, stats);
      c.boxed = boxed_of(c.text);
      c.label = label_candidate(c.boxed, problem.ground_truth);
      c.sampler_id = sampler.name();
      c.index = i;
      if (stats) {
        switch (c.label) {
          case CandidateLabel::Correct: ++stats->candidates_correct; break;
          case CandidateLabel::Incorrect: ++stats->candidates_incorrect; break;
          case CandidateLabel::Unboxed: ++stats->candidates_unboxed; break;
        }
      }
      out.emplace_back(std::move(c));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UpstreamFailure) throw;
      if (stats) ++stats->candidates_failed;
      out.emplace_back(unexpected(ErrorCode::UpstreamFailure));
    }
  }
  return out;
}

Expected<CritiqueRecord, ErrorCode> generate_critique(const ProblemItem& problem,
                                                      const CandidateSolution& candidate,
                                                      TeacherClient& teacher,
                                                      const PipelineConfig& config,
                                                      SynthStats* stats) {
  if (candidate.label == CandidateLabel::Unboxed) {
    throw Error(ErrorCode::PreconditionFailed, "cannot critique an unboxed candidate");
  }
  for (int attempt = 0; attempt < config.critique_attempts; ++attempt) {
    TeacherRequest req;
    req.role = TeacherRole::Critique;
    req.problem_id = problem.id;
    req.candidate_index = candidate.index;
    req.attempt = attempt;
    req.temperature = config.teacher.temperature;
    req.messages = chat(config.prompts.critique_system,
                        fill_template(config.prompts.critique_user,
                                      {{"question", problem.statement}, {"answer", candidate.text}}));
    std::string text;
    try {
      text = call_with_retries(teacher, req, config, stats);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UpstreamFailure) throw;
      return unexpected(ErrorCode::UpstreamFailure);
    }
    auto verdict = extract_verdict(text);
    if (!verdict) continue;
    CritiqueRecord r;
    r.text = std::move(text);
    r.verdict = *verdict;
    r.aligned = (*verdict == Verdict::T) == (candidate.label == CandidateLabel::Correct);
    r.attempt = attempt;
    return r;
  }
  return unexpected(ErrorCode::NoVerdict);
}

Expected<Revision, ErrorCode> generate_revision(const ProblemItem& problem,
                                                const CandidateSolution& candidate,
                                                const CritiqueRecord& critique,
                                                TeacherClient& teacher,
                                                const PipelineConfig& config,
                                                SynthStats* stats) {
  if (candidate.label != CandidateLabel::Incorrect || critique.verdict != Verdict::F ||
      !critique.aligned) {
    throw Error(ErrorCode::PreconditionFailed,
                "revision needs an incorrect candidate with an aligned F critique");
  }
  auto attempt_once = [&](RevisionMode mode, int attempt) -> std::optional<Revision> {
    TeacherRequest req;
    req.problem_id = problem.id;
    req.candidate_index = candidate.index;
    req.attempt = attempt;
    req.temperature = config.teacher.temperature;
    if (mode == RevisionMode::Refinement) {
      req.role = TeacherRole::Refine;
      req.messages = chat(config.prompts.refine_system,
                          fill_template(config.prompts.refine_user,
                                        {{"question", problem.statement},
                                         {"answer", candidate.text},
                                         {"evaluation", critique.text}}));
    } else {
      req.role = TeacherRole::Replace;
      req.messages = chat(config.prompts.replace_system,
                          fill_template(config.prompts.replace_user,
                                        {{"question", problem.statement},
                                         {"answer", candidate.text}}));
    }
    std::string text;
    try {
      text = call_with_retries(teacher, req, config, stats);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UpstreamFailure) throw;
      return std::nullopt;
    }
    if (accuracy_reward(boxed_of(text), problem.ground_truth) != 1) return std::nullopt;
    return Revision{std::move(text), mode, attempt};
  };

  for (int a = 0; a < config.refinement_attempts; ++a) {
    if (auto r = attempt_once(RevisionMode::Refinement, a)) return std::move(*r);
  }
  for (int a = 0; a < config.replacement_attempts; ++a) {
    if (auto r = attempt_once(RevisionMode::Replacement, a)) {
      if (stats) ++stats->replacements_used;
      return std::move(*r);
    }
  }
  return unexpected(ErrorCode::ExhaustedAttempts);
}

void verify_record(const SynthRecord& record, const GroundTruth& gt) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::InvariantViolation, "record " + record.id + ": " + why);
  };
  auto parsed = parse_trajectory(record.trajectory_text);
  if (!parsed) fail("trajectory does not parse: " + parsed.error().message);
  const Trajectory& t = *parsed;
  if (static_cast<std::size_t>(record.rounds) != t.revision_count()) fail("rounds mismatch");
  if (record.rounds > 2) fail("more than two revision rounds");
  const auto first = t.first_verdict();
  if (record.kind == RecordKind::CorrectAnswer) {
    if (record.rounds != 0 || first != Verdict::T) fail("correct_answer needs one T critique");
    if (!record.eos_after_critic) fail("correct_answer must terminate after its critique");
  } else {
    if (first != Verdict::F || record.rounds < 1) fail("correction needs an F critique");
    if (record.eos_after_critic) fail("correction cannot terminate after an F critique");
  }
  const auto init = boxed_of(t.initial_answer().text);
  const bool init_correct = accuracy_reward(init, gt) == 1;
  if ((first == Verdict::T) != init_correct) fail("critique disagrees with the initial answer");
  const auto final_box = boxed_of(t.final_answer().text);
  if (accuracy_reward(final_box, gt) != 1) fail("final answer does not match the ground truth");
  if (final_box->normalized != record.final_answer) fail("final_answer field is stale");
}

SynthRecord assemble_record(const ProblemItem& problem, const CandidateSolution& candidate,
                            const CritiqueRecord& critique,
                            const std::optional<Revision>& revision,
                            const std::string& teacher_name) {
  if (!critique.aligned) throw Error(ErrorCode::InvariantViolation, "critique is not aligned");
  const bool correction = critique.verdict == Verdict::F;
  if (correction != revision.has_value()) {
    throw Error(ErrorCode::InvariantViolation,
                correction ? "correction record without a revision"
                           : "revision supplied for a correct answer");
  }
  std::vector<std::pair<SegmentKind, std::string>> parts{
      {SegmentKind::Answer, candidate.text}, {SegmentKind::Critic, critique.text}};
  if (revision) parts.emplace_back(SegmentKind::Revised, revision->text);
  auto traj = make_trajectory(parts);
  if (!traj) {
    throw Error(ErrorCode::InvariantViolation,
                "assembled trajectory is invalid: " + traj.error().message);
  }

  SynthRecord r;
  r.kind = correction ? RecordKind::Correction : RecordKind::CorrectAnswer;
  r.problem_id = problem.id;
  r.id = problem.id + ":" + std::string(to_string(r.kind));
  r.prompt = problem.statement;
  r.trajectory_text = traj->source();
  r.rounds = static_cast<int>(traj->revision_count());
  r.eos_after_critic = !correction;
  if (auto fb = boxed_of(traj->final_answer().text)) r.final_answer = fb->normalized;
  r.provenance.sampler = candidate.sampler_id;
  r.provenance.teacher = teacher_name;
  r.provenance.candidate_index = candidate.index;
  r.provenance.critique_attempt = critique.attempt;
  if (revision) {
    r.provenance.revision_mode = revision->mode;
    r.provenance.revision_attempt = revision->attempt;
  }
  verify_record(r, problem.ground_truth);
  return r;
}

std::string to_json_line(const SynthRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["problem_id"] = r.problem_id;
  j["prompt"] = r.prompt;
  j["trajectory"] = r.trajectory_text;
  j["kind"] = to_string(r.kind);
  j["rounds"] = r.rounds;
  j["final_answer"] = r.final_answer;
  j["eos_after_critic"] = r.eos_after_critic;
  ordered_json p;
  p["sampler"] = r.provenance.sampler;
  p["teacher"] = r.provenance.teacher;
  p["candidate_index"] = r.provenance.candidate_index;
  p["critique_attempt"] = r.provenance.critique_attempt;
  if (r.provenance.revision_mode) {
    p["revision_mode"] = to_string(*r.provenance.revision_mode);
    p["revision_attempt"] = *r.provenance.revision_attempt;
  }
  j["provenance"] = std::move(p);
  return j.dump();
}

SynthRecord synth_record_from_json(std::string_view line) {
  try {
    const auto j = json::parse(line);
    SynthRecord r;
    r.id = j.at("id").get<std::string>();
    r.problem_id = j.at("problem_id").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.trajectory_text = j.at("trajectory").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "correct_answer") r.kind = RecordKind::CorrectAnswer;
    else if (kind == "correction") r.kind = RecordKind::Correction;
    else throw Error(ErrorCode::MalformedRecord, "unknown kind: " + kind);
    r.rounds = j.at("rounds").get<int>();
    r.final_answer = j.at("final_answer").get<std::string>();
    r.eos_after_critic = j.at("eos_after_critic").get<bool>();
    const auto& p = j.at("provenance");
    r.provenance.sampler = p.at("sampler").get<std::string>();
    r.provenance.teacher = p.at("teacher").get<std::string>();
    r.provenance.candidate_index = p.at("candidate_index").get<std::size_t>();
    r.provenance.critique_attempt = p.at("critique_attempt").get<int>();
    if (p.contains("revision_mode")) {
      const auto mode = p.at("revision_mode").get<std::string>();
      if (mode == "refinement") r.provenance.revision_mode = RevisionMode::Refinement;
      else if (mode == "replacement") r.provenance.revision_mode = RevisionMode::Replacement;
      else throw Error(ErrorCode::MalformedRecord, "unknown revision_mode: " + mode);
      r.provenance.revision_attempt = p.at("revision_attempt").get<int>();
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("synth record: ") + e.what());
  }
}

std::vector<ProblemItem> load_problems(std::istream& in) {
  std::vector<ProblemItem> out;
  std::set<std::string> seen;
  for_each_line(in, [&](std::string_view line, std::size_t no) {
    auto bad = [&](const std::string& why) {
      throw Error(ErrorCode::MalformedRecord, "problems line " + std::to_string(no) + ": " + why);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      bad(e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("statement") || !j.contains("answer")) {
      bad("expected {id, statement, answer}");
    }
    ProblemItem p;
    const auto& id = j["id"];
    p.id = id.is_string() ? id.get<std::string>() : id.dump();
    if (!j["statement"].is_string()) bad("statement must be a string");
    p.statement = j["statement"].get<std::string>();
    if (p.statement.find_first_not_of(" \t\r\n") == std::string::npos) bad("empty statement");
    const auto& ans = j["answer"];
    p.ground_truth.value = ans.is_string() ? ans.get<std::string>() : ans.dump();
    p.ground_truth.problem_id = p.id;
    if (j.contains("difficulty") && !j["difficulty"].is_null()) {
      const auto& d = j["difficulty"];
      p.difficulty = d.is_string() ? d.get<std::string>() : d.dump();
    }
    if (!seen.insert(p.id).second) bad("duplicate id " + p.id);
    out.push_back(std::move(p));
  });
  return out;
}

namespace {

struct ProblemOutcome {
  std::vector<SynthRecord> records;
  SynthStats stats;
};

ProblemOutcome process_problem(const ProblemItem& problem, const PipelineConfig& config,
                               TeacherClient& sampler, TeacherClient& teacher) {
  ProblemOutcome out;
  SynthStats& st = out.stats;
  st.problems = 1;
  auto note = [&](ErrorCode code, std::string_view stage) {
    drop(&st, std::string(stage) + "_" + std::string(to_string(code)));
  };

  try {
    const auto sampled = sample_candidates(problem, config.candidates, sampler, config, &st);
    std::vector<const CandidateSolution*> correct, incorrect;
    for (const auto& c : sampled) {
      if (!c) continue;
      if (c->label == CandidateLabel::Correct) correct.push_back(&*c);
      if (c->label == CandidateLabel::Incorrect) incorrect.push_back(&*c);
    }

    // At most one record of each kind per problem: the first candidate whose
    // critique agrees with its label wins.
    bool have_correct = false;
    for (const auto* c : correct) {
      auto crit = generate_critique(problem, *c, teacher, config, &st);
      if (!crit) { note(crit.error(), "critique"); continue; }
      if (!crit->aligned) { drop(&st, "critique_misaligned"); continue; }
      try {
        out.records.push_back(assemble_record(problem, *c, *crit, std::nullopt, teacher.name()));
        have_correct = true;
        break;
      } catch (const Error& e) {
        note(e.code(), "assemble");
      }
    }
    if (!have_correct && correct.empty()) drop(&st, "no_correct_candidate");

    bool tried_revision = false;
    for (const auto* c : incorrect) {
      auto crit = generate_critique(problem, *c, teacher, config, &st);
      if (!crit) { note(crit.error(), "critique"); continue; }
      if (!crit->aligned) { drop(&st, "critique_misaligned"); continue; }
      tried_revision = true;
      auto rev = generate_revision(problem, *c, *crit, teacher, config, &st);
      if (!rev) { note(rev.error(), "revision"); break; }
      try {
        out.records.push_back(assemble_record(problem, *c, *crit, *rev, teacher.name()));
      } catch (const Error& e) {
        note(e.code(), "assemble");
      }
      break;
    }
    if (!tried_revision && incorrect.empty()) drop(&st, "no_incorrect_candidate");
  } catch (const Error& e) {
    out.records.clear();
    note(e.code(), "problem");
  }

  for (const auto& r : out.records) {
    ++st.records;
    if (r.kind == RecordKind::CorrectAnswer) ++st.correct_answer;
    else ++st.correction;
  }
  return out;
}

}  // namespace

SynthStats run_pipeline(const std::vector<ProblemItem>& problems, const PipelineConfig& config,
                        TeacherClient& sampler, TeacherClient& teacher, std::ostream& out) {
  validate(config);
  SynthStats total;
  std::vector<std::optional<ProblemOutcome>> done(problems.size());
  std::size_t next_to_write = 0;
  std::mutex mu;
  std::atomic<std::size_t> next_problem{0};

  // Finished problems are buffered until every earlier problem is written, so
  // the file order matches the input regardless of scheduling.
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next_problem.fetch_add(1);
      if (i >= problems.size()) return;
      auto result = process_problem(problems[i], config, sampler, teacher);
      std::lock_guard lock(mu);
      done[i] = std::move(result);
      while (next_to_write < done.size() && done[next_to_write]) {
        auto& o = *done[next_to_write];
        for (const auto& r : o.records) out << to_json_line(r) << '\n';
        total.merge(o.stats);
        done[next_to_write].reset();
        ++next_to_write;
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(config.teacher.parallelism, std::max<std::size_t>(problems.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing synthesized records");
  return total;
}

}  // namespace scr
