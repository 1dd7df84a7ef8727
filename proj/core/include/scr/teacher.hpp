#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace scr {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

enum class TeacherRole { Sample, Critique, Refine, Replace };
std::string_view to_string(TeacherRole role) noexcept;

// One completion request. The metadata (role, problem id, candidate index,
// attempt) is not sent over the wire; mocks use it to pick a response.
struct TeacherRequest {
  TeacherRole role = TeacherRole::Sample;
  std::string problem_id;
  std::size_t candidate_index = 0;
  int attempt = 0;
  int retry = 0;  // transport retry number for the same logical request
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
};

class TeacherClient {
 public:
  virtual ~TeacherClient() = default;
  virtual std::string name() const = 0;
  // Returns the assistant message text. Throws Error(UpstreamFailure).
  // Implementations must be callable from several threads at once.
  virtual std::string complete(const TeacherRequest& request) = 0;
};

struct TeacherConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  double temperature = 0.7;
  int max_retries = 2;
  double timeout_seconds = 120.0;
  unsigned parallelism = 4;
  std::string api_key_env = "SCR_TEACHER_API_KEY";
};

// Throws Error(InvalidConfig) unless parallelism >= 1 and max_retries >= 0.
void validate(const TeacherConfig& config);

// Chat-completions client: POST {model, messages, temperature}, reads
// choices[0].message.content. The bearer token comes from the environment
// variable named by api_key_env, when set.
class HttpTeacherClient final : public TeacherClient {
 public:
  explicit HttpTeacherClient(TeacherConfig config);
  std::string name() const override { return config_.model; }
  std::string complete(const TeacherRequest& request) override;

 private:
  TeacherConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

// Replays responses from JSONL lines
//   {"role": "sample|critique|refine|replace", "problem_id": "...",
//    "index": k?, "attempt": a?, "text": "..." | "error": true}
// Lookup prefers exact (index, attempt) matches and falls back to entries
// that omit either field. Unmatched requests fail as upstream errors.
class ScriptedTeacher final : public TeacherClient {
 public:
  explicit ScriptedTeacher(std::string name = "scripted-teacher");
  ScriptedTeacher(ScriptedTeacher&& other) noexcept;
  static ScriptedTeacher from_jsonl(std::string_view jsonl, std::string name = "scripted-teacher");
  static ScriptedTeacher from_file(const std::string& path,
                                   std::string name = "scripted-teacher");

  void add(TeacherRole role, std::string problem_id, int index, int attempt, std::string text,
           bool error = false);
  std::string name() const override { return name_; }
  std::string complete(const TeacherRequest& request) override;
  std::size_t calls() const;

 private:
  struct Entry {
    std::string text;
    bool error = false;
  };
  using Key = std::tuple<TeacherRole, std::string, int, int>;  // -1 = any
  std::string name_;
  std::map<Key, Entry> entries_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

// Deterministic arithmetic teacher. It answers "What is A op B?" questions by
// reading only the chat messages, and injects wrong answers, missing boxes,
// missing or flipped verdicts and transient upstream errors at fixed rates
// derived from a hash of (seed, request).
class SimulatedTeacher final : public TeacherClient {
 public:
  struct Rates {
    double sample_correct = 0.55;
    double sample_unboxed = 0.10;
    double critique_flipped = 0.10;
    double critique_no_verdict = 0.05;
    double refine_correct = 0.5;
    double replace_correct = 0.9;
    double upstream_error = 0.03;
  };

  explicit SimulatedTeacher(std::uint64_t seed, std::string name = "simulated-teacher");
  SimulatedTeacher(std::uint64_t seed, Rates rates, std::string name = "simulated-teacher");

  std::string name() const override { return name_; }
  std::string complete(const TeacherRequest& request) override;

 private:
  std::uint64_t seed_;
  Rates rates_;
  std::string name_;
};

}  // namespace scr
