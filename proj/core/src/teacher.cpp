#include "scr/teacher.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>

#include "httplib.h"
#include "json.hpp"
#include "scr/answer_eval.hpp"
#include "scr/error.hpp"
#include "scr/io.hpp"

namespace scr {

std::string_view to_string(TeacherRole role) noexcept {
  switch (role) {
    case TeacherRole::Sample: return "sample";
    case TeacherRole::Critique: return "critique";
    case TeacherRole::Refine: return "refine";
    case TeacherRole::Replace: return "replace";
  }
  return "?";
}

namespace {

std::optional<TeacherRole> parse_role(std::string_view s) {
  for (auto r : {TeacherRole::Sample, TeacherRole::Critique, TeacherRole::Refine,
                 TeacherRole::Replace}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

}  // namespace

void validate(const TeacherConfig& config) {
  if (config.parallelism < 1) throw Error(ErrorCode::InvalidConfig, "parallelism must be >= 1");
  if (config.max_retries < 0) throw Error(ErrorCode::InvalidConfig, "max_retries must be >= 0");
  if (!(config.timeout_seconds > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "timeout_seconds must be positive");
  }
}

// ---------------------------------------------------------------------------
// HTTP

HttpTeacherClient::HttpTeacherClient(TeacherConfig config) : config_(std::move(config)) {
  validate(config_);
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url)) {
    throw Error(ErrorCode::InvalidConfig, "endpoint must be an http(s) URL: " + config_.endpoint);
  }
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
}

std::string HttpTeacherClient::complete(const TeacherRequest& request) {
  nlohmann::json body;
  body["model"] = config_.model;
  body["temperature"] = request.temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }

  httplib::Client cli(scheme_host_port_);
  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - secs) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::UpstreamFailure,
                "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::UpstreamFailure,
                "teacher returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UpstreamFailure, std::string("malformed teacher reply: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedTeacher::ScriptedTeacher(std::string name) : name_(std::move(name)) {}

ScriptedTeacher::ScriptedTeacher(ScriptedTeacher&& other) noexcept
    : name_(std::move(other.name_)), entries_(std::move(other.entries_)), calls_(other.calls_) {}

ScriptedTeacher ScriptedTeacher::from_jsonl(std::string_view jsonl, std::string name) {
  ScriptedTeacher t(std::move(name));
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto role = parse_role(j.at("role").get<std::string>());
      if (!role) throw Error(ErrorCode::MalformedRecord, "unknown role");
      t.add(*role, j.at("problem_id").get<std::string>(), j.value("index", -1),
            j.value("attempt", -1), j.value("text", std::string()), j.value("error", false));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord,
                  "mock line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

ScriptedTeacher ScriptedTeacher::from_file(const std::string& path, std::string name) {
  return from_jsonl(read_file(path), std::move(name));
}

void ScriptedTeacher::add(TeacherRole role, std::string problem_id, int index, int attempt,
                          std::string text, bool error) {
  std::lock_guard lock(mu_);
  entries_[{role, std::move(problem_id), index, attempt}] = {std::move(text), error};
}

std::string ScriptedTeacher::complete(const TeacherRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  const int index = static_cast<int>(request.candidate_index);
  for (auto [i, a] : {std::pair{index, request.attempt}, std::pair{index, -1},
                      std::pair{-1, request.attempt}, std::pair{-1, -1}}) {
    auto it = entries_.find({request.role, request.problem_id, i, a});
    if (it == entries_.end()) continue;
    if (it->second.error) {
      throw Error(ErrorCode::UpstreamFailure, "scripted upstream failure");
    }
    return it->second.text;
  }
  throw Error(ErrorCode::UpstreamFailure, "no scripted " + std::string(to_string(request.role)) +
                                              " response for problem " + request.problem_id);
}

std::size_t ScriptedTeacher::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------
// Simulated

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_str(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return mix(h);
}

struct Draws {
  std::uint64_t state;
  double next() {
    state = mix(state);
    return static_cast<double>(state >> 11) * 0x1.0p-53;
  }
  int offset() {  // non-zero perturbation in [1, 9]
    state = mix(state);
    return 1 + static_cast<int>(state % 9);
  }
};

struct Question {
  long long a = 0;
  long long b = 0;
  char op = '+';
  long long value() const { return op == '+' ? a + b : op == '-' ? a - b : a * b; }
  std::string text() const {
    return std::to_string(a) + " " + op + " " + std::to_string(b);
  }
};

std::optional<Question> parse_question(std::string_view text) {
  static const std::regex re(R"(What is (-?\d+) ([-+*]) (-?\d+)\?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, re)) return std::nullopt;
  Question q;
  q.a = std::stoll(m[1].str());
  q.op = m[2].str()[0];
  q.b = std::stoll(m[3].str());
  return q;
}

std::string_view field(std::string_view text, std::string_view label, std::string_view next) {
  const std::size_t start = text.find(label);
  if (start == std::string_view::npos) return {};
  const std::size_t from = start + label.size();
  const std::size_t end = next.empty() ? std::string_view::npos : text.find(next, from);
  return text.substr(from, end == std::string_view::npos ? std::string_view::npos : end - from);
}

}  // namespace

SimulatedTeacher::SimulatedTeacher(std::uint64_t seed, std::string name)
    : SimulatedTeacher(seed, Rates{}, std::move(name)) {}

SimulatedTeacher::SimulatedTeacher(std::uint64_t seed, Rates rates, std::string name)
    : seed_(seed), rates_(rates), name_(std::move(name)) {}

std::string SimulatedTeacher::complete(const TeacherRequest& request) {
  std::string user;
  for (const auto& m : request.messages) {
    if (m.role == "user") user = m.content;
  }
  std::uint64_t h = mix(seed_ ^ (static_cast<std::uint64_t>(request.role) << 56));
  h = hash_str(h, request.problem_id);
  h = mix(h ^ (request.candidate_index * 0x100000001b3ULL) ^
          (static_cast<std::uint64_t>(request.attempt) << 20) ^
          (static_cast<std::uint64_t>(request.retry) << 40));
  h = hash_str(h, user);
  Draws draw{h};

  if (draw.next() < rates_.upstream_error) {
    throw Error(ErrorCode::UpstreamFailure, "simulated transient upstream failure");
  }

  const auto q = parse_question(user);
  if (!q) return "I cannot determine what is being asked.";
  const long long truth = q->value();

  switch (request.role) {
    case TeacherRole::Sample: {
      const double u = draw.next();
      if (u < rates_.sample_unboxed) {
        return "We compute " + q->text() + " directly, and the result is " +
               std::to_string(truth) + ".";
      }
      const bool correct = u < rates_.sample_unboxed + rates_.sample_correct;
      const long long shown = correct ? truth : truth + draw.offset();
      return "We need to compute " + q->text() + ".\nCarrying out the operation gives " +
             std::to_string(shown) + ".\n\\boxed{" + std::to_string(shown) + "}";
    }
    case TeacherRole::Critique: {
      const auto boxed = extract_boxed(field(user, "Answer:", "\nEvaluation:"));
      const bool correct = boxed && answers_equal(boxed->normalized, std::to_string(truth));
      const double u = draw.next();
      if (u < rates_.critique_no_verdict) {
        return "The arithmetic looks plausible, but the working is hard to follow.";
      }
      const bool says_correct = (u < rates_.critique_no_verdict + rates_.critique_flipped)
                                    ? !correct
                                    : correct;
      if (says_correct) {
        return "The answer is correct. The operation " + q->text() +
               " is carried out properly and the result is boxed.\nT";
      }
      return "The key mistake is in the final arithmetic: " + q->text() +
             " does not give the stated value. Recompute the operation step by step.\nF";
    }
    case TeacherRole::Refine:
    case TeacherRole::Replace: {
      const double p = request.role == TeacherRole::Refine ? rates_.refine_correct
                                                           : rates_.replace_correct;
      const long long shown = draw.next() < p ? truth : truth - draw.offset();
      const std::string lead = request.role == TeacherRole::Refine
                                   ? "The earlier result came from an arithmetic slip. Redoing "
                                   : "Starting again from the beginning, evaluating ";
      return lead + q->text() + " carefully gives " + std::to_string(shown) + ".\n\\boxed{" +
             std::to_string(shown) + "}";
    }
  }
  return {};
}

}  // namespace scr
