#include <iterator>
#include <map>
#include <sstream>
#include <thread>

#include "cli_util.hpp"
#include "json.hpp"
#include "scr/answer_eval.hpp"
#include "scr/grpo.hpp"
#include "scr/masks.hpp"
#include "scr/reward.hpp"
#include "scr/synth.hpp"
#include "scr/trajectory.hpp"

namespace scr::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json parse_line(std::string_view line, std::size_t no) {
  try {
    auto j = json::parse(line);
    if (j.is_object()) return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(no) + ": " + e.what());
  }
  throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(no) + ": expected an object");
}

std::string as_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string string_field(const json& j, const char* key, std::size_t no) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(no) + ": missing string field '" + key + "'");
  }
  return j[key].get<std::string>();
}

// ---------------------------------------------------------------------------

int run_parse(const std::string& in_path, bool as_json) {
  Input in(in_path);
  const std::string text{std::istreambuf_iterator<char>(in.stream()),
                         std::istreambuf_iterator<char>()};
  const auto parsed = parse_trajectory(text);
  const auto fmt = format_reward(text);
  if (!parsed) {
    const auto& d = parsed.error();
    if (as_json) {
      ordered_json j{{"ok", false},
                     {"code", to_string(d.code)},
                     {"offset", d.offset},
                     {"message", d.message},
                     {"format", fmt.value}};
      std::cout << j.dump() << '\n';
    }
    std::cerr << "scr parse: " << to_string(d.code) << " at byte " << d.offset << ": "
              << d.message << '\n';
    return kInputError;
  }
  const Trajectory& t = *parsed;
  std::string verdicts;
  for (auto v : t.verdicts()) verdicts += to_char(v);
  if (as_json) {
    ordered_json j{{"ok", true},
                   {"rounds", t.rounds()},
                   {"revisions", t.revision_count()},
                   {"verdicts", verdicts},
                   {"format", fmt.value},
                   {"constraints", fmt.constraints}};
    j["segments"] = ordered_json::array();
    for (const auto& s : t.segments()) {
      j["segments"].push_back({{"kind", tag_name(s.kind)},
                               {"begin", s.outer.begin},
                               {"end", s.outer.end},
                               {"text", s.text}});
    }
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "rounds " << t.rounds() << "  verdicts " << verdicts << "  format " << fmt.value
              << '\n';
    for (const auto& s : t.segments()) {
      std::cout << '[' << tag_name(s.kind) << ' ' << s.outer.begin << ".." << s.outer.end << "] "
                << s.text.size() << " bytes\n";
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

std::map<std::string, GroundTruth> load_truths(const std::string& path) {
  std::map<std::string, GroundTruth> out;
  if (path.empty()) return out;
  Input in(path);
  for (auto& p : load_problems(in.stream())) out.emplace(p.id, std::move(p.ground_truth));
  return out;
}

ordered_json breakdown_json(const std::string& id, const std::string& problem_id,
                            const RewardBreakdown& b) {
  ordered_json j;
  j["id"] = id;
  j["problem_id"] = problem_id;
  j["stage"] = to_string(b.stage);
  j["format"] = b.format;
  j["constraints"] = b.constraints;
  j["acc_init"] = b.acc_init;
  j["crit"] = b.crit;
  j["rev"] = b.rev;
  j["acc_final"] = b.acc_final;
  j["total"] = b.total;
  j["verdict"] = b.verdict ? std::string(1, to_char(*b.verdict)) : std::string();
  j["revised"] = b.revised;
  if (b.parse_error) {
    j["parse_error"] = to_string(*b.parse_error);
    j["parse_offset"] = b.parse_offset;
  }
  return j;
}

int run_score(const std::string& in_path, const std::string& gt_path, const std::string& stage_s,
              const std::string& config_path, const std::string& out_path, unsigned threads) {
  const auto stage = parse_stage(stage_s);
  if (!stage) throw Error(ErrorCode::InvalidConfig, "stage must be I or II");
  std::vector<std::string> warnings;
  const RewardConfig config =
      config_path.empty() ? RewardConfig{} : load_reward_config(config_path, &warnings);
  for (const auto& w : warnings) std::cerr << "scr score: warning: " << w << '\n';
  const auto truths = load_truths(gt_path);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  Input in(in_path);
  Output out(out_path);
  const std::size_t chunk = 256 * static_cast<std::size_t>(threads);
  std::vector<std::string> ids, pids, rollouts;
  std::vector<GroundTruth> gts;
  auto flush = [&] {
    const auto scored = score_batch(rollouts, gts, *stage, config, threads);
    for (std::size_t i = 0; i < scored.size(); ++i) {
      out.stream() << breakdown_json(ids[i], pids[i], scored[i]).dump() << '\n';
    }
    ids.clear();
    pids.clear();
    rollouts.clear();
    gts.clear();
  };
  for_each_line(in.stream(), [&](std::string_view line, std::size_t no) {
    const auto j = parse_line(line, no);
    const std::string id = j.contains("id") ? as_text(j["id"]) : std::to_string(no);
    const std::string pid = j.contains("problem_id") ? as_text(j["problem_id"]) : std::string();
    GroundTruth gt;
    if (j.contains("gt")) {
      gt = {as_text(j["gt"]), pid};
    } else {
      const auto it = truths.find(pid);
      if (it == truths.end()) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(no) + ": no ground truth for problem '" + pid + "'");
      }
      gt = it->second;
    }
    ids.push_back(id);
    pids.push_back(pid);
    rollouts.push_back(string_field(j, "response", no));
    gts.push_back(std::move(gt));
    if (rollouts.size() >= chunk) flush();
  });
  flush();
  out.commit();
  return kOk;
}

// ---------------------------------------------------------------------------

int run_mask(const std::string& in_path, const std::string& out_path) {
  Input in(in_path);
  Output out(out_path);
  for_each_line(in.stream(), [&](std::string_view line, std::size_t no) {
    const auto j = parse_line(line, no);
    const std::string id = j.contains("id") ? as_text(j["id"]) : std::to_string(no);
    const std::string prompt = string_field(j, "prompt", no);
    const std::string response =
        j.contains("trajectory") ? string_field(j, "trajectory", no) : string_field(j, "response", no);

    bool init_correct = false;
    if (j.contains("init_correct") && j["init_correct"].is_boolean()) {
      init_correct = j["init_correct"].get<bool>();
    } else if (j.contains("kind") && j["kind"].is_string()) {
      init_correct = j["kind"] == "correct_answer";
    } else if (j.contains("gt")) {
      const auto t = parse_trajectory(response);
      if (!t) {
        throw Error(t.error().code, "line " + std::to_string(no) + ": " + t.error().message);
      }
      const auto boxed = extract_boxed(t->initial_answer().text);
      init_correct = accuracy_reward(boxed ? std::optional(*boxed) : std::nullopt,
                                     GroundTruth{as_text(j["gt"]), ""}) == 1;
    } else {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(no) + ": need init_correct, kind or gt");
    }

    const auto record = apply_dts(build_record(id, prompt, response, init_correct));
    out.stream() << to_json_line(record, build_sft_mask(record), build_stage1_policy_mask(record))
                 << '\n';
  });
  out.commit();
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<double> doubles(const json& v, std::size_t no, const char* what) {
  if (!v.is_array()) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(no) + ": " + what + " must be an array");
  }
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(no) + ": " + what + " must hold numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

ClipConfig load_clip(const std::string& path, double eps_low, double eps_high) {
  ClipConfig clip{eps_low, eps_high};
  if (!path.empty()) {
    try {
      const auto j = json::parse(read_file(path));
      for (const auto& [k, v] : j.items()) {
        if (k == "eps_low") clip.eps_low = v.get<double>();
        else if (k == "eps_high") clip.eps_high = v.get<double>();
        else if (k == "schema_version") {
          if (v.get<int>() != 1) throw Error(ErrorCode::InvalidConfig, "schema_version must be 1");
        } else {
          throw Error(ErrorCode::InvalidConfig, "unknown clip key: " + k);
        }
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, std::string("clip config: ") + e.what());
    }
  }
  validate(clip);
  return clip;
}

int run_advantage(const std::string& in_path, const std::string& out_path,
                  const ClipConfig& clip) {
  Input in(in_path);
  Output out(out_path);
  for_each_line(in.stream(), [&](std::string_view line, std::size_t no) {
    const auto j = parse_line(line, no);
    if (!j.contains("rewards")) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(no) + ": missing rewards");
    }
    RolloutGroup g;
    g.rewards = doubles(j["rewards"], no, "rewards");
    const auto adv = group_advantages(g.rewards);
    ordered_json o;
    if (j.contains("id")) o["id"] = j["id"];
    o["advantages"] = adv;
    if (j.contains("logp_new")) {
      if (!j.contains("logp_old")) {
        throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(no) + ": missing logp_old");
      }
      for (const auto& row : j["logp_new"]) g.logp_new.push_back(doubles(row, no, "logp_new"));
      for (const auto& row : j["logp_old"]) g.logp_old.push_back(doubles(row, no, "logp_old"));
      for (std::size_t i = 0; i < g.logp_new.size(); ++i) {
        PolicyMask m;
        if (j.contains("mask")) {
          for (const auto& b : j["mask"].at(i)) m.bits.push_back(b.get<int>() != 0 ? 1 : 0);
        } else {
          m.bits.assign(g.logp_new[i].size(), 1);
        }
        g.masks.push_back(std::move(m));
      }
      o["objective"] = clipped_objective(g, adv, clip);
      o["grad"] = objective_grad_wrt_logp(g, adv, clip);
    }
    out.stream() << o.dump() << '\n';
  });
  out.commit();
  return kOk;
}

}  // namespace

void add_records_commands(CLI::App& app, int& status) {
  {
    auto* cmd = app.add_subcommand("parse", "Parse one tagged trajectory and report its structure");
    auto in = std::make_shared<std::string>("-");
    auto as_json = std::make_shared<bool>(false);
    cmd->add_option("--in", *in, "Input file (default stdin)");
    cmd->add_flag("--json", *as_json, "Emit JSON");
    cmd->callback([=, &status] { status = guarded([&] { return run_parse(*in, *as_json); }); });
  }
  {
    auto* cmd = app.add_subcommand("score", "Score rollouts {id, problem_id, response[, gt]}");
    struct Opts {
      std::string in = "-", gt, stage = "I", config, out = "-";
      unsigned threads = 1;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--in", o->in, "Rollouts JSONL (default stdin)");
    cmd->add_option("--gt", o->gt, "Problems JSONL {id, statement, answer}");
    cmd->add_option("--stage", o->stage, "I or II")->check(CLI::IsMember({"I", "II", "1", "2"}));
    cmd->add_option("--config", o->config, "Reward config JSON");
    cmd->add_option("--out", o->out, "Output JSONL (default stdout)");
    cmd->add_option("--threads", o->threads, "Worker threads (0 = all cores)");
    cmd->callback([=, &status] {
      status = guarded([&] {
        return run_score(o->in, o->gt, o->stage, o->config, o->out, o->threads);
      });
    });
  }
  {
    auto* cmd = app.add_subcommand(
        "mask", "Tokenize records and emit SFT and Stage I masks");
    auto in = std::make_shared<std::string>("-");
    auto out = std::make_shared<std::string>("-");
    cmd->add_option("--in", *in, "Records JSONL {id, prompt, trajectory|response, ...}");
    cmd->add_option("--out", *out, "Output JSONL (default stdout)");
    cmd->callback([=, &status] { status = guarded([&] { return run_mask(*in, *out); }); });
  }
  {
    auto* cmd = app.add_subcommand(
        "advantage", "Group advantages, and the clipped objective when log-probs are given");
    struct Opts {
      std::string in = "-", out = "-", clip;
      double eps_low = 0.2, eps_high = 0.2;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--in", o->in, "Groups JSONL {rewards[, logp_new, logp_old, mask]}");
    cmd->add_option("--out", o->out, "Output JSONL (default stdout)");
    cmd->add_option("--eps-low", o->eps_low, "Lower clip range");
    cmd->add_option("--eps-high", o->eps_high, "Upper clip range");
    cmd->add_option("--clip", o->clip, "Clip config JSON {eps_low, eps_high}");
    cmd->callback([=, &status] {
      status = guarded([&] {
        return run_advantage(o->in, o->out, load_clip(o->clip, o->eps_low, o->eps_high));
      });
    });
  }
}

}  // namespace scr::cli
