#include <filesystem>
#include <memory>

#include "cli_util.hpp"
#include "scr/policy_sim.hpp"
#include "scr/synth.hpp"
#include "scr/teacher.hpp"
#include "scr/trace_analysis.hpp"

namespace scr::cli {

namespace {

namespace fs = std::filesystem;

struct SynthOpts {
  std::string problems, out, stats, teacher, mock, config;
  std::uint64_t simulate_seed = 0;
  bool simulate = false;
  unsigned threads = 0;
};

int run_synth(const SynthOpts& o) {
  const int sources = !o.teacher.empty() + !o.mock.empty() + o.simulate;
  if (sources != 1) {
    throw Error(ErrorCode::InvalidConfig, "choose exactly one of --teacher, --mock, --simulate");
  }

  PipelineConfig config;
  std::unique_ptr<TeacherClient> client;
  if (!o.teacher.empty()) {
    config = load_pipeline_config(o.teacher);
    if (config.teacher.endpoint.empty()) {
      throw Error(ErrorCode::InvalidConfig, "teacher config needs teacher.endpoint");
    }
    client = std::make_unique<HttpTeacherClient>(config.teacher);
  } else {
    std::string config_path = o.config;
    if (!o.mock.empty()) {
      const fs::path dir(o.mock);
      if (config_path.empty() && fs::exists(dir / "pipeline.json")) {
        config_path = (dir / "pipeline.json").string();
      }
      client = std::make_unique<ScriptedTeacher>(
          ScriptedTeacher::from_file((dir / "responses.jsonl").string(), "mock-teacher"));
    } else {
      client = std::make_unique<SimulatedTeacher>(o.simulate_seed);
    }
    if (!config_path.empty()) config = load_pipeline_config(config_path);
  }
  if (o.threads > 0) config.teacher.parallelism = o.threads;

  Input in(o.problems);
  const auto problems = load_problems(in.stream());
  Output out(o.out);
  const auto stats = run_pipeline(problems, config, *client, *client, out.stream());
  out.commit();

  if (!o.stats.empty()) {
    Output s(o.stats);
    s.stream() << stats.to_json() << '\n';
    s.commit();
  } else {
    std::cerr << stats.to_json() << '\n';
  }
  if (stats.candidates > 0 && stats.candidates_failed == stats.candidates) {
    std::cerr << "scr synth: every sampler call failed\n";
    return kUpstreamFailure;
  }
  return kOk;
}

int run_analyze(const std::string& mode, const std::string& in_path, const std::string& out_path,
                const std::string& csv_path) {
  const std::string kind_name = mode == "verify-metrics" ? "verification"
                                : mode == "length"       ? "lengths"
                                                         : mode;
  const auto kind = parse_analysis_kind(kind_name);
  if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown mode " + mode);
  Input in(in_path);
  const auto report = analyze(in.stream(), *kind);
  for (const auto& s : report.skipped) std::cerr << "scr analyze: skipped line " << s << '\n';
  Output out(out_path);
  out.stream() << report.json << '\n';
  out.commit();
  if (!csv_path.empty()) {
    Output csv(csv_path);
    csv.stream() << report.csv;
    csv.commit();
  }
  return kOk;
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& csv_path) {
  const auto config = load_sim_config(config_path);
  const auto report = run_policy_gradient(config);
  Output out(out_path);
  out.stream() << report.to_json() << '\n';
  out.commit();
  if (!csv_path.empty()) {
    Output csv(csv_path);
    csv.stream() << report.to_csv();
    csv.commit();
  }
  return kOk;
}

}  // namespace

void add_pipeline_commands(CLI::App& app, int& status) {
  {
    auto* cmd = app.add_subcommand("synth", "Synthesize structured SFT records from problems");
    auto o = std::make_shared<SynthOpts>();
    cmd->add_option("--problems", o->problems, "Problems JSONL {id, statement, answer}")
        ->required();
    cmd->add_option("--out", o->out, "Records JSONL")->required();
    cmd->add_option("--stats", o->stats, "Statistics JSON (default stderr)");
    cmd->add_option("--teacher", o->teacher,
                    "Pipeline config with a teacher endpoint; the API key is read from the "
                    "environment variable named by teacher.api_key_env");
    cmd->add_option("--mock", o->mock, "Directory with responses.jsonl [and pipeline.json]");
    cmd->add_option("--simulate", o->simulate_seed, "Use the built-in arithmetic teacher")
        ->each([o](const std::string&) { o->simulate = true; });
    cmd->add_option("--config", o->config, "Pipeline config for --mock/--simulate");
    cmd->add_option("--threads", o->threads, "Problems processed concurrently");
    cmd->callback([=, &status] { status = guarded([&] { return run_synth(*o); }); });
  }
  {
    auto* cmd = app.add_subcommand("analyze", "Trace statistics and verification metrics");
    struct Opts {
      std::string mode, in = "-", out = "-", csv;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--mode", o->mode, "operators|transitions|verify-metrics|length")
        ->required()
        ->check(CLI::IsMember({"operators", "transitions", "verify-metrics", "length"}));
    cmd->add_option("--in", o->in, "Input JSONL (default stdin)");
    cmd->add_option("--out", o->out, "Report JSON (default stdout)");
    cmd->add_option("--csv", o->csv, "Optional CSV table");
    cmd->callback([=, &status] {
      status = guarded([&] { return run_analyze(o->mode, o->in, o->out, o->csv); });
    });
  }
  {
    auto* cmd = app.add_subcommand("simulate", "Policy-gradient run on the synthetic policy");
    struct Opts {
      std::string config, out = "-", csv;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--config", o->config, "Simulation config JSON")->required();
    cmd->add_option("--out", o->out, "Report JSON (default stdout)");
    cmd->add_option("--csv", o->csv, "Per-step CSV");
    cmd->callback([=, &status] {
      status = guarded([&] { return run_simulate(o->config, o->out, o->csv); });
    });
  }
}

}  // namespace scr::cli
