#include <iostream>

#include "cli_util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Structured reasoning trajectories: parse, score, mask, synthesize, analyze"};
  app.set_version_flag("--version", "scr 0.3.0");
  app.require_subcommand(1);

  int status = scr::cli::kOk;
  scr::cli::add_records_commands(app, status);
  scr::cli::add_pipeline_commands(app, status);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? scr::cli::kOk : scr::cli::kInputError;
  }
  return status;
}
