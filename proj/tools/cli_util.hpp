#pragma once

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "scr/error.hpp"
#include "scr/io.hpp"

namespace scr::cli {

enum ExitStatus : int {
  kOk = 0,
  kInputError = 1,
  kUpstreamFailure = 2,
  kInvariantViolation = 3,
};

int exit_status_for(ErrorCode code) noexcept;

// "-" or empty reads stdin.
class Input {
 public:
  explicit Input(const std::string& path);
  std::istream& stream() { return file_ ? *file_ : std::cin; }

 private:
  std::unique_ptr<std::ifstream> file_;
};

// "-" or empty writes stdout; files are written through AtomicFileWriter and
// only appear once commit() runs.
class Output {
 public:
  explicit Output(const std::string& path);
  std::ostream& stream() { return writer_ ? writer_->stream() : std::cout; }
  void commit();

 private:
  std::unique_ptr<AtomicFileWriter> writer_;
};

void add_records_commands(CLI::App& app, int& status);
void add_pipeline_commands(CLI::App& app, int& status);

// Runs fn, mapping scr::Error and other exceptions to exit statuses.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "scr: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_status_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "scr: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace scr::cli
