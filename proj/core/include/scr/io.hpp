#pragma once

#include <fstream>
#include <functional>
#include <istream>
#include <string>
#include <string_view>

namespace scr {

// Writes to "<path>.tmp-<pid>" and renames over `path` on commit(). An
// uncommitted writer removes its temporary file, so readers never observe a
// partially written output.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::string path);
  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;
  ~AtomicFileWriter();

  std::ostream& stream() { return out_; }
  void commit();

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool committed_ = false;
};

// Calls fn(line, line_number) for every non-blank line; line numbers are 1-based.
void for_each_line(std::istream& in,
                   const std::function<void(std::string_view, std::size_t)>& fn);

std::string read_file(const std::string& path);

}  // namespace scr
