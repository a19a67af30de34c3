#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmsurv::csv {

// Streaming reader for comma-separated files with an optional quoted-field
// syntax ("a,b" and "" escapes). Accepts LF or CRLF line endings.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  // Reads the next record into `fields` (reused between calls). Returns false
  // at end of file. Blank lines are skipped.
  bool next(std::vector<std::string>& fields);

  std::size_t line_number() const { return line_no_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::string line_;
  std::size_t line_no_ = 0;
};

// Index of `name` in a header row, or nullopt.
std::optional<std::size_t> column_index(const std::vector<std::string>& header,
                                        std::string_view name);

// Shortest-round-trip is not what we want here: outputs must be byte-stable,
// so every double is written with 17 significant digits ("%.17g").
std::string format_double(double x);

// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace mmsurv::csv
