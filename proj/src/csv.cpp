#include "mmsurv/csv.hpp"

#include "mmsurv/common.hpp"

#include <charconv>
#include <cstdio>

namespace mmsurv::csv {

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error("cannot open file: " + path.string());
}

bool Reader::next(std::vector<std::string>& fields) {
  fields.clear();
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.empty()) continue;

    std::string current;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
      if (i == line_.size()) {
        if (!quoted) break;
        // Quoted field spanning lines.
        std::string more;
        if (!std::getline(in_, more)) throw Error(path_.string() + ": unterminated quote");
        ++line_no_;
        if (!more.empty() && more.back() == '\r') more.pop_back();
        current.push_back('\n');
        line_ = more;
        i = 0;
        continue;
      }
      const char c = line_[i++];
      if (quoted) {
        if (c == '"') {
          if (i < line_.size() && line_[i] == '"') {
            current.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          current.push_back(c);
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(current));
        current.clear();
      } else {
        current.push_back(c);
      }
    }
    fields.push_back(std::move(current));
    return true;
  }
  return false;
}

std::optional<std::size_t> column_index(const std::vector<std::string>& header,
                                        std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::string format_double(double x) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

double parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error("not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec == std::errc{} && ptr == text.data() + text.size()) return value;
  // Clinical exports sometimes carry integral values as "21900.0".
  const double d = parse_double(text);
  if (d != static_cast<double>(static_cast<long long>(d))) {
    throw Error("not an integer: '" + std::string(text) + "'");
  }
  return static_cast<long long>(d);
}

}  // namespace mmsurv::csv
