#pragma once

// Minimal RFC-4180 style CSV helpers. Quoted fields may contain commas and
// doubled quotes; embedded newlines are not supported (one record per line).

#include <charconv>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace malfeed::csv {

/// Splits one line into `fields`, reusing their storage. Returns false on an
/// unterminated quote.
inline bool split_line(std::string_view line, std::vector<std::string>& fields) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::size_t n = 0;
  auto next = [&]() -> std::string& {
    if (n == fields.size()) fields.emplace_back();
    auto& f = fields[n++];
    f.clear();
    return f;
  };
  std::size_t i = 0;
  while (true) {
    auto& field = next();
    if (i < line.size() && line[i] == '"') {
      ++i;
      while (true) {
        if (i >= line.size()) return false;
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field += line[i++];
      }
      // tolerate stray characters between closing quote and delimiter
      while (i < line.size() && line[i] != ',') field += line[i++];
    } else {
      const auto end = line.find(',', i);
      const auto stop = end == std::string_view::npos ? line.size() : end;
      field.assign(line.substr(i, stop - i));
      i = stop;
    }
    if (i >= line.size()) break;
    ++i;  // skip comma
    if (i == line.size()) {
      next();
      break;
    }
  }
  fields.resize(n);
  return true;
}

inline void write_field(std::ostream& out, std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) {
    out << value;
    return;
  }
  out << '"';
  for (char c : value) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

/// Shortest round-trip representation; byte-identical across runs.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

/// Writes comma-joined fields followed by a newline.
template <typename... Fields>
void write_row(std::ostream& out, const Fields&... fields) {
  bool first = true;
  ((out << (first ? "" : ","), write_field(out, std::string_view(fields)), first = false), ...);
  out << '\n';
}

}  // namespace malfeed::csv
