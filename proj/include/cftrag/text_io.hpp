#pragma once

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cftrag/error.hpp"

namespace cftrag {

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in_, line)) fail(std::string("unexpected end of file, expected ") + what);
    ++line_;
    return line;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_, what); }

  template <typename T>
  T number(std::string_view field, const char* what) const {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      fail(std::string("bad ") + what + " '" + std::string(field) + "'");
    }
    return value;
  }

  std::vector<std::string_view> words(std::string_view line, char sep = ' ') const {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(sep, start);
      out.push_back(line.substr(start, pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return out;
  }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t line_ = 0;
};

}  // namespace detail

}  // namespace cftrag
