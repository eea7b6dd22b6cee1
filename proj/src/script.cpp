#include "mmdrive/script.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

namespace mmdrive {

ScriptError::ScriptError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("script line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

namespace {

struct Token {
  std::string text;
  std::size_t column;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '#') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

double number(const Token& t, std::size_t line, const char* what) {
  double v = 0.0;
  const char* end = t.text.data() + t.text.size();
  const auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw ScriptError(line, t.column, std::string("expected a number for ") + what + ", got '" + t.text + "'");
  }
  if (v < 0.0) throw ScriptError(line, t.column, std::string(what) + " must not be negative");
  return v;
}

}  // namespace

DriveScript parse_script(std::istream& in) {
  DriveScript script;
  std::string raw;
  std::size_t lineno = 0;
  double last_end = 0.0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto tokens = tokenize(raw);
    if (tokens.empty()) continue;
    const Token& head = tokens[0];
    if (head.text == "bump") {
      if (tokens.size() != 2) {
        throw ScriptError(lineno, tokens.size() < 2 ? raw.size() + 1 : tokens[2].column,
                          "bump takes exactly one time");
      }
      script.bumps.push_back(number(tokens[1], lineno, "bump time"));
      continue;
    }
    const auto activity = parse_activity(head.text);
    if (!activity) throw ScriptError(lineno, head.column, "unknown activity '" + head.text + "'");
    if (tokens.size() != 3) {
      throw ScriptError(lineno, tokens.size() < 3 ? raw.size() + 1 : tokens[3].column,
                        "expected '<activity> <start> <duration>'");
    }
    const double start = number(tokens[1], lineno, "start");
    const double duration = number(tokens[2], lineno, "duration");
    if (duration <= 0.0) throw ScriptError(lineno, tokens[2].column, "duration must be positive");
    if (start + 1e-9 < last_end) {
      throw ScriptError(lineno, tokens[1].column, "segment starts before the previous one ends");
    }
    last_end = start + duration;
    script.segments.push_back({*activity, start, duration});
  }
  if (in.bad()) throw ScriptError(lineno, 0, "read error");
  return script;
}

DriveScript parse_script_text(const std::string& text) {
  std::istringstream in(text);
  return parse_script(in);
}

}  // namespace mmdrive
