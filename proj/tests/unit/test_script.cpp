#include <string>

#include "doctest.h"
#include "mmdrive/script.hpp"

using namespace mmdrive;

namespace {

std::pair<std::size_t, std::size_t> where(const std::string& text) {
  try {
    (void)parse_script_text(text);
  } catch (const ScriptError& e) {
    return {e.line(), e.column()};
  }
  return {0, 0};
}

}  // namespace

TEST_SUITE("script") {

TEST_CASE("parses segments, bumps and comments") {
  const auto s = parse_script_text(
      "# warm up\n"
      "Normal 0 5\n"
      "\n"
      "  UsingPhone 5 4.5   # call\n"
      "bump 7.25\n"
      "Yawning 12 3\n");
  REQUIRE(s.segments.size() == 3);
  CHECK(s.segments[1].activity == Activity::UsingPhone);
  CHECK(s.segments[1].start == 5.0);
  CHECK(s.segments[1].duration == 4.5);
  CHECK(s.segments[2].start == 12.0);
  REQUIRE(s.bumps.size() == 1);
  CHECK(s.bumps[0] == 7.25);
  CHECK(parse_script_text("").segments.empty());
}

TEST_CASE("errors carry line and column") {
  CHECK(where("Normal 0 5\nDrinking 5 2\nSwimming 7 2\n") == std::pair<std::size_t, std::size_t>{3, 1});
  CHECK(where("Normal 0 x5\n").first == 1);
  CHECK(where("Normal 0 x5\n").second == 10);
  CHECK(where("Normal 0\n").first == 1);
  CHECK(where("Normal 0 5 7\n").first == 1);
  CHECK(where("Normal 0 0\n").first == 1);
  CHECK(where("Normal -1 3\n").first == 1);
  CHECK(where("Normal 0 5\nDrinking 4 2\n").first == 2);
  CHECK(where("bump\n").first == 1);
  try {
    (void)parse_script_text("\n\nfoo 1 2\n");
    FAIL("expected error");
  } catch (const ScriptError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

}
