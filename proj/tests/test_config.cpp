#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stc/config.hpp"

using namespace stc;

TEST_CASE("parse_kv grammar") {
  KvMap kv = parse_kv("a = 1\n# comment\n\n  b=two \nc = with spaces \n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("b") == "two");
  CHECK(kv.at("c") == "with spaces");

  // '#' starts a comment anywhere in the line
  KvMap kv2 = parse_kv("key = a # trailing note\n");
  CHECK(kv2.at("key") == "a");

  // a later assignment overrides an earlier one
  KvMap kv3 = parse_kv("a = 1\na = 2\n");
  CHECK(kv3.at("a") == "2");
}

TEST_CASE("parse_kv reports the offending line") {
  CHECK_THROWS_WITH_AS(parse_kv("a = 1\nnot a pair\n"), doctest::Contains("line 2"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_kv("= noname\n"), doctest::Contains("line 1"),
                       std::invalid_argument);
}

TEST_CASE("kv_to_string round trips and is sorted") {
  KvMap kv = {{"zeta", "1"}, {"alpha", "two words"}};
  const std::string text = kv_to_string(kv);
  CHECK(text.find("alpha") < text.find("zeta"));
  CHECK(parse_kv(text) == kv);
}

TEST_CASE("write_file_atomic leaves no partial files") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "stc_cfg_test";
  fs::create_directories(dir);
  const auto path = (dir / "out.txt").string();
  write_file_atomic(path, "hello");
  CHECK(read_file(path) == "hello");
  write_file_atomic(path, "replaced");
  CHECK(read_file(path) == "replaced");

  // no stray temporary siblings remain
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("read_file on a missing path throws") {
  CHECK_THROWS_AS(read_file("/nonexistent/stc/file"), std::runtime_error);
}

TEST_CASE("fnv1a64 known vectors") {
  // reference values for the 64-bit FNV-1a parameters
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(fnv1a64(std::string(1, '\0')) == 0xaf63bd4c8601b7dfull);
}
