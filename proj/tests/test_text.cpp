#include "doctest.h"

#include <random>

#include "hrv/text.hpp"

using namespace hrv;

TEST_CASE("utf8 round trip") {
  const std::string s = "Буча, Київ, Ґанок, ÿ и ß";
  CHECK(text::to_utf8(text::to_u32(s)) == s);

  std::size_t pos = 0;
  const std::string bad = "\xff" "a";
  CHECK(text::decode(bad, pos) == 0xFFFD);
  CHECK(pos == 1);
  CHECK(text::decode(bad, pos) == U'a');

  pos = 0;
  const std::string truncated = "\xd0";
  CHECK(text::decode(truncated, pos) == 0xFFFD);
  CHECK(pos == 1);
}

TEST_CASE("random code points survive encode/decode") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> cp(1, 0x10FFFF);
  for (int trial = 0; trial < 200; ++trial) {
    std::u32string in;
    for (int i = 0; i < 20; ++i) {
      char32_t c = cp(rng);
      if (c >= 0xD800 && c <= 0xDFFF) c = U'x';
      in.push_back(c);
    }
    CHECK(text::to_u32(text::to_utf8(in)) == in);
  }
}

TEST_CASE("casefold handles Russian and Ukrainian") {
  CHECK(text::casefold("МАРИУПОЛЬ") == "мариуполь");
  CHECK(text::casefold("ЇЖАК Ґанок Єва ІВАН") == "їжак ґанок єва іван");
  CHECK(text::casefold("Ёлка") == "ёлка");
  CHECK(text::casefold("ABC Ÿ") == "abc ÿ");
  CHECK(text::casefold("ΑΒΓ") == "αβγ");
}

TEST_CASE("character classes") {
  CHECK(text::is_upper(U'Б'));
  CHECK(text::is_lower(U'б'));
  CHECK_FALSE(text::is_upper(U'1'));
  CHECK(text::is_digit(U'7'));
  CHECK(text::is_space(0x00A0));
  CHECK(text::is_word_char(U'ж'));
  CHECK_FALSE(text::is_word_char(U','));
}

TEST_CASE("trim, blank, split") {
  CHECK(text::trim("   abc \n") == "abc");
  CHECK(text::is_blank(" \t "));
  CHECK_FALSE(text::is_blank(" x "));
  CHECK(text::split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
  CHECK(text::count_words("  раз два\tтри ") == 3);
  CHECK(text::normalize("  Раз   ДВА\n") == "раз два");
}

TEST_CASE("word tokens keep joined hyphens and apostrophes") {
  const auto toks = text::word_tokens("Из-за обстрела, м'ясо - дорожает!");
  std::vector<std::string> words;
  for (const auto& t : toks) words.push_back(t.text);
  CHECK(words == std::vector<std::string>{"Из-за", "обстрела", "м'ясо", "дорожает"});
  CHECK(toks[1].offset == std::string("Из-за ").size());
}
