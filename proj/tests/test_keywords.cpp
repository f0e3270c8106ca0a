#include "doctest.h"

#include <cmath>

#include "hrv/error.hpp"
#include "hrv/keywords.hpp"

using namespace hrv;

TEST_CASE("stopword list") {
  const auto builtin = StopwordList::builtin();
  CHECK(builtin.contains("и"));
  CHECK(builtin.contains("что"));
  CHECK(builtin.contains("також"));
  const auto custom = StopwordList::parse("# comment\nОдин два\nтри");
  CHECK(custom.size() == 3);
  CHECK(custom.contains("один"));
}

TEST_CASE("hand-computed scores on a small text") {
  // Terms: "обстрел" occurs in all three sentences, "город" in two, the rest once.
  const std::vector<std::string> sentences = {"Обстрел города продолжался.", "Новый обстрел города.",
                                              "Обстрел стих."};
  StopwordList none;
  const auto p = extract_keywords(sentences, none, {.k = 10});
  REQUIRE(p.keywords.size() == 5);
  const auto& top = p.keywords.front();
  CHECK(top.term == "обстрел");
  CHECK(top.frequency == 3);

  // tf: обстрел 3, города 2, three others 1. mean = 8/5, population std over the five terms.
  const double mean = 8.0 / 5.0;
  const double var = ((3 - mean) * (3 - mean) + (2 - mean) * (2 - mean) + 3 * (1 - mean) * (1 - mean)) / 5.0;
  const double freq = 3.0 / (mean + std::sqrt(var));
  CHECK(top.features.frequency_norm == doctest::Approx(freq));
  CHECK(top.features.dispersion == doctest::Approx(1.0));
  CHECK(top.features.position == doctest::Approx(std::log(std::log(3.0 + 1.0))));
  // Left neighbours: "новый" once; right neighbours: "города" twice, "стих" once.
  const double rel = (0.5 + 1.0 * (3.0 / 3.0)) + (0.5 + (2.0 / 3.0) * (3.0 / 3.0));
  CHECK(top.features.relatedness == doctest::Approx(rel));
  // Capitalized only at sentence starts, which do not count.
  CHECK(top.features.casing == doctest::Approx(0.0));
  const double h = top.features.position * rel / (0.0 + freq / rel + 1.0 / rel);
  CHECK(top.score == doctest::Approx(h / ((h + 1.0) * 3.0)));
}

TEST_CASE("scores are sorted and stopwords excluded") {
  const std::vector<std::string> sentences = {"В результате обстрела погибли мирные жители.",
                                              "В городе разрушены дома, погибли люди.",
                                              "Пытки и расстрелы мирных жителей.", "12 человек погибли."};
  const auto p = extract_keywords(sentences, StopwordList::builtin(), {.k = 30});
  for (std::size_t i = 1; i < p.keywords.size(); ++i) CHECK(p.keywords[i - 1].score <= p.keywords[i].score);
  CHECK_FALSE(p.contains("в"));
  CHECK_FALSE(p.contains("и"));
  CHECK_FALSE(p.contains("12"));
  CHECK(p.contains("погибли"));
  CHECK_FALSE(p.warnings.empty());  // fewer than 30 candidates
}

TEST_CASE("document entry point segments first") {
  const auto p = extract_keywords(std::string_view("Обстрел города. Новый обстрел города. Обстрел стих."),
                                  StopwordList{}, {.k = 2});
  REQUIRE(p.keywords.size() == 2);
  CHECK(p.contains("обстрел"));
  CHECK_THROWS_AS(extract_keywords(std::string_view("   "), StopwordList{}), Error);
}

TEST_CASE("keyword classifier") {
  KeywordProfile p;
  p.keywords = {{"пытки", 0.1, 1, {}}, {"обстрел", 0.2, 1, {}}};
  CHECK(keyword_classify("Сообщают о ПЫТКИ пленных", p) == 1);
  CHECK(keyword_classify("Обстрелы продолжаются", p) == 0);
  CHECK(keyword_classify("Обстрелы продолжаются", p, MatchMode::substring) == 1);
  CHECK(keyword_classify("   ", p) == 0);
  CHECK_THROWS_AS(keyword_classify("x", KeywordProfile{}), Error);
}

TEST_CASE("profile file round trip") {
  const std::vector<std::string> sentences = {"Обстрел города продолжался.", "Новый обстрел города."};
  const auto p = extract_keywords(sentences, StopwordList{});
  const auto back = read_profile(write_profile(p));
  REQUIRE(back.keywords.size() == p.keywords.size());
  for (std::size_t i = 0; i < p.keywords.size(); ++i) {
    CHECK(back.keywords[i].term == p.keywords[i].term);
    CHECK(back.keywords[i].score == p.keywords[i].score);
  }
  CHECK_THROWS_AS(read_profile("a\t1\na\t2\n"), Error);
}
