#include "doctest.h"

#include <random>
#include <set>
#include <sstream>

#include "hrv/corpus.hpp"
#include "hrv/error.hpp"
#include "hrv/segmenter.hpp"
#include "hrv/text.hpp"
#include "support/synthetic.hpp"

using namespace hrv;

namespace {

std::string record(const std::string& channel, const std::string& aff, std::int64_t id, const std::string& date,
                   const std::string& body) {
  return nlohmann::json{{"channel_id", channel}, {"affiliation", aff}, {"post_id", id}, {"date", date}, {"text", body}}
             .dump() +
         "\n";
}

}  // namespace

TEST_CASE("iso8601 parsing") {
  const auto a = parse_iso8601("2022-02-24");
  const auto b = parse_iso8601("2022-02-24T03:00:00+03:00");
  const auto c = parse_iso8601("2022-02-24 00:00:00Z");
  REQUIRE(a);
  REQUIRE(b);
  REQUIRE(c);
  CHECK(*a == *b);
  CHECK(*a == *c);
  CHECK(format_iso8601(*a) == "2022-02-24T00:00:00Z");
  CHECK_FALSE(parse_iso8601("24.02.2022"));
  CHECK_FALSE(parse_iso8601("2022-13-01"));
}

TEST_CASE("ingest keeps first duplicate and skips malformed lines") {
  std::string in = record("a", "russia", 1, "2022-03-01", "Первый текст.");
  in += "{not json\n";
  in += record("a", "russia", 1, "2022-03-02", "Дубликат.");
  in += record("b", "ukraine", 2, "2021-01-01", "Вне окна.");
  in += record("c", "nowhere", 3, "2022-03-01", "Плохая принадлежность.");
  in += "\n";
  std::istringstream stream(in);
  const auto result = ingest_export(stream);
  CHECK(result.report.lines == 5);
  CHECK(result.report.accepted == 2);
  CHECK(result.report.rejected == 2);
  CHECK(result.report.duplicates == 1);
  CHECK(result.report.outside_window == 1);
  REQUIRE(result.corpus.posts().size() == 2);
  CHECK(result.corpus.posts()[0].text == "Первый текст.");
  CHECK(result.corpus.posts()[1].outside_window);
}

TEST_CASE("corpus file round trip") {
  const auto synth = testing::make_synthetic_corpus(12, 3, 0.2, 3);
  std::istringstream first(synth.export_jsonl);
  const auto a = ingest_export(first);
  std::istringstream second(write_corpus(a.corpus));
  const auto b = ingest_export(second);
  CHECK(write_corpus(a.corpus) == write_corpus(b.corpus));
  CHECK(b.corpus.channels().size() == 5);
}

TEST_CASE("sample_posts is deterministic and bounded") {
  const auto synth = testing::make_synthetic_corpus(40, 1, 0.1, 5);
  std::istringstream in(synth.export_jsonl);
  const auto corpus = ingest_export(in).corpus;
  const auto a = sample_posts(corpus, 3, 11);
  const auto b = sample_posts(corpus, 3, 11);
  CHECK(a.size() == 15);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].key() == b[i].key());
  std::set<PostKey> distinct;
  for (const auto& p : a) distinct.insert(p.key());
  CHECK(distinct.size() == a.size());
  // More than available takes everything.
  CHECK(sample_posts(corpus, 100, 1).size() == 40);
  CHECK_THROWS_AS(sample_posts(corpus, 0, 1), Error);
}

TEST_CASE("corpus stats partition affiliations") {
  const auto synth = testing::make_synthetic_corpus(20, 2, 0.1, 8);
  std::istringstream in(synth.export_jsonl);
  const auto corpus = ingest_export(in).corpus;
  const auto stats = corpus_stats(corpus, AbbreviationLexicon::builtin());
  std::int64_t sum = 0;
  for (const auto& [_, n] : stats.affiliation_counts) sum += n;
  CHECK(sum == stats.n_channels);
  CHECK(stats.n_posts == 20);
  CHECK(stats.mean_posts_per_channel == doctest::Approx(4.0));
}

TEST_CASE("sentence length mode picks the smallest tie") {
  std::vector<Sentence> s(4);
  s[0].text = "один два";
  s[1].text = "один два три";
  s[2].text = "раз два";
  s[3].text = "раз два три";
  const auto stats = sentence_length_stats(s);
  CHECK(stats.mode == 2);
  CHECK(stats.mean == doctest::Approx(2.5));
}

TEST_CASE("sentence file round trip") {
  std::vector<Sentence> in(2);
  in[0] = {"c", 1, 0, "Текст \"в кавычках\".", Source::original(), 1};
  in[1] = {"c", 1, 1, "Второе.", Source::back_translation(3), std::nullopt};
  std::istringstream stream(write_sentences(in));
  const auto out = read_sentences(stream);
  REQUIRE(out.size() == 2);
  CHECK(out[0].text == in[0].text);
  CHECK(out[0].label == 1);
  CHECK(out[1].source.str() == "bt:3");
  CHECK_FALSE(out[1].label);
}

TEST_CASE("segmenter respects abbreviations") {
  const auto lex = AbbreviationLexicon::builtin();
  const auto s = split_sentences("Взрыв прогремел в г. Харьков на ул. Сумской. Пострадали 5 человек! Кто виноват?", lex);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == "Взрыв прогремел в г. Харьков на ул. Сумской.");
  CHECK(s[1] == "Пострадали 5 человек!");
  CHECK(s[2] == "Кто виноват?");
}

TEST_CASE("segmenter handles closers, ellipsis and Ukrainian abbreviations") {
  const auto lex = AbbreviationLexicon::builtin();
  const auto s = split_sentences("Он сказал: «Хватит!» Потом ушел… На вул. Хрещатик тихо.", lex);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == "Он сказал: «Хватит!»");
  CHECK(s[1] == "Потом ушел…");
  CHECK(s[2] == "На вул. Хрещатик тихо.");
}

TEST_CASE("segmenter: custom lexicon and edge cases") {
  AbbreviationLexicon lex;
  CHECK(split_sentences("Текст без точки", lex) == std::vector<std::string>{"Текст без точки"});
  CHECK(split_sentences("Это т.е. проверка. Да.", lex).size() == 3);
  lex.insert("т.е.");
  CHECK(split_sentences("Это т.е. проверка. Да.", lex).size() == 2);
  CHECK_THROWS_AS(segment_post(std::string_view("   "), lex), Error);
  CHECK(split_sentences("Число 3.14 внутри. Конец.", lex).size() == 2);
}

TEST_CASE("segmentation spans are ordered, disjoint and cover all words") {
  const auto lex = AbbreviationLexicon::builtin();
  std::mt19937_64 rng(21);
  const std::vector<std::string> pieces = {"слово", "г.", "Конец.", "да!", "нет?", "ул.", "«цитата»", "т.д.", "…"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string body;
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    for (int i = 0; i < n; ++i) {
      if (!body.empty()) body += " ";
      body += pieces[std::uniform_int_distribution<std::size_t>(0, pieces.size() - 1)(rng)];
    }
    const auto spans = sentence_spans(body, lex);
    std::size_t words = 0;
    std::size_t last_end = 0;
    for (const auto& sp : spans) {
      CHECK(sp.begin >= last_end);
      CHECK(sp.end > sp.begin);
      last_end = sp.end;
      words += text::count_words(std::string_view(body).substr(sp.begin, sp.end - sp.begin));
    }
    CHECK(words == text::count_words(body));
  }
}

TEST_CASE("synthetic corpus segments into its gold keys") {
  const auto synth = testing::make_synthetic_corpus(10, 5, 0.2, 1);
  std::istringstream in(synth.export_jsonl);
  const auto corpus = ingest_export(in).corpus;
  const auto sentences = segment_corpus(corpus, AbbreviationLexicon::builtin());
  REQUIRE(sentences.size() == synth.gold.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    CHECK(sentences[i].key() == synth.gold[i].key());
    CHECK(sentences[i].text == synth.gold[i].text);
  }
}
