#pragma once

// Synthetic Russian-language corpus used by unit, CLI and acceptance tests.
// Positive sentences draw from violence vocabulary, negatives from everyday
// news vocabulary; every sentence ends with ". " so segmentation is exact.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "hrv/corpus.hpp"

namespace hrv::testing {

struct SyntheticCorpus {
  std::string export_jsonl;     // channel export records
  std::vector<Sentence> gold;   // labeled sentences, keys match segmentation
  std::vector<Post> posts;
};

inline std::string synthetic_sentence(std::mt19937_64& rng, bool positive) {
  static const std::vector<std::string> openers = {"Сегодня", "Вчера", "Утром", "Вечером", "Ночью", "Днем"};
  static const std::vector<std::string> hrv = {"обстрел",  "погибли", "мирных",   "жителей", "пытки",
                                               "разрушен", "ранения", "расстрел", "казнь",   "пострадали",
                                               "убиты",    "мародеры", "пленных", "издевательства"};
  static const std::vector<std::string> news = {"погода",  "рынок",   "выставка", "концерт", "футбол",
                                                "урожай",  "бюджет",  "поезд",    "театр",   "школа",
                                                "праздник", "фермеры", "дорога",  "библиотека"};
  static const std::vector<std::string> filler = {"городе", "было", "сообщает", "канал", "области", "района"};
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  std::string s = pick(openers);
  const int n_key = std::uniform_int_distribution<int>(2, 3)(rng);
  const int n_fill = std::uniform_int_distribution<int>(2, 4)(rng);
  std::vector<std::string> words;
  for (int i = 0; i < n_key; ++i) words.push_back(pick(positive ? hrv : news));
  for (int i = 0; i < n_fill; ++i) words.push_back(pick(filler));
  std::shuffle(words.begin(), words.end(), rng);
  for (const auto& w : words) s += " " + w;
  return s + ".";
}

// `n_posts` posts of `per_post` sentences; about `positive_rate` of the
// sentences are positive.
inline SyntheticCorpus make_synthetic_corpus(int n_posts, int per_post, double positive_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution is_positive(positive_rate);
  SyntheticCorpus out;
  const char* affiliations[] = {"russia", "ukraine", "unclear"};
  for (int p = 0; p < n_posts; ++p) {
    Post post;
    post.channel_id = "channel_" + std::to_string(p % 5);
    post.post_id = 1000 + p;
    std::string body;
    for (int s = 0; s < per_post; ++s) {
      const bool positive = is_positive(rng);
      const auto sentence = synthetic_sentence(rng, positive);
      if (!body.empty()) body += " ";
      body += sentence;
      Sentence gold;
      gold.channel_id = post.channel_id;
      gold.post_id = post.post_id;
      gold.sent_index = s;
      gold.text = sentence;
      gold.label = positive ? 1 : 0;
      out.gold.push_back(std::move(gold));
    }
    post.text = body;
    nlohmann::json rec{{"channel_id", post.channel_id},
                       {"affiliation", affiliations[(p % 5) % 3]},
                       {"post_id", post.post_id},
                       {"date", "2022-03-" + std::string(p % 28 + 1 < 10 ? "0" : "") + std::to_string(p % 28 + 1)},
                       {"text", body}};
    out.export_jsonl += rec.dump() + "\n";
    out.posts.push_back(std::move(post));
  }
  return out;
}

// Labeled sentences with `positives` positive sentences spread over exactly
// `positive_posts` posts, plus all-negative filler posts.
inline std::vector<Sentence> make_rollup_fixture(int positives, int positive_posts, int negative_posts,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> per_post(static_cast<std::size_t>(positive_posts), 1);
  for (int extra = positives - positive_posts; extra > 0; --extra) {
    ++per_post[std::uniform_int_distribution<std::size_t>(0, per_post.size() - 1)(rng)];
  }
  std::vector<Sentence> out;
  auto add_post = [&](std::int64_t post_id, int pos, int neg) {
    std::vector<int> labels(static_cast<std::size_t>(pos), 1);
    labels.insert(labels.end(), static_cast<std::size_t>(neg), 0);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Sentence s;
      s.channel_id = "test_channel";
      s.post_id = post_id;
      s.sent_index = static_cast<int>(i);
      s.text = "sentence";
      s.label = labels[i];
      out.push_back(std::move(s));
    }
  };
  for (int p = 0; p < positive_posts; ++p) add_post(p, per_post[static_cast<std::size_t>(p)], 3);
  for (int p = 0; p < negative_posts; ++p) add_post(positive_posts + p, 0, 4);
  return out;
}

}  // namespace hrv::testing
