#include "doctest.h"

#include <cmath>
#include <random>

#include "hrv/augmentation.hpp"
#include "hrv/datasets.hpp"
#include "hrv/error.hpp"

using namespace hrv;

namespace {

std::vector<Sentence> labeled(int posts, int per_post, int positives) {
  std::vector<Sentence> out;
  int pos = 0;
  for (int p = 0; p < posts; ++p) {
    for (int i = 0; i < per_post; ++i) {
      Sentence s;
      s.channel_id = "c" + std::to_string(p % 3);
      s.post_id = p;
      s.sent_index = i;
      s.text = "s" + std::to_string(p) + "_" + std::to_string(i);
      s.label = (i == 0 && pos < positives) ? (++pos, 1) : 0;
      out.push_back(s);
    }
  }
  return out;
}

AugmentationRecord bt_record(const Sentence& s, int chain) {
  return {s.key(), s.text + " bt" + std::to_string(chain), Source::back_translation(chain), true};
}

}  // namespace

TEST_CASE("split is post-level, disjoint and covering") {
  const auto s = labeled(50, 3, 10);
  const auto split = split_posts(std::span<const Sentence>(s), 0.8, 7);
  CHECK(split.train_posts.size() == 40);
  CHECK(split.test_posts.size() == 10);
  for (const auto& k : split.train_posts) CHECK_FALSE(split.in_test(k));
  const auto again = split_posts(std::span<const Sentence>(s), 0.8, 7);
  CHECK(again.train_posts == split.train_posts);
  const auto other = split_posts(std::span<const Sentence>(s), 0.8, 8);
  CHECK(other.train_posts != split.train_posts);
}

TEST_CASE("split keeps both sides non-empty") {
  std::vector<PostKey> two = {{"a", 1}, {"a", 2}};
  const auto all_train = split_posts(two, 0.99, 1);
  CHECK(all_train.train_posts.size() == 1);
  CHECK(all_train.test_posts.size() == 1);
  CHECK_THROWS_AS(split_posts(std::vector<PostKey>{{"a", 1}}, 0.8, 1), Error);
}

TEST_CASE("split property: random sizes and ratios") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 300)(rng);
    const double ratio = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    std::vector<PostKey> keys;
    for (int i = 0; i < n; ++i) keys.push_back({"c", i});
    const auto split = split_posts(keys, ratio, rng());
    CHECK(split.train_posts.size() + split.test_posts.size() == static_cast<std::size_t>(n));
    CHECK(std::abs(static_cast<double>(split.train_posts.size()) - ratio * n) <= 1.0);
  }
}

TEST_CASE("split manifest round trip") {
  const auto s = labeled(20, 2, 4);
  const auto split = split_posts(std::span<const Sentence>(s), 0.75, 9);
  const auto back = read_split_manifest(write_split_manifest(split));
  CHECK(back.train_posts == split.train_posts);
  CHECK(back.test_posts == split.test_posts);
  CHECK(back.seed == 9);
  CHECK_THROWS_AS(read_split_manifest("[]"), Error);
  CHECK_THROWS_AS(read_split_manifest(R"({"seed":1,"ratio":0.5,"train":[["a",1]],"test":[["a",1]]})"), Error);
}

TEST_CASE("variants compose base, back-translations and generated examples") {
  const auto all = labeled(30, 4, 12);
  const auto split = split_posts(std::span<const Sentence>(all), 0.8, 1);
  const auto base = select_side(all, split.train_posts);
  std::vector<AugmentationRecord> bt;
  std::size_t positives = 0;
  for (const auto& s : base) {
    if (s.label != 1) continue;
    ++positives;
    for (int c = 1; c <= 5; ++c) bt.push_back(bt_record(s, c));
  }
  std::vector<AugmentationRecord> llm(7, AugmentationRecord{std::nullopt, "generated", Source::llm("P2"), true});

  VariantInputs in;
  in.base = base;
  in.back_translations = bt;
  in.generated = llm;
  in.split = &split;
  CHECK(build_variant(in, VariantId::D1).examples.size() == base.size());
  CHECK(build_variant(in, VariantId::D2).examples.size() == base.size() + 5 * positives);
  const auto d3 = build_variant(in, VariantId::D3);
  CHECK(d3.examples.size() == base.size() + 7);
  CHECK(d3.examples.back().channel_id == "llm:P2");
  CHECK(d3.examples.back().post_id == 6);
  const auto d4 = build_variant(in, VariantId::D4);
  CHECK(d4.examples.size() == base.size() + 5 * positives + 7);
  CHECK(d4.counts.at("bt") == static_cast<std::int64_t>(5 * positives));
  for (const auto& e : d4.examples) {
    if (e.source.kind != Source::Kind::original) CHECK(e.label == 1);
  }

  in.reported_size = 1;
  CHECK(build_variant(in, VariantId::D4).notes.size() == 1);
}

TEST_CASE("variant assembly rejects leakage") {
  const auto all = labeled(30, 2, 10);
  const auto split = split_posts(std::span<const Sentence>(all), 0.8, 2);
  const auto base = select_side(all, split.train_posts);
  const auto test = select_side(all, split.test_posts);
  REQUIRE_FALSE(test.empty());
  std::vector<AugmentationRecord> bt = {bt_record(test.front(), 1)};
  VariantInputs in;
  in.base = base;
  in.back_translations = bt;
  in.split = &split;
  try {
    build_variant(in, VariantId::D2);
    FAIL("expected leakage");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::leakage);
  }
  // Without a split the origin must still be a base sentence.
  in.split = nullptr;
  CHECK_THROWS_AS(build_variant(in, VariantId::D2), Error);
  // Unaccepted records are refused.
  bt = {bt_record(base.front(), 1)};
  bt[0].accepted = false;
  in.back_translations = bt;
  CHECK_THROWS_AS(build_variant(in, VariantId::D2), Error);
}

TEST_CASE("class stats") {
  const auto s = labeled(10, 3, 4);
  const auto stats = class_stats(s);
  CHECK(stats.total == 30);
  CHECK(stats.positive == 4);
  CHECK(stats.positive_fraction == doctest::Approx(4.0 / 30.0));
}
