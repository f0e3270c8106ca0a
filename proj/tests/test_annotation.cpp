#include "doctest.h"

#include <random>

#include "hrv/annotation.hpp"
#include "hrv/error.hpp"

using namespace hrv;

namespace {

AnnotationRecord rec(std::int64_t post, int idx, std::map<std::string, int> labels) {
  AnnotationRecord r;
  r.key = {"ch", post, idx};
  r.text = "text " + std::to_string(post) + "." + std::to_string(idx);
  r.labels = std::move(labels);
  return r;
}

double brute_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  double m[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < a.size(); ++i) m[a[i]][b[i]] += 1;
  const double n = static_cast<double>(a.size());
  const double po = (m[0][0] + m[1][1]) / n;
  double pe = 0;
  for (int k = 0; k < 2; ++k) pe += ((m[k][0] + m[k][1]) / n) * ((m[0][k] + m[1][k]) / n);
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1 - pe);
}

}  // namespace

TEST_CASE("kappa worked examples") {
  CHECK(cohens_kappa(std::vector{1, 1, 0, 0}, std::vector{1, 0, 1, 0}).kappa == 0.0);
  const std::vector a{1, 0, 1, 1, 0};
  CHECK(cohens_kappa(a, a).kappa == 1.0);
  const auto constant = cohens_kappa(std::vector{0, 0, 0}, std::vector{0, 0, 0});
  CHECK(constant.degenerate);
  CHECK(constant.kappa == 1.0);
  CHECK_THROWS_AS(cohens_kappa(std::vector{1}, std::vector{1, 0}), Error);
  CHECK_THROWS_AS(cohens_kappa(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST_CASE("kappa matches brute force on random labels") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    std::vector<int> a(static_cast<std::size_t>(n));
    std::vector<int> b(a.size());
    for (auto& v : a) v = static_cast<int>(rng() % 2);
    for (auto& v : b) v = static_cast<int>(rng() % 2);
    CHECK(cohens_kappa(a, b).kappa == doctest::Approx(brute_kappa(a, b)).epsilon(1e-12));
    CHECK(cohens_kappa(a, b).kappa == doctest::Approx(cohens_kappa(b, a).kappa).epsilon(1e-12));
  }
}

TEST_CASE("agreement over records labeled by both annotators") {
  std::vector<AnnotationRecord> records = {rec(1, 0, {{"x", 1}, {"y", 1}}), rec(1, 1, {{"x", 0}, {"y", 1}}),
                                           rec(2, 0, {{"x", 0}}), rec(2, 1, {{"x", 0}, {"y", 0}})};
  const auto r = annotator_agreement(records, "x", "y");
  CHECK(r.n_items == 3);
  CHECK(r.observed_agreement == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(annotator_agreement(records, "x", "nobody"), Error);
}

TEST_CASE("double-annotation pool: positives plus equal negative sample") {
  std::vector<AnnotationRecord> pre;
  for (int p = 0; p < 210; ++p) {
    pre.push_back(rec(p, 0, {{"prelabel", p < 10 ? 1 : 0}}));
    pre.push_back(rec(p, 1, {{"prelabel", 0}}));
  }
  const auto a = select_double_annotation_pool(pre, {}, 5);
  CHECK(a.posts.size() == 20);
  CHECK(a.positive_posts == 10);
  CHECK(a.negative_sample == 10);
  const auto b = select_double_annotation_pool(pre, {}, 5);
  CHECK(a.posts == b.posts);

  // Flags inside the positive set do not grow the pool.
  const auto flagged = select_double_annotation_pool(pre, {PostKey{"ch", 1}, PostKey{"ch", 2}}, 5);
  CHECK(flagged.posts.size() == 20);
  CHECK(flagged.flagged_added == 0);
}

TEST_CASE("double-annotation pool takes all negatives when short") {
  std::vector<AnnotationRecord> pre;
  for (int p = 0; p < 6; ++p) pre.push_back(rec(p, 0, {{"prelabel", p < 4 ? 1 : 0}}));
  const auto s = select_double_annotation_pool(pre, {}, 1);
  CHECK(s.posts.size() == 6);
  CHECK(s.warnings.size() == 1);
  pre.push_back(rec(99, 0, {}));
  CHECK_THROWS_AS(select_double_annotation_pool(pre, {}, 1), Error);
}

TEST_CASE("adjudication") {
  std::vector<AnnotationRecord> records = {
      rec(1, 0, {{"prelabel", 0}, {"x", 1}, {"y", 1}}),
      rec(1, 1, {{"prelabel", 1}, {"x", 0}, {"y", 1}, {"adj", 0}}),
      rec(1, 2, {{"prelabel", 1}}),
  };
  const auto gold = adjudicate(records, "adj");
  CHECK(gold[0].gold == 1);
  CHECK(gold[1].gold == 0);
  CHECK(gold[2].gold == 1);
  const auto totals = gold_totals(gold);
  CHECK(totals.positive == 2);
  CHECK(totals.total == 3);

  records.push_back(rec(2, 0, {{"x", 0}, {"y", 1}}));
  try {
    adjudicate(records, "adj");
    FAIL("expected a conflict");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unresolved_conflict);
    CHECK(std::string(e.what()).find("ch/2#0") != std::string::npos);
  }
}

TEST_CASE("annotation interchange round trip") {
  const std::string doc = R"([
    {"id": 7, "data": {"text": "Погибли мирные жители.", "post_id": 3, "channel_id": "c", "sent_index": 0, "note": "keep"},
     "annotations": [
       {"completed_by": "x", "result": [{"value": {"choices": ["HRV"]}}, {"value": {"text": ["span"]}}]},
       {"completed_by": 12, "result": [{"value": {"choices": ["non-HRV"]}}]}
     ],
     "hrv_category": "killing_civilians"}
  ])";
  const auto records = import_annotations(doc);
  REQUIRE(records.size() == 1);
  CHECK(records[0].labels.at("x") == 1);
  CHECK(records[0].labels.at("12") == 0);
  CHECK(records[0].category == HrvCategory::killing_civilians);
  const auto again = import_annotations(export_annotations(records));
  CHECK(again == records);
}

TEST_CASE("annotation import reports the offending field") {
  try {
    import_annotations(R"([{"data": {"text": "x", "post_id": 1, "channel_id": "c"}, "annotations": []}])");
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::schema);
    CHECK(std::string(e.what()).find("sent_index") != std::string::npos);
  }
}

TEST_CASE("gold sentences carry the gold label") {
  auto records = adjudicate(std::vector{rec(1, 0, {{"x", 1}})}, "adj");
  const auto s = gold_sentences(records);
  REQUIRE(s.size() == 1);
  CHECK(s[0].label == 1);
  records[0].gold.reset();
  CHECK_THROWS_AS(gold_sentences(records), Error);
}
