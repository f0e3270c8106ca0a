#include "doctest.h"

#include <random>

#include "hrv/error.hpp"
#include "hrv/evaluation.hpp"
#include "support/synthetic.hpp"

using namespace hrv;

namespace {

PredictionRecord pred(std::int64_t post, int idx, int label) {
  PredictionRecord p;
  p.key = {"c", post, idx};
  p.label = label;
  p.prob_hrv = label ? 0.9 : 0.1;
  return p;
}

Sentence gold(std::int64_t post, int idx, int label) {
  Sentence s;
  s.channel_id = "c";
  s.post_id = post;
  s.sent_index = idx;
  s.text = "t" + std::to_string(post) + "." + std::to_string(idx);
  s.label = label;
  return s;
}

MetricsReport row(std::string model, std::string variant, double p, double r) {
  MetricsReport m;
  m.model = std::move(model);
  m.variant = std::move(variant);
  m.precision = p;
  m.recall = r;
  m.f1 = f_beta(p, r, 1.0);
  m.f2 = f_beta(p, r, 2.0);
  return m;
}

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector p{1, 1, 0, 0, 1};
  const std::vector g{1, 0, 1, 0, 1};
  const auto c = confusion(p, g);
  CHECK(c == ConfusionCounts{2, 1, 1, 1});
  CHECK(c.total() == 5);
  CHECK_THROWS_AS(confusion(std::vector{1}, std::vector{1, 0}), Error);
}

TEST_CASE("confusion property: brute force") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(0, 30)(rng);
    std::vector<int> p(n);
    std::vector<int> g(n);
    for (auto& v : p) v = static_cast<int>(rng() % 2);
    for (auto& v : g) v = static_cast<int>(rng() % 2);
    ConfusionCounts expect;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] && g[i]) ++expect.tp;
      if (p[i] && !g[i]) ++expect.fp;
      if (!p[i] && g[i]) ++expect.fn;
      if (!p[i] && !g[i]) ++expect.tn;
    }
    CHECK(confusion(p, g) == expect);
  }
}

TEST_CASE("key-aligned confusion") {
  const std::vector preds{pred(1, 0, 1), pred(1, 1, 0), pred(2, 0, 1)};
  std::vector golds{gold(2, 0, 0), gold(1, 1, 1), gold(1, 0, 1)};
  CHECK(confusion(preds, golds) == ConfusionCounts{1, 1, 1, 0});
  golds.pop_back();
  CHECK_THROWS_AS(confusion(preds, golds), Error);
}

TEST_CASE("precision, recall and degenerate flags") {
  const ConfusionCounts none{0, 0, 3, 5};
  CHECK(precision(none).degenerate);
  CHECK(precision(none).value == 0.0);
  CHECK(recall(none).value == 0.0);
  CHECK_FALSE(recall(none).degenerate);
  const auto rep = metrics_report(ConfusionCounts{0, 0, 0, 4}, Level::sentence);
  CHECK(rep.flags.size() == 2);
  CHECK(rep.f2 == 0.0);
  const auto ok = metrics_report(ConfusionCounts{3, 1, 2, 4}, Level::post, "m", "D1");
  CHECK(ok.precision == doctest::Approx(0.75));
  CHECK(ok.recall == doctest::Approx(0.6));
  CHECK(ok.flags.empty());
  const auto back = metrics_report_from_json(to_json(ok));
  CHECK(back.level == Level::post);
  CHECK(back.counts == ok.counts);
  CHECK(back.f2 == ok.f2);
}

TEST_CASE("f-beta examples") {
  CHECK(f_beta(0.47, 0.82, 2.0) == doctest::Approx(0.71).epsilon(0.01));
  CHECK(f_beta(0.0, 0.0, 2.0) == 0.0);
  CHECK(f_beta(0.6, 0.6, 2.0) == doctest::Approx(0.6));
  CHECK(f_beta(0.5, 0.25, 1.0) == doctest::Approx(2 * 0.5 * 0.25 / 0.75));
  CHECK_THROWS_AS(f_beta(0.5, 0.5, 0.0), Error);
  CHECK_THROWS_AS(f_beta(0.5, 0.5, -1.0), Error);
}

TEST_CASE("f-beta properties") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double p = u(rng);
    const double r = u(rng);
    const double b1 = 0.1 + 3 * u(rng);
    const double b2 = b1 + 0.1 + u(rng);
    CHECK(f_beta(p, p, b1) == doctest::Approx(p));
    const double f1 = f_beta(p, r, b1);
    const double f2 = f_beta(p, r, b2);
    CHECK(f1 >= std::min(p, r) - 1e-12);
    CHECK(f1 <= std::max(p, r) + 1e-12);
    // Larger beta moves the score toward recall.
    if (r > p) CHECK(f2 >= f1 - 1e-12);
    if (r < p) CHECK(f2 <= f1 + 1e-12);
  }
}

TEST_CASE("post roll-up examples") {
  const std::vector preds{pred(1, 0, 0), pred(1, 1, 1), pred(2, 0, 0), pred(3, 0, 0)};
  const std::vector golds{gold(1, 0, 1), gold(1, 1, 0), gold(2, 0, 1), gold(3, 0, 0)};
  const auto posts = rollup_posts(preds, golds);
  CHECK(posts.predicted.at({"c", 1}) == 1);
  CHECK(posts.gold.at({"c", 1}) == 1);
  CHECK(posts.predicted.at({"c", 2}) == 0);
  CHECK(posts.gold.at({"c", 2}) == 1);
  CHECK(confusion(posts) == ConfusionCounts{1, 0, 1, 1});

  const std::vector extra{pred(1, 0, 0), pred(9, 0, 1)};
  CHECK_THROWS_AS(rollup_posts(extra, std::vector{gold(1, 0, 0)}), Error);
}

TEST_CASE("roll-up property: brute force") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SentenceKey> keys;
    std::vector<int> labels;
    std::map<PostKey, std::vector<int>> by_post;
    const int posts = std::uniform_int_distribution<int>(1, 8)(rng);
    for (int p = 0; p < posts; ++p) {
      const int n = std::uniform_int_distribution<int>(1, 5)(rng);
      for (int i = 0; i < n; ++i) {
        const int l = static_cast<int>(rng() % 3 == 0);
        keys.push_back({"c", p, i});
        labels.push_back(l);
        by_post[{"c", p}].push_back(l);
      }
    }
    const auto r = rollup(keys, labels);
    CHECK(r.size() == by_post.size());
    for (const auto& [k, ls] : by_post) {
      int any = 0;
      for (int l : ls) any |= l;
      CHECK(r.at(k) == any);
    }
  }
}

TEST_CASE("45 positive sentences in 25 posts roll up to 25 positive posts") {
  const auto fixture = testing::make_rollup_fixture(45, 25, 15, 2);
  std::vector<SentenceKey> keys;
  std::vector<int> labels;
  for (const auto& s : fixture) {
    keys.push_back(s.key());
    labels.push_back(*s.label);
  }
  const auto posts = rollup(keys, labels);
  int positive = 0;
  int sentences = 0;
  for (const auto& [k, l] : posts) positive += l;
  for (int l : labels) sentences += l;
  CHECK(sentences == 45);
  CHECK(positive == 25);
  CHECK(posts.size() == 40);
}

TEST_CASE("performance report ordering, best row and csv") {
  std::vector<MetricsReport> runs = {row("bert", "D3", 0.5, 0.8), row("baseline", "D1", 0.2, 0.9),
                                     row("bert", "D1", 0.47, 0.82), row("bert", "extra", 0.1, 0.1),
                                     row("xlm", "D1", 0.6, 0.85)};
  const auto rep = performance_report(runs);
  REQUIRE(rep.rows.size() == 5);
  // Models keep first-seen order across all runs.
  CHECK(rep.rows[0].model == "bert");
  CHECK(rep.rows[1].model == "baseline");
  CHECK(rep.rows[2].model == "xlm");
  CHECK(rep.rows[3].variant == "D3");
  CHECK(rep.rows[4].variant == "extra");
  CHECK(rep.best_row == 2);
  CHECK(rep.csv.rfind("model,variant,level,P,R,F1,F2\n", 0) == 0);
  CHECK(rep.csv.find("xlm,D1,sentence,0.6000,0.8500,") != std::string::npos);
  CHECK(rep.footnotes.empty());
  CHECK(rep.table.find(" *\n") != std::string::npos);

  runs[0].f2 = 0.1;
  const auto noted = performance_report(runs);
  CHECK(noted.footnotes.size() == 1);
  CHECK(noted.table.find("[1]") != std::string::npos);

  runs.push_back(row("bert", "D3", 0.1, 0.2));
  CHECK_THROWS_AS(performance_report(runs), Error);
  CHECK_THROWS_AS(performance_report(std::vector<MetricsReport>{}), Error);
}

TEST_CASE("flagged posts file") {
  const std::vector preds{pred(1, 0, 0), pred(1, 1, 1), pred(2, 0, 0)};
  const std::vector golds{gold(1, 0, 1), gold(1, 1, 0), gold(2, 0, 1)};
  const auto out = write_flagged_posts(preds, golds);
  CHECK(std::count(out.begin(), out.end(), '\n') == 1);
  const auto j = nlohmann::json::parse(out.substr(0, out.find('\n')));
  CHECK(j["post_id"] == 1);
  CHECK(j["hrv_sentences"] == nlohmann::json::array({1}));
  CHECK(j["sentences"].size() == 2);
}
