#include "hrv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "hrv/datasets.hpp"
#include "hrv/error.hpp"

namespace hrv {

using nlohmann::json;

namespace {

void tally(ConfusionCounts& c, int pred, int gold) {
  if ((pred != 0 && pred != 1) || (gold != 0 && gold != 1)) {
    throw Error(ErrorKind::input, "labels must be 0 or 1");
  }
  if (pred == 1 && gold == 1) ++c.tp;
  else if (pred == 1) ++c.fp;
  else if (gold == 1) ++c.fn;
  else ++c.tn;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> golds) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorKind::alignment, std::to_string(predictions.size()) + " predictions for " +
                                          std::to_string(golds.size()) + " gold labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < golds.size(); ++i) tally(c, predictions[i], golds[i]);
  return c;
}

ConfusionCounts confusion(std::span<const PredictionRecord> predictions, std::span<const Sentence> golds) {
  std::map<SentenceKey, int> gold;
  for (const auto& s : golds) {
    if (!s.label) throw Error(ErrorKind::input, "gold sentence " + to_string(s.key()) + " has no label");
    if (!gold.emplace(s.key(), *s.label).second) {
      throw Error(ErrorKind::alignment, "duplicate gold sentence " + to_string(s.key()));
    }
  }
  if (predictions.size() != gold.size()) {
    throw Error(ErrorKind::alignment, std::to_string(predictions.size()) + " predictions for " +
                                          std::to_string(gold.size()) + " gold sentences");
  }
  ConfusionCounts c;
  std::set<SentenceKey> seen;
  for (const auto& p : predictions) {
    const auto it = gold.find(p.key);
    if (it == gold.end()) throw Error(ErrorKind::alignment, "no gold sentence for " + to_string(p.key));
    if (!seen.insert(p.key).second) throw Error(ErrorKind::alignment, "duplicate prediction " + to_string(p.key));
    tally(c, p.label, it->second);
  }
  return c;
}

Ratio precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return {0.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp), false};
}

Ratio recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return {0.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn), false};
}

double f_beta(double p, double r, double beta) {
  if (!(beta > 0)) throw Error(ErrorKind::input, "beta must be positive");
  const double b2 = beta * beta;
  const double denom = b2 * p + r;
  if (denom == 0) return 0.0;
  return (1 + b2) * p * r / denom;
}

double f_beta(const ConfusionCounts& c, double beta) {
  return f_beta(precision(c).value, recall(c).value, beta);
}

std::string_view to_string(Level level) { return level == Level::sentence ? "sentence" : "post"; }

std::optional<Level> parse_level(std::string_view s) {
  if (s == "sentence") return Level::sentence;
  if (s == "post") return Level::post;
  return std::nullopt;
}

MetricsReport metrics_report(const ConfusionCounts& c, Level level, std::string model, std::string variant) {
  MetricsReport r;
  r.level = level;
  const Ratio p = precision(c);
  const Ratio rc = recall(c);
  r.precision = p.value;
  r.recall = rc.value;
  r.f1 = f_beta(p.value, rc.value, 1.0);
  r.f2 = f_beta(p.value, rc.value, 2.0);
  r.counts = c;
  r.model = std::move(model);
  r.variant = std::move(variant);
  if (p.degenerate) r.flags.push_back("precision_undefined");
  if (rc.degenerate) r.flags.push_back("recall_undefined");
  return r;
}

json to_json(const MetricsReport& r) {
  json j{{"level", to_string(r.level)},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"f2", r.f2},
         {"model", r.model},
         {"variant", r.variant}};
  if (r.counts) j["counts"] = {{"tp", r.counts->tp}, {"fp", r.counts->fp}, {"fn", r.counts->fn}, {"tn", r.counts->tn}};
  if (!r.flags.empty()) j["flags"] = r.flags;
  return j;
}

MetricsReport metrics_report_from_json(const json& j) {
  MetricsReport r;
  try {
    const auto level = parse_level(j.value("level", std::string("sentence")));
    if (!level) throw Error(ErrorKind::schema, "metrics level must be sentence or post");
    r.level = *level;
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.contains("f1") ? j.at("f1").get<double>() : f_beta(r.precision, r.recall, 1.0);
    r.f2 = j.contains("f2") ? j.at("f2").get<double>() : f_beta(r.precision, r.recall, 2.0);
    r.model = j.value("model", std::string());
    r.variant = j.value("variant", std::string());
    if (j.contains("counts")) {
      const auto& c = j.at("counts");
      r.counts = ConfusionCounts{c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(),
                                 c.at("fn").get<std::int64_t>(), c.at("tn").get<std::int64_t>()};
    }
    if (j.contains("flags")) r.flags = j.at("flags").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("metrics record: ") + e.what());
  }
  for (double v : {r.precision, r.recall, r.f1, r.f2}) {
    if (!(v >= 0 && v <= 1)) throw Error(ErrorKind::schema, "metrics must lie in [0, 1]");
  }
  return r;
}

std::map<PostKey, int> rollup(std::span<const SentenceKey> keys, std::span<const int> labels) {
  if (keys.size() != labels.size()) throw Error(ErrorKind::alignment, "keys and labels differ in length");
  std::map<PostKey, int> out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::input, "labels must be 0 or 1");
    int& v = out[keys[i].post()];
    v = std::max(v, labels[i]);
  }
  return out;
}

PostLabels rollup_posts(std::span<const PredictionRecord> predictions, std::span<const Sentence> golds) {
  std::set<SentenceKey> gold_keys;
  std::vector<SentenceKey> gk;
  std::vector<int> gl;
  for (const auto& s : golds) {
    if (!s.label) throw Error(ErrorKind::input, "gold sentence " + to_string(s.key()) + " has no label");
    gold_keys.insert(s.key());
    gk.push_back(s.key());
    gl.push_back(*s.label);
  }
  std::set<SentenceKey> pred_keys;
  std::vector<SentenceKey> pk;
  std::vector<int> pl;
  for (const auto& p : predictions) {
    if (!gold_keys.count(p.key)) throw Error(ErrorKind::alignment, "orphan prediction " + to_string(p.key));
    pred_keys.insert(p.key);
    pk.push_back(p.key);
    pl.push_back(p.label);
  }
  for (const auto& k : gold_keys) {
    if (!pred_keys.count(k)) throw Error(ErrorKind::alignment, "no prediction for " + to_string(k));
  }
  return {rollup(pk, pl), rollup(gk, gl)};
}

ConfusionCounts confusion(const PostLabels& posts) {
  if (posts.predicted.size() != posts.gold.size()) throw Error(ErrorKind::alignment, "post sets differ");
  ConfusionCounts c;
  for (const auto& [key, gold] : posts.gold) {
    const auto it = posts.predicted.find(key);
    if (it == posts.predicted.end()) throw Error(ErrorKind::alignment, "no prediction for post " + to_string(key));
    tally(c, it->second, gold);
  }
  return c;
}

PerformanceReport performance_report(std::span<const MetricsReport> runs, double tolerance) {
  if (runs.empty()) throw Error(ErrorKind::empty_input, "no runs to report");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : runs) {
    if (!seen.emplace(r.model, r.variant).second) {
      throw Error(ErrorKind::input, "duplicate run for model '" + r.model + "', variant '" + r.variant + "'");
    }
  }

  auto variant_rank = [](const std::string& v) {
    const auto id = parse_variant(v);
    return id ? static_cast<int>(*id) : 100;
  };
  std::map<std::string, std::size_t> model_order;
  for (const auto& r : runs) model_order.emplace(r.model, model_order.size());

  PerformanceReport rep;
  rep.rows.assign(runs.begin(), runs.end());
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [&](const auto& a, const auto& b) {
    const int ra = variant_rank(a.variant);
    const int rb = variant_rank(b.variant);
    if (ra != rb) return ra < rb;
    if (a.variant != b.variant) return a.variant < b.variant;
    return model_order.at(a.model) < model_order.at(b.model);
  });

  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (rep.rows[i].f2 > rep.rows[rep.best_row].f2) rep.best_row = i;
  }

  rep.csv = "model,variant,level,P,R,F1,F2\n";
  for (const auto& r : rep.rows) {
    rep.csv += r.model + "," + r.variant + "," + std::string(to_string(r.level)) + "," + fmt4(r.precision) + "," +
               fmt4(r.recall) + "," + fmt4(r.f1) + "," + fmt4(r.f2) + "\n";
  }

  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    const double f1 = f_beta(r.precision, r.recall, 1.0);
    const double f2 = f_beta(r.precision, r.recall, 2.0);
    if (std::abs(f1 - r.f1) > tolerance || std::abs(f2 - r.f2) > tolerance) {
      rep.footnotes.push_back("[" + std::to_string(rep.footnotes.size() + 1) + "] " + r.variant + " / " + r.model +
                              ": F1/F2 recomputed from P and R give " + fmt4(f1) + "/" + fmt4(f2) +
                              ", stored " + fmt4(r.f1) + "/" + fmt4(r.f2));
    }
  }

  std::size_t model_w = 5;
  std::size_t variant_w = 7;
  for (const auto& r : rep.rows) {
    model_w = std::max(model_w, r.model.size());
    variant_w = std::max(variant_w, r.variant.size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  rep.table = pad("variant", variant_w) + "  " + pad("model", model_w) + "  level     P     R     F1    F2\n";
  std::size_t note = 0;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    std::string line = pad(r.variant, variant_w) + "  " + pad(r.model, model_w) + "  " +
                       pad(std::string(to_string(r.level)), 8) + "  " + fmt2(r.precision) + "  " + fmt2(r.recall) +
                       "  " + fmt2(r.f1) + "  " + fmt2(r.f2);
    if (i == rep.best_row) line += " *";
    const double f1 = f_beta(r.precision, r.recall, 1.0);
    const double f2 = f_beta(r.precision, r.recall, 2.0);
    if (std::abs(f1 - r.f1) > tolerance || std::abs(f2 - r.f2) > tolerance) {
      line += " [" + std::to_string(++note) + "]";
    }
    rep.table += line + "\n";
  }
  rep.table += "* best F2\n";
  for (const auto& f : rep.footnotes) rep.table += f + "\n";
  return rep;
}

std::string write_flagged_posts(std::span<const PredictionRecord> predictions, std::span<const Sentence> sentences) {
  std::map<SentenceKey, const PredictionRecord*> by_key;
  for (const auto& p : predictions) by_key[p.key] = &p;
  std::map<PostKey, std::vector<const Sentence*>> posts;
  for (const auto& s : sentences) posts[s.post()].push_back(&s);

  std::string out;
  for (auto& [key, members] : posts) {
    std::sort(members.begin(), members.end(), [](const auto* a, const auto* b) { return a->sent_index < b->sent_index; });
    json flagged = json::array();
    json items = json::array();
    for (const auto* s : members) {
      const auto it = by_key.find(s->key());
      const bool hit = it != by_key.end() && it->second->label == 1;
      if (hit) flagged.push_back(s->sent_index);
      json item{{"sent_index", s->sent_index}, {"text", s->text}};
      if (it != by_key.end()) item["prob_hrv"] = it->second->prob_hrv;
      items.push_back(std::move(item));
    }
    if (flagged.empty()) continue;
    json j{{"channel_id", key.channel_id}, {"post_id", key.post_id}, {"hrv_sentences", flagged}, {"sentences", items}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace hrv
