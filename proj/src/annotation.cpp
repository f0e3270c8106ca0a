#include "hrv/annotation.hpp"

#include <algorithm>
#include <random>

#include "hrv/error.hpp"

namespace hrv {

using nlohmann::json;

std::string_view to_string(HrvCategory c) {
  switch (c) {
    case HrvCategory::killing_civilians: return "killing_civilians";
    case HrvCategory::civil_object_destruction: return "civil_object_destruction";
    case HrvCategory::rape_torture_execution: return "rape_torture_execution";
    case HrvCategory::prisoner_mistreatment: return "prisoner_mistreatment";
  }
  return "killing_civilians";
}

std::optional<HrvCategory> parse_hrv_category(std::string_view s) {
  for (auto c : {HrvCategory::killing_civilians, HrvCategory::civil_object_destruction,
                 HrvCategory::rape_torture_execution, HrvCategory::prisoner_mistreatment}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

AgreementReport cohens_kappa(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw Error(ErrorKind::input, "label sequences differ in length");
  }
  if (labels_a.empty()) throw Error(ErrorKind::input, "no items to compare");
  std::size_t agree = 0;
  std::size_t pos_a = 0;
  std::size_t pos_b = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    const int a = labels_a[i];
    const int b = labels_b[i];
    if ((a != 0 && a != 1) || (b != 0 && b != 1)) {
      throw Error(ErrorKind::input, "labels must be 0 or 1");
    }
    agree += a == b;
    pos_a += a;
    pos_b += b;
  }
  const double n = static_cast<double>(labels_a.size());
  AgreementReport r;
  r.n_items = labels_a.size();
  r.observed_agreement = static_cast<double>(agree) / n;
  const double pa1 = static_cast<double>(pos_a) / n;
  const double pb1 = static_cast<double>(pos_b) / n;
  r.chance_agreement = pa1 * pb1 + (1.0 - pa1) * (1.0 - pb1);
  if (r.chance_agreement >= 1.0) {
    r.degenerate = true;
    r.kappa = r.observed_agreement >= 1.0 ? 1.0 : 0.0;
  } else {
    r.kappa = (r.observed_agreement - r.chance_agreement) / (1.0 - r.chance_agreement);
  }
  return r;
}

AgreementReport annotator_agreement(std::span<const AnnotationRecord> records,
                                    std::string_view annotator_a, std::string_view annotator_b) {
  std::vector<int> a;
  std::vector<int> b;
  for (const auto& rec : records) {
    const auto ia = rec.labels.find(std::string(annotator_a));
    const auto ib = rec.labels.find(std::string(annotator_b));
    if (ia == rec.labels.end() || ib == rec.labels.end()) continue;
    a.push_back(ia->second);
    b.push_back(ib->second);
  }
  if (a.empty()) {
    throw Error(ErrorKind::input, "no items labeled by both " + std::string(annotator_a) + " and " +
                                      std::string(annotator_b));
  }
  return cohens_kappa(a, b);
}

PoolSelection select_double_annotation_pool(std::span<const AnnotationRecord> prelabels,
                                            const std::set<PostKey>& classifier_flags,
                                            std::uint64_t seed, std::string_view prelabel_id) {
  std::map<PostKey, bool> post_positive;
  for (const auto& rec : prelabels) {
    const auto it = rec.labels.find(std::string(prelabel_id));
    if (it == rec.labels.end()) {
      throw Error(ErrorKind::input, "sentence " + to_string(rec.key) + " has no pre-label");
    }
    auto& flag = post_positive[rec.key.post()];
    flag = flag || it->second == 1;
  }
  for (const auto& key : classifier_flags) {
    if (post_positive.count(key) == 0) {
      throw Error(ErrorKind::input, "flagged post " + to_string(key) + " has no pre-labels");
    }
  }

  PoolSelection sel;
  std::set<PostKey> pool;
  std::vector<PostKey> negatives;
  for (const auto& [key, positive] : post_positive) {
    if (positive) {
      pool.insert(key);
    } else if (classifier_flags.count(key) == 0) {
      negatives.push_back(key);
    }
  }
  sel.positive_posts = pool.size();

  std::mt19937_64 rng(seed);
  std::size_t want = sel.positive_posts;
  if (negatives.size() < want) {
    sel.warnings.push_back("only " + std::to_string(negatives.size()) +
                           " all-negative posts available, " + std::to_string(want) +
                           " requested; taking all");
    want = negatives.size();
  }
  std::shuffle(negatives.begin(), negatives.end(), rng);
  pool.insert(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(want));
  sel.negative_sample = want;

  for (const auto& key : classifier_flags) {
    if (pool.insert(key).second) ++sel.flagged_added;
  }
  sel.posts.assign(pool.begin(), pool.end());
  std::shuffle(sel.posts.begin(), sel.posts.end(), rng);
  return sel;
}

std::vector<AnnotationRecord> adjudicate(std::span<const AnnotationRecord> records,
                                         std::string_view adjudicator_id,
                                         std::string_view prelabel_id) {
  std::vector<AnnotationRecord> out(records.begin(), records.end());
  std::vector<std::string> conflicts;
  for (auto& rec : out) {
    std::set<int> votes;
    for (const auto& [annotator, label] : rec.labels) {
      if (annotator == adjudicator_id || annotator == prelabel_id) continue;
      votes.insert(label);
    }
    if (votes.empty()) {
      if (const auto pre = rec.labels.find(std::string(prelabel_id)); pre != rec.labels.end()) {
        votes.insert(pre->second);
      }
    }
    const auto adj = rec.labels.find(std::string(adjudicator_id));
    if (votes.size() == 1) {
      rec.gold = *votes.begin();
    } else if (adj != rec.labels.end()) {
      rec.gold = adj->second;
    } else if (votes.empty()) {
      throw Error(ErrorKind::input, "sentence " + to_string(rec.key) + " has no labels");
    } else {
      conflicts.push_back(to_string(rec.key));
    }
  }
  if (!conflicts.empty()) {
    std::string msg = std::to_string(conflicts.size()) + " unresolved disagreement(s):";
    for (const auto& k : conflicts) msg += " " + k;
    throw Error(ErrorKind::unresolved_conflict, msg);
  }
  return out;
}

GoldTotals gold_totals(std::span<const AnnotationRecord> records) {
  GoldTotals t;
  for (const auto& rec : records) {
    if (!rec.gold) continue;
    ++t.total;
    (*rec.gold == 1 ? t.positive : t.negative) += 1;
  }
  return t;
}

namespace {

constexpr std::string_view kPositiveChoice = "HRV";
constexpr std::string_view kNegativeChoice = "non-HRV";

[[noreturn]] void schema_error(std::size_t task, const std::string& field, const std::string& what) {
  throw Error(ErrorKind::schema,
              "task " + std::to_string(task) + ", field " + field + ": " + what);
}

const json& require(const json& obj, std::string_view key, std::size_t task, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(task, path + std::string(key), "missing");
  return *it;
}

bool is_label_result(const json& item) {
  if (!item.is_object()) return false;
  const auto value = item.find("value");
  if (value == item.end() || !value->is_object()) return false;
  const auto choices = value->find("choices");
  if (choices == value->end() || !choices->is_array() || choices->size() != 1) return false;
  const auto& c = (*choices)[0];
  return c.is_string() && (c == kPositiveChoice || c == kNegativeChoice);
}

}  // namespace

std::vector<AnnotationRecord> import_annotations(std::string_view content) {
  const json doc = json::parse(content, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::schema, "annotation file is not valid JSON");
  if (!doc.is_array()) throw Error(ErrorKind::schema, "annotation file must be a list of tasks");

  std::vector<AnnotationRecord> out;
  out.reserve(doc.size());
  for (std::size_t t = 0; t < doc.size(); ++t) {
    const json& task = doc[t];
    if (!task.is_object()) schema_error(t, "<task>", "not an object");
    AnnotationRecord rec;

    const json& data = require(task, "data", t, "");
    if (!data.is_object()) schema_error(t, "data", "not an object");
    const json& text = require(data, "text", t, "data.");
    const json& post_id = require(data, "post_id", t, "data.");
    const json& channel_id = require(data, "channel_id", t, "data.");
    const json& sent_index = require(data, "sent_index", t, "data.");
    if (!text.is_string()) schema_error(t, "data.text", "expected string");
    if (!post_id.is_number_integer()) schema_error(t, "data.post_id", "expected integer");
    if (!channel_id.is_string()) schema_error(t, "data.channel_id", "expected string");
    if (!sent_index.is_number_integer()) schema_error(t, "data.sent_index", "expected integer");
    rec.text = text.get<std::string>();
    rec.key = {channel_id.get<std::string>(), post_id.get<std::int64_t>(), sent_index.get<int>()};
    for (const auto& [k, v] : data.items()) {
      if (k != "text" && k != "post_id" && k != "channel_id" && k != "sent_index") rec.data_extra[k] = v;
    }

    if (const auto anns = task.find("annotations"); anns != task.end()) {
      if (!anns->is_array()) schema_error(t, "annotations", "expected list");
      for (std::size_t a = 0; a < anns->size(); ++a) {
        const json& ann = (*anns)[a];
        const std::string path = "annotations[" + std::to_string(a) + "]";
        if (!ann.is_object()) schema_error(t, path, "not an object");
        const json& by = require(ann, "completed_by", t, path + ".");
        std::string annotator;
        if (by.is_string()) {
          annotator = by.get<std::string>();
        } else if (by.is_number_integer()) {
          annotator = std::to_string(by.get<std::int64_t>());
        } else {
          schema_error(t, path + ".completed_by", "expected string");
        }
        const json& result = require(ann, "result", t, path + ".");
        if (!result.is_array()) schema_error(t, path + ".result", "expected list");
        std::optional<int> label;
        json others = json::array();
        for (const auto& item : result) {
          if (!label && is_label_result(item)) {
            label = item["value"]["choices"][0] == kPositiveChoice ? 1 : 0;
          } else {
            others.push_back(item);
          }
        }
        if (!label) schema_error(t, path + ".result", "no HRV/non-HRV choice");
        if (!rec.labels.emplace(annotator, *label).second) {
          schema_error(t, path + ".completed_by", "duplicate annotator " + annotator);
        }
        json extra = json::object();
        for (const auto& [k, v] : ann.items()) {
          if (k != "completed_by" && k != "result") extra[k] = v;
        }
        if (!others.empty()) extra["result_extra"] = std::move(others);
        if (!extra.empty()) rec.annotation_extra[annotator] = std::move(extra);
      }
    }

    if (const auto gold = task.find("gold"); gold != task.end() && !gold->is_null()) {
      if (!gold->is_number_integer() || (*gold != 0 && *gold != 1)) {
        schema_error(t, "gold", "expected 0 or 1");
      }
      rec.gold = gold->get<int>();
    }
    if (const auto cat = task.find("hrv_category"); cat != task.end() && !cat->is_null()) {
      const auto parsed = cat->is_string() ? parse_hrv_category(cat->get<std::string>()) : std::nullopt;
      if (!parsed) schema_error(t, "hrv_category", "unknown category");
      rec.category = parsed;
    }
    for (const auto& [k, v] : task.items()) {
      if (k != "data" && k != "annotations" && k != "gold" && k != "hrv_category") rec.task_extra[k] = v;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::string export_annotations(std::span<const AnnotationRecord> records) {
  json doc = json::array();
  for (const auto& rec : records) {
    json task = rec.task_extra.is_object() ? rec.task_extra : json::object();
    json data = rec.data_extra.is_object() ? rec.data_extra : json::object();
    data["text"] = rec.text;
    data["post_id"] = rec.key.post_id;
    data["channel_id"] = rec.key.channel_id;
    data["sent_index"] = rec.key.sent_index;
    task["data"] = std::move(data);

    json anns = json::array();
    for (const auto& [annotator, label] : rec.labels) {
      json ann = json::object();
      json result = json::array();
      result.push_back({{"value", {{"choices", {label == 1 ? kPositiveChoice : kNegativeChoice}}}}});
      if (const auto extra = rec.annotation_extra.find(annotator); extra != rec.annotation_extra.end()) {
        for (const auto& [k, v] : extra->second.items()) {
          if (k == "result_extra") {
            for (const auto& item : v) result.push_back(item);
          } else {
            ann[k] = v;
          }
        }
      }
      ann["completed_by"] = annotator;
      ann["result"] = std::move(result);
      anns.push_back(std::move(ann));
    }
    task["annotations"] = std::move(anns);
    if (rec.gold) task["gold"] = *rec.gold;
    if (rec.category) task["hrv_category"] = std::string(to_string(*rec.category));
    doc.push_back(std::move(task));
  }
  return doc.dump(2) + "\n";
}

std::vector<Sentence> gold_sentences(std::span<const AnnotationRecord> records) {
  std::vector<Sentence> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (!rec.gold) {
      throw Error(ErrorKind::input, "sentence " + to_string(rec.key) + " has no gold label");
    }
    Sentence s;
    s.channel_id = rec.key.channel_id;
    s.post_id = rec.key.post_id;
    s.sent_index = rec.key.sent_index;
    s.text = rec.text;
    s.label = rec.gold;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hrv
