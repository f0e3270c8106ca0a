#include "hrv/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"

#include "hrv/augmentation.hpp"
#include "hrv/error.hpp"

namespace hrv {

using nlohmann::json;

DatasetSplit split_posts(std::span<const PostKey> posts, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::input, "split ratio must be in (0, 1)");
  std::vector<PostKey> keys(posts.begin(), posts.end());
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  if (keys.size() < 2) throw Error(ErrorKind::input, "need at least two posts to split");

  const auto n = static_cast<std::int64_t>(keys.size());
  const auto n_train = std::clamp<std::int64_t>(std::llround(ratio * static_cast<double>(n)), 1, n - 1);

  std::mt19937_64 rng(seed);
  std::shuffle(keys.begin(), keys.end(), rng);

  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.train_posts.insert(keys.begin(), keys.begin() + n_train);
  split.test_posts.insert(keys.begin() + n_train, keys.end());
  return split;
}

DatasetSplit split_posts(std::span<const Sentence> labeled, double ratio, std::uint64_t seed) {
  std::vector<PostKey> keys;
  keys.reserve(labeled.size());
  for (const auto& s : labeled) {
    if (s.source.kind == Source::Kind::original) keys.push_back(s.post());
  }
  return split_posts(keys, ratio, seed);
}

std::vector<Sentence> select_side(std::span<const Sentence> sentences, const std::set<PostKey>& side) {
  std::vector<Sentence> out;
  for (const auto& s : sentences) {
    if (side.count(s.post()) != 0) out.push_back(s);
  }
  return out;
}

namespace {

json keys_to_json(const std::set<PostKey>& keys) {
  json arr = json::array();
  for (const auto& k : keys) arr.push_back(json::array({k.channel_id, k.post_id}));
  return arr;
}

std::set<PostKey> keys_from_json(const json& arr) {
  std::set<PostKey> out;
  for (const auto& item : arr) {
    out.insert({item.at(0).get<std::string>(), item.at(1).get<std::int64_t>()});
  }
  return out;
}

}  // namespace

std::string write_split_manifest(const DatasetSplit& split) {
  const json j = {{"seed", split.seed},
                  {"ratio", split.ratio},
                  {"train", keys_to_json(split.train_posts)},
                  {"test", keys_to_json(split.test_posts)}};
  return j.dump(1) + "\n";
}

DatasetSplit read_split_manifest(std::string_view content) {
  const json j = json::parse(content, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::schema, "split manifest is not a JSON object");
  try {
    DatasetSplit split;
    split.seed = j.at("seed").get<std::uint64_t>();
    split.ratio = j.at("ratio").get<double>();
    split.train_posts = keys_from_json(j.at("train"));
    split.test_posts = keys_from_json(j.at("test"));
    for (const auto& k : split.train_posts) {
      if (split.test_posts.count(k) != 0) {
        throw Error(ErrorKind::schema, "post " + to_string(k) + " is on both sides of the split");
      }
    }
    return split;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("split manifest: ") + e.what());
  }
}

std::string_view to_string(VariantId v) {
  switch (v) {
    case VariantId::D1: return "D1";
    case VariantId::D2: return "D2";
    case VariantId::D3: return "D3";
    case VariantId::D4: return "D4";
  }
  return "D1";
}

std::optional<VariantId> parse_variant(std::string_view s) {
  if (s == "D1") return VariantId::D1;
  if (s == "D2") return VariantId::D2;
  if (s == "D3") return VariantId::D3;
  if (s == "D4") return VariantId::D4;
  return std::nullopt;
}

namespace {

std::string source_bucket(const Source& s) {
  switch (s.kind) {
    case Source::Kind::original: return "original";
    case Source::Kind::back_translation: return "bt";
    case Source::Kind::llm: return "llm";
  }
  return "original";
}

void check_augmentation(const AugmentationRecord& r, Source::Kind expected) {
  if (r.source.kind != expected) {
    throw Error(ErrorKind::input, "augmentation record has source " + r.source.str() +
                                      " in the wrong input list");
  }
  if (!r.accepted) throw Error(ErrorKind::input, "augmentation record has not been accepted: " + r.text);
}

}  // namespace

DatasetVariant build_variant(const VariantInputs& inputs, VariantId id) {
  const bool with_bt = id == VariantId::D2 || id == VariantId::D4;
  const bool with_llm = id == VariantId::D3 || id == VariantId::D4;

  DatasetVariant v;
  v.id = id;
  v.counts = {{"original", 0}, {"bt", 0}, {"llm", 0}};

  std::set<SentenceKey> base_keys;
  for (const auto& s : inputs.base) {
    if (!s.label || (*s.label != 0 && *s.label != 1)) {
      throw Error(ErrorKind::input, "base sentence " + to_string(s.key()) + " has no 0/1 label");
    }
    if (inputs.split != nullptr && inputs.split->in_test(s.post())) {
      throw Error(ErrorKind::leakage, "base sentence " + to_string(s.key()) + " belongs to the test side");
    }
    base_keys.insert(s.key());
    v.examples.push_back(s);
    ++v.counts[source_bucket(s.source)];
  }

  if (with_bt) {
    for (const auto& r : inputs.back_translations) {
      check_augmentation(r, Source::Kind::back_translation);
      if (!r.origin) throw Error(ErrorKind::input, "back-translation without origin");
      if (inputs.split != nullptr && inputs.split->in_test(r.origin->post())) {
        throw Error(ErrorKind::leakage,
                    "back-translation derives from test-side sentence " + to_string(*r.origin));
      }
      if (base_keys.count(*r.origin) == 0) {
        throw Error(ErrorKind::leakage,
                    "back-translation origin " + to_string(*r.origin) + " is not a training sentence");
      }
      Sentence s;
      s.channel_id = r.origin->channel_id;
      s.post_id = r.origin->post_id;
      s.sent_index = r.origin->sent_index;
      s.text = r.text;
      s.source = r.source;
      s.label = 1;
      v.examples.push_back(std::move(s));
      ++v.counts["bt"];
    }
  }

  if (with_llm) {
    std::map<std::string, std::int64_t> next_index;
    for (const auto& r : inputs.generated) {
      check_augmentation(r, Source::Kind::llm);
      // Generated examples have no post; each gets its own synthetic one.
      Sentence s;
      s.channel_id = r.source.str();
      s.post_id = next_index[s.channel_id]++;
      s.sent_index = 0;
      s.text = r.text;
      s.source = r.source;
      s.label = 1;
      v.examples.push_back(std::move(s));
      ++v.counts["llm"];
    }
  }

  const auto size = static_cast<std::int64_t>(v.examples.size());
  if (inputs.reported_size && *inputs.reported_size != size) {
    v.notes.push_back(std::string(to_string(id)) + " composed as D1 (" + std::to_string(v.counts["original"]) +
                      ") + bt (" + std::to_string(v.counts["bt"]) + ") + llm (" +
                      std::to_string(v.counts["llm"]) + ") = " + std::to_string(size) +
                      " sentences; the reported size " + std::to_string(*inputs.reported_size) +
                      " does not equal the sum of its components (difference " +
                      std::to_string(*inputs.reported_size - size) + ")");
  }
  return v;
}

ClassStats class_stats(std::span<const Sentence> examples) {
  if (examples.empty()) throw Error(ErrorKind::empty_input, "variant has no examples");
  ClassStats stats;
  for (const auto& s : examples) {
    if (!s.label) throw Error(ErrorKind::input, "unlabeled example " + to_string(s.key()));
    const auto bucket = source_bucket(s.source);
    ++stats.total;
    ++stats.by_source[bucket];
    if (*s.label == 1) {
      ++stats.positive;
      ++stats.positive_by_source[bucket];
    }
  }
  stats.positive_fraction = static_cast<double>(stats.positive) / static_cast<double>(stats.total);
  return stats;
}

}  // namespace hrv
