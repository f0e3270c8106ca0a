#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hrv/corpus.hpp"

namespace hrv {

struct AugmentationRecord;

struct DatasetSplit {
  std::set<PostKey> train_posts;
  std::set<PostKey> test_posts;
  std::uint64_t seed = 0;
  double ratio = 0.8;

  bool in_train(const PostKey& k) const { return train_posts.count(k) != 0; }
  bool in_test(const PostKey& k) const { return test_posts.count(k) != 0; }
};

// Uniform post-level partition; round(ratio * N) posts go to train, clamped so
// both sides keep at least one post.
DatasetSplit split_posts(std::span<const PostKey> posts, double ratio, std::uint64_t seed);
DatasetSplit split_posts(std::span<const Sentence> labeled, double ratio, std::uint64_t seed);

std::vector<Sentence> select_side(std::span<const Sentence> sentences, const std::set<PostKey>& side);

// Manifest: {"seed", "ratio", "train": [[channel_id, post_id], ...], "test": [...]}.
std::string write_split_manifest(const DatasetSplit& split);
DatasetSplit read_split_manifest(std::string_view content);

enum class VariantId { D1, D2, D3, D4 };
std::string_view to_string(VariantId v);
std::optional<VariantId> parse_variant(std::string_view s);

struct DatasetVariant {
  VariantId id = VariantId::D1;
  std::vector<Sentence> examples;
  std::map<std::string, std::int64_t> counts;  // by source kind: original, bt, llm
  std::vector<std::string> notes;
};

struct VariantInputs {
  std::span<const Sentence> base;                  // labeled train-side sentences
  std::span<const AugmentationRecord> back_translations;
  std::span<const AugmentationRecord> generated;
  const DatasetSplit* split = nullptr;             // enables the leakage check when set
  // Externally reported size for this variant; a mismatch with the composed
  // size is recorded as a note rather than forced.
  std::optional<std::int64_t> reported_size;
};

// D1 = base, D2 = base + bt, D3 = base + llm, D4 = base + bt + llm.
// Throws leakage when a back-translation originates from a test-side post
// or from a sentence that is not in the base set.
DatasetVariant build_variant(const VariantInputs& inputs, VariantId id);

struct ClassStats {
  std::int64_t total = 0;
  std::int64_t positive = 0;
  double positive_fraction = 0.0;
  std::map<std::string, std::int64_t> by_source;
  std::map<std::string, std::int64_t> positive_by_source;
};

ClassStats class_stats(std::span<const Sentence> examples);

}  // namespace hrv
