#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hrv/corpus.hpp"

namespace hrv {

enum class HrvCategory {
  killing_civilians,
  civil_object_destruction,
  rape_torture_execution,
  prisoner_mistreatment,
};

std::string_view to_string(HrvCategory c);
std::optional<HrvCategory> parse_hrv_category(std::string_view s);

inline constexpr std::string_view kPrelabelAnnotator = "prelabel";

struct AnnotationRecord {
  SentenceKey key;
  std::string text;
  std::map<std::string, int> labels;  // annotator id -> 0/1
  std::optional<int> gold;
  std::optional<HrvCategory> category;

  // Interchange fields this library does not interpret, kept for round trips.
  nlohmann::json task_extra = nlohmann::json::object();
  nlohmann::json data_extra = nlohmann::json::object();
  std::map<std::string, nlohmann::json> annotation_extra;

  bool operator==(const AnnotationRecord&) const = default;
};

struct AgreementReport {
  std::size_t n_items = 0;
  double observed_agreement = 0.0;
  double chance_agreement = 0.0;
  double kappa = 0.0;
  // Chance agreement was 1 (both raters constant on the same class); kappa is
  // reported as 1 when observed agreement is also 1, otherwise 0.
  bool degenerate = false;
};

// Unweighted Cohen's kappa. For two classes the linear and quadratic weighted
// variants reduce to this, since every disagreement has the same distance.
AgreementReport cohens_kappa(std::span<const int> labels_a, std::span<const int> labels_b);

// Kappa over the records labeled by both annotators.
AgreementReport annotator_agreement(std::span<const AnnotationRecord> records,
                                    std::string_view annotator_a, std::string_view annotator_b);

struct PoolSelection {
  std::vector<PostKey> posts;  // presentation order
  std::size_t positive_posts = 0;
  std::size_t negative_sample = 0;
  std::size_t flagged_added = 0;
  std::vector<std::string> warnings;
};

// Pool for double annotation: every post with a positive pre-label, an equally
// sized uniform sample of all-negative posts, and every classifier-flagged
// post, shuffled by `seed`.
PoolSelection select_double_annotation_pool(std::span<const AnnotationRecord> prelabels,
                                            const std::set<PostKey>& classifier_flags,
                                            std::uint64_t seed,
                                            std::string_view prelabel_id = kPrelabelAnnotator);

// Gold = the agreed label of the annotators other than the adjudicator (the
// pre-label only counts when nobody else labeled the sentence); disagreements
// take the adjudicator's label. Throws unresolved_conflict listing every key
// that disagrees without an adjudicator label.
std::vector<AnnotationRecord> adjudicate(std::span<const AnnotationRecord> records,
                                         std::string_view adjudicator_id,
                                         std::string_view prelabel_id = kPrelabelAnnotator);

struct GoldTotals {
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t total = 0;
};
GoldTotals gold_totals(std::span<const AnnotationRecord> records);

// Annotation-tool interchange: a JSON list of tasks
//   {data: {text, post_id, channel_id, sent_index},
//    annotations: [{completed_by, result: [{value: {choices: ["HRV"|"non-HRV"]}}]}]}
// plus optional task-level "gold" and "hrv_category".
std::vector<AnnotationRecord> import_annotations(std::string_view content);
std::string export_annotations(std::span<const AnnotationRecord> records);

// Gold labels as labeled sentences, for feeding dataset assembly.
std::vector<Sentence> gold_sentences(std::span<const AnnotationRecord> records);

}  // namespace hrv
