#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hrv/classifier.hpp"
#include "hrv/corpus.hpp"

namespace hrv {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Position-aligned 0/1 vectors; a length mismatch throws alignment.
ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> golds);

// Aligned by sentence key. Every labeled gold sentence needs exactly one
// prediction and vice versa, otherwise alignment is thrown.
ConfusionCounts confusion(std::span<const PredictionRecord> predictions, std::span<const Sentence> golds);

struct Ratio {
  double value = 0.0;
  bool degenerate = false;  // empty denominator; value is 0
};

Ratio precision(const ConfusionCounts& c);
Ratio recall(const ConfusionCounts& c);

// (1 + b^2) P R / (b^2 P + R); 0 when P == R == 0. Throws input for beta <= 0.
double f_beta(double precision, double recall, double beta);
double f_beta(const ConfusionCounts& c, double beta);

enum class Level { sentence, post };
std::string_view to_string(Level level);
std::optional<Level> parse_level(std::string_view s);

struct MetricsReport {
  Level level = Level::sentence;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  std::optional<ConfusionCounts> counts;
  std::string model;
  std::string variant;
  std::vector<std::string> flags;  // "precision_undefined", "recall_undefined"
};

MetricsReport metrics_report(const ConfusionCounts& c, Level level, std::string model = {},
                             std::string variant = {});

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

struct PostLabels {
  std::map<PostKey, int> predicted;
  std::map<PostKey, int> gold;
};

// Post label = 1 iff any of its sentences is 1, applied to predictions and
// golds separately. A prediction without a gold sentence (or the reverse)
// throws alignment.
PostLabels rollup_posts(std::span<const PredictionRecord> predictions, std::span<const Sentence> golds);

// Any-positive aggregation of one labeling.
std::map<PostKey, int> rollup(std::span<const SentenceKey> keys, std::span<const int> labels);

ConfusionCounts confusion(const PostLabels& posts);

struct PerformanceReport {
  std::string csv;
  std::string table;
  std::vector<std::string> footnotes;
  std::size_t best_row = 0;  // index into the ordered rows
  std::vector<MetricsReport> rows;
};

// Rows grouped by variant (D1..D4, then others alphabetically), models in
// first-seen order within a variant. Rows whose stored F1/F2 differ from the
// values recomputed from P and R by more than `tolerance` get a footnote.
PerformanceReport performance_report(std::span<const MetricsReport> runs, double tolerance = 0.005);

// Analyst review file: one JSON object per post with at least one predicted
// HRV sentence, listing the post's sentences and the flagged indices.
std::string write_flagged_posts(std::span<const PredictionRecord> predictions, std::span<const Sentence> sentences);

}  // namespace hrv
