#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hrv {

class StopwordList {
 public:
  StopwordList() = default;
  // Russian + Ukrainian list compiled in from data/stopwords_ru_uk.txt.
  static StopwordList builtin();
  static StopwordList parse(std::string_view content);
  static StopwordList load(const std::filesystem::path& path);

  bool contains(std::string_view folded) const { return words_.find(folded) != words_.end(); }
  void insert(std::string_view word);
  std::size_t size() const { return words_.size(); }
  const std::set<std::string, std::less<>>& words() const { return words_; }

 private:
  std::set<std::string, std::less<>> words_;
};

struct KeywordFeatures {
  double casing = 0.0;
  double position = 0.0;
  double frequency_norm = 0.0;
  double relatedness = 0.0;
  double dispersion = 0.0;
};

struct KeywordScore {
  std::string term;  // case folded
  double score = 0.0;  // lower is more important
  std::size_t frequency = 0;
  KeywordFeatures features;
};

struct KeywordProfile {
  std::vector<KeywordScore> keywords;  // ascending score
  std::size_t k = 30;
  std::vector<std::string> warnings;

  std::vector<std::string> terms() const;
  bool contains(std::string_view folded) const;
};

struct KeywordOptions {
  std::size_t k = 30;
  std::size_t window = 1;         // co-occurrence window for relatedness
  std::size_t min_term_chars = 3; // shorter terms count as stopwords
};

// Single-document statistical keyword extraction over unigrams: each term is
// scored from its casing, the median index of the sentences it occurs in, its
// frequency normalized by mean + std of all candidate frequencies, the
// diversity of its left/right neighbours, and the fraction of sentences it
// appears in. The text is segmented into sentences first.
KeywordProfile extract_keywords(std::string_view document, const StopwordList& stopwords,
                                const KeywordOptions& options = {});

// Same, over pre-segmented sentences.
KeywordProfile extract_keywords(std::span<const std::string> sentences, const StopwordList& stopwords,
                                const KeywordOptions& options = {});

enum class MatchMode { token, substring };

// 1 when any case-folded word token of the sentence equals a profile term
// (or, in substring mode, when a term occurs anywhere in the folded text).
int keyword_classify(std::string_view sentence, const KeywordProfile& profile,
                     MatchMode mode = MatchMode::token);

// "term<TAB>score" per line.
std::string write_profile(const KeywordProfile& profile);
KeywordProfile read_profile(std::string_view content);

}  // namespace hrv
