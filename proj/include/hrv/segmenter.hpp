#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hrv/corpus.hpp"

namespace hrv {

// Case-folded abbreviations, each including its final period ("г.", "т.д.").
// A period that ends one of these tokens never closes a sentence.
class AbbreviationLexicon {
 public:
  AbbreviationLexicon() = default;
  explicit AbbreviationLexicon(std::set<std::string, std::less<>> entries);

  // Russian/Ukrainian list compiled in from data/abbreviations_ru_uk.txt.
  static AbbreviationLexicon builtin();
  // One entry per line, '#' starts a comment.
  static AbbreviationLexicon load(const std::filesystem::path& path);
  static AbbreviationLexicon parse(std::string_view content);

  bool contains(std::string_view token) const;
  void insert(std::string_view entry);
  std::size_t size() const { return entries_.size(); }
  const std::set<std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::set<std::string, std::less<>> entries_;
};

// Byte span of one sentence inside the post text.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Rule-based splitter: a run of . ! ? … (plus trailing closing quotes or
// brackets) followed by whitespace ends a sentence, unless the run is a single
// period closing a lexicon abbreviation. Spans are trimmed and never empty.
std::vector<SentenceSpan> sentence_spans(std::string_view text, const AbbreviationLexicon& lexicon);

std::vector<std::string> split_sentences(std::string_view text, const AbbreviationLexicon& lexicon);

// Throws empty_input for blank text.
std::vector<Sentence> segment_post(const Post& post, const AbbreviationLexicon& lexicon);
std::vector<Sentence> segment_post(std::string_view text, const AbbreviationLexicon& lexicon);

std::vector<Sentence> segment_corpus(const Corpus& corpus, const AbbreviationLexicon& lexicon);

}  // namespace hrv
