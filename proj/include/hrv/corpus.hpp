#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hrv {

enum class Affiliation { russia, ukraine, unclear };

std::string_view to_string(Affiliation a);
std::optional<Affiliation> parse_affiliation(std::string_view s);

using Timestamp = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS[.fff]]" with an optional "Z" or
// "+HH:MM"/"-HH:MM" offset (a space may replace the 'T'). Local times without
// an offset are taken as UTC.
std::optional<Timestamp> parse_iso8601(std::string_view s);
std::string format_iso8601(Timestamp t);

struct PostKey {
  std::string channel_id;
  std::int64_t post_id = 0;
  auto operator<=>(const PostKey&) const = default;
};

struct SentenceKey {
  std::string channel_id;
  std::int64_t post_id = 0;
  int sent_index = 0;
  PostKey post() const { return {channel_id, post_id}; }
  auto operator<=>(const SentenceKey&) const = default;
};

std::string to_string(const PostKey& k);
std::string to_string(const SentenceKey& k);

// Provenance of a sentence: an original post sentence, a back-translation
// through chain N ("bt:N"), or a generated example from prompt P ("llm:P").
struct Source {
  enum class Kind { original, back_translation, llm };
  Kind kind = Kind::original;
  std::string tag;

  static Source original() { return {}; }
  static Source back_translation(int chain_id);
  static Source llm(std::string prompt_id);
  static std::optional<Source> parse(std::string_view s);
  std::string str() const;
  auto operator<=>(const Source&) const = default;
};

struct Channel {
  std::string channel_id;
  Affiliation affiliation = Affiliation::unclear;
  std::int64_t post_count = 0;
};

struct Post {
  std::int64_t post_id = 0;
  std::string channel_id;
  Timestamp date{};
  std::string text;
  bool outside_window = false;

  PostKey key() const { return {channel_id, post_id}; }
};

struct Sentence {
  std::string channel_id;
  std::int64_t post_id = 0;
  int sent_index = 0;
  std::string text;
  Source source;
  std::optional<int> label;

  SentenceKey key() const { return {channel_id, post_id, sent_index}; }
  PostKey post() const { return {channel_id, post_id}; }
};

struct CorpusWindow {
  Timestamp begin;
  Timestamp end;  // inclusive, end of day
  static CorpusWindow conflict_default();
  bool contains(Timestamp t) const { return t >= begin && t <= end; }
};

class Corpus {
 public:
  const std::vector<Channel>& channels() const { return channels_; }
  const std::vector<Post>& posts() const { return posts_; }
  bool empty() const { return posts_.empty(); }

  const Channel* find_channel(std::string_view id) const;
  bool contains(const PostKey& key) const { return index_.count(key) != 0; }

  // Returns false when the key is already present (first occurrence wins).
  bool add(Post post, Affiliation affiliation);

 private:
  std::vector<Channel> channels_;
  std::vector<Post> posts_;
  std::map<PostKey, std::size_t> index_;
  std::map<std::string, std::size_t, std::less<>> channel_index_;
};

struct IngestReport {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t duplicates = 0;
  std::size_t outside_window = 0;
  std::vector<std::string> warnings;
};

struct IngestResult {
  Corpus corpus;
  IngestReport report;
};

// Reads line-delimited export records. Malformed records are skipped with a
// warning; only an unreadable stream aborts.
IngestResult ingest_export(std::istream& in,
                           const CorpusWindow& window = CorpusWindow::conflict_default());
// Merges into an existing corpus; used for multi-file ingestion.
void ingest_into(Corpus& corpus, std::istream& in, IngestReport& report,
                 const CorpusWindow& window = CorpusWindow::conflict_default());

std::string write_corpus(const Corpus& corpus);

// For each channel, min(n_per_channel, available) posts drawn uniformly
// without replacement; output ordered by channel then draw order.
std::vector<Post> sample_posts(const Corpus& corpus, int n_per_channel, std::uint64_t seed);

struct CorpusStats {
  std::int64_t n_channels = 0;
  std::int64_t n_posts = 0;
  std::map<Affiliation, std::int64_t> affiliation_counts;
  double mean_posts_per_channel = 0.0;
  double mean_sentence_len_words = 0.0;
  std::int64_t mode_sentence_len_words = 0;
};

class AbbreviationLexicon;
CorpusStats corpus_stats(const Corpus& corpus, const AbbreviationLexicon& lexicon);

struct LengthStats {
  double mean = 0.0;
  std::int64_t mode = 0;  // smallest length among ties
};
LengthStats sentence_length_stats(std::span<const Sentence> sentences);

// Sentence file: one JSON object per line with channel_id, post_id,
// sent_index, text, source and an optional 0/1 label.
std::string write_sentences(std::span<const Sentence> sentences);
std::vector<Sentence> read_sentences(std::istream& in);

}  // namespace hrv
