#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "hrv/corpus.hpp"
#include "hrv/error.hpp"

namespace hrv {

struct TranslationChain {
  int chain_id = 0;
  // source, pivot 1, pivot 2, source
  std::vector<std::string> languages;

  // Throws config if the chain is not source -> two pivots -> source.
  void validate() const;
  std::string describe() const;  // "ru-ar-ja-ru"
};

// Russian via Arabic/Japanese, Turkish/Farsi, Chinese/Polish, Hebrew/German
// and Thai/Greek, as ids 1..5.
std::vector<TranslationChain> default_chains();
// "1,3,5" against a chain set.
std::vector<TranslationChain> select_chains(std::span<const TranslationChain> all, std::string_view ids);

struct AugmentationRecord {
  std::optional<SentenceKey> origin;  // back-translations only
  std::string text;
  Source source;
  bool accepted = false;

  bool operator==(const AugmentationRecord&) const = default;
};

// Line-delimited JSON: {"origin": {...}|null, "text", "source", "accepted"}.
std::string write_augmentation_records(std::span<const AugmentationRecord> records);
std::vector<AugmentationRecord> read_augmentation_records(std::istream& in);

struct GenerationPrompt {
  std::string prompt_id;
  std::string text;
  // Sent once after the first successful reply, e.g. to rebalance output.
  std::vector<std::string> follow_ups;
  int target_per_call = 10;
};

GenerationPrompt prompt_direct();     // P1
GenerationPrompt prompt_persona();    // P2
GenerationPrompt prompt_by_id(std::string_view id);

class TranslationBackend {
 public:
  virtual ~TranslationBackend() = default;
  // Implementations must be safe to call from several threads.
  virtual std::string translate(std::string_view src_lang, std::string_view dst_lang,
                                std::string_view text) = 0;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // One reply split into lines; nullopt when the model refuses.
  virtual std::optional<std::vector<std::string>> generate(std::string_view prompt) = 0;
};

class IdentityTranslator final : public TranslationBackend {
 public:
  std::string translate(std::string_view, std::string_view, std::string_view text) override {
    return std::string(text);
  }
};

// Replays request/response pairs from a fixture file:
//   {"request": {"kind": "translate", "src", "dst", "text"}, "response": "..."}
//   {"request": {"kind": "generate", "prompt"}, "response": "..." | null}
// Generate entries for the same prompt are replayed in file order; a null
// response is a refusal.
class RecordedFixture final : public TranslationBackend, public GenerationBackend {
 public:
  RecordedFixture() = default;
  // Throws schema with the offending line number.
  explicit RecordedFixture(std::string_view content);

  std::string translate(std::string_view src_lang, std::string_view dst_lang,
                        std::string_view text) override;
  std::optional<std::vector<std::string>> generate(std::string_view prompt) override;

  void add_translation(std::string src, std::string dst, std::string text, std::string response);
  void add_generation(std::string prompt, std::optional<std::string> response);

 private:
  std::map<std::tuple<std::string, std::string, std::string>, std::string> translations_;
  std::map<std::string, std::deque<std::optional<std::string>>, std::less<>> generations_;
  std::mutex mutex_;
};

// Splits a generated reply into candidate sentences, dropping list markers.
std::vector<std::string> split_generated_lines(std::string_view reply);

class ChainError : public Error {
 public:
  ChainError(int hop, const std::string& message)
      : Error(ErrorKind::chain, "hop " + std::to_string(hop) + ": " + message), hop_(hop) {}
  int hop() const noexcept { return hop_; }

 private:
  int hop_;
};

// src -> pivot1 -> pivot2 -> src. Throws ChainError (hop 1..3) on a backend
// failure or an empty intermediate.
std::string back_translate(std::string_view sentence, const TranslationChain& chain,
                           TranslationBackend& backend);

struct CampaignFailure {
  SentenceKey origin;
  int chain_id = 0;
  int hop = 0;
  std::string message;
};

struct CampaignResult {
  std::vector<AugmentationRecord> records;  // sorted by (origin, chain_id)
  std::vector<CampaignFailure> failures;
};

struct CampaignOptions {
  int parallelism = 1;
};

CampaignResult run_bt_campaign(std::span<const Sentence> positives,
                               std::span<const TranslationChain> chains,
                               TranslationBackend& backend, const CampaignOptions& options = {});

struct GenerationOptions {
  int max_retries = 3;  // consecutive refusals tolerated before giving up
};

struct GenerationResult {
  std::vector<AugmentationRecord> candidates;  // accepted == false
  std::size_t calls = 0;
  std::size_t refusals = 0;
  std::vector<std::string> warnings;
};

GenerationResult generate_llm_examples(const GenerationPrompt& prompt, GenerationBackend& backend,
                                       int n_total, const GenerationOptions& options = {});

// Marks every candidate not listed in `rejections` as accepted.
std::vector<AugmentationRecord> review_filter(std::span<const AugmentationRecord> candidates,
                                              const std::set<std::size_t>& rejections);

// Drops records whose normalized text matches an original sentence or an
// earlier record.
std::vector<AugmentationRecord> dedup(std::span<const AugmentationRecord> records,
                                      std::span<const Sentence> originals);

}  // namespace hrv
