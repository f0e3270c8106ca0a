#include "hrv/augmentation.hpp"

#include <algorithm>
#include <atomic>
#include <istream>
#include <thread>
#include <unordered_set>

#include "json.hpp"

#include "hrv/io.hpp"
#include "hrv/text.hpp"

namespace hrv {

using nlohmann::json;

void TranslationChain::validate() const {
  if (languages.size() != 4) {
    throw Error(ErrorKind::config, "chain " + std::to_string(chain_id) +
                                       " must list source, two pivots and source");
  }
  if (languages.front() != languages.back()) {
    throw Error(ErrorKind::config, "chain " + std::to_string(chain_id) + " must end in its source language");
  }
  for (const auto& lang : languages) {
    if (lang.empty()) throw Error(ErrorKind::config, "chain " + std::to_string(chain_id) + " has an empty language");
  }
  if (languages[1] == languages[0] || languages[2] == languages[0] || languages[1] == languages[2]) {
    throw Error(ErrorKind::config, "chain " + std::to_string(chain_id) + " pivots must be distinct");
  }
}

std::string TranslationChain::describe() const {
  std::string out;
  for (const auto& lang : languages) {
    if (!out.empty()) out.push_back('-');
    out += lang;
  }
  return out;
}

std::vector<TranslationChain> default_chains() {
  return {
      {1, {"ru", "ar", "ja", "ru"}},
      {2, {"ru", "tr", "fa", "ru"}},
      {3, {"ru", "zh", "pl", "ru"}},
      {4, {"ru", "he", "de", "ru"}},
      {5, {"ru", "th", "el", "ru"}},
  };
}

std::vector<TranslationChain> select_chains(std::span<const TranslationChain> all, std::string_view ids) {
  std::vector<TranslationChain> out;
  for (const auto& field : text::split(ids, ',')) {
    const auto id_text = text::trim(field);
    if (id_text.empty()) continue;
    int id = 0;
    try {
      id = std::stoi(std::string(id_text));
    } catch (const std::exception&) {
      throw Error(ErrorKind::config, "chain id '" + std::string(id_text) + "' is not a number");
    }
    const auto it = std::find_if(all.begin(), all.end(), [&](const auto& c) { return c.chain_id == id; });
    if (it == all.end()) throw Error(ErrorKind::config, "unknown chain id " + std::to_string(id));
    out.push_back(*it);
  }
  return out;
}

namespace {

json key_to_json(const SentenceKey& k) {
  return {{"channel_id", k.channel_id}, {"post_id", k.post_id}, {"sent_index", k.sent_index}};
}

}  // namespace

std::string write_augmentation_records(std::span<const AugmentationRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json j = {{"origin", r.origin ? key_to_json(*r.origin) : json(nullptr)},
              {"text", r.text},
              {"source", r.source.str()},
              {"accepted", r.accepted}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<AugmentationRecord> read_augmentation_records(std::istream& in) {
  std::vector<AugmentationRecord> out;
  io::for_each_line(in, [&](std::string_view line, std::size_t number) {
    const auto where = "augmentation file line " + std::to_string(number) + ": ";
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::schema, where + "invalid JSON object");
    try {
      AugmentationRecord r;
      if (const auto& o = j.at("origin"); !o.is_null()) {
        r.origin = SentenceKey{o.at("channel_id").get<std::string>(), o.at("post_id").get<std::int64_t>(),
                               o.at("sent_index").get<int>()};
      }
      r.text = j.at("text").get<std::string>();
      const auto source = Source::parse(j.at("source").get<std::string>());
      if (!source || source->kind == Source::Kind::original) {
        throw Error(ErrorKind::schema, where + "source must be bt:<chain> or llm:<prompt>");
      }
      r.source = *source;
      r.accepted = j.at("accepted").get<bool>();
      if (r.source.kind == Source::Kind::back_translation && !r.origin) {
        throw Error(ErrorKind::schema, where + "back-translation without origin");
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::schema, where + e.what());
    }
  });
  return out;
}

GenerationPrompt prompt_direct() {
  GenerationPrompt p;
  p.prompt_id = "P1";
  p.text =
      "Write sentences in Russian that describe concrete instances of human rights violations "
      "during the Russia-Ukraine war: killing of civilians, destruction of civilian objects, "
      "rape, torture or execution, and mistreatment of prisoners. One sentence per line.";
  p.follow_ups = {"Why are all the violations presented as being committed by Russia only?"};
  p.target_per_call = 10;
  return p;
}

GenerationPrompt prompt_persona() {
  GenerationPrompt p;
  p.prompt_id = "P2";
  p.text =
      "You are a Telegram news channel covering the Russia-Ukraine war in 2022. Publish ten "
      "posts in Russian, each a single sentence, each reporting an anecdote of a human rights "
      "violation. One post per line.";
  p.target_per_call = 10;
  return p;
}

GenerationPrompt prompt_by_id(std::string_view id) {
  if (id == "P1") return prompt_direct();
  if (id == "P2") return prompt_persona();
  throw Error(ErrorKind::config, "unknown prompt id " + std::string(id));
}

RecordedFixture::RecordedFixture(std::string_view content) {
  std::size_t number = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++number;
    if (text::is_blank(raw)) continue;
    const auto where = "fixture line " + std::to_string(number) + ": ";
    const json j = json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::schema, where + "invalid JSON object");
    try {
      const auto& req = j.at("request");
      const auto kind = req.at("kind").get<std::string>();
      const auto& resp = j.at("response");
      if (kind == "translate") {
        add_translation(req.at("src").get<std::string>(), req.at("dst").get<std::string>(),
                        req.at("text").get<std::string>(), resp.get<std::string>());
      } else if (kind == "generate") {
        add_generation(req.at("prompt").get<std::string>(),
                       resp.is_null() ? std::nullopt : std::optional(resp.get<std::string>()));
      } else {
        throw Error(ErrorKind::schema, where + "unknown request kind " + kind);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::schema, where + e.what());
    }
  }
}

void RecordedFixture::add_translation(std::string src, std::string dst, std::string text,
                                      std::string response) {
  std::lock_guard lock(mutex_);
  translations_.insert_or_assign({std::move(src), std::move(dst), std::move(text)}, std::move(response));
}

void RecordedFixture::add_generation(std::string prompt, std::optional<std::string> response) {
  std::lock_guard lock(mutex_);
  generations_[std::move(prompt)].push_back(std::move(response));
}

std::string RecordedFixture::translate(std::string_view src_lang, std::string_view dst_lang,
                                       std::string_view text) {
  std::lock_guard lock(mutex_);
  const auto it = translations_.find({std::string(src_lang), std::string(dst_lang), std::string(text)});
  if (it == translations_.end()) {
    throw Error(ErrorKind::io, "no recorded translation " + std::string(src_lang) + "->" +
                                   std::string(dst_lang));
  }
  return it->second;
}

std::optional<std::vector<std::string>> RecordedFixture::generate(std::string_view prompt) {
  std::lock_guard lock(mutex_);
  const auto it = generations_.find(prompt);
  if (it == generations_.end() || it->second.empty()) {
    throw Error(ErrorKind::io, "no recorded reply left for prompt");
  }
  auto reply = std::move(it->second.front());
  it->second.pop_front();
  if (!reply) return std::nullopt;
  return split_generated_lines(*reply);
}

std::vector<std::string> split_generated_lines(std::string_view reply) {
  std::vector<std::string> out;
  for (const auto& raw : text::split(reply, '\n')) {
    std::string_view line = text::trim(raw);
    // "1. ", "12) ", "- ", "* ", "• "
    std::size_t digits = 0;
    while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
    if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
      line = text::trim(line.substr(digits + 1));
    } else if (line.starts_with("- ") || line.starts_with("* ")) {
      line = text::trim(line.substr(2));
    } else if (line.starts_with("•")) {
      line = text::trim(line.substr(3));
    }
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

std::string back_translate(std::string_view sentence, const TranslationChain& chain,
                           TranslationBackend& backend) {
  chain.validate();
  std::string current(sentence);
  for (std::size_t hop = 1; hop < chain.languages.size(); ++hop) {
    const int hop_no = static_cast<int>(hop);
    try {
      current = backend.translate(chain.languages[hop - 1], chain.languages[hop], current);
    } catch (const ChainError&) {
      throw;
    } catch (const std::exception& e) {
      throw ChainError(hop_no, e.what());
    }
    current = std::string(text::trim(current));
    if (current.empty()) throw ChainError(hop_no, "empty translation");
  }
  return current;
}

CampaignResult run_bt_campaign(std::span<const Sentence> positives,
                               std::span<const TranslationChain> chains, TranslationBackend& backend,
                               const CampaignOptions& options) {
  for (const auto& c : chains) c.validate();
  if (positives.empty() || chains.empty()) return {};

  struct Slot {
    std::optional<AugmentationRecord> record;
    std::optional<CampaignFailure> failure;
  };
  const std::size_t n_tasks = positives.size() * chains.size();
  std::vector<Slot> slots(n_tasks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      const Sentence& s = positives[task / chains.size()];
      const TranslationChain& chain = chains[task % chains.size()];
      try {
        AugmentationRecord rec;
        rec.origin = s.key();
        rec.text = back_translate(s.text, chain, backend);
        rec.source = Source::back_translation(chain.chain_id);
        rec.accepted = true;
        slots[task].record = std::move(rec);
      } catch (const ChainError& e) {
        slots[task].failure = CampaignFailure{s.key(), chain.chain_id, e.hop(), e.what()};
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(std::clamp(options.parallelism, 1, 64));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < std::min(n_threads, n_tasks); ++i) pool.emplace_back(worker);
  }

  CampaignResult result;
  for (auto& slot : slots) {
    if (slot.record) result.records.push_back(std::move(*slot.record));
    if (slot.failure) result.failures.push_back(std::move(*slot.failure));
  }
  auto chain_of = [](const AugmentationRecord& r) { return std::stoi(r.source.tag); };
  std::stable_sort(result.records.begin(), result.records.end(), [&](const auto& a, const auto& b) {
    if (*a.origin != *b.origin) return *a.origin < *b.origin;
    return chain_of(a) < chain_of(b);
  });
  std::stable_sort(result.failures.begin(), result.failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.origin, a.chain_id) < std::tie(b.origin, b.chain_id);
  });
  return result;
}

GenerationResult generate_llm_examples(const GenerationPrompt& prompt, GenerationBackend& backend,
                                       int n_total, const GenerationOptions& options) {
  if (n_total < 1) throw Error(ErrorKind::input, "n_total must be at least 1");
  if (text::is_blank(prompt.text)) throw Error(ErrorKind::config, "prompt template is empty");

  GenerationResult result;
  const auto target = static_cast<std::size_t>(n_total);
  std::size_t follow_up = 0;
  bool replied_once = false;
  int consecutive_refusals = 0;
  while (result.candidates.size() < target) {
    const bool send_follow_up = replied_once && follow_up < prompt.follow_ups.size();
    const std::string& message = send_follow_up ? prompt.follow_ups[follow_up] : prompt.text;
    std::optional<std::vector<std::string>> reply;
    ++result.calls;
    try {
      reply = backend.generate(message);
    } catch (const std::exception& e) {
      result.warnings.push_back(std::string("generation backend exhausted: ") + e.what());
      break;
    }
    if (!reply || reply->empty()) {
      ++result.refusals;
      if (++consecutive_refusals > options.max_retries) {
        result.warnings.push_back("backend refused " + std::to_string(consecutive_refusals) +
                                  " times in a row; stopping with " +
                                  std::to_string(result.candidates.size()) + " candidates");
        break;
      }
      continue;
    }
    consecutive_refusals = 0;
    if (send_follow_up) ++follow_up;
    replied_once = true;
    for (auto& line : *reply) {
      if (result.candidates.size() >= target) break;
      if (text::is_blank(line)) continue;
      AugmentationRecord rec;
      rec.text = std::move(line);
      rec.source = Source::llm(prompt.prompt_id);
      result.candidates.push_back(std::move(rec));
    }
  }
  if (result.candidates.size() < target && result.warnings.empty()) {
    result.warnings.push_back("produced fewer candidates than requested");
  }
  return result;
}

std::vector<AugmentationRecord> review_filter(std::span<const AugmentationRecord> candidates,
                                              const std::set<std::size_t>& rejections) {
  for (auto idx : rejections) {
    if (idx >= candidates.size()) {
      throw Error(ErrorKind::input, "rejection index " + std::to_string(idx) + " out of range (" +
                                        std::to_string(candidates.size()) + " candidates)");
    }
  }
  std::vector<AugmentationRecord> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (rejections.count(i) != 0) continue;
    out.push_back(candidates[i]);
    out.back().accepted = true;
  }
  return out;
}

std::vector<AugmentationRecord> dedup(std::span<const AugmentationRecord> records,
                                      std::span<const Sentence> originals) {
  std::unordered_set<std::string> seen;
  for (const auto& s : originals) seen.insert(text::normalize(s.text));
  std::vector<AugmentationRecord> out;
  for (const auto& r : records) {
    if (seen.insert(text::normalize(r.text)).second) out.push_back(r);
  }
  return out;
}

}  // namespace hrv
