#include "hrv/keywords.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "builtin_assets.hpp"
#include "hrv/error.hpp"
#include "hrv/io.hpp"
#include "hrv/segmenter.hpp"
#include "hrv/text.hpp"

namespace hrv {

StopwordList StopwordList::parse(std::string_view content) {
  StopwordList list;
  for (const auto& raw : text::split(content, '\n')) {
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    for (auto word : text::split_whitespace(line)) list.insert(word);
  }
  return list;
}

StopwordList StopwordList::builtin() { return parse(assets::kStopwords); }

StopwordList StopwordList::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

void StopwordList::insert(std::string_view word) {
  auto folded = text::casefold(text::trim(word));
  if (!folded.empty()) words_.insert(std::move(folded));
}

std::vector<std::string> KeywordProfile::terms() const {
  std::vector<std::string> out;
  out.reserve(keywords.size());
  for (const auto& k : keywords) out.push_back(k.term);
  return out;
}

bool KeywordProfile::contains(std::string_view folded) const {
  return std::any_of(keywords.begin(), keywords.end(), [&](const auto& k) { return k.term == folded; });
}

namespace {

enum class Tag { digit, unusual, acronym, capitalized, plain };

Tag tag_of(std::string_view word, std::size_t index_in_sentence) {
  const auto cps = text::to_u32(word);
  std::size_t digits = 0;
  std::size_t alpha = 0;
  std::size_t upper = 0;
  std::size_t other = 0;
  for (char32_t cp : cps) {
    if (text::is_digit(cp)) {
      ++digits;
    } else if (text::is_word_char(cp)) {
      ++alpha;
      upper += text::is_upper(cp);
    } else {
      ++other;
    }
  }
  if (digits > 0 && alpha == 0 && other == 0) return Tag::digit;
  if ((digits > 0 && alpha > 0) || (digits == 0 && alpha == 0) || other > 1) return Tag::unusual;
  if (upper == cps.size()) return Tag::acronym;
  if (index_in_sentence > 0 && text::is_upper(cps.front())) return Tag::capitalized;
  return Tag::plain;
}

bool discarded(Tag t) { return t == Tag::digit || t == Tag::unusual; }

struct TermData {
  std::string term;
  bool stopword = false;
  bool valid = false;  // at least one occurrence not tagged digit/unusual
  double tf = 0;
  double tf_acronym = 0;
  double tf_capitalized = 0;
  std::vector<std::size_t> sentence_ids;  // distinct, ascending
  std::map<std::size_t, double> left;   // neighbour term -> co-occurrence count
  std::map<std::size_t, double> right;
};

double median(const std::vector<std::size_t>& sorted) {
  const auto n = sorted.size();
  if (n % 2 == 1) return static_cast<double>(sorted[n / 2]);
  return 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace

KeywordProfile extract_keywords(std::span<const std::string> sentences, const StopwordList& stopwords,
                                const KeywordOptions& options) {
  if (options.k < 1) throw Error(ErrorKind::input, "k must be at least 1");
  std::vector<std::string_view> usable;
  for (const auto& s : sentences) {
    if (!text::is_blank(s)) usable.push_back(s);
  }
  if (usable.empty()) throw Error(ErrorKind::empty_input, "no text to extract keywords from");

  std::vector<TermData> terms;
  std::unordered_map<std::string, std::size_t> index;
  auto term_id = [&](const std::string& folded) {
    const auto [it, inserted] = index.emplace(folded, terms.size());
    if (inserted) {
      TermData t;
      t.term = folded;
      std::size_t chars = 0;
      for (char32_t cp : text::to_u32(folded)) chars += text::is_word_char(cp);
      t.stopword = stopwords.contains(folded) || chars < options.min_term_chars;
      terms.push_back(std::move(t));
    }
    return it->second;
  };

  for (std::size_t sid = 0; sid < usable.size(); ++sid) {
    const std::string_view sentence = usable[sid];
    const auto tokens = text::word_tokens(sentence);
    // (term, tag) of the current punctuation-free block
    std::vector<std::pair<std::size_t, Tag>> block;
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& tok = tokens[i];
      if (i > 0 && !text::is_blank(sentence.substr(prev_end, tok.offset - prev_end))) block.clear();
      prev_end = tok.offset + tok.text.size();

      const Tag tag = tag_of(tok.text, i);
      const std::size_t id = term_id(text::casefold(tok.text));
      TermData& t = terms[id];
      t.tf += 1;
      if (tag == Tag::acronym) t.tf_acronym += 1;
      if (tag == Tag::capitalized) t.tf_capitalized += 1;
      if (!discarded(tag)) t.valid = true;
      if (t.sentence_ids.empty() || t.sentence_ids.back() != sid) t.sentence_ids.push_back(sid);

      if (!discarded(tag)) {
        const std::size_t from = block.size() > options.window ? block.size() - options.window : 0;
        for (std::size_t w = from; w < block.size(); ++w) {
          if (discarded(block[w].second)) continue;
          terms[block[w].first].right[id] += 1;
          terms[id].left[block[w].first] += 1;
        }
      }
      block.emplace_back(id, tag);
    }
  }

  KeywordProfile profile;
  profile.k = options.k;

  std::vector<double> candidate_tfs;
  double max_tf = 0;
  for (const auto& t : terms) {
    max_tf = std::max(max_tf, t.tf);
    if (!t.stopword) candidate_tfs.push_back(t.tf);
  }
  if (candidate_tfs.empty()) {
    profile.warnings.push_back("no candidate terms after stopword filtering");
    return profile;
  }
  double mean_tf = 0;
  for (double v : candidate_tfs) mean_tf += v;
  mean_tf /= static_cast<double>(candidate_tfs.size());
  double var_tf = 0;
  for (double v : candidate_tfs) var_tf += (v - mean_tf) * (v - mean_tf);
  const double std_tf = std::sqrt(var_tf / static_cast<double>(candidate_tfs.size()));
  const auto n_sentences = static_cast<double>(usable.size());

  std::vector<KeywordScore> scored;
  for (const auto& t : terms) {
    if (t.stopword || !t.valid) continue;
    double left_total = 0;
    for (const auto& [_, c] : t.left) left_total += c;
    double right_total = 0;
    for (const auto& [_, c] : t.right) right_total += c;
    const double left_diversity = left_total == 0 ? 0 : static_cast<double>(t.left.size()) / left_total;
    const double right_diversity = right_total == 0 ? 0 : static_cast<double>(t.right.size()) / right_total;

    KeywordFeatures f;
    f.relatedness = (0.5 + left_diversity * (t.tf / max_tf)) + (0.5 + right_diversity * (t.tf / max_tf));
    f.frequency_norm = t.tf / (mean_tf + std_tf);
    f.dispersion = static_cast<double>(t.sentence_ids.size()) / n_sentences;
    f.casing = std::max(t.tf_acronym, t.tf_capitalized) / (1.0 + std::log(t.tf));
    f.position = std::log(std::log(3.0 + median(t.sentence_ids)));

    const double h = (f.position * f.relatedness) /
                     (f.casing + f.frequency_norm / f.relatedness + f.dispersion / f.relatedness);
    KeywordScore ks;
    ks.term = t.term;
    ks.frequency = static_cast<std::size_t>(t.tf);
    ks.features = f;
    ks.score = h / ((h + 1.0) * t.tf);
    scored.push_back(std::move(ks));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.term < b.term;
  });
  if (scored.size() < options.k) {
    profile.warnings.push_back("only " + std::to_string(scored.size()) + " candidate terms for k = " +
                               std::to_string(options.k));
  } else {
    scored.resize(options.k);
  }
  profile.keywords = std::move(scored);
  return profile;
}

KeywordProfile extract_keywords(std::string_view document, const StopwordList& stopwords,
                                const KeywordOptions& options) {
  if (text::is_blank(document)) throw Error(ErrorKind::empty_input, "no text to extract keywords from");
  const auto sentences = split_sentences(document, AbbreviationLexicon::builtin());
  return extract_keywords(sentences, stopwords, options);
}

int keyword_classify(std::string_view sentence, const KeywordProfile& profile, MatchMode mode) {
  if (profile.keywords.empty()) throw Error(ErrorKind::input, "keyword profile is empty");
  if (text::is_blank(sentence)) return 0;
  if (mode == MatchMode::substring) {
    const auto folded = text::casefold(sentence);
    for (const auto& k : profile.keywords) {
      if (folded.find(k.term) != std::string::npos) return 1;
    }
    return 0;
  }
  for (const auto& tok : text::word_tokens(sentence)) {
    if (profile.contains(text::casefold(tok.text))) return 1;
  }
  return 0;
}

std::string write_profile(const KeywordProfile& profile) {
  std::string out;
  char buf[64];
  for (const auto& k : profile.keywords) {
    std::snprintf(buf, sizeof buf, "%.17g", k.score);
    out += k.term;
    out.push_back('\t');
    out += buf;
    out.push_back('\n');
  }
  return out;
}

KeywordProfile read_profile(std::string_view content) {
  KeywordProfile profile;
  std::size_t number = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++number;
    if (text::is_blank(raw)) continue;
    const auto fields = text::split(raw, '\t');
    KeywordScore ks;
    ks.term = text::casefold(text::trim(fields[0]));
    if (fields.size() > 1) {
      try {
        ks.score = std::stod(fields[1]);
      } catch (const std::exception&) {
        throw Error(ErrorKind::schema, "profile line " + std::to_string(number) + ": bad score");
      }
    }
    if (profile.contains(ks.term)) {
      throw Error(ErrorKind::schema, "profile line " + std::to_string(number) + ": duplicate term " + ks.term);
    }
    profile.keywords.push_back(std::move(ks));
  }
  profile.k = profile.keywords.size();
  return profile;
}

}  // namespace hrv
