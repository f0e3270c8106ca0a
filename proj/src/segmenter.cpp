#include "hrv/segmenter.hpp"

#include "hrv/error.hpp"
#include "hrv/io.hpp"
#include "hrv/text.hpp"
#include "builtin_assets.hpp"

namespace hrv {

namespace {

bool is_terminal(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?' || cp == 0x2026; }

bool is_closer(char32_t cp) {
  switch (cp) {
    case U'"': case U'\'': case U')': case U']': case U'}':
    case 0xBB:    // »
    case 0x201D:  // ”
    case 0x2019:  // ’
    case 0x201C:  // “ (closing in Russian „…“ quoting)
      return true;
    default:
      return false;
  }
}

bool is_opener(char32_t cp) {
  switch (cp) {
    case U'"': case U'\'': case U'(': case U'[': case U'{':
    case 0xAB:    // «
    case 0x201E:  // „
    case 0x201C:  // “
    case 0x2018:  // ‘
      return true;
    default:
      return false;
  }
}

// The whitespace-delimited token ending with the period at `period`, without
// leading opening punctuation, case folded.
std::string token_before(std::string_view text, std::size_t period) {
  std::size_t start = 0;
  std::size_t pos = 0;
  while (pos < period) {
    const char32_t cp = text::decode(text, pos);
    if (text::is_space(cp)) start = pos;
  }
  std::string_view token = text.substr(start, period + 1 - start);
  std::size_t skip = 0;
  while (skip < token.size()) {
    std::size_t next = skip;
    if (!is_opener(text::decode(token, next))) break;
    skip = next;
  }
  return text::casefold(token.substr(skip));
}

void push_trimmed(std::vector<SentenceSpan>& out, std::string_view text, std::size_t begin,
                  std::size_t end) {
  const std::string_view piece = text.substr(begin, end - begin);
  const std::string_view trimmed = text::trim(piece);
  if (trimmed.empty()) return;
  const auto offset = static_cast<std::size_t>(trimmed.data() - text.data());
  out.push_back({offset, offset + trimmed.size()});
}

}  // namespace

AbbreviationLexicon::AbbreviationLexicon(std::set<std::string, std::less<>> entries) {
  for (const auto& e : entries) insert(e);
}

AbbreviationLexicon AbbreviationLexicon::builtin() {
  return parse(assets::kAbbreviations);
}

AbbreviationLexicon AbbreviationLexicon::parse(std::string_view content) {
  AbbreviationLexicon lex;
  for (const auto& raw : text::split(content, '\n')) {
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (!line.empty()) lex.insert(line);
  }
  return lex;
}

AbbreviationLexicon AbbreviationLexicon::load(const std::filesystem::path& path) {
  return parse(io::read_file(path));
}

bool AbbreviationLexicon::contains(std::string_view token) const {
  return entries_.find(token) != entries_.end();
}

void AbbreviationLexicon::insert(std::string_view entry) {
  std::string folded = text::casefold(text::trim(entry));
  if (folded.empty()) return;
  // Multi-word entries ("до н.э.") can only match on their last token.
  if (const auto space = folded.rfind(' '); space != std::string::npos) {
    entries_.insert(folded.substr(space + 1));
  }
  entries_.insert(std::move(folded));
}

std::vector<SentenceSpan> sentence_spans(std::string_view text, const AbbreviationLexicon& lexicon) {
  std::vector<SentenceSpan> spans;
  std::size_t sentence_start = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t here = pos;
    const char32_t cp = text::decode(text, pos);
    if (!is_terminal(cp)) continue;

    bool single_period = cp == U'.';
    std::size_t run_end = pos;
    while (run_end < text.size()) {
      std::size_t next = run_end;
      if (!is_terminal(text::decode(text, next))) break;
      run_end = next;
      single_period = false;
    }
    std::size_t close_end = run_end;
    while (close_end < text.size()) {
      std::size_t next = close_end;
      if (!is_closer(text::decode(text, next))) break;
      close_end = next;
    }
    pos = close_end;
    if (close_end == text.size()) break;
    std::size_t next = close_end;
    if (!text::is_space(text::decode(text, next))) continue;
    if (single_period && lexicon.contains(token_before(text, here))) continue;

    push_trimmed(spans, text, sentence_start, close_end);
    sentence_start = close_end;
  }
  push_trimmed(spans, text, sentence_start, text.size());
  return spans;
}

std::vector<std::string> split_sentences(std::string_view text, const AbbreviationLexicon& lexicon) {
  std::vector<std::string> out;
  for (const auto& span : sentence_spans(text, lexicon)) {
    out.emplace_back(text.substr(span.begin, span.end - span.begin));
  }
  return out;
}

std::vector<Sentence> segment_post(const Post& post, const AbbreviationLexicon& lexicon) {
  if (text::is_blank(post.text)) {
    throw Error(ErrorKind::empty_input, "post " + to_string(post.key()) + " has no text");
  }
  std::vector<Sentence> out;
  int index = 0;
  for (auto& piece : split_sentences(post.text, lexicon)) {
    Sentence s;
    s.channel_id = post.channel_id;
    s.post_id = post.post_id;
    s.sent_index = index++;
    s.text = std::move(piece);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> segment_post(std::string_view text, const AbbreviationLexicon& lexicon) {
  Post post;
  post.text = std::string(text);
  return segment_post(post, lexicon);
}

std::vector<Sentence> segment_corpus(const Corpus& corpus, const AbbreviationLexicon& lexicon) {
  std::vector<Sentence> out;
  for (const auto& post : corpus.posts()) {
    auto sentences = segment_post(post, lexicon);
    out.insert(out.end(), std::make_move_iterator(sentences.begin()),
               std::make_move_iterator(sentences.end()));
  }
  return out;
}

}  // namespace hrv
