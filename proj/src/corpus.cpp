#include "hrv/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "hrv/error.hpp"
#include "hrv/io.hpp"
#include "hrv/segmenter.hpp"
#include "hrv/text.hpp"

namespace hrv {

using nlohmann::json;

std::string_view to_string(Affiliation a) {
  switch (a) {
    case Affiliation::russia: return "russia";
    case Affiliation::ukraine: return "ukraine";
    case Affiliation::unclear: return "unclear";
  }
  return "unclear";
}

std::optional<Affiliation> parse_affiliation(std::string_view s) {
  if (s == "russia") return Affiliation::russia;
  if (s == "ukraine") return Affiliation::ukraine;
  if (s == "unclear") return Affiliation::unclear;
  return std::nullopt;
}

namespace {

bool read_int(std::string_view s, std::size_t& pos, std::size_t digits, int& out) {
  if (pos + digits > s.size()) return false;
  const char* first = s.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + digits, out);
  if (ec != std::errc() || ptr != first + digits) return false;
  pos += digits;
  return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
  if (pos >= s.size() || s[pos] != c) return false;
  ++pos;
  return true;
}

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  s = text::trim(s);
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!read_int(s, pos, 4, y) || !expect(s, pos, '-') || !read_int(s, pos, 2, mo) ||
      !expect(s, pos, '-') || !read_int(s, pos, 2, d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ') return std::nullopt;
    ++pos;
    if (!read_int(s, pos, 2, h) || !expect(s, pos, ':') || !read_int(s, pos, 2, mi)) {
      return std::nullopt;
    }
    if (pos < s.size() && s[pos] == ':') {
      ++pos;
      if (!read_int(s, pos, 2, sec)) return std::nullopt;
      if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        ++pos;
        const std::size_t frac_start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == frac_start) return std::nullopt;
      }
    }
    if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    if (pos < s.size()) {
      if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
      } else if (s[pos] == '+' || s[pos] == '-') {
        const int sign = s[pos] == '-' ? -1 : 1;
        ++pos;
        int oh = 0, om = 0;
        if (!read_int(s, pos, 2, oh)) return std::nullopt;
        if (pos < s.size() && s[pos] == ':') ++pos;
        if (!read_int(s, pos, 2, om)) return std::nullopt;
        if (oh > 23 || om > 59) return std::nullopt;
        offset_minutes = sign * (oh * 60 + om);
      } else {
        return std::nullopt;
      }
    }
    if (pos != s.size()) return std::nullopt;
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string to_string(const PostKey& k) { return k.channel_id + "/" + std::to_string(k.post_id); }

std::string to_string(const SentenceKey& k) {
  return k.channel_id + "/" + std::to_string(k.post_id) + "#" + std::to_string(k.sent_index);
}

Source Source::back_translation(int chain_id) {
  return {Kind::back_translation, std::to_string(chain_id)};
}

Source Source::llm(std::string prompt_id) { return {Kind::llm, std::move(prompt_id)}; }

std::optional<Source> Source::parse(std::string_view s) {
  if (s == "original") return Source::original();
  if (s.starts_with("bt:") && s.size() > 3) {
    int chain = 0;
    const auto tail = s.substr(3);
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), chain);
    if (ec != std::errc() || ptr != tail.data() + tail.size()) return std::nullopt;
    return back_translation(chain);
  }
  if (s.starts_with("llm:") && s.size() > 4) return llm(std::string(s.substr(4)));
  return std::nullopt;
}

std::string Source::str() const {
  switch (kind) {
    case Kind::original: return "original";
    case Kind::back_translation: return "bt:" + tag;
    case Kind::llm: return "llm:" + tag;
  }
  return "original";
}

CorpusWindow CorpusWindow::conflict_default() {
  using namespace std::chrono;
  CorpusWindow w;
  w.begin = sys_days{year{2022} / February / 24};
  w.end = sys_days{year{2022} / September / 11} + hours{23} + minutes{59} + seconds{59};
  return w;
}

const Channel* Corpus::find_channel(std::string_view id) const {
  const auto it = channel_index_.find(id);
  return it == channel_index_.end() ? nullptr : &channels_[it->second];
}

bool Corpus::add(Post post, Affiliation affiliation) {
  const PostKey key = post.key();
  if (index_.count(key) != 0) return false;
  auto ch = channel_index_.find(post.channel_id);
  if (ch == channel_index_.end()) {
    ch = channel_index_.emplace(post.channel_id, channels_.size()).first;
    channels_.push_back({post.channel_id, affiliation, 0});
  }
  ++channels_[ch->second].post_count;
  index_.emplace(key, posts_.size());
  posts_.push_back(std::move(post));
  return true;
}

namespace {

struct ParsedRecord {
  Post post;
  Affiliation affiliation = Affiliation::unclear;
};

// Returns an error description, or nothing on success.
std::optional<std::string> parse_record(std::string_view line, ParsedRecord& out) {
  const json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return "invalid JSON";
  if (!j.is_object()) return "record is not an object";
  const auto channel = j.find("channel_id");
  if (channel == j.end() || !channel->is_string() || channel->get<std::string>().empty()) {
    return "channel_id missing or not a non-empty string";
  }
  const auto aff = j.find("affiliation");
  if (aff == j.end() || !aff->is_string()) return "affiliation missing";
  const auto affiliation = parse_affiliation(aff->get<std::string>());
  if (!affiliation) return "affiliation must be russia, ukraine or unclear";
  const auto post_id = j.find("post_id");
  if (post_id == j.end() || !post_id->is_number_integer()) return "post_id missing or not an integer";
  const auto date = j.find("date");
  if (date == j.end() || !date->is_string()) return "date missing";
  const auto when = parse_iso8601(date->get<std::string>());
  if (!when) return "date is not ISO-8601";
  const auto body = j.find("text");
  if (body == j.end() || !body->is_string()) return "text missing";
  if (text::is_blank(body->get<std::string>())) return "text is blank";

  out.post.channel_id = channel->get<std::string>();
  out.post.post_id = post_id->get<std::int64_t>();
  out.post.date = *when;
  out.post.text = body->get<std::string>();
  out.affiliation = *affiliation;
  return std::nullopt;
}

}  // namespace

void ingest_into(Corpus& corpus, std::istream& in, IngestReport& report, const CorpusWindow& window) {
  if (!in) throw Error(ErrorKind::ingest, "export stream is not readable");
  io::for_each_line(in, [&](std::string_view line, std::size_t number) {
    ++report.lines;
    ParsedRecord rec;
    if (auto problem = parse_record(line, rec)) {
      ++report.rejected;
      report.warnings.push_back("line " + std::to_string(number) + ": " + *problem);
      return;
    }
    if (const Channel* ch = corpus.find_channel(rec.post.channel_id);
        ch != nullptr && ch->affiliation != rec.affiliation) {
      report.warnings.push_back("line " + std::to_string(number) + ": channel " +
                                rec.post.channel_id + " affiliation conflicts with earlier records; kept " +
                                std::string(to_string(ch->affiliation)));
    }
    rec.post.outside_window = !window.contains(rec.post.date);
    const bool outside = rec.post.outside_window;
    if (!corpus.add(std::move(rec.post), rec.affiliation)) {
      ++report.duplicates;
      return;
    }
    ++report.accepted;
    if (outside) ++report.outside_window;
  });
}

IngestResult ingest_export(std::istream& in, const CorpusWindow& window) {
  IngestResult result;
  ingest_into(result.corpus, in, result.report, window);
  return result;
}

std::string write_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& post : corpus.posts()) {
    const Channel* ch = corpus.find_channel(post.channel_id);
    json j = {{"channel_id", post.channel_id},
              {"affiliation", std::string(to_string(ch->affiliation))},
              {"post_id", post.post_id},
              {"date", format_iso8601(post.date)},
              {"text", post.text}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<Post> sample_posts(const Corpus& corpus, int n_per_channel, std::uint64_t seed) {
  if (n_per_channel < 1) throw Error(ErrorKind::input, "n_per_channel must be at least 1");
  if (corpus.empty()) throw Error(ErrorKind::empty_input, "cannot sample from an empty corpus");

  std::map<std::string, std::vector<std::size_t>, std::less<>> by_channel;
  for (std::size_t i = 0; i < corpus.posts().size(); ++i) {
    by_channel[corpus.posts()[i].channel_id].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<Post> out;
  for (const auto& channel : corpus.channels()) {
    auto& indices = by_channel[channel.channel_id];
    const auto take = std::min<std::size_t>(indices.size(), static_cast<std::size_t>(n_per_channel));
    // Partial Fisher-Yates: the first `take` slots become the sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, indices.size() - 1);
      std::swap(indices[i], indices[pick(rng)]);
      out.push_back(corpus.posts()[indices[i]]);
    }
  }
  return out;
}

LengthStats sentence_length_stats(std::span<const Sentence> sentences) {
  if (sentences.empty()) throw Error(ErrorKind::empty_input, "no sentences");
  std::map<std::int64_t, std::int64_t> histogram;
  double total = 0.0;
  for (const auto& s : sentences) {
    const auto n = static_cast<std::int64_t>(text::count_words(s.text));
    total += static_cast<double>(n);
    ++histogram[n];
  }
  LengthStats stats;
  stats.mean = total / static_cast<double>(sentences.size());
  std::int64_t best = -1;
  for (const auto& [len, count] : histogram) {
    if (count > best) {
      best = count;
      stats.mode = len;
    }
  }
  return stats;
}

CorpusStats corpus_stats(const Corpus& corpus, const AbbreviationLexicon& lexicon) {
  if (corpus.empty()) throw Error(ErrorKind::empty_input, "corpus is empty");
  CorpusStats stats;
  stats.n_channels = static_cast<std::int64_t>(corpus.channels().size());
  stats.n_posts = static_cast<std::int64_t>(corpus.posts().size());
  for (auto a : {Affiliation::russia, Affiliation::ukraine, Affiliation::unclear}) {
    stats.affiliation_counts[a] = 0;
  }
  for (const auto& ch : corpus.channels()) ++stats.affiliation_counts[ch.affiliation];
  stats.mean_posts_per_channel =
      static_cast<double>(stats.n_posts) / static_cast<double>(stats.n_channels);
  const auto sentences = segment_corpus(corpus, lexicon);
  const auto lengths = sentence_length_stats(sentences);
  stats.mean_sentence_len_words = lengths.mean;
  stats.mode_sentence_len_words = lengths.mode;
  return stats;
}

std::string write_sentences(std::span<const Sentence> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    json j = {{"channel_id", s.channel_id},
              {"post_id", s.post_id},
              {"sent_index", s.sent_index},
              {"text", s.text},
              {"source", s.source.str()}};
    if (s.label) j["label"] = *s.label;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<Sentence> read_sentences(std::istream& in) {
  std::vector<Sentence> out;
  io::for_each_line(in, [&](std::string_view line, std::size_t number) {
    const auto where = "sentence file line " + std::to_string(number) + ": ";
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::schema, where + "invalid JSON object");
    try {
      Sentence s;
      s.channel_id = j.at("channel_id").get<std::string>();
      s.post_id = j.at("post_id").get<std::int64_t>();
      s.sent_index = j.at("sent_index").get<int>();
      s.text = j.at("text").get<std::string>();
      const auto source = Source::parse(j.value("source", std::string("original")));
      if (!source) throw Error(ErrorKind::schema, where + "unknown source tag");
      s.source = *source;
      if (const auto label = j.find("label"); label != j.end() && !label->is_null()) {
        const int v = label->get<int>();
        if (v != 0 && v != 1) throw Error(ErrorKind::schema, where + "label must be 0 or 1");
        s.label = v;
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::schema, where + e.what());
    }
  });
  return out;
}

}  // namespace hrv
